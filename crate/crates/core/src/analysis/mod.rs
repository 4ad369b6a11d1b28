//! Interpretability diagnostics over per-head attention features and the
//! gradient oracle suite.

mod diagnostics;
mod gradcheck;

pub use diagnostics::{
    collect_head_features, mass90_fraction, mean_off_diagonal, occupancy_by_class, sparsity_profile, ssr_gap,
    subspace_correlation, DiagnosticsBundle, HeadFeatures, OccupancyTable, SparsityProfile,
};
pub use gradcheck::{
    approx_order_ratio, layer_fd_error, rc_grad_fd_error, run_gradcheck, white_box_gap, CheckResult, GradcheckReport,
    GradcheckSize, APPROX_ORDER_RATIO, FD_STEP, IDENTITY_TOL, LAYER_GRAD_TOL, RC_GRAD_TOL, SOFTMAX_TOL,
};
