//! Property tests for rate and layer invariants.

use proptest::prelude::*;
use rfwb::autodiff::crelu;
use rfwb::layers::{complex_softmax, rf_mssa, AttentionParams};
use rfwb::linalg::{random_unitary, seeded_rng};
use rfwb::rate::{coding_rate, constrained_rate, ssr, RateParams, SubspaceBank};
use rfwb::CMatrix;

fn gaussian(rows: usize, cols: usize, scale: f64, seed: u64) -> CMatrix {
    CMatrix::complex_gaussian(rows, cols, scale, &mut seeded_rng(seed))
}

fn permute_cols(m: &CMatrix, perm: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, perm[j])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_unitarily_invariant(d in 2usize..8, n in 1usize..10, seed in any::<u64>()) {
        let p = 1 + seed as usize % d;
        let z = gaussian(d, n, 1.0, seed);
        let q = random_unitary(d, seed ^ 1).unwrap();
        let bank = SubspaceBank::random(d, 2, p, seed ^ 2).unwrap();
        let rotated = SubspaceBank::new(bank.bases().iter().map(|u| q.matmul(u)).collect()).unwrap();
        let params = RateParams::new(d, n, p, 2, 0.9, 0.0).unwrap();
        let qz = q.matmul(&z);
        prop_assert!((coding_rate(&qz, &params).unwrap() - coding_rate(&z, &params).unwrap()).abs() < 1e-9);
        prop_assert!(
            (constrained_rate(&qz, &rotated, &params).unwrap() - constrained_rate(&z, &bank, &params).unwrap()).abs() < 1e-9
        );
    }

    #[test]
    fn rates_are_nonnegative(d in 1usize..8, n in 1usize..10, log_scale in -4.0f64..2.0, seed in any::<u64>()) {
        let z = gaussian(d, n, 10f64.powf(log_scale), seed);
        let bank = SubspaceBank::random(d, 3, 1, seed ^ 3).unwrap();
        let params = RateParams::new(d, n, 1, 3, 1.0, 0.0).unwrap();
        prop_assert!(coding_rate(&z, &params).unwrap() >= 0.0);
        prop_assert!(constrained_rate(&z, &bank, &params).unwrap() >= 0.0);
    }

    #[test]
    fn ssr_is_nonnegative_and_shift_invariant(rho in prop::collection::vec(0.0f64..5.0, 1..8), shift in -3.0f64..3.0) {
        let s = ssr(&rho);
        prop_assert!(s >= 0.0);
        let shifted: Vec<f64> = rho.iter().map(|r| r + shift).collect();
        prop_assert!((ssr(&shifted) - s).abs() < 1e-9);
    }

    #[test]
    fn softmax_columns_sum_to_one(rows in 1usize..9, cols in 1usize..6, log_scale in -2.0f64..2.0, seed in any::<u64>()) {
        let s = complex_softmax(&gaussian(rows, cols, 10f64.powf(log_scale), seed));
        for j in 0..cols {
            let col = s.column(j).sum();
            prop_assert!((col.re - 1.0).abs() < 1e-12 && col.im.abs() < 1e-12);
        }
    }

    #[test]
    fn crelu_is_idempotent(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let once = gaussian(rows, cols, 2.0, seed).map(crelu);
        prop_assert_eq!(once.map(crelu), once);
    }

    #[test]
    fn mssa_is_token_permutation_equivariant(n in 2usize..8, seed in any::<u64>()) {
        let (d, k, p) = (6, 3, 2);
        let z = gaussian(d, n, 1.0, seed);
        let bank = SubspaceBank::random(d, k, p, seed ^ 4).unwrap();
        let beta = RateParams::new(d, n, p, k, 1.0, 0.0).unwrap().beta();
        let params = AttentionParams::new(bank, 1.0, beta).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1 + seed as usize % (n - 1));
        let direct = permute_cols(&rf_mssa(&z, &params).unwrap(), &perm);
        let via = rf_mssa(&permute_cols(&z, &perm), &params).unwrap();
        prop_assert!(direct.max_abs_diff(&via) < 1e-12);
    }
}
