//! One small optimizer step lowers the batch loss.

use rfwb::linalg::seeded_rng;
use rfwb::model::{HeadKind, Model, ModelConfig, PatchSpec};
use rfwb::training::{batch_gradients, complex_adamw_step, Target, TrainConfig, TrainState};
use rfwb::CMatrix;

#[test]
fn tiny_step_descends() {
    for seed in 0..20u64 {
        let cfg = ModelConfig::new(2, 4, 2, 2, PatchSpec::time_series(vec![4, 6], 1, 1), HeadKind::Classify { num_classes: 3 });
        let mut model = Model::new(cfg, seed).unwrap();
        let patches: Vec<CMatrix> = (0..6).map(|i| CMatrix::complex_gaussian(6, 4, 1.0, &mut seeded_rng(seed * 100 + i))).collect();
        let refs: Vec<&CMatrix> = patches.iter().collect();
        let targets: Vec<Target> = (0..6).map(|i| Target::Class(i % 3)).collect();
        let train = TrainConfig { weight_decay: 0.0, seed, ..TrainConfig::default() };

        let before = batch_gradients(&model, &refs, &targets, &train).unwrap();
        let mut state = TrainState::new(&model.params, seed);
        let mask = vec![true; model.params.iter().len()];
        complex_adamw_step(&mut model.params, &before.grads, &mut state, &train, 1e-7, &mask).unwrap();
        let after = batch_gradients(&model, &refs, &targets, &train).unwrap();
        assert!(after.loss < before.loss, "seed {seed}: {} -> {}", before.loss, after.loss);
    }
}
