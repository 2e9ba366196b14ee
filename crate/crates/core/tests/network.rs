mod common;

use a2w::alphabet::LabelId;
use a2w::network::{Dropout, ModelConfig, ModelParams};
use a2w::seed;
use common::{model_grad_check, rng};
use ndarray::Array3;
use rand::Rng;

fn batch(b: usize, t: usize, f: usize, seed: u64) -> Array3<f64> {
    let mut r = rng(seed);
    Array3::from_shape_simple_fn((b, t, f), || r.random_range(-1.0..1.0))
}

#[test]
fn tiny_model_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        num_layers: 1,
        hidden: 4,
        input_dim: 3,
        projection: Some(3),
        output_dim: 6,
        dropout: 0.0,
    };
    let params = ModelParams::init(&cfg, &mut seed::rng_for(1, &[])).unwrap();
    let x = batch(2, 3, 3, 2);
    let targets = vec![vec![LabelId(1), LabelId(4)], vec![LabelId(5)]];
    let err = model_grad_check(&cfg, &params, &x, &[3, 2], &targets, Dropout::Eval, 1e-4);
    assert!(err <= 1e-3, "max relative error {err}");
}

#[test]
fn stacked_model_with_dropout_masks_matches_finite_differences() {
    let cfg = ModelConfig {
        num_layers: 3,
        hidden: 3,
        input_dim: 2,
        projection: None,
        output_dim: 4,
        dropout: 0.3,
    };
    let params = ModelParams::init(&cfg, &mut seed::rng_for(5, &[])).unwrap();
    let x = batch(2, 5, 2, 6);
    let targets = vec![vec![LabelId(1), LabelId(1)], vec![LabelId(2), LabelId(3)]];
    let dropout = Dropout::Train { seed: 77 };
    let err = model_grad_check(&cfg, &params, &x, &[5, 4], &targets, dropout, 1e-5);
    assert!(err <= 1e-4, "max relative error {err}");
}
