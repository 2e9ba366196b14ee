#![allow(dead_code)]

use a2w::alphabet::LabelId;
use a2w::ctc::{ctc_loss, PosteriorLattice};
use a2w::network::{model_backward, model_forward, Dropout, ModelConfig, ModelParams, ParamSet};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Summed CTC loss of a batch under fixed dropout masks.
pub fn batch_loss(
    cfg: &ModelConfig,
    params: &ModelParams,
    x: &Array3<f64>,
    lengths: &[usize],
    targets: &[Vec<LabelId>],
    dropout: Dropout,
) -> f64 {
    let (lats, _) = model_forward(x, lengths, cfg, params, dropout).unwrap();
    lats.iter()
        .zip(targets)
        .map(|(l, y)| ctc_loss(l, y).unwrap().log_loss)
        .sum()
}

/// Largest |analytic - numeric| / max(1, |analytic|) over every parameter,
/// numeric gradients by central differences.
pub fn model_grad_check(
    cfg: &ModelConfig,
    params: &ModelParams,
    x: &Array3<f64>,
    lengths: &[usize],
    targets: &[Vec<LabelId>],
    dropout: Dropout,
    step: f64,
) -> f64 {
    let (lats, cache) = model_forward(x, lengths, cfg, params, dropout).unwrap();
    let upstream: Vec<Array2<f64>> = lats
        .iter()
        .zip(targets)
        .map(|(l, y)| ctc_loss(l, y).unwrap().grad)
        .collect();
    let analytic = model_backward(params, Some(&cache), &upstream).unwrap();
    let analytic: Vec<f64> = analytic.slices().iter().flat_map(|s| s.iter().copied()).collect();

    let mut worst: f64 = 0.0;
    let mut flat_index = 0;
    let n_tensors = params.slices().len();
    for ti in 0..n_tensors {
        let len = params.slices()[ti].len();
        for j in 0..len {
            let mut plus = params.clone();
            plus.slices_mut()[ti][j] += step;
            let mut minus = params.clone();
            minus.slices_mut()[ti][j] -= step;
            let lp = batch_loss(cfg, &plus, x, lengths, targets, dropout);
            let lm = batch_loss(cfg, &minus, x, lengths, targets, dropout);
            let numeric = (lp - lm) / (2.0 * step);
            let a = analytic[flat_index];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
            flat_index += 1;
        }
    }
    worst
}

pub fn random_logits(t: usize, k: usize, rng: &mut ChaCha8Rng) -> PosteriorLattice {
    PosteriorLattice::from_logits(Array2::from_shape_simple_fn((t, k), || rng.random_range(-2.0..2.0)))
        .unwrap()
}

pub fn random_probs(t: usize, k: usize, rng: &mut ChaCha8Rng) -> PosteriorLattice {
    let mut m = Array2::from_shape_simple_fn((t, k), || rng.random_range(0.01..1.0));
    for mut row in m.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    PosteriorLattice::from_probabilities(m).unwrap()
}

/// Random label sequence of length `len` over 1..k.
pub fn random_target(len: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<LabelId> {
    (0..len).map(|_| LabelId::from(rng.random_range(1..k))).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum number of edits over every alignment of `r` against `h`,
/// enumerated recursively.
pub fn brute_force_edits<T: PartialEq>(r: &[T], h: &[T]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, _) => h.len(),
        (_, None) => r.len(),
        (Some((r0, rs)), Some((h0, hs))) => {
            let diag = brute_force_edits(rs, hs) + usize::from(r0 != h0);
            let ins = brute_force_edits(r, hs) + 1;
            let del = brute_force_edits(rs, h) + 1;
            diag.min(ins).min(del)
        }
    }
}
