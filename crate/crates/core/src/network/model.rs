use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use super::lstm::{direction_backward, direction_forward, DirectionCache};
use super::params::ModelParams;
use super::ModelConfig;
use crate::ctc::PosteriorLattice;
use crate::error::{Error, Result};
use crate::seed;

/// Whether dropout masks are drawn. In training mode every utterance gets
/// its own mask stream derived from `seed` and its batch index, so repeated
/// passes with the same seed see the same masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dropout {
    Eval,
    Train { seed: u64 },
}

#[derive(Clone, Debug)]
struct LayerCache {
    /// Layer input after the dropout mask.
    input: Array2<f64>,
    mask: Option<Array2<f64>>,
    fwd: DirectionCache,
    bwd: DirectionCache,
}

/// Everything the backward pass needs for one utterance.
#[derive(Clone, Debug)]
pub struct UtteranceCache {
    layers: Vec<LayerCache>,
    top: Array2<f64>,
    projected: Option<Array2<f64>>,
}

impl UtteranceCache {
    /// Concatenated `[forward | backward]` outputs of layer `l`.
    pub fn layer_output(&self, l: usize) -> Array2<f64> {
        let c = &self.layers[l];
        concatenate![Axis(1), c.fwd.hidden, c.bwd.hidden]
    }

    pub fn dropout_mask(&self, l: usize) -> Option<&Array2<f64>> {
        self.layers[l].mask.as_ref()
    }
}

fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            0.0
        }
    })
}

/// Logits (`T x V`) for a single unpadded utterance `x` (`T x F`). Dropout
/// masks are drawn from `rng` when given and the rate is positive; they are
/// applied to the inputs of layers 1.. (inverted scaling).
pub fn forward_utterance<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    params: &ModelParams,
    x: ArrayView2<f64>,
    mut rng: Option<&mut R>,
) -> Result<(Array2<f64>, UtteranceCache)> {
    if x.ncols() != cfg.input_dim {
        return Err(Error::BadShape(format!(
            "feature width {} but the model expects {}",
            x.ncols(),
            cfg.input_dim
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::BadShape("empty utterance".into()));
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    let mut current = x.to_owned();
    for (l, layer) in params.layers.iter().enumerate() {
        let mask = match rng.as_deref_mut() {
            Some(r) if l > 0 && cfg.dropout > 0.0 => {
                let m = dropout_mask(current.nrows(), current.ncols(), cfg.dropout, r);
                current *= &m;
                Some(m)
            }
            _ => None,
        };
        let fwd = direction_forward(&layer.fwd, current.view(), false);
        let bwd = direction_forward(&layer.bwd, current.view(), true);
        let out = concatenate![Axis(1), fwd.hidden, bwd.hidden];
        layers.push(LayerCache {
            input: current,
            mask,
            fwd,
            bwd,
        });
        current = out;
    }
    let top = current;
    let projected = params.projection.as_ref().map(|p| top.dot(&p.t()));
    let pre_output = projected.as_ref().unwrap_or(&top);
    let mut logits = pre_output.dot(&params.output.t());
    logits += &params.output_bias;
    Ok((
        logits,
        UtteranceCache {
            layers,
            top,
            projected,
        },
    ))
}

/// Gradients of the loss with respect to every parameter, given the loss
/// gradient `d_logits` (`T x V`) of one utterance.
pub fn backward_utterance(
    params: &ModelParams,
    cache: &UtteranceCache,
    d_logits: ArrayView2<f64>,
) -> Result<ModelParams> {
    let t_len = cache.top.nrows();
    if d_logits.dim() != (t_len, params.output.nrows()) {
        return Err(Error::BadShape(format!(
            "upstream gradient {:?} does not match logits ({t_len}, {})",
            d_logits.dim(),
            params.output.nrows()
        )));
    }
    let mut grads = ModelParams {
        layers: params
            .layers
            .iter()
            .map(|l| super::BlstmLayer {
                fwd: super::LstmLayerParams::zeros(l.fwd.w_ih.ncols(), l.fwd.hidden()),
                bwd: super::LstmLayerParams::zeros(l.bwd.w_ih.ncols(), l.bwd.hidden()),
            })
            .collect(),
        projection: params.projection.as_ref().map(|p| Array2::zeros(p.raw_dim())),
        output: Array2::zeros(params.output.raw_dim()),
        output_bias: ndarray::Array1::zeros(params.output_bias.raw_dim()),
    };

    let pre_output = cache.projected.as_ref().unwrap_or(&cache.top);
    general_mat_mul(1.0, &d_logits.t(), pre_output, 0.0, &mut grads.output);
    grads.output_bias = d_logits.sum_axis(Axis(0));
    let d_pre = d_logits.dot(&params.output);
    let mut d_top = match (&params.projection, &mut grads.projection) {
        (Some(p), Some(gp)) => {
            general_mat_mul(1.0, &d_pre.t(), &cache.top, 0.0, gp);
            d_pre.dot(p)
        }
        _ => d_pre,
    };

    for (l, (layer, lc)) in params.layers.iter().zip(&cache.layers).enumerate().rev() {
        let h = layer.fwd.hidden();
        let g = &mut grads.layers[l];
        let mut dx = direction_backward(
            &layer.fwd,
            &lc.fwd,
            lc.input.view(),
            d_top.slice(s![.., ..h]),
            &mut g.fwd,
        );
        dx += &direction_backward(
            &layer.bwd,
            &lc.bwd,
            lc.input.view(),
            d_top.slice(s![.., h..]),
            &mut g.bwd,
        );
        if let Some(m) = &lc.mask {
            dx *= m;
        }
        d_top = dx;
    }
    Ok(grads)
}

/// Caches for a whole batch, one per utterance.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub utterances: Vec<UtteranceCache>,
}

fn utterance_rng(dropout: Dropout, index: usize) -> Option<rand_chacha::ChaCha8Rng> {
    match dropout {
        Dropout::Eval => None,
        Dropout::Train { seed } => Some(seed::rng_for(seed, &[index as u64])),
    }
}

/// Runs the model over a padded `B x T x F` batch. Each utterance is processed
/// over its true length only, so padding never reaches its logits.
pub fn model_forward(
    features: &Array3<f64>,
    lengths: &[usize],
    cfg: &ModelConfig,
    params: &ModelParams,
    dropout: Dropout,
) -> Result<(Vec<PosteriorLattice>, ForwardCache)> {
    let (b, t_max, f) = features.dim();
    if lengths.len() != b {
        return Err(Error::BadShape(format!("{} lengths for {b} utterances", lengths.len())));
    }
    if f != cfg.input_dim {
        return Err(Error::BadShape(format!("feature width {f}, model expects {}", cfg.input_dim)));
    }
    if let Some(&bad) = lengths.iter().find(|&&len| len == 0 || len > t_max) {
        return Err(Error::BadShape(format!("length {bad} for padded width {t_max}")));
    }
    let results: Vec<Result<(PosteriorLattice, UtteranceCache)>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let x = features.slice(s![i, ..lengths[i], ..]);
            let mut rng = utterance_rng(dropout, i);
            let (logits, cache) = forward_utterance(cfg, params, x, rng.as_mut())?;
            Ok((PosteriorLattice::from_logits(logits)?, cache))
        })
        .collect();
    let mut lattices = Vec::with_capacity(b);
    let mut utterances = Vec::with_capacity(b);
    for r in results {
        let (lat, c) = r?;
        lattices.push(lat);
        utterances.push(c);
    }
    Ok((lattices, ForwardCache { utterances }))
}

/// Sums per-utterance parameter gradients in batch order.
pub fn model_backward(
    params: &ModelParams,
    cache: Option<&ForwardCache>,
    upstream: &[Array2<f64>],
) -> Result<ModelParams> {
    let cache = cache.ok_or(Error::NoForwardCache)?;
    if cache.utterances.len() != upstream.len() {
        return Err(Error::BadShape(format!(
            "{} upstream gradients for {} cached utterances",
            upstream.len(),
            cache.utterances.len()
        )));
    }
    let per_utt: Vec<Result<ModelParams>> = cache
        .utterances
        .par_iter()
        .zip(upstream.par_iter())
        .map(|(c, g)| backward_utterance(params, c, g.view()))
        .collect();
    let mut total: Option<ModelParams> = None;
    for g in per_utt {
        let g = g?;
        match &mut total {
            None => total = Some(g),
            Some(t) => t.add_scaled(&g, 1.0),
        }
    }
    total.ok_or_else(|| Error::BadShape("empty batch".into()))
}

/// Configuration plus parameters, holding the cache of the last training
/// forward pass until the matching backward pass consumes it.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    cache: Option<ForwardCache>,
}

impl Model {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Model {
            config,
            params,
            cache: None,
        }
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = seed::rng_for(seed, &[0x1417]);
        let params = ModelParams::init(&config, &mut rng)?;
        Ok(Model::new(config, params))
    }

    pub fn forward(
        &mut self,
        features: &Array3<f64>,
        lengths: &[usize],
        dropout: Dropout,
    ) -> Result<Vec<PosteriorLattice>> {
        let (lattices, cache) = model_forward(features, lengths, &self.config, &self.params, dropout)?;
        self.cache = Some(cache);
        Ok(lattices)
    }

    /// Consumes the cache left by [`Model::forward`].
    pub fn backward(&mut self, upstream: &[Array2<f64>]) -> Result<ModelParams> {
        let cache = self.cache.take();
        model_backward(&self.params, cache.as_ref(), upstream)
    }

    /// Evaluation-mode logits for one unpadded utterance.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<PosteriorLattice> {
        let (logits, _) =
            forward_utterance::<rand_chacha::ChaCha8Rng>(&self.config, &self.params, x, None)?;
        PosteriorLattice::from_logits(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::params::ParamSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(dropout: f64, projection: Option<usize>) -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            hidden: 3,
            input_dim: 4,
            projection,
            output_dim: 5,
            dropout,
        }
    }

    fn random_x(t: usize, f: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((t, f), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_params_zero_input_give_zero_logits() {
        let cfg = tiny(0.0, Some(2));
        let params = ModelParams::zeros(&cfg);
        let (logits, _) =
            forward_utterance::<ChaCha8Rng>(&cfg, &params, Array2::zeros((5, 4)).view(), None).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padding_does_not_leak() {
        let cfg = tiny(0.0, Some(2));
        let model = Model::init(cfg.clone(), 3).unwrap();
        let x = random_x(4, 4, 1);
        let single = model.infer(x.view()).unwrap();

        let mut batch = Array3::from_elem((2, 7, 4), 9.0);
        batch.slice_mut(s![0, ..4, ..]).assign(&x);
        batch.slice_mut(s![1, .., ..]).assign(&random_x(7, 4, 2));
        let (lats, _) = model_forward(&batch, &[4, 7], &cfg, &model.params, Dropout::Eval).unwrap();
        assert_eq!(lats[0].values(), single.values());
    }

    #[test]
    fn single_frame_batch_matches_unbatched() {
        let cfg = tiny(0.0, None);
        let model = Model::init(cfg.clone(), 5).unwrap();
        let x = random_x(1, 4, 3);
        let batch = x.clone().into_shape_with_order((1, 1, 4)).unwrap();
        let (lats, _) = model_forward(&batch, &[1], &cfg, &model.params, Dropout::Eval).unwrap();
        assert_eq!(lats[0].values(), model.infer(x.view()).unwrap().values());
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut model = Model::init(tiny(0.0, None), 1).unwrap();
        assert!(matches!(model.backward(&[]), Err(Error::NoForwardCache)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let cfg = tiny(0.25, Some(2));
        let mut model = Model::init(cfg, 1).unwrap();
        let x = random_x(3, 4, 9).into_shape_with_order((1, 3, 4)).unwrap();
        model.forward(&x, &[3], Dropout::Train { seed: 4 }).unwrap();
        let g = model.backward(&[Array2::zeros((3, 5))]).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_rate_equals_all_ones_mask() {
        let cfg = tiny(0.0, Some(2));
        let model = Model::init(cfg.clone(), 8).unwrap();
        let x = random_x(4, 4, 10);
        let up = random_x(4, 5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, c0) = forward_utterance(&cfg, &model.params, x.view(), Some(&mut rng)).unwrap();
        assert!(c0.dropout_mask(1).is_none());
        let g0 = backward_utterance(&model.params, &c0, up.view()).unwrap();

        let (_, mut c1) = forward_utterance::<ChaCha8Rng>(&cfg, &model.params, x.view(), None).unwrap();
        c1.layers[1].mask = Some(Array2::ones((4, 6)));
        let g1 = backward_utterance(&model.params, &c1, up.view()).unwrap();
        assert_eq!(g0, g1);
    }

    #[test]
    fn reversing_time_swaps_directions() {
        let cfg = ModelConfig {
            num_layers: 1,
            ..tiny(0.0, None)
        };
        let model = Model::init(cfg.clone(), 12).unwrap();
        let x = random_x(6, 4, 13);
        let mut x_rev = x.clone();
        x_rev.invert_axis(Axis(0));
        let mut swapped = model.params.clone();
        let layer = &mut swapped.layers[0];
        std::mem::swap(&mut layer.fwd, &mut layer.bwd);

        let (_, c) = forward_utterance::<ChaCha8Rng>(&cfg, &model.params, x.view(), None).unwrap();
        let (_, c_rev) = forward_utterance::<ChaCha8Rng>(&cfg, &swapped, x_rev.view(), None).unwrap();
        let out = c.layer_output(0);
        let mut out_rev = c_rev.layer_output(0);
        out_rev.invert_axis(Axis(0));
        // the reversed run's forward half is the original backward half
        let h = cfg.hidden;
        for t in 0..6 {
            for k in 0..h {
                assert!((out[[t, k]] - out_rev[[t, h + k]]).abs() < 1e-12);
                assert!((out[[t, h + k]] - out_rev[[t, k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 10_000;
        let mut mean = Array2::<f64>::zeros((2, 3));
        for _ in 0..draws {
            mean += &dropout_mask(2, 3, 0.25, &mut rng);
        }
        mean /= draws as f64;
        assert!(mean.iter().all(|m| (m - 1.0).abs() < 0.02), "{mean:?}");
    }

    #[test]
    fn same_seed_same_masks() {
        let cfg = tiny(0.5, None);
        let model = Model::init(cfg.clone(), 2).unwrap();
        let x = random_x(5, 4, 6).into_shape_with_order((1, 5, 4)).unwrap();
        let (a, _) = model_forward(&x, &[5], &cfg, &model.params, Dropout::Train { seed: 9 }).unwrap();
        let (b, _) = model_forward(&x, &[5], &cfg, &model.params, Dropout::Train { seed: 9 }).unwrap();
        let (e, _) = model_forward(&x, &[5], &cfg, &model.params, Dropout::Eval).unwrap();
        assert_eq!(a[0].values(), b[0].values());
        assert_ne!(a[0].values(), e[0].values());
    }
}
