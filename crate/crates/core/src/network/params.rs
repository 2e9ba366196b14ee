use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::ModelConfig;
use crate::error::{Error, Result};

/// A collection of flat parameter buffers that an optimizer can walk.
pub trait ParamSet: Clone {
    fn names(&self) -> Vec<String>;
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_values(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

impl ParamSet for Vec<f64> {
    fn names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

/// Samples a `rows x cols` matrix uniformly from `(-e, e)` with
/// `e = 1/sqrt(cols)`, the fan-in being the trailing dimension.
pub fn init_uniform_fan_in<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Array2<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::BadShape(format!("cannot initialise a {rows}x{cols} matrix")));
    }
    let eps = 1.0 / (cols as f64).sqrt();
    let dist = Uniform::new(-eps, eps).expect("eps is positive and finite");
    Ok(Array2::from_shape_simple_fn((rows, cols), || loop {
        let v: f64 = dist.sample(rng);
        if v != -eps {
            break v;
        }
    }))
}

/// One LSTM direction. Gate blocks are stacked in the order input, forget,
/// cell, output along the first axis of every tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayerParams {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Fan-in uniform weights; forget-gate bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
        Ok(LstmLayerParams {
            w_ih: init_uniform_fan_in(4 * hidden, input, rng)?,
            w_hh: init_uniform_fan_in(4 * hidden, hidden, rng)?,
            bias,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlstmLayer {
    pub fwd: LstmLayerParams,
    pub bwd: LstmLayerParams,
}

/// All trainable tensors of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<BlstmLayer>,
    /// `d x D`, no bias.
    pub projection: Option<Array2<f64>>,
    /// `V x d` (or `V x D` without projection).
    pub output: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layers = (0..cfg.num_layers)
            .map(|l| BlstmLayer {
                fwd: LstmLayerParams::zeros(cfg.layer_input_dim(l), cfg.hidden),
                bwd: LstmLayerParams::zeros(cfg.layer_input_dim(l), cfg.hidden),
            })
            .collect();
        ModelParams {
            layers,
            projection: cfg.projection.map(|d| Array2::zeros((d, cfg.concat_dim()))),
            output: Array2::zeros((cfg.output_dim, cfg.output_input_dim())),
            output_bias: Array1::zeros(cfg.output_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let input = cfg.layer_input_dim(l);
            layers.push(BlstmLayer {
                fwd: LstmLayerParams::init(input, cfg.hidden, rng)?,
                bwd: LstmLayerParams::init(input, cfg.hidden, rng)?,
            });
        }
        let projection = match cfg.projection {
            Some(d) => Some(init_uniform_fan_in(d, cfg.concat_dim(), rng)?),
            None => None,
        };
        Ok(ModelParams {
            layers,
            projection,
            output: init_uniform_fan_in(cfg.output_dim, cfg.output_input_dim(), rng)?,
            output_bias: Array1::zeros(cfg.output_dim),
        })
    }

    /// Name, shape and data of every tensor, in a fixed order.
    pub fn named(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, p) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                let prefix = format!("lstm.{l}.{dir}");
                out.push((format!("{prefix}.w_ih"), p.w_ih.shape().to_vec(), slice(&p.w_ih)));
                out.push((format!("{prefix}.w_hh"), p.w_hh.shape().to_vec(), slice(&p.w_hh)));
                out.push((format!("{prefix}.bias"), p.bias.shape().to_vec(), slice(&p.bias)));
            }
        }
        if let Some(p) = &self.projection {
            out.push(("proj.weight".into(), p.shape().to_vec(), slice(p)));
        }
        out.push(("out.weight".into(), self.output.shape().to_vec(), slice(&self.output)));
        out.push(("out.bias".into(), self.output_bias.shape().to_vec(), slice(&self.output_bias)));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, Vec<usize>, &mut [f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (dir, p) in [("fwd", &mut layer.fwd), ("bwd", &mut layer.bwd)] {
                let prefix = format!("lstm.{l}.{dir}");
                let s = p.w_ih.shape().to_vec();
                out.push((format!("{prefix}.w_ih"), s, slice_mut(&mut p.w_ih)));
                let s = p.w_hh.shape().to_vec();
                out.push((format!("{prefix}.w_hh"), s, slice_mut(&mut p.w_hh)));
                let s = p.bias.shape().to_vec();
                out.push((format!("{prefix}.bias"), s, slice_mut(&mut p.bias)));
            }
        }
        if let Some(p) = &mut self.projection {
            let s = p.shape().to_vec();
            out.push(("proj.weight".into(), s, slice_mut(p)));
        }
        let s = self.output.shape().to_vec();
        out.push(("out.weight".into(), s, slice_mut(&mut self.output)));
        let s = self.output_bias.shape().to_vec();
        out.push(("out.bias".into(), s, slice_mut(&mut self.output_bias)));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, _, d)| d.len()).sum()
    }

    /// Weights between the BLSTM output and the label layer: `V*d + d*D`
    /// with a projection, `V*D` without. Biases excluded.
    pub fn output_weight_count(&self) -> usize {
        self.output.len() + self.projection.as_ref().map_or(0, |p| p.len())
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, _, d)| d.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

impl ParamSet for ModelParams {
    fn names(&self) -> Vec<String> {
        self.named().into_iter().map(|(n, _, _)| n).collect()
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.named().into_iter().map(|(_, _, d)| d).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.named_mut().into_iter().map(|(_, _, d)| d).collect()
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fan_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = init_uniform_fan_in(4, 4, &mut rng).unwrap();
        assert!(m.iter().all(|v| v.abs() < 0.5));
        let m = init_uniform_fan_in(50, 1, &mut rng).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1.0));
        assert!(matches!(init_uniform_fan_in(0, 3, &mut rng), Err(Error::BadShape(_))));
    }

    #[test]
    fn fan_in_standard_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = init_uniform_fan_in(1000, 100, &mut rng).unwrap();
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = 0.1 / 3f64.sqrt();
        assert!((var.sqrt() / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmLayerParams::init(3, 2, &mut rng).unwrap();
        assert_eq!(p.bias.to_vec(), [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_parameter_accounting() {
        let mut cfg = ModelConfig {
            num_layers: 2,
            hidden: 8,
            input_dim: 5,
            projection: Some(6),
            output_dim: 30,
            dropout: 0.0,
        };
        let with = ModelParams::zeros(&cfg);
        cfg.projection = None;
        let without = ModelParams::zeros(&cfg);
        let (v, d, big_d) = (30, 6, 16);
        assert_eq!(with.output_weight_count(), v * d + d * big_d);
        assert_eq!(without.output_weight_count(), v * big_d);
        assert_eq!(
            without.parameter_count() - with.parameter_count(),
            v * big_d - (v * d + d * big_d)
        );
        let lstm = 2 * (4 * 8 * (5 + 8 + 1)) + 2 * (4 * 8 * (16 + 8 + 1));
        assert_eq!(without.parameter_count(), lstm + v * big_d + v);
    }
}
