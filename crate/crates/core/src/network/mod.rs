//! Stacked bidirectional LSTM acoustic model with an optional low-rank output
//! projection, trained by backpropagation through time.

mod checkpoint;
mod lstm;
mod model;
mod params;

use std::collections::BTreeMap;

pub use checkpoint::{warm_start, Checkpoint, Tensor, WarmStartReport, CHECKPOINT_MAGIC};
pub use model::{
    model_backward, model_forward, Dropout, ForwardCache, Model, UtteranceCache,
};
pub use params::{init_uniform_fan_in, BlstmLayer, LstmLayerParams, ModelParams, ParamSet};

use crate::error::{Error, Result};

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    /// Cells per direction; each layer outputs `2 * hidden` features.
    pub hidden: usize,
    pub input_dim: usize,
    /// Rank `d` of the factored output layer; `None` for a single `V x D`
    /// output matrix.
    pub projection: Option<usize>,
    pub output_dim: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Six 512-cell BLSTM layers, projection 256, dropout 0.25.
    pub fn recipe(input_dim: usize, output_dim: usize) -> Self {
        ModelConfig {
            num_layers: 6,
            hidden: 512,
            input_dim,
            projection: Some(256),
            output_dim,
            dropout: 0.25,
        }
    }

    pub fn concat_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.concat_dim()
        }
    }

    /// Width of the features entering the output layer.
    pub fn output_input_dim(&self) -> usize {
        self.projection.unwrap_or(self.concat_dim())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadShape(m));
        if self.num_layers == 0 || self.hidden == 0 || self.input_dim == 0 {
            return bad(format!("degenerate model config {self:?}"));
        }
        if self.output_dim < 2 {
            return bad("output layer needs blank plus at least one label".into());
        }
        if let Some(d) = self.projection {
            if d == 0 || d >= self.concat_dim() {
                return bad(format!(
                    "projection {d} must be in 1..{} (below the BLSTM output width)",
                    self.concat_dim()
                ));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        kv.insert("num_layers".into(), self.num_layers.to_string());
        kv.insert("hidden".into(), self.hidden.to_string());
        kv.insert("input_dim".into(), self.input_dim.to_string());
        kv.insert("projection".into(), self.projection.unwrap_or(0).to_string());
        kv.insert("output_dim".into(), self.output_dim.to_string());
        kv.insert("dropout".into(), self.dropout.to_string());
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let v = kv.get(key).ok_or_else(|| Error::Config {
                key: key.into(),
                value: String::new(),
            })?;
            v.parse().map_err(|_| Error::Config {
                key: key.into(),
                value: v.clone(),
            })
        }
        let projection: usize = get(kv, "projection")?;
        let cfg = ModelConfig {
            num_layers: get(kv, "num_layers")?,
            hidden: get(kv, "hidden")?,
            input_dim: get(kv, "input_dim")?,
            projection: (projection > 0).then_some(projection),
            output_dim: get(kv, "output_dim")?,
            dropout: get(kv, "dropout")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
