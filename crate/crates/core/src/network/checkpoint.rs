//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"A2WCKPT1"                      8-byte magic
//! u64                              manifest length in bytes
//! manifest                         UTF-8 text, one record per line:
//!     epoch <n>
//!     config <key>=<value>         (sorted by key)
//!     tensor <name> <d0,d1,..> <byte offset into the data section>
//! data                             f64 values, tensors back to back
//! ```
//!
//! Tensors are stored in the order they were added; offsets must be
//! contiguous. Writing goes to a temporary sibling file that is renamed into
//! place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::params::ModelParams;
use super::ModelConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"A2WCKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub config: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::format("checkpoint", detail)
}

impl Checkpoint {
    /// Snapshot of a model. `extra` config entries (trainer settings) are
    /// stored alongside the architecture keys.
    pub fn from_model(
        config: &ModelConfig,
        params: &ModelParams,
        epoch: usize,
        extra: &BTreeMap<String, String>,
    ) -> Self {
        let mut kv = extra.clone();
        kv.extend(config.to_kv());
        Checkpoint {
            epoch,
            config: kv,
            tensors: params
                .named()
                .into_iter()
                .map(|(name, dims, data)| Tensor {
                    name,
                    dims,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn push(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) {
        self.tensors.push(Tensor {
            name: name.into(),
            dims,
            data,
        });
    }

    /// Rebuilds the model stored in this checkpoint. Every model tensor must
    /// be present with its exact shape.
    pub fn to_model(&self) -> Result<(ModelConfig, ModelParams)> {
        let cfg = ModelConfig::from_kv(&self.config)?;
        let mut params = ModelParams::zeros(&cfg);
        for (name, dims, data) in params.named_mut() {
            let t = self
                .tensor(&name)
                .ok_or_else(|| bad(format!("missing tensor {name}")))?;
            if t.dims != dims {
                return Err(bad(format!("tensor {name} has shape {:?}, expected {dims:?}", t.dims)));
            }
            data.copy_from_slice(&t.data);
        }
        Ok((cfg, params))
    }

    pub fn manifest(&self) -> String {
        let mut m = String::new();
        writeln!(m, "epoch {}", self.epoch).unwrap();
        for (k, v) in &self.config {
            writeln!(m, "config {k}={v}").unwrap();
        }
        let mut offset = 0usize;
        for t in &self.tensors {
            let dims: Vec<String> = t.dims.iter().map(usize::to_string).collect();
            writeln!(m, "tensor {} {} {offset}", t.name, dims.join(",")).unwrap();
            offset += 8 * t.data.len();
        }
        m
    }

    fn validate(&self) -> Result<()> {
        for (k, v) in &self.config {
            if k.is_empty() || k.contains(['=', '\n', ' ']) || v.contains('\n') {
                return Err(bad(format!("config entry {k:?}={v:?} cannot be stored")));
            }
        }
        for t in &self.tensors {
            if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                return Err(bad(format!("tensor name {:?} cannot be stored", t.name)));
            }
            if t.dims.iter().product::<usize>() != t.data.len() {
                return Err(bad(format!(
                    "tensor {} has shape {:?} but {} values",
                    t.name,
                    t.dims,
                    t.data.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let manifest = self.manifest();
        let n_values: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(16 + manifest.len() + 8 * n_values);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing A2WCKPT1 magic"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let manifest = bytes
            .get(16..16 + len)
            .ok_or_else(|| bad("truncated manifest"))?;
        let manifest = std::str::from_utf8(manifest).map_err(|e| bad(e.to_string()))?;
        let data = &bytes[16 + len..];

        let mut ckpt = Checkpoint::default();
        let mut expected_offset = 0usize;
        let mut saw_epoch = false;
        for line in manifest.lines() {
            let (kind, rest) = line.split_once(' ').ok_or_else(|| bad(format!("bad line {line:?}")))?;
            match kind {
                "epoch" => {
                    ckpt.epoch = rest.parse().map_err(|_| bad(format!("bad epoch {rest:?}")))?;
                    saw_epoch = true;
                }
                "config" => {
                    let (k, v) = rest.split_once('=').ok_or_else(|| bad(format!("bad config {rest:?}")))?;
                    ckpt.config.insert(k.to_string(), v.to_string());
                }
                "tensor" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    if parts.len() != 3 {
                        return Err(bad(format!("bad tensor record {line:?}")));
                    }
                    let dims: Vec<usize> = if parts[1].is_empty() {
                        Vec::new()
                    } else {
                        parts[1]
                            .split(',')
                            .map(|d| d.parse().map_err(|_| bad(format!("bad dims in {line:?}"))))
                            .collect::<Result<_>>()?
                    };
                    let offset: usize = parts[2].parse().map_err(|_| bad(format!("bad offset in {line:?}")))?;
                    if offset != expected_offset {
                        return Err(bad(format!("tensor {} at offset {offset}, expected {expected_offset}", parts[0])));
                    }
                    let n: usize = dims.iter().product();
                    let raw = data
                        .get(offset..offset + 8 * n)
                        .ok_or_else(|| bad(format!("tensor {} runs past the data section", parts[0])))?;
                    let values = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    expected_offset += 8 * n;
                    ckpt.push(parts[0], dims, values);
                }
                _ => return Err(bad(format!("unknown record {kind:?}"))),
            }
        }
        if !saw_epoch {
            return Err(bad("manifest has no epoch record"));
        }
        if expected_offset != data.len() {
            return Err(bad(format!(
                "{} trailing bytes after the last tensor",
                data.len() as isize - expected_offset as isize
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WarmStartReport {
    pub copied: Vec<String>,
    /// Tensor name and the reason it was left alone.
    pub skipped: Vec<(String, String)>,
}

/// Copies every source tensor whose name and shape match a target tensor.
pub fn warm_start(target: &mut ModelParams, source: &Checkpoint) -> WarmStartReport {
    let mut report = WarmStartReport::default();
    for (name, dims, data) in target.named_mut() {
        match source.tensor(&name) {
            Some(t) if t.dims == dims => {
                data.copy_from_slice(&t.data);
                report.copied.push(name);
            }
            Some(t) => report
                .skipped
                .push((name, format!("shape {:?} vs {:?}", t.dims, dims))),
            None => report.skipped.push((name, "absent from source".into())),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Model;

    fn cfg(output_dim: usize) -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            hidden: 3,
            input_dim: 4,
            projection: Some(2),
            output_dim,
            dropout: 0.25,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let m = Model::init(cfg(5), 1).unwrap();
        let mut extra = BTreeMap::new();
        extra.insert("lr".to_string(), "0.01".to_string());
        let mut c = Checkpoint::from_model(&m.config, &m.params, 3, &extra);
        c.push("velocity/out.bias", vec![5], vec![0.1, -0.0, 1e-300, f64::MAX, 3.0]);
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"A2WCKPT1");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let (cfg2, params2) = back.to_model().unwrap();
        assert_eq!(cfg2, m.config);
        assert_eq!(params2, m.params);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = Model::init(cfg(5), 2).unwrap();
        let c = Checkpoint::from_model(&m.config, &m.params, 1, &BTreeMap::new());
        c.save(&path).unwrap();
        assert!(!path.with_extension("tmp").exists());
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        assert!(Checkpoint::from_bytes(b"NOTACKPT").is_err());
        let m = Model::init(cfg(5), 2).unwrap();
        let mut bytes = Checkpoint::from_model(&m.config, &m.params, 1, &BTreeMap::new())
            .to_bytes()
            .unwrap();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn warm_start_identical_configs_copies_everything() {
        let src = Model::init(cfg(5), 1).unwrap();
        let mut dst = Model::init(cfg(5), 2).unwrap();
        let ck = Checkpoint::from_model(&src.config, &src.params, 0, &BTreeMap::new());
        let r = warm_start(&mut dst.params, &ck);
        assert!(r.skipped.is_empty());
        assert_eq!(dst.params, src.params);
    }

    #[test]
    fn warm_start_skips_mismatched_output_layer() {
        let src = Model::init(cfg(9), 1).unwrap();
        let mut dst = Model::init(cfg(5), 2).unwrap();
        let ck = Checkpoint::from_model(&src.config, &src.params, 0, &BTreeMap::new());
        let r = warm_start(&mut dst.params, &ck);
        let skipped: Vec<&str> = r.skipped.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(skipped, ["out.weight", "out.bias"]);
        assert_eq!(dst.params.layers, src.params.layers);
        assert_eq!(dst.params.projection, src.params.projection);
    }
}
