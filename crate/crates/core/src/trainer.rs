//! Nesterov momentum SGD, the learning-rate schedule and the epoch loop.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{build_vocabulary, CharSet, CharSetVariant, JointAlphabet, LabelSpace};
use crate::ctc::{ctc_loss, min_frames};
use crate::error::{Error, Result};
use crate::network::{
    model_forward, warm_start, Checkpoint, Dropout, Model, ModelConfig, ModelParams, ParamSet, WarmStartReport,
};
use crate::pipeline::{sort_and_batch, Batch, CurriculumOrder, Example, FeaturePipeline, Utterance};
use crate::seed::derive_seed;

// ---------------------------------------------------------------------------
// Optimizer

/// Velocity buffers mirroring the parameters, plus the momentum constant.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<P: ParamSet> {
    pub velocity: P,
    pub momentum: f64,
}

impl<P: ParamSet> OptimizerState<P> {
    pub fn new(params: &P, momentum: f64) -> Self {
        let mut velocity = params.clone();
        for s in velocity.slices_mut() {
            s.fill(0.0);
        }
        OptimizerState { velocity, momentum }
    }
}

/// One step of
///
/// ```text
/// v_n = rho * v_{n-1} + lr * grad f(theta_{n-1} + rho * v_{n-1})
/// theta_n = theta_{n-1} - v_n
/// ```
///
/// `grad_fn` is called once, at the lookahead point. A non-finite gradient
/// leaves both `params` and `state` untouched.
pub fn nesterov_step<P, F>(params: &mut P, state: &mut OptimizerState<P>, lr: f64, mut grad_fn: F) -> Result<()>
where
    P: ParamSet,
    F: FnMut(&P) -> Result<P>,
{
    let rho = state.momentum;
    let grad = if rho == 0.0 {
        grad_fn(params)?
    } else {
        let mut lookahead = params.clone();
        for (p, v) in lookahead.slices_mut().into_iter().zip(state.velocity.slices()) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += rho * vi;
            }
        }
        grad_fn(&lookahead)?
    };
    if grad.num_values() != params.num_values() {
        return Err(Error::BadShape(format!(
            "gradient has {} values, parameters {}",
            grad.num_values(),
            params.num_values()
        )));
    }
    for (name, g) in grad.names().into_iter().zip(grad.slices()) {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::DivergedGradient { tensor: name });
        }
    }
    let vel = state.velocity.slices_mut();
    for ((p, v), g) in params.slices_mut().into_iter().zip(vel).zip(grad.slices()) {
        for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *vi = if rho == 0.0 { lr * gi } else { rho * *vi + lr * gi };
            *pi -= *vi;
        }
    }
    Ok(())
}

/// Constant rate for the first `flat_epochs`, then a factor of sqrt(0.5)
/// per epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub flat_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: 0.01,
            flat_epochs: 10,
        }
    }
}

/// Learning rate for the 1-based `epoch`. Even numbers of decay steps are
/// exact powers of one half.
pub fn lr_at(epoch: usize, sched: &LrSchedule) -> f64 {
    let k = epoch.saturating_sub(sched.flat_epochs);
    let halves = 0.5f64.powi((k / 2) as i32);
    if k % 2 == 0 {
        sched.base * halves
    } else {
        sched.base * halves * 0.5f64.sqrt()
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Words,
    Sar(CharSetVariant),
}

/// Every knob of a training run. Serialized as flat `key=value` lines; the
/// keys double as CLI flag names.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub num_layers: usize,
    pub hidden: usize,
    /// 0 disables the projection layer.
    pub projection: usize,
    pub dropout: f64,
    pub lr: f64,
    pub momentum: f64,
    pub flat_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// `ascending`, `descending` or `random`.
    pub order: String,
    pub seed: u64,
    pub deltas: bool,
    pub stack: bool,
    pub min_count: usize,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip: f64,
    /// `words` or `sar`.
    pub targets: String,
    /// `positional` or `simple`; only used with SAR targets.
    pub charset: String,
    pub heldout_fraction: f64,
    /// Checkpoint to warm-start from; empty for none.
    pub warm_start: String,
}

impl Default for TrainConfig {
    /// Six small BLSTM layers with the reference optimizer settings.
    fn default() -> Self {
        TrainConfig {
            num_layers: 6,
            hidden: 24,
            projection: 0,
            dropout: 0.25,
            lr: 0.01,
            momentum: 0.9,
            flat_epochs: 10,
            epochs: 30,
            batch_size: 16,
            order: "ascending".into(),
            seed: 7,
            deltas: true,
            stack: true,
            min_count: 5,
            clip: 0.0,
            targets: "words".into(),
            charset: "positional".into(),
            heldout_fraction: 0.05,
            warm_start: String::new(),
        }
    }
}

impl TrainConfig {
    /// The default architecture with optimizer settings that train reliably
    /// on the synthetic corpus: smaller batches, a higher rate held for
    /// twenty epochs and gradient-norm clipping.
    pub fn toy() -> Self {
        TrainConfig {
            batch_size: 8,
            lr: 0.02,
            flat_epochs: 20,
            clip: 2.0,
            ..TrainConfig::default()
        }
    }
}

pub const TRAIN_CONFIG_KEYS: &[&str] = &[
    "num_layers",
    "hidden",
    "projection",
    "dropout",
    "lr",
    "momentum",
    "flat_epochs",
    "epochs",
    "batch_size",
    "order",
    "seed",
    "deltas",
    "stack",
    "min_count",
    "clip",
    "targets",
    "charset",
    "heldout_fraction",
    "warm_start",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config {
        key: key.into(),
        value: value.into(),
    })
}

impl TrainConfig {
    /// Sets one key. Returns `Ok(false)` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "num_layers" => self.num_layers = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "projection" => self.projection = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "momentum" => self.momentum = parse_value(key, value)?,
            "flat_epochs" => self.flat_epochs = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "order" => self.order = value.trim().to_string(),
            "seed" => self.seed = parse_value(key, value)?,
            "deltas" => self.deltas = parse_value(key, value)?,
            "stack" => self.stack = parse_value(key, value)?,
            "min_count" => self.min_count = parse_value(key, value)?,
            "clip" => self.clip = parse_value(key, value)?,
            "targets" => self.targets = value.trim().to_string(),
            "charset" => self.charset = value.trim().to_string(),
            "heldout_fraction" => self.heldout_fraction = parse_value(key, value)?,
            "warm_start" => self.warm_start = value.trim().to_string(),
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let pairs: [(&str, String); 19] = [
            ("num_layers", self.num_layers.to_string()),
            ("hidden", self.hidden.to_string()),
            ("projection", self.projection.to_string()),
            ("dropout", self.dropout.to_string()),
            ("lr", self.lr.to_string()),
            ("momentum", self.momentum.to_string()),
            ("flat_epochs", self.flat_epochs.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("order", self.order.clone()),
            ("seed", self.seed.to_string()),
            ("deltas", self.deltas.to_string()),
            ("stack", self.stack.to_string()),
            ("min_count", self.min_count.to_string()),
            ("clip", self.clip.to_string()),
            ("targets", self.targets.clone()),
            ("charset", self.charset.clone()),
            ("heldout_fraction", self.heldout_fraction.to_string()),
            ("warm_start", self.warm_start.clone()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Reads known keys from `kv`, ignoring the rest.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (k, v) in kv {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `key=value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("config", format!("expected key=value, got {line:?}")))?;
            if !cfg.set(k.trim(), v)? {
                return Err(Error::Config {
                    key: k.trim().into(),
                    value: v.into(),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, value: String| {
            Err(Error::Config {
                key: key.into(),
                value,
            })
        };
        if self.num_layers == 0 {
            return bad("num_layers", "0".into());
        }
        if self.hidden == 0 {
            return bad("hidden", "0".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "0".into());
        }
        if self.min_count == 0 {
            return bad("min_count", "0".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr", self.lr.to_string());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", self.momentum.to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", self.dropout.to_string());
        }
        if !(self.clip >= 0.0) {
            return bad("clip", self.clip.to_string());
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return bad("heldout_fraction", self.heldout_fraction.to_string());
        }
        CurriculumOrder::parse(&self.order, 0).map_or_else(|| bad("order", self.order.clone()), |_| Ok(()))?;
        self.target_kind()?;
        Ok(())
    }

    pub fn target_kind(&self) -> Result<TargetKind> {
        match self.targets.as_str() {
            "words" => Ok(TargetKind::Words),
            "sar" => CharSetVariant::parse(&self.charset)
                .map(TargetKind::Sar)
                .ok_or_else(|| Error::Config {
                    key: "charset".into(),
                    value: self.charset.clone(),
                }),
            other => Err(Error::Config {
                key: "targets".into(),
                value: other.into(),
            }),
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.lr,
            flat_epochs: self.flat_epochs,
        }
    }

    pub fn features(&self) -> FeaturePipeline {
        FeaturePipeline {
            deltas: self.deltas,
            stack: self.stack,
        }
    }

    pub fn model_config(&self, input_dim: usize, output_dim: usize) -> ModelConfig {
        ModelConfig {
            num_layers: self.num_layers,
            hidden: self.hidden,
            input_dim,
            projection: (self.projection > 0).then_some(self.projection),
            output_dim,
            dropout: self.dropout,
        }
    }

    /// Curriculum for the 1-based `epoch`; random orders are redrawn each epoch.
    pub fn order_for(&self, epoch: usize) -> CurriculumOrder {
        CurriculumOrder::parse(&self.order, derive_seed(self.seed, &[0x0D, epoch as u64]))
            .unwrap_or(CurriculumOrder::Ascending)
    }

    /// Builds the label space from training transcripts.
    pub fn build_labels(&self, train: &[Utterance]) -> Result<LabelSpace> {
        let lines: Vec<String> = train.iter().map(|u| u.transcript.join(" ")).collect();
        let vocab = build_vocabulary(&lines, self.min_count)?;
        Ok(match self.target_kind()? {
            TargetKind::Words => LabelSpace::Words(vocab),
            TargetKind::Sar(v) => LabelSpace::Joint(JointAlphabet::new(vocab, CharSet::new(v))),
        })
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_kv() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Runs

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// `None` when there is no heldout set.
    pub heldout_loss: Option<f64>,
    pub seconds: f64,
}

impl EpochRecord {
    /// Equality of everything but the wall time, bit for bit.
    pub fn same_outcome(&self, other: &EpochRecord) -> bool {
        self.epoch == other.epoch
            && self.lr.to_bits() == other.lr.to_bits()
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.heldout_loss.map(f64::to_bits) == other.heldout_loss.map(f64::to_bits)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainRun {
    pub records: Vec<EpochRecord>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainRun {
    /// Epoch with the lowest heldout loss (the first one on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        self.records
            .iter()
            .filter_map(|r| r.heldout_loss.map(|h| (r.epoch, h)))
            .fold(None, |best: Option<(usize, f64)>, (e, h)| match best {
                Some((_, bh)) if bh <= h => best,
                _ => Some((e, h)),
            })
            .map(|(e, _)| e)
    }

    /// Relative amount by which the final heldout loss exceeds the lowest
    /// one seen; 0 when the last epoch is the best. NaN without heldout data.
    pub fn overfit_gap(&self) -> f64 {
        let losses: Vec<f64> = self.records.iter().filter_map(|r| r.heldout_loss).collect();
        match losses.last() {
            Some(&last) => last / losses.iter().copied().fold(f64::INFINITY, f64::min) - 1.0,
            None => f64::NAN,
        }
    }

    pub fn final_heldout_loss(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.heldout_loss)
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

pub const RECORDS_FILE: &str = "records.jsonl";
const VELOCITY_PREFIX: &str = "velocity/";
const HISTORY_PREFIX: &str = "history.";

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch-{epoch:03}.ckpt")
}

/// Transforms utterances into examples and checks every target fits its frames.
pub fn prepare_examples(utts: &[Utterance], labels: &LabelSpace, features: FeaturePipeline) -> Result<Vec<Example>> {
    utts.par_iter()
        .map(|u| {
            let targets = labels.targets(&u.transcript).map_err(|e| e.for_utterance(&u.id))?;
            let x = features.apply(u.features.view(), &[]);
            if min_frames(&targets) > x.nrows() {
                let repeats = crate::ctc::adjacent_repeats(&targets);
                return Err(Error::InfeasibleAlignment {
                    frames: x.nrows(),
                    labels: targets.len(),
                    repeats,
                }
                .for_utterance(&u.id));
            }
            Ok(Example {
                id: u.id.clone(),
                features: x,
                targets,
            })
        })
        .collect()
}

/// Mean per-utterance CTC loss of a batch and its gradient.
pub fn batch_loss_and_grad(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &Batch,
    dropout: Dropout,
) -> Result<(f64, ModelParams)> {
    let (lattices, cache) = model_forward(&batch.features, &batch.lengths, cfg, params, dropout)?;
    let results: Vec<_> = lattices
        .par_iter()
        .zip(batch.targets.par_iter())
        .map(|(lat, y)| ctc_loss(lat, y))
        .collect();
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut upstream = Vec::with_capacity(results.len());
    for (r, id) in results.into_iter().zip(&batch.ids) {
        let r = r.map_err(|e| e.for_utterance(id))?;
        loss += r.log_loss;
        upstream.push(r.grad / b);
    }
    let grad = crate::network::model_backward(params, Some(&cache), &upstream)?;
    Ok((loss / b, grad))
}

/// Mean per-utterance CTC loss in evaluation mode.
pub fn mean_loss(model: &Model, examples: &[Example], batch_size: usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    for batch in sort_and_batch(examples, CurriculumOrder::Ascending, batch_size)? {
        let (lattices, _) = model_forward(&batch.features, &batch.lengths, &model.config, &model.params, Dropout::Eval)?;
        let losses: Vec<Result<f64>> = lattices
            .par_iter()
            .zip(batch.targets.par_iter())
            .map(|(lat, y)| ctc_loss(lat, y).map(|r| r.log_loss))
            .collect();
        for (l, id) in losses.into_iter().zip(&batch.ids) {
            total += l.map_err(|e| e.for_utterance(id))?;
        }
    }
    Ok(total / examples.len() as f64)
}

/// A training run in progress: model, optimizer state, data and history.
#[derive(Clone, Debug)]
pub struct TrainSession {
    pub config: TrainConfig,
    pub labels: LabelSpace,
    pub model: Model,
    pub optimizer: OptimizerState<ModelParams>,
    pub run: TrainRun,
    /// Number of completed epochs.
    pub epoch: usize,
    train: Vec<Example>,
    heldout: Vec<Example>,
}

impl TrainSession {
    /// Fresh session; the label space is built from the training transcripts.
    pub fn new(config: TrainConfig, train: &[Utterance], heldout: &[Utterance]) -> Result<Self> {
        config.validate()?;
        let labels = config.build_labels(train)?;
        Self::with_labels(config, labels, train, heldout)
    }

    pub fn with_labels(config: TrainConfig, labels: LabelSpace, train: &[Utterance], heldout: &[Utterance]) -> Result<Self> {
        config.validate()?;
        let feats = config.features();
        let train_ex = prepare_examples(train, &labels, feats)?;
        let heldout_ex = prepare_examples(heldout, &labels, feats)?;
        let input_dim = train_ex
            .first()
            .map(|e| e.features.ncols())
            .ok_or(Error::EmptyCorpus)?;
        let model_cfg = config.model_config(input_dim, labels.size());
        let model = Model::init(model_cfg, derive_seed(config.seed, &[0x1417]))?;
        let optimizer = OptimizerState::new(&model.params, config.momentum);
        Ok(TrainSession {
            config,
            labels,
            model,
            optimizer,
            run: TrainRun::default(),
            epoch: 0,
            train: train_ex,
            heldout: heldout_ex,
        })
    }

    /// Continues from a checkpoint written by [`TrainSession::checkpoint`].
    /// `overrides` replace stored config keys (typically `epochs`).
    pub fn resume(
        ckpt: &Checkpoint,
        overrides: &BTreeMap<String, String>,
        train: &[Utterance],
        heldout: &[Utterance],
    ) -> Result<Self> {
        let mut kv = ckpt.config.clone();
        kv.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        let config = TrainConfig::from_kv(&kv)?;
        let labels = LabelSpace::from_kv(&ckpt.config)?;
        let feats = config.features();
        let (model_cfg, params) = ckpt.to_model()?;
        let mut optimizer = OptimizerState::new(&params, config.momentum);
        for (name, dims, data) in optimizer.velocity.named_mut() {
            let key = format!("{VELOCITY_PREFIX}{name}");
            let t = ckpt
                .tensor(&key)
                .ok_or_else(|| Error::format("checkpoint", format!("missing {key}")))?;
            if t.dims != dims {
                return Err(Error::format("checkpoint", format!("{key} has shape {:?}", t.dims)));
            }
            data.copy_from_slice(&t.data);
        }
        let records = ckpt
            .config
            .iter()
            .filter(|(k, _)| k.starts_with(HISTORY_PREFIX))
            .map(|(_, v)| serde_json::from_str(v).map_err(|e| Error::format("checkpoint", e.to_string())))
            .collect::<Result<Vec<EpochRecord>>>()?;
        Ok(TrainSession {
            train: prepare_examples(train, &labels, feats)?,
            heldout: prepare_examples(heldout, &labels, feats)?,
            config,
            labels,
            model: Model::new(model_cfg, params),
            optimizer,
            run: TrainRun {
                records,
                checkpoints: Vec::new(),
            },
            epoch: ckpt.epoch,
        })
    }

    /// Copies name- and shape-compatible tensors from `source`.
    pub fn warm_start(&mut self, source: &Checkpoint) -> WarmStartReport {
        warm_start(&mut self.model.params, source)
    }

    pub fn train_examples(&self) -> &[Example] {
        &self.train
    }

    pub fn heldout_examples(&self) -> &[Example] {
        &self.heldout
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let start = Instant::now();
        let epoch = self.epoch + 1;
        let lr = lr_at(epoch, &self.config.schedule());
        let batches = sort_and_batch(&self.train, self.config.order_for(epoch), self.config.batch_size)?;
        let model_cfg = self.model.config.clone();
        let clip = self.config.clip;
        let mut total = 0.0;
        for (k, batch) in batches.iter().enumerate() {
            let dropout = if model_cfg.dropout > 0.0 {
                Dropout::Train {
                    seed: derive_seed(self.config.seed, &[epoch as u64, k as u64]),
                }
            } else {
                Dropout::Eval
            };
            let mut batch_loss = 0.0;
            nesterov_step(&mut self.model.params, &mut self.optimizer, lr, |p| {
                let (loss, mut grad) = batch_loss_and_grad(&model_cfg, p, batch, dropout)?;
                batch_loss = loss;
                if clip > 0.0 {
                    let norm = grad.l2_norm();
                    if norm > clip {
                        grad.scale(clip / norm);
                    }
                }
                Ok(grad)
            })?;
            total += batch_loss * batch.len() as f64;
        }
        let heldout_loss = if self.heldout.is_empty() {
            None
        } else {
            Some(mean_loss(&self.model, &self.heldout, self.config.batch_size)?)
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: total / self.train.len() as f64,
            heldout_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.epoch = epoch;
        self.run.records.push(record.clone());
        Ok(record)
    }

    /// Model, velocity, config, label space and history at the current epoch.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut extra = self.config.to_kv();
        extra.extend(self.labels.to_kv());
        for r in &self.run.records {
            extra.insert(
                format!("{HISTORY_PREFIX}{:04}", r.epoch),
                serde_json::to_string(r).expect("records serialize"),
            );
        }
        let mut ckpt = Checkpoint::from_model(&self.model.config, &self.model.params, self.epoch, &extra);
        for (name, dims, data) in self.optimizer.velocity.named() {
            ckpt.push(format!("{VELOCITY_PREFIX}{name}"), dims, data.to_vec());
        }
        ckpt
    }

    /// Trains until `config.epochs` epochs are complete. With `out_dir`, a
    /// checkpoint and the full record log are written after every epoch.
    pub fn run(&mut self, out_dir: Option<&Path>, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<&TrainRun> {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        while self.epoch < self.config.epochs {
            let record = self.run_epoch()?;
            on_epoch(&record);
            if let Some(dir) = out_dir {
                let path = dir.join(checkpoint_name(self.epoch));
                self.checkpoint().save(&path)?;
                self.run.checkpoints.push(path);
                let log = dir.join(RECORDS_FILE);
                let tmp = log.with_extension("tmp");
                std::fs::write(&tmp, self.run.to_jsonl()).map_err(|e| Error::io(&tmp, e))?;
                std::fs::rename(&tmp, &log).map_err(|e| Error::io(&log, e))?;
            }
        }
        Ok(&self.run)
    }
}

/// Builds a session (warm-starting when configured) and trains it.
pub fn train(config: TrainConfig, train: &[Utterance], heldout: &[Utterance], out_dir: Option<&Path>) -> Result<TrainSession> {
    let mut session = TrainSession::new(config, train, heldout)?;
    if !session.config.warm_start.is_empty() {
        let source = Checkpoint::load(Path::new(&session.config.warm_start))?;
        session.warm_start(&source);
    }
    session.run(out_dir, |_| {})?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(theta: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(theta.clone())
    }

    #[test]
    fn hand_iterated_quadratic() {
        let mut theta = vec![1.0];
        let mut state = OptimizerState::new(&theta, 0.9);
        nesterov_step(&mut theta, &mut state, 0.1, half_square).unwrap();
        assert!((state.velocity[0] - 0.1).abs() < 1e-15);
        assert!((theta[0] - 0.9).abs() < 1e-15);
        nesterov_step(&mut theta, &mut state, 0.1, half_square).unwrap();
        assert!((state.velocity[0] - 0.189).abs() < 1e-12);
        assert!((theta[0] - 0.711).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_scales_velocity_only() {
        let mut theta = vec![2.0, -1.0];
        let mut state = OptimizerState {
            velocity: vec![0.5, 0.25],
            momentum: 0.5,
        };
        nesterov_step(&mut theta, &mut state, 0.1, |p: &Vec<f64>| Ok(vec![0.0; p.len()])).unwrap();
        assert_eq!(state.velocity, [0.25, 0.125]);
        assert_eq!(theta, [1.75, -1.125]);
    }

    #[test]
    fn non_finite_gradient_leaves_state_untouched() {
        let mut theta = vec![1.0];
        let mut state = OptimizerState::new(&theta, 0.9);
        let err = nesterov_step(&mut theta, &mut state, 0.1, |_: &Vec<f64>| Ok(vec![f64::NAN])).unwrap_err();
        assert!(matches!(err, Error::DivergedGradient { .. }));
        assert_eq!(theta, [1.0]);
        assert_eq!(state.velocity, [0.0]);
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::default();
        assert_eq!(lr_at(5, &s), 0.01);
        assert_eq!(lr_at(10, &s), 0.01);
        assert!((lr_at(11, &s) - 0.01 * 0.5f64.sqrt()).abs() < 1e-18);
        assert_eq!(lr_at(12, &s), 0.005);
        assert_eq!(lr_at(20, &s), 0.01 * 0.5f64.powi(5));
    }

    #[test]
    fn config_text_round_trip_and_errors() {
        let mut cfg = TrainConfig::default();
        cfg.set("hidden", "8").unwrap();
        cfg.set("order", "random").unwrap();
        let back = TrainConfig::parse(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(TrainConfig::parse("bogus=1").is_err());
        assert!(TrainConfig::parse("lr=abc").is_err());
        assert!(TrainConfig::parse("order=sideways").is_err());
        assert!(TrainConfig::parse("# comment\n\nepochs = 3 # trailing").unwrap().epochs == 3);
    }

    #[test]
    fn best_epoch_takes_first_minimum() {
        let rec = |epoch, h| EpochRecord {
            epoch,
            lr: 0.1,
            train_loss: 1.0,
            heldout_loss: Some(h),
            seconds: 0.0,
        };
        let run = TrainRun {
            records: vec![rec(1, 3.0), rec(2, 1.0), rec(3, 1.0), rec(4, 2.0)],
            checkpoints: vec![],
        };
        assert_eq!(run.best_epoch(), Some(2));
        assert_eq!(run.final_heldout_loss(), Some(2.0));
    }
}
