//! Word error rate, OOV rate, model scoring and the ablation harness.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::alphabet::{tokenize, LabelSpace, Vocabulary};
use crate::decoder::{decode_lattice, DecodeMode, Decoded};
use crate::error::{Error, Result};
use crate::network::{Checkpoint, Model};
use crate::pipeline::{FeaturePipeline, Utterance};
use crate::trainer::{EpochRecord, TrainConfig, TrainSession};

// ---------------------------------------------------------------------------
// WER

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
    /// `100 * (S + I + D) / N`; 0 when `N` is 0.
    pub wer: f64,
}

impl WerReport {
    pub fn from_counts(substitutions: usize, insertions: usize, deletions: usize, reference_words: usize) -> Self {
        let errors = substitutions + insertions + deletions;
        let wer = if reference_words == 0 {
            0.0
        } else {
            errors as f64 / reference_words as f64 * 100.0
        };
        WerReport {
            substitutions,
            insertions,
            deletions,
            reference_words,
            wer,
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Pools counts, as when scoring a whole corpus.
    pub fn combine(&self, other: &WerReport) -> WerReport {
        WerReport::from_counts(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.reference_words + other.reference_words,
        )
    }
}

impl fmt::Display for WerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "WER {:.2}% (S={} I={} D={} N={})",
            self.wer, self.substitutions, self.insertions, self.deletions, self.reference_words
        )
    }
}

/// Minimum edit alignment with unit costs, compared case-insensitively.
/// Among optimal alignments, substitutions are preferred over insertions
/// over deletions.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Result<WerReport> {
    if reference.is_empty() && !hypothesis.is_empty() {
        return Err(Error::EmptyReference);
    }
    let r: Vec<String> = reference.iter().map(|w| w.as_ref().to_uppercase()).collect();
    let h: Vec<String> = hypothesis.iter().map(|w| w.as_ref().to_uppercase()).collect();
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
        }
    }
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let miss = usize::from(r[i - 1] != h[j - 1]);
            if d[i][j] == d[i - 1][j - 1] + miss {
                s += miss;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    Ok(WerReport::from_counts(s, ins, del, n))
}

/// Fraction of tokens not in `vocab`; 0 for a corpus without tokens.
pub fn oov_rate<S: AsRef<str>>(transcripts: &[Vec<S>], vocab: &Vocabulary) -> f64 {
    let total: usize = transcripts.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let oov = transcripts
        .iter()
        .flatten()
        .filter(|w| !vocab.contains(&w.as_ref().to_uppercase()))
        .count();
    oov as f64 / total as f64
}

// ---------------------------------------------------------------------------
// Transcript files

/// Reads `id<TAB>words` lines. A line without a tab is an empty transcript.
pub fn read_transcripts(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = std::collections::HashSet::new();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (id, words) = line.split_once('\t').unwrap_or((line, ""));
            if !seen.insert(id.to_string()) {
                return Err(Error::format("transcript", format!("duplicate id {id:?}")));
            }
            Ok((id.to_string(), tokenize(words)))
        })
        .collect()
}

/// Pooled WER of hypotheses against references, matched by id. A reference
/// without a hypothesis counts as an empty hypothesis; hypotheses for unknown
/// ids are errors.
pub fn score_transcripts(
    reference: &[(String, Vec<String>)],
    hypothesis: &[(String, Vec<String>)],
) -> Result<WerReport> {
    let hyps: HashMap<&str, &Vec<String>> = hypothesis.iter().map(|(id, w)| (id.as_str(), w)).collect();
    let refs: std::collections::HashSet<&str> = reference.iter().map(|(id, _)| id.as_str()).collect();
    if let Some((id, _)) = hypothesis.iter().find(|(id, _)| !refs.contains(id.as_str())) {
        return Err(Error::format("transcript", format!("hypothesis {id:?} has no reference")));
    }
    let empty = Vec::new();
    let mut total = WerReport::default();
    for (id, words) in reference {
        let h = hyps.get(id.as_str()).copied().unwrap_or(&empty);
        let r = wer(words, h).map_err(|e| e.for_utterance(id))?;
        total = total.combine(&r);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Scoring models

/// Evaluation-mode decode of every utterance.
pub fn decode_utterances(
    model: &Model,
    labels: &LabelSpace,
    features: FeaturePipeline,
    utts: &[Utterance],
    mode: DecodeMode,
) -> Result<Vec<(String, Decoded)>> {
    utts.par_iter()
        .map(|u| {
            let x = features.apply(u.features.view(), &[]);
            let lat = model.infer(x.view()).map_err(|e| e.for_utterance(&u.id))?;
            Ok((u.id.clone(), decode_lattice(&lat, labels, mode)))
        })
        .collect()
}

/// Greedy-decode WER of a model on `utts`.
pub fn score_model(
    model: &Model,
    labels: &LabelSpace,
    features: FeaturePipeline,
    utts: &[Utterance],
    mode: DecodeMode,
) -> Result<WerReport> {
    let decoded = decode_utterances(model, labels, features, utts, mode)?;
    let refs: Vec<(String, Vec<String>)> = utts.iter().map(|u| (u.id.clone(), u.transcript.clone())).collect();
    let hyps: Vec<(String, Vec<String>)> = decoded.into_iter().map(|(id, d)| (id, d.words)).collect();
    score_transcripts(&refs, &hyps)
}

/// Heldout WER of a finished session, using switched decoding for joint
/// label spaces.
pub fn score_session(session: &TrainSession, heldout: &[Utterance]) -> Result<WerReport> {
    score_model(
        &session.model,
        &session.labels,
        session.config.features(),
        heldout,
        DecodeMode::Switched,
    )
}

// ---------------------------------------------------------------------------
// Ablation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrderToggle {
    Ascending,
    Descending,
    Random,
}

impl OrderToggle {
    pub fn name(self) -> &'static str {
        match self {
            OrderToggle::Ascending => "ascending",
            OrderToggle::Descending => "descending",
            OrderToggle::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelSize {
    Small,
    Big,
}

/// One recipe variant. `full()` is the complete recipe; the toggles remove
/// one component at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AblationSpec {
    pub order: OrderToggle,
    pub momentum: bool,
    pub dropout: bool,
    pub projection: bool,
    pub warm_start: bool,
    pub size: ModelSize,
}

impl AblationSpec {
    pub fn full() -> Self {
        AblationSpec {
            order: OrderToggle::Ascending,
            momentum: true,
            dropout: true,
            projection: true,
            warm_start: false,
            size: ModelSize::Big,
        }
    }

    /// The full recipe followed by each single-component removal.
    pub fn leave_one_out() -> Vec<Self> {
        let f = Self::full();
        vec![
            f,
            AblationSpec {
                order: OrderToggle::Descending,
                ..f
            },
            AblationSpec {
                order: OrderToggle::Random,
                ..f
            },
            AblationSpec { momentum: false, ..f },
            AblationSpec { dropout: false, ..f },
            AblationSpec { projection: false, ..f },
            AblationSpec { warm_start: true, ..f },
            AblationSpec {
                size: ModelSize::Small,
                ..f
            },
        ]
    }

    /// Stable identifier, e.g. `ascending-mom1-drop1-proj1-warm0-big`.
    pub fn name(&self) -> String {
        format!(
            "{}-mom{}-drop{}-proj{}-warm{}-{}",
            self.order.name(),
            u8::from(self.momentum),
            u8::from(self.dropout),
            u8::from(self.projection),
            u8::from(self.warm_start),
            match self.size {
                ModelSize::Small => "small",
                ModelSize::Big => "big",
            }
        )
    }

    pub fn parse(name: &str) -> Option<Self> {
        let parts: Vec<&str> = name.split('-').collect();
        let [order, mom, drop, proj, warm, size] = parts.as_slice() else {
            return None;
        };
        let flag = |s: &str, prefix: &str| match s.strip_prefix(prefix)? {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        };
        Some(AblationSpec {
            order: match *order {
                "ascending" => OrderToggle::Ascending,
                "descending" => OrderToggle::Descending,
                "random" => OrderToggle::Random,
                _ => return None,
            },
            momentum: flag(mom, "mom")?,
            dropout: flag(drop, "drop")?,
            projection: flag(proj, "proj")?,
            warm_start: flag(warm, "warm")?,
            size: match *size {
                "small" => ModelSize::Small,
                "big" => ModelSize::Big,
                _ => return None,
            },
        })
    }

    /// `base` with this variant's toggles applied. Enabled settings keep the
    /// base values; an enabled projection without a base width uses the
    /// hidden size; the small model has one layer fewer.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        cfg.order = self.order.name().into();
        if !self.momentum {
            cfg.momentum = 0.0;
        }
        if !self.dropout {
            cfg.dropout = 0.0;
        } else if cfg.dropout == 0.0 {
            cfg.dropout = 0.25;
        }
        if !self.projection {
            cfg.projection = 0;
        } else if cfg.projection == 0 {
            cfg.projection = cfg.hidden;
        }
        if self.size == ModelSize::Small {
            cfg.num_layers = cfg.num_layers.saturating_sub(1).max(1);
        }
        if !self.warm_start {
            cfg.warm_start.clear();
        }
        cfg
    }
}

impl fmt::Display for AblationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Outcome of one (spec, seed) training run.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub final_heldout_loss: f64,
    pub wer: f64,
    pub epochs_to_best: usize,
    pub records: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCell {
    pub spec: AblationSpec,
    pub seed: u64,
    pub result: std::result::Result<CellResult, String>,
}

/// Mean and spread over the seeds that succeeded.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub spec: AblationSpec,
    pub runs: usize,
    pub failures: usize,
    pub heldout_loss: f64,
    pub wer: f64,
    /// `max - min` of the per-seed WERs.
    pub wer_spread: f64,
    pub epochs_to_best: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
    /// Sorted by mean WER, failed specs last.
    pub rows: Vec<AblationRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl AblationTable {
    pub fn from_cells(specs: &[AblationSpec], cells: Vec<AblationCell>) -> Self {
        let mut rows: Vec<AblationRow> = specs
            .iter()
            .map(|spec| {
                let mine: Vec<&AblationCell> = cells.iter().filter(|c| c.spec == *spec).collect();
                let ok: Vec<&CellResult> = mine.iter().filter_map(|c| c.result.as_ref().ok()).collect();
                let wers = ok.iter().map(|r| r.wer);
                let spread = wers.clone().fold(f64::NEG_INFINITY, f64::max) - wers.fold(f64::INFINITY, f64::min);
                AblationRow {
                    spec: *spec,
                    runs: mine.len(),
                    failures: mine.len() - ok.len(),
                    heldout_loss: mean(ok.iter().map(|r| r.final_heldout_loss)),
                    wer: mean(ok.iter().map(|r| r.wer)),
                    wer_spread: if ok.is_empty() { f64::NAN } else { spread },
                    epochs_to_best: mean(ok.iter().map(|r| r.epochs_to_best as f64)),
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            let key = |r: &AblationRow| if r.wer.is_nan() { f64::INFINITY } else { r.wer };
            key(a).total_cmp(&key(b)).then_with(|| a.spec.name().cmp(&b.spec.name()))
        });
        AblationTable { cells, rows }
    }

    pub fn row(&self, spec: &AblationSpec) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.spec == *spec)
    }

    const HEADER: [&'static str; 7] = ["spec", "runs", "failures", "heldout_loss", "wer", "wer_spread", "epochs_to_best"];

    fn cells_text(r: &AblationRow) -> [String; 7] {
        [
            r.spec.name(),
            r.runs.to_string(),
            r.failures.to_string(),
            format!("{:.4}", r.heldout_loss),
            format!("{:.2}", r.wer),
            format!("{:.2}", r.wer_spread),
            format!("{:.1}", r.epochs_to_best),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::HEADER.join(",") + "\n";
        for r in &self.rows {
            out.push_str(&Self::cells_text(r).join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let body: Vec<[String; 7]> = self.rows.iter().map(Self::cells_text).collect();
        let widths: Vec<usize> = (0..7)
            .map(|c| body.iter().map(|r| r[c].len()).chain([Self::HEADER[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
                + "\n"
        };
        let mut out = line(Self::HEADER.to_vec());
        for r in &body {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
        }
        out
    }
}

fn run_cell(
    cfg: TrainConfig,
    warm_source: Option<&Checkpoint>,
    train: &[Utterance],
    heldout: &[Utterance],
    out_dir: Option<&Path>,
) -> Result<CellResult> {
    let mut session = TrainSession::new(cfg, train, heldout)?;
    if let Some(src) = warm_source {
        session.warm_start(src);
    }
    session.run(out_dir, |_| {})?;
    let report = score_session(&session, heldout)?;
    let run = &session.run;
    Ok(CellResult {
        final_heldout_loss: run.final_heldout_loss().unwrap_or(f64::NAN),
        wer: report.wer,
        epochs_to_best: run.best_epoch().unwrap_or(0),
        records: run.records.clone(),
    })
}

/// Trains every spec under every seed, scores heldout WER and tabulates.
/// Failed cells are recorded and the remaining cells still run.
///
/// Warm-started specs load `base.warm_start` when set; otherwise a source
/// model is pre-trained per seed with the base recipe for a third of the
/// epoch budget.
pub fn run_ablation(
    base: &TrainConfig,
    specs: &[AblationSpec],
    train: &[Utterance],
    heldout: &[Utterance],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<AblationTable> {
    let mut cells = Vec::new();
    for &seed in seeds {
        let mut warm_source: Option<std::result::Result<Checkpoint, String>> = None;
        for spec in specs {
            let mut cfg = spec.apply(base);
            cfg.seed = seed;
            let dir = out_dir.map(|d| d.join(format!("{}-seed{seed}", spec.name())));
            let source = if spec.warm_start {
                let src = warm_source.get_or_insert_with(|| pretrain_source(base, seed, train, heldout));
                match src {
                    Ok(c) => Some(c.clone()),
                    Err(e) => {
                        cells.push(AblationCell {
                            spec: *spec,
                            seed,
                            result: Err(e.clone()),
                        });
                        continue;
                    }
                }
            } else {
                None
            };
            cfg.warm_start.clear();
            let result = run_cell(cfg, source.as_ref(), train, heldout, dir.as_deref()).map_err(|e| e.to_string());
            cells.push(AblationCell {
                spec: *spec,
                seed,
                result,
            });
        }
    }
    let table = AblationTable::from_cells(specs, cells);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [("ablation.txt", table.to_text()), ("ablation.csv", table.to_csv())] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(table)
}

fn pretrain_source(
    base: &TrainConfig,
    seed: u64,
    train: &[Utterance],
    heldout: &[Utterance],
) -> std::result::Result<Checkpoint, String> {
    if !base.warm_start.is_empty() {
        return Checkpoint::load(Path::new(&base.warm_start)).map_err(|e| e.to_string());
    }
    let mut cfg = AblationSpec::full().apply(base);
    cfg.seed = crate::seed::derive_seed(seed, &[0x3A5]);
    cfg.epochs = (base.epochs / 3).max(1);
    let mut session = TrainSession::new(cfg, train, heldout).map_err(|e| e.to_string())?;
    session.run(None, |_| {}).map_err(|e| e.to_string())?;
    Ok(session.checkpoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::build_vocabulary;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn wer_examples() {
        let r = wer(&w("a b c"), &w("a b c")).unwrap();
        assert_eq!((r.errors(), r.wer), (0, 0.0));
        let r = wer(&w("a b c"), &w("a x c")).unwrap();
        assert_eq!((r.substitutions, r.insertions, r.deletions), (1, 0, 0));
        assert!((r.wer - 100.0 / 3.0).abs() < 1e-12);
        assert!(matches!(wer(&w(""), &w("a")), Err(Error::EmptyReference)));
        assert_eq!(wer(&w(""), &w("")).unwrap().wer, 0.0);
        let r = wer(&w("a b"), &w("")).unwrap();
        assert_eq!((r.deletions, r.wer), (2, 100.0));
        assert_eq!(wer(&w("The cat"), &w("THE CAT")).unwrap().errors(), 0);
    }

    #[test]
    fn tie_break_prefers_substitution() {
        let r = wer(&w("a b"), &w("b c")).unwrap();
        assert_eq!((r.substitutions, r.insertions, r.deletions), (2, 0, 0));
        let r = wer(&w("a"), &w("b c")).unwrap();
        assert_eq!((r.substitutions, r.insertions, r.deletions), (1, 1, 0));
    }

    #[test]
    fn oov_examples() {
        let v = build_vocabulary(&["a"], 1).unwrap();
        assert_eq!(oov_rate(&[w("a a")], &v), 0.0);
        assert_eq!(oov_rate(&[w("a b")], &v), 0.5);
        assert_eq!(oov_rate::<&str>(&[], &v), 0.0);
    }

    #[test]
    fn transcript_scoring() {
        let refs = vec![("u1".to_string(), vec!["A".to_string(), "B".to_string()]), ("u2".to_string(), vec!["C".to_string()])];
        assert_eq!(score_transcripts(&refs, &refs).unwrap().wer, 0.0);
        let hyps = vec![("u1".to_string(), vec!["A".to_string()])];
        let r = score_transcripts(&refs, &hyps).unwrap();
        assert_eq!((r.deletions, r.reference_words), (2, 3));
        let stray = vec![("zz".to_string(), vec![])];
        assert!(score_transcripts(&refs, &stray).is_err());
    }

    #[test]
    fn spec_names_are_stable_and_parse_back() {
        assert_eq!(AblationSpec::full().name(), "ascending-mom1-drop1-proj1-warm0-big");
        let specs = AblationSpec::leave_one_out();
        let names: std::collections::HashSet<String> = specs.iter().map(|s| s.name()).collect();
        assert_eq!(names.len(), specs.len());
        for s in specs {
            assert_eq!(AblationSpec::parse(&s.name()), Some(s));
        }
        assert_eq!(AblationSpec::parse("bogus"), None);
    }

    #[test]
    fn spec_application() {
        let base = TrainConfig::default();
        let cfg = AblationSpec {
            momentum: false,
            dropout: false,
            projection: false,
            size: ModelSize::Small,
            ..AblationSpec::full()
        }
        .apply(&base);
        assert_eq!((cfg.momentum, cfg.dropout, cfg.projection), (0.0, 0.0, 0));
        assert_eq!(cfg.num_layers, base.num_layers - 1);
        let cfg = AblationSpec::full().apply(&base);
        assert_eq!(cfg.projection, base.hidden);
    }

    #[test]
    fn table_sorts_by_wer_and_renders() {
        let full = AblationSpec::full();
        let desc = AblationSpec {
            order: OrderToggle::Descending,
            ..full
        };
        let cell = |spec, seed, wer| AblationCell {
            spec,
            seed,
            result: Ok(CellResult {
                final_heldout_loss: 1.0,
                wer,
                epochs_to_best: 3,
                records: vec![],
            }),
        };
        let cells = vec![cell(full, 1, 4.0), cell(full, 2, 2.0), cell(desc, 1, 1.0), AblationCell {
            spec: desc,
            seed: 2,
            result: Err("boom".into()),
        }];
        let t = AblationTable::from_cells(&[full, desc], cells);
        assert_eq!(t.rows[0].spec, desc);
        assert_eq!(t.rows[0].failures, 1);
        assert_eq!(t.row(&full).unwrap().wer, 3.0);
        assert_eq!(t.row(&full).unwrap().wer_spread, 2.0);
        assert!(t.to_csv().starts_with("spec,runs,failures,heldout_loss,wer,wer_spread,epochs_to_best\n"));
        assert_eq!(t.to_text().lines().count(), 3);
    }
}
