//! Feature transforms, curriculum ordering, padded batching, corpus files and
//! a synthetic corpus generator.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, s, Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::alphabet::LabelId;
use crate::error::{Error, Result};
use crate::seed;

/// An utterance as stored on disk: features plus the true word sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// `T x F`.
    pub features: Array2<f64>,
    pub transcript: Vec<String>,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.features.nrows()
    }
}

/// A training example: transformed features and the CTC target.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub features: Array2<f64>,
    pub targets: Vec<LabelId>,
}

impl Example {
    pub fn frames(&self) -> usize {
        self.features.nrows()
    }
}

// ---------------------------------------------------------------------------
// Feature transforms

const DELTA_WINDOW: usize = 2;

/// Regression deltas over `+-DELTA_WINDOW` frames, edges replicated.
fn deltas(x: ArrayView2<f64>) -> Array2<f64> {
    let t_len = x.nrows() as isize;
    let norm = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let clamp = |t: isize| t.clamp(0, t_len - 1) as usize;
    let mut out = Array2::zeros(x.raw_dim());
    for t in 0..t_len {
        let mut row = out.row_mut(t as usize);
        for n in 1..=DELTA_WINDOW as isize {
            let ahead = x.row(clamp(t + n));
            let behind = x.row(clamp(t - n));
            row.zip_mut_with(&(&ahead - &behind), |o, d| *o += n as f64 * d);
        }
        row.mapv_inplace(|v| v / norm);
    }
    out
}

/// `[static | delta | delta-delta]`, `T x 3F`.
pub fn compute_deltas(features: ArrayView2<f64>) -> Array2<f64> {
    let d = deltas(features);
    let dd = deltas(d.view());
    concatenate![Axis(1), features, d, dd]
}

/// Concatenates frame pairs and halves the frame rate: row `k` is
/// `[frame 2k | frame 2k+1]`, with a zero frame standing in for the missing
/// partner when `T` is odd.
pub fn stack_decimate(features: ArrayView2<f64>) -> Array2<f64> {
    let (t_len, f) = features.dim();
    let rows = t_len.div_ceil(2);
    let mut out = Array2::zeros((rows, 2 * f));
    for k in 0..rows {
        out.slice_mut(s![k, ..f]).assign(&features.row(2 * k));
        if 2 * k + 1 < t_len {
            out.slice_mut(s![k, f..]).assign(&features.row(2 * k + 1));
        }
    }
    out
}

/// Appends the same auxiliary vector (a speaker embedding, say) to every frame.
pub fn append_aux(features: ArrayView2<f64>, aux: &[f64]) -> Array2<f64> {
    let t_len = features.nrows();
    let aux = Array2::from_shape_fn((t_len, aux.len()), |(_, j)| aux[j]);
    concatenate![Axis(1), features, aux]
}

/// Which transforms to apply, always in the order deltas, stacking, aux.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeaturePipeline {
    pub deltas: bool,
    pub stack: bool,
}

impl FeaturePipeline {
    pub fn apply(&self, raw: ArrayView2<f64>, aux: &[f64]) -> Array2<f64> {
        let mut x = if self.deltas { compute_deltas(raw) } else { raw.to_owned() };
        if self.stack {
            x = stack_decimate(x.view());
        }
        if !aux.is_empty() {
            x = append_aux(x.view(), aux);
        }
        x
    }

    pub fn output_dim(&self, raw_dim: usize, aux_dim: usize) -> usize {
        let mut d = raw_dim;
        if self.deltas {
            d *= 3;
        }
        if self.stack {
            d *= 2;
        }
        d + aux_dim
    }

    pub fn output_frames(&self, raw_frames: usize) -> usize {
        if self.stack {
            raw_frames.div_ceil(2)
        } else {
            raw_frames
        }
    }
}

// ---------------------------------------------------------------------------
// Ordering and batching

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurriculumOrder {
    Ascending,
    Descending,
    Random(u64),
}

impl CurriculumOrder {
    pub fn name(&self) -> &'static str {
        match self {
            CurriculumOrder::Ascending => "ascending",
            CurriculumOrder::Descending => "descending",
            CurriculumOrder::Random(_) => "random",
        }
    }

    /// `ascending`, `descending` or `random` (seeded with `seed`).
    pub fn parse(s: &str, seed: u64) -> Option<Self> {
        match s {
            "ascending" => Some(CurriculumOrder::Ascending),
            "descending" => Some(CurriculumOrder::Descending),
            "random" => Some(CurriculumOrder::Random(seed)),
            _ => None,
        }
    }
}

/// Indices of `(id, length)` items in curriculum order. Length ties (and the
/// pre-shuffle order for `Random`) are broken by id.
pub fn curriculum_indices(items: &[(&str, usize)], order: CurriculumOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    match order {
        CurriculumOrder::Ascending => {
            idx.sort_by(|&a, &b| items[a].1.cmp(&items[b].1).then(items[a].0.cmp(items[b].0)))
        }
        CurriculumOrder::Descending => {
            idx.sort_by(|&a, &b| items[b].1.cmp(&items[a].1).then(items[a].0.cmp(items[b].0)))
        }
        CurriculumOrder::Random(s) => {
            idx.sort_by(|&a, &b| items[a].0.cmp(items[b].0));
            idx.shuffle(&mut seed::rng_for(s, &[0x5EED]));
        }
    }
    idx
}

/// A padded batch. Frames at or past `lengths[i]` in row `i` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub ids: Vec<String>,
    /// `B x T_max x F`.
    pub features: Array3<f64>,
    pub lengths: Vec<usize>,
    pub targets: Vec<Vec<LabelId>>,
    /// Fraction of padded cells: `1 - sum(lengths) / (B * T_max)`.
    pub padding_waste: f64,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_examples(examples: &[&Example]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::BadShape("cannot pad an empty batch".into()))?;
        let f = first.features.ncols();
        let t_max = examples.iter().map(|e| e.frames()).max().unwrap_or(0);
        let mut features = Array3::zeros((examples.len(), t_max, f));
        for (i, e) in examples.iter().enumerate() {
            if e.features.ncols() != f {
                return Err(Error::BadShape(format!(
                    "utterance {} has {} feature columns, batch has {f}",
                    e.id,
                    e.features.ncols()
                )));
            }
            features.slice_mut(s![i, ..e.frames(), ..]).assign(&e.features);
        }
        let lengths: Vec<usize> = examples.iter().map(|e| e.frames()).collect();
        let real: usize = lengths.iter().sum();
        Ok(Batch {
            ids: examples.iter().map(|e| e.id.clone()).collect(),
            features,
            padding_waste: 1.0 - real as f64 / (examples.len() * t_max) as f64,
            lengths,
            targets: examples.iter().map(|e| e.targets.clone()).collect(),
        })
    }

    /// The unpadded features of utterance `i`.
    pub fn utterance(&self, i: usize) -> ArrayView2<'_, f64> {
        self.features.slice(s![i, ..self.lengths[i], ..])
    }
}

/// Orders `examples`, cuts the sequence into consecutive runs of
/// `batch_size` (the last may be shorter) and pads each run.
pub fn sort_and_batch(examples: &[Example], order: CurriculumOrder, batch_size: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config {
            key: "batch_size".into(),
            value: "0".into(),
        });
    }
    let keys: Vec<(&str, usize)> = examples.iter().map(|e| (e.id.as_str(), e.frames())).collect();
    let ordered: Vec<&Example> = curriculum_indices(&keys, order)
        .into_iter()
        .map(|i| &examples[i])
        .collect();
    ordered.chunks(batch_size).map(Batch::from_examples).collect()
}

/// Padding waste of a batch sequence, pooled over all padded cells.
pub fn mean_padding_waste(batches: &[Batch]) -> f64 {
    let cells: usize = batches.iter().map(|b| b.len() * b.features.shape()[1]).sum();
    if cells == 0 {
        return 0.0;
    }
    let real: usize = batches.iter().flat_map(|b| b.lengths.iter()).sum();
    1.0 - real as f64 / cells as f64
}

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Parameters of the synthetic word-prototype corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub vocab_size: usize,
    /// Extra words that only appear through OOV injection.
    pub oov_words: usize,
    /// Probability that a token is drawn from the OOV words.
    pub oov_rate: f64,
    pub feature_dim: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub min_letters: usize,
    pub max_letters: usize,
    pub noise: f64,
    pub count: usize,
    pub seed: u64,
    /// When non-zero, a word's prototype is the concatenation of fixed
    /// per-letter prototypes of this many frames, so spellings are audible.
    /// Zero gives every word an unrelated prototype of `min_frames..=max_frames`.
    pub letter_frames: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 20,
            oov_words: 0,
            oov_rate: 0.0,
            feature_dim: 6,
            min_frames: 3,
            max_frames: 8,
            min_words: 1,
            max_words: 8,
            min_letters: 2,
            max_letters: 6,
            noise: 0.3,
            count: 2200,
            seed: 7,
            letter_frames: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthWord {
    pub text: String,
    /// Fixed `frames x feature_dim` pattern the word is rendered with.
    pub prototype: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub words: Vec<SynthWord>,
    pub oov_words: Vec<SynthWord>,
    pub utterances: Vec<Utterance>,
}

impl SynthCorpus {
    /// Word texts in the fixed lexicon (excluding OOV words).
    pub fn lexicon(&self) -> Vec<String> {
        self.words.iter().map(|w| w.text.clone()).collect()
    }
}

fn random_word_text<R: Rng>(rng: &mut R, min: usize, max: usize) -> String {
    let len = rng.random_range(min..=max);
    (0..len).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect()
}

/// Generates a corpus of random word sequences rendered from per-word
/// prototype segments plus i.i.d. Gaussian noise. Each utterance draws from
/// its own seed stream, so the first `n` utterances do not depend on `count`.
/// Consecutive tokens are always different words.
pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    let bad = |m: &str| Err(Error::BadShape(format!("synthetic corpus: {m}")));
    if spec.vocab_size < 2 || spec.feature_dim == 0 {
        return bad("need at least two words and one feature dimension");
    }
    if spec.min_frames == 0 || spec.min_frames > spec.max_frames {
        return bad("bad frame range");
    }
    if spec.min_words == 0 || spec.min_words > spec.max_words {
        return bad("bad words-per-utterance range");
    }
    if spec.min_letters == 0 || spec.min_letters > spec.max_letters {
        return bad("bad letter range");
    }
    if !(0.0..1.0).contains(&spec.oov_rate) || (spec.oov_rate > 0.0 && spec.oov_words == 0) {
        return bad("bad OOV settings");
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut letter_rng = seed::rng_for(spec.seed, &[3]);
    let letters: Vec<Array2<f64>> = if spec.letter_frames > 0 {
        (0..26)
            .map(|_| Array2::from_shape_simple_fn((spec.letter_frames, spec.feature_dim), || normal.sample(&mut letter_rng)))
            .collect()
    } else {
        Vec::new()
    };
    let mut lex_rng = seed::rng_for(spec.seed, &[1]);
    let mut seen = std::collections::HashSet::new();
    let mut make_words = |n: usize| -> Vec<SynthWord> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let text = random_word_text(&mut lex_rng, spec.min_letters, spec.max_letters);
            if text == crate::alphabet::UNK_TOKEN || !seen.insert(text.clone()) {
                continue;
            }
            let prototype = if letters.is_empty() {
                let frames = lex_rng.random_range(spec.min_frames..=spec.max_frames);
                Array2::from_shape_simple_fn((frames, spec.feature_dim), || normal.sample(&mut lex_rng))
            } else {
                let blocks: Vec<ArrayView2<f64>> =
                    text.bytes().map(|b| letters[(b - b'A') as usize].view()).collect();
                concatenate(Axis(0), &blocks).expect("letters share a width")
            };
            out.push(SynthWord { text, prototype });
        }
        out
    };
    let words = make_words(spec.vocab_size);
    let oov_words = make_words(spec.oov_words);

    let utterances = (0..spec.count)
        .map(|i| {
            let mut rng = seed::rng_for(spec.seed, &[2, i as u64]);
            let n = rng.random_range(spec.min_words..=spec.max_words);
            let mut chosen: Vec<&SynthWord> = Vec::with_capacity(n);
            while chosen.len() < n {
                let w = if spec.oov_rate > 0.0 && rng.random::<f64>() < spec.oov_rate {
                    &oov_words[rng.random_range(0..oov_words.len())]
                } else {
                    &words[rng.random_range(0..words.len())]
                };
                if chosen.last().is_some_and(|p| p.text == w.text) {
                    continue;
                }
                chosen.push(w);
            }
            let blocks: Vec<ArrayView2<f64>> = chosen.iter().map(|w| w.prototype.view()).collect();
            let mut features = concatenate(Axis(0), &blocks).expect("prototypes share a width");
            if spec.noise > 0.0 {
                features.mapv_inplace(|v| v + spec.noise * normal.sample(&mut rng));
            }
            Utterance {
                id: format!("utt{i:06}"),
                features,
                transcript: chosen.iter().map(|w| w.text.clone()).collect(),
            }
        })
        .collect();
    Ok(SynthCorpus {
        words,
        oov_words,
        utterances,
    })
}

/// FNV-1a over the id bytes.
fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Splits off the utterances whose id hash falls in the heldout bucket.
/// Returns `(train, heldout)`.
pub fn split_heldout(utts: Vec<Utterance>, fraction: f64) -> (Vec<Utterance>, Vec<Utterance>) {
    let cut = (fraction.clamp(0.0, 1.0) * 10_000.0).round() as u64;
    utts.into_iter().partition(|u| id_hash(&u.id) % 10_000 >= cut)
}

// ---------------------------------------------------------------------------
// Corpus directory format

pub const CORPUS_INDEX: &str = "corpus.tsv";

/// Writes `corpus.tsv` (`id<TAB>transcript<TAB>feature path`) and one
/// feature file per utterance: two little-endian u32 (`T`, `F`) followed by
/// `T*F` little-endian f32 values, row-major.
pub fn write_corpus(dir: &Path, utts: &[Utterance]) -> Result<()> {
    let feats = dir.join("feats");
    fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
    let mut index = String::new();
    for u in utts {
        if u.id.contains(['\t', '\n', '/']) || u.id.is_empty() {
            return Err(Error::format("corpus", format!("unusable utterance id {:?}", u.id)));
        }
        let rel = format!("feats/{}.bin", u.id);
        let (t, f) = u.features.dim();
        let mut bytes = Vec::with_capacity(8 + 4 * t * f);
        bytes.extend_from_slice(&(t as u32).to_le_bytes());
        bytes.extend_from_slice(&(f as u32).to_le_bytes());
        for v in u.features.iter() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        let path = dir.join(&rel);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        index.push_str(&format!("{}\t{}\t{}\n", u.id, u.transcript.join(" "), rel));
    }
    let path = dir.join(CORPUS_INDEX);
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    file.write_all(index.as_bytes()).map_err(|e| Error::io(&path, e))
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format("feature file", format!("{}: {m}", path.display()));
    if bytes.len() < 8 {
        return Err(bad("missing header".into()));
    }
    let t = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let f = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 4 * t * f {
        return Err(bad(format!("header says {t}x{f} but holds {} bytes", bytes.len() - 8)));
    }
    let values: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Array2::from_shape_vec((t, f), values).map_err(|e| bad(e.to_string()))
}

pub fn read_corpus(dir: &Path) -> Result<Vec<Utterance>> {
    let path = dir.join(CORPUS_INDEX);
    let index = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    index
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut cols = line.split('\t');
            let (Some(id), Some(text), Some(rel), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(Error::format("corpus", format!("expected 3 columns in {line:?}")));
            };
            let features = read_features(&dir.join(rel))?;
            if features.nrows() == 0 || features.iter().any(|v| !v.is_finite()) {
                return Err(Error::format("corpus", format!("utterance {id} has empty or non-finite features")));
            }
            Ok(Utterance {
                id: id.to_string(),
                features,
                transcript: crate::alphabet::tokenize(text),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn example(id: &str, frames: usize) -> Example {
        Example {
            id: id.into(),
            features: Array2::ones((frames, 2)),
            targets: vec![],
        }
    }

    #[test]
    fn deltas_of_constant_are_zero() {
        let x = Array2::from_elem((5, 3), 2.5);
        let d = compute_deltas(x.view());
        assert_eq!(d.dim(), (5, 9));
        assert!(d.slice(s![.., 3..]).iter().all(|&v| v == 0.0));
        let one = compute_deltas(array![[1.0, -4.0]].view());
        assert_eq!(one, array![[1.0, -4.0, 0.0, 0.0, 0.0, 0.0]]);
    }

    #[test]
    fn deltas_of_a_ramp() {
        let c = 0.7;
        let x = Array2::from_shape_fn((12, 1), |(t, _)| c * t as f64);
        let d = compute_deltas(x.view());
        for t in 2..10 {
            assert!((d[[t, 1]] - c).abs() < 1e-12);
        }
        for t in 4..8 {
            assert!(d[[t, 2]].abs() < 1e-12);
        }
    }

    #[test]
    fn stacking_rules() {
        let x = array![[0., 1.], [2., 3.], [4., 5.], [6., 7.]];
        assert_eq!(stack_decimate(x.view()), array![[0., 1., 2., 3.], [4., 5., 6., 7.]]);
        assert_eq!(stack_decimate(array![[9., 8.]].view()), array![[9., 8., 0., 0.]]);
        let x5 = Array2::from_shape_fn((5, 1), |(t, _)| t as f64);
        assert_eq!(stack_decimate(x5.view()), array![[0., 1.], [2., 3.], [4., 0.]]);
    }

    #[test]
    fn aux_is_replicated() {
        let x = array![[1.0], [2.0]];
        assert_eq!(append_aux(x.view(), &[]), x);
        assert_eq!(append_aux(x.view(), &[7.0]), array![[1.0, 7.0], [2.0, 7.0]]);
    }

    #[test]
    fn dimension_arithmetic_40_120_240_340() {
        let p = FeaturePipeline { deltas: true, stack: true };
        assert_eq!(p.output_dim(40, 100), 340);
        let raw = Array2::zeros((7, 40));
        let out = p.apply(raw.view(), &vec![0.5; 100]);
        assert_eq!(compute_deltas(raw.view()).ncols(), 120);
        assert_eq!(stack_decimate(compute_deltas(raw.view()).view()).ncols(), 240);
        assert_eq!(out.dim(), (4, 340));
    }

    #[test]
    fn ascending_and_descending_batches() {
        let ex = vec![example("a", 3), example("b", 1), example("c", 2)];
        let asc = sort_and_batch(&ex, CurriculumOrder::Ascending, 2).unwrap();
        assert_eq!(asc[0].lengths, [1, 2]);
        assert_eq!(asc[1].lengths, [3]);
        assert!((asc[0].padding_waste - 0.25).abs() < 1e-15);
        assert_eq!(asc[1].padding_waste, 0.0);

        let desc = sort_and_batch(&ex, CurriculumOrder::Descending, 2).unwrap();
        assert_eq!(desc[0].lengths, [3, 2]);
        assert_eq!(desc[1].lengths, [1]);
        assert!((desc[0].padding_waste - (1.0 - 5.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_id_and_padding_is_zero() {
        let ex = vec![example("z", 2), example("a", 2), example("m", 1)];
        let b = sort_and_batch(&ex, CurriculumOrder::Ascending, 3).unwrap();
        assert_eq!(b[0].ids, ["m", "a", "z"]);
        assert_eq!(b[0].features.slice(s![0, 1.., ..]).sum(), 0.0);
        assert!(sort_and_batch(&[], CurriculumOrder::Ascending, 3).unwrap().is_empty());
    }

    #[test]
    fn synth_is_deterministic_and_noise_free_words_match_prototypes() {
        let spec = SynthSpec {
            count: 30,
            noise: 0.0,
            min_words: 1,
            max_words: 1,
            ..SynthSpec::default()
        };
        let a = synth_corpus(&spec).unwrap();
        assert_eq!(a, synth_corpus(&spec).unwrap());
        for u in &a.utterances {
            let w = a.words.iter().find(|w| w.text == u.transcript[0]).unwrap();
            assert_eq!(u.features, w.prototype);
        }
        let longer = synth_corpus(&SynthSpec { count: 40, ..spec }).unwrap();
        assert_eq!(&longer.utterances[..30], &a.utterances[..]);
    }

    #[test]
    fn letter_prototypes_compose_words() {
        let spec = SynthSpec {
            count: 1,
            letter_frames: 2,
            oov_words: 3,
            ..SynthSpec::default()
        };
        let c = synth_corpus(&spec).unwrap();
        let mut letter_rows = std::collections::HashMap::new();
        for w in c.words.iter().chain(&c.oov_words) {
            assert_eq!(w.prototype.nrows(), 2 * w.text.len());
            for (i, ch) in w.text.chars().enumerate() {
                let rows = w.prototype.slice(s![2 * i..2 * i + 2, ..]).to_owned();
                assert_eq!(letter_rows.entry(ch).or_insert_with(|| rows.clone()), &rows);
            }
        }
    }

    #[test]
    fn synth_never_repeats_adjacent_words() {
        let c = synth_corpus(&SynthSpec { count: 200, ..SynthSpec::default() }).unwrap();
        for u in &c.utterances {
            assert!(u.transcript.windows(2).all(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn corpus_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = synth_corpus(&SynthSpec { count: 5, ..SynthSpec::default() }).unwrap();
        write_corpus(dir.path(), &c.utterances).unwrap();
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in c.utterances.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.transcript, b.transcript);
            assert!(a.features.iter().zip(b.features.iter()).all(|(x, y)| (*x as f32) as f64 == *y));
        }
    }

    #[test]
    fn heldout_split_is_a_stable_partition() {
        let c = synth_corpus(&SynthSpec { count: 400, ..SynthSpec::default() }).unwrap();
        let (train, held) = split_heldout(c.utterances.clone(), 0.05);
        assert_eq!(train.len() + held.len(), 400);
        assert!(!held.is_empty() && held.len() < 60);
        let (_, held2) = split_heldout(c.utterances, 0.05);
        assert_eq!(held, held2);
    }
}
