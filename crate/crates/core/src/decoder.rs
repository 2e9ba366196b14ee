//! Greedy peak-picking decodes and spell-and-recognize hypotheses.

use std::fmt;
use std::path::Path;

use crate::alphabet::{CharSetVariant, CharSymbol, JointAlphabet, LabelId, LabelSpace, UNK_TOKEN};
use crate::ctc::{collapse_path, PosteriorLattice};
use crate::error::{Error, Result};

/// Per-frame winners of a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameArgmaxPath {
    pub labels: Vec<LabelId>,
    /// Posterior probability of each winner.
    pub scores: Vec<f64>,
}

/// Row-wise argmax; ties go to the lowest id.
pub fn frame_argmax(lattice: &PosteriorLattice) -> FrameArgmaxPath {
    let values = lattice.values();
    let probs = lattice.probabilities();
    let mut labels = Vec::with_capacity(lattice.frames());
    let mut scores = Vec::with_capacity(lattice.frames());
    for (t, row) in values.rows().into_iter().enumerate() {
        let mut best = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        labels.push(LabelId::from(best));
        scores.push(probs[[t, best]]);
    }
    FrameArgmaxPath { labels, scores }
}

/// Argmax path with repeats merged and blanks removed.
pub fn greedy_collapse(lattice: &PosteriorLattice) -> Vec<LabelId> {
    collapse_path(&frame_argmax(lattice).labels)
}

// ---------------------------------------------------------------------------
// Spell-and-recognize decodes over collapsed label sequences

/// Word labels only; characters are dropped and `UNK` stays literal.
pub fn sar_words(labels: &[LabelId], joint: &JointAlphabet) -> Vec<String> {
    labels
        .iter()
        .filter(|&&id| joint.is_word(id))
        .filter_map(|&id| joint.word_text(id).map(str::to_string))
        .collect()
}

/// A word assembled from character labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharWord {
    pub text: String,
    pub spelling: Vec<LabelId>,
    /// False unless the spelling runs from a begin form to an end form.
    /// Simple-charset spellings carry no positions and are always complete.
    pub complete: bool,
}

fn spelling_complete(spelling: &[LabelId], joint: &JointAlphabet) -> bool {
    if joint.charset().variant() == CharSetVariant::Simple {
        return !spelling.is_empty();
    }
    let sym = |id: &LabelId| joint.char_symbol(*id);
    match (spelling.first().and_then(sym), spelling.last().and_then(sym)) {
        (Some(a), Some(b)) => a.begins_word() && b.ends_word(),
        _ => false,
    }
}

fn char_word(spelling: Vec<LabelId>, joint: &JointAlphabet) -> CharWord {
    CharWord {
        text: joint.spelled_text(&spelling).to_uppercase(),
        complete: spelling_complete(&spelling, joint),
        spelling,
    }
}

/// Character labels only. Positional spellings are segmented at begin forms
/// and separators are ignored; simple spellings are segmented at separators.
pub fn sar_chars(labels: &[LabelId], joint: &JointAlphabet) -> Vec<CharWord> {
    let simple = joint.charset().variant() == CharSetVariant::Simple;
    let mut words = Vec::new();
    let mut current: Vec<LabelId> = Vec::new();
    for &id in labels {
        let Some(sym) = joint.char_symbol(id) else { continue };
        if sym == CharSymbol::Separator {
            if simple && !current.is_empty() {
                words.push(char_word(std::mem::take(&mut current), joint));
            }
            continue;
        }
        if sym.begins_word() && !current.is_empty() {
            words.push(char_word(std::mem::take(&mut current), joint));
        }
        current.push(id);
    }
    if !current.is_empty() {
        words.push(char_word(current, joint));
    }
    words
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordSource {
    FromWord,
    FromCharacters,
    Incomplete,
}

impl WordSource {
    pub fn name(self) -> &'static str {
        match self {
            WordSource::FromWord => "from-word",
            WordSource::FromCharacters => "from-characters",
            WordSource::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypWord {
    pub word: String,
    /// Joint character ids (separators excluded) preceding the word label.
    pub spelling: Vec<LabelId>,
    /// The closing word label; `None` for trailing characters.
    pub label: Option<LabelId>,
    pub source: WordSource,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SarHypothesis {
    pub words: Vec<HypWord>,
}

impl SarHypothesis {
    /// Final word sequence: every word, including character fallbacks.
    pub fn transcript(&self) -> Vec<String> {
        self.words.iter().map(|w| w.word.clone()).collect()
    }

    /// Words that closed with a word label, as the word decode would see them.
    pub fn word_track(&self, joint: &JointAlphabet) -> Vec<String> {
        self.words
            .iter()
            .filter_map(|w| w.label.and_then(|id| joint.word_text(id)).map(str::to_string))
            .collect()
    }

    /// The label sequence the hypothesis was read from, with `_` between
    /// word groups.
    pub fn labels(&self, joint: &JointAlphabet) -> Vec<LabelId> {
        let mut out = Vec::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                out.push(joint.separator_id());
            }
            out.extend(&w.spelling);
            out.extend(w.label);
        }
        out
    }

    /// `spelling WORD _ spelling WORD ...` with symbol names for characters.
    pub fn render(&self, joint: &JointAlphabet) -> String {
        self.labels(joint)
            .iter()
            .filter_map(|&id| joint.symbol_name(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Inverse of [`SarHypothesis::render`].
    pub fn parse(text: &str, joint: &JointAlphabet) -> Result<Self> {
        let labels = text
            .split_whitespace()
            .map(|tok| label_for_token(tok, joint))
            .collect::<Result<Vec<_>>>()?;
        Ok(sar_switched(&labels, joint))
    }
}

fn label_for_token(tok: &str, joint: &JointAlphabet) -> Result<LabelId> {
    if let Some(sym) = CharSymbol::parse(tok) {
        if let Some(local) = joint.charset().id(sym) {
            return Ok(joint.char_to_joint(local));
        }
    }
    if tok == UNK_TOKEN {
        return Ok(joint.vocab().unk_id());
    }
    joint
        .vocab()
        .id(tok)
        .ok_or_else(|| Error::format("hypothesis", format!("unknown token {tok:?}")))
}

/// Switched decode: word labels pass through; `UNK` is replaced by the word
/// spelled since the previous word label. The character buffer is cleared at
/// every word label.
pub fn sar_switched(labels: &[LabelId], joint: &JointAlphabet) -> SarHypothesis {
    let mut words = Vec::new();
    let mut buffer: Vec<LabelId> = Vec::new();
    for &id in labels {
        if joint.is_char(id) {
            if id != joint.separator_id() {
                buffer.push(id);
            }
            continue;
        }
        if !joint.is_word(id) {
            continue;
        }
        let spelling = std::mem::take(&mut buffer);
        let (word, source) = if joint.is_unk(id) {
            if spelling.is_empty() {
                (UNK_TOKEN.to_string(), WordSource::Incomplete)
            } else {
                (joint.spelled_text(&spelling).to_uppercase(), WordSource::FromCharacters)
            }
        } else {
            let text = joint.word_text(id).unwrap_or(UNK_TOKEN).to_string();
            (text, WordSource::FromWord)
        };
        words.push(HypWord {
            word,
            spelling,
            label: Some(id),
            source,
        });
    }
    if !buffer.is_empty() {
        words.push(HypWord {
            word: joint.spelled_text(&buffer).to_uppercase(),
            spelling: buffer,
            label: None,
            source: WordSource::Incomplete,
        });
    }
    SarHypothesis { words }
}

pub fn sar_decode_word(lattice: &PosteriorLattice, joint: &JointAlphabet) -> Vec<String> {
    sar_words(&greedy_collapse(lattice), joint)
}

pub fn sar_decode_chars(lattice: &PosteriorLattice, joint: &JointAlphabet) -> Vec<CharWord> {
    sar_chars(&greedy_collapse(lattice), joint)
}

pub fn sar_decode_switched(lattice: &PosteriorLattice, joint: &JointAlphabet) -> SarHypothesis {
    sar_switched(&greedy_collapse(lattice), joint)
}

// ---------------------------------------------------------------------------
// Decoding utterances

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DecodeMode {
    #[default]
    Word,
    Chars,
    Switched,
}

impl DecodeMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "word" | "words" => Some(DecodeMode::Word),
            "chars" | "characters" => Some(DecodeMode::Chars),
            "switched" => Some(DecodeMode::Switched),
            _ => None,
        }
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Word => "word",
            DecodeMode::Chars => "chars",
            DecodeMode::Switched => "switched",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub words: Vec<String>,
    /// Annotated rendering for joint label spaces.
    pub sar: Option<String>,
}

/// Decodes one lattice. Plain word models ignore `mode`.
pub fn decode_lattice(lattice: &PosteriorLattice, labels: &LabelSpace, mode: DecodeMode) -> Decoded {
    let collapsed = greedy_collapse(lattice);
    match labels {
        LabelSpace::Words(v) => Decoded {
            words: collapsed
                .iter()
                .filter_map(|&id| v.word(id).map(str::to_string))
                .collect(),
            sar: None,
        },
        LabelSpace::Joint(j) => {
            let hyp = sar_switched(&collapsed, j);
            let words = match mode {
                DecodeMode::Word => sar_words(&collapsed, j),
                DecodeMode::Chars => sar_chars(&collapsed, j).into_iter().map(|w| w.text).collect(),
                DecodeMode::Switched => hyp.transcript(),
            };
            Decoded {
                words,
                sar: Some(hyp.render(j)),
            }
        }
    }
}

/// Writes `id<TAB>words` lines, plus `id<TAB>rendering` lines to a sibling
/// file with a `.sar` extension when any entry carries an annotation.
pub fn write_transcripts(path: &Path, entries: &[(String, Decoded)]) -> Result<()> {
    let text: String = entries
        .iter()
        .map(|(id, d)| format!("{id}\t{}\n", d.words.join(" ")))
        .collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    if entries.iter().any(|(_, d)| d.sar.is_some()) {
        let sar_path = path.with_extension("sar");
        let text: String = entries
            .iter()
            .map(|(id, d)| format!("{id}\t{}\n", d.sar.as_deref().unwrap_or("")))
            .collect();
        std::fs::write(&sar_path, text).map_err(|e| Error::io(&sar_path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_vocabulary, CharSet};
    use ndarray::Array2;

    fn joint() -> JointAlphabet {
        let v = build_vocabulary(&["THE CAT IS BLACK"], 1).unwrap();
        JointAlphabet::new(v, CharSet::positional())
    }

    fn ids(names: &str, j: &JointAlphabet) -> Vec<LabelId> {
        names.split_whitespace().map(|t| label_for_token(t, j).unwrap()).collect()
    }

    fn one_hot(path: &[usize], k: usize) -> PosteriorLattice {
        let mut m = Array2::zeros((path.len(), k));
        for (t, &l) in path.iter().enumerate() {
            m[[t, l]] = 1.0;
        }
        PosteriorLattice::from_probabilities(m).unwrap()
    }

    #[test]
    fn collapse_examples() {
        let ids = |v: &[u32]| v.iter().map(|&i| LabelId(i)).collect::<Vec<_>>();
        assert_eq!(greedy_collapse(&one_hot(&[0, 1, 1, 0, 2], 3)), ids(&[1, 2]));
        assert_eq!(greedy_collapse(&one_hot(&[1, 0, 1], 3)), ids(&[1, 1]));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let lat = PosteriorLattice::from_probabilities(Array2::from_elem((2, 4), 0.25)).unwrap();
        assert_eq!(frame_argmax(&lat).labels, [LabelId(0), LabelId(0)]);
        let lat = PosteriorLattice::from_logits(ndarray::array![[0.0, 3.0, 3.0]]).unwrap();
        assert_eq!(frame_argmax(&lat).labels, [LabelId(1)]);
    }

    #[test]
    fn word_decode() {
        let j = joint();
        assert_eq!(sar_words(&ids("b-t h e-e THE", &j), &j), ["THE"]);
        assert_eq!(sar_words(&ids("b-x y e-z UNK", &j), &j), ["UNK"]);
        assert!(sar_words(&[], &j).is_empty());
    }

    #[test]
    fn char_decode() {
        let j = joint();
        let w = sar_chars(&ids("b-c a e-t b-i e-s", &j), &j);
        assert_eq!(w.iter().map(|w| w.text.as_str()).collect::<Vec<_>>(), ["CAT", "IS"]);
        assert!(w.iter().all(|w| w.complete));
        let w = sar_chars(&ids("b-s u mm e r e-y", &j), &j);
        assert_eq!(w[0].text, "SUMMERY");
        let w = sar_chars(&ids("a e-t _ b-i s", &j), &j);
        assert_eq!((w[0].text.as_str(), w[0].complete), ("AT", false));
        assert_eq!((w[1].text.as_str(), w[1].complete), ("IS", false));
        assert!(sar_chars(&[], &j).is_empty());
    }

    #[test]
    fn switched_decode() {
        let j = joint();
        let h = sar_switched(&ids("b-m u r d e r i n e-g UNK", &j), &j);
        assert_eq!(h.words[0].word, "MURDERING");
        assert_eq!(h.words[0].source, WordSource::FromCharacters);
        let h = sar_switched(&ids("b-t h e-e THE", &j), &j);
        assert_eq!((h.words[0].word.as_str(), h.words[0].source), ("THE", WordSource::FromWord));
        let h = sar_switched(&ids("b-a e-b UNK UNK", &j), &j);
        assert_eq!(h.words[1].word, "UNK");
        assert_eq!(h.words[1].source, WordSource::Incomplete);
    }

    #[test]
    fn rendering() {
        let j = joint();
        let h = sar_switched(&ids("b-t h e-e THE", &j), &j);
        assert_eq!(h.render(&j), "b-t h e-e THE");
        assert_eq!(SarHypothesis::default().render(&j), "");
        let text = "b-m u r d e r i n e-g UNK _ b-t h e-e THE _ UNK _ b-c a";
        let h = SarHypothesis::parse(text, &j).unwrap();
        assert_eq!(h.render(&j), text);
        assert_eq!(h.transcript(), ["MURDERING", "THE", "UNK", "CA"]);
        assert_eq!(h.word_track(&j), ["UNK", "THE", "UNK"]);
        assert!(SarHypothesis::parse("b-t NOTAWORD", &j).is_err());
    }

    #[test]
    fn transcript_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hyp.tsv");
        let entries = vec![(
            "u1".to_string(),
            Decoded {
                words: vec!["THE".into()],
                sar: Some("b-t h e-e THE".into()),
            },
        )];
        write_transcripts(&path, &entries).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "u1\tTHE\n");
        assert_eq!(std::fs::read_to_string(path.with_extension("sar")).unwrap(), "u1\tb-t h e-e THE\n");
    }
}
