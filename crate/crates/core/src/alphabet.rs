//! Label spaces: the thresholded word vocabulary, the two character sets,
//! the joint word+character alphabet used by spell-and-recognize models, and
//! construction/inversion of spell-then-recognize target sequences.
//!
//! Every label space reserves id 0 for the CTC blank. A [`Vocabulary`] puts
//! `UNK` at id 1 and the retained words (sorted) at 2.., so word ids are the
//! same in a plain word model and in a [`JointAlphabet`]. Character ids in a
//! joint alphabet follow the word range.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Index into a label space. Id 0 is always the blank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u32);

impl LabelId {
    pub const BLANK: LabelId = LabelId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_blank(self) -> bool {
        self.0 == 0
    }
}

impl From<usize> for LabelId {
    fn from(i: usize) -> Self {
        LabelId(i as u32)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const UNK_TOKEN: &str = "UNK";
pub const UNK_ID: LabelId = LabelId(1);

const HEADER_PREFIX: &str = "#a2w-alphabet v1";

/// Splits a transcript on whitespace and upper-cases every token.
pub fn tokenize(transcript: &str) -> Vec<String> {
    transcript
        .split_whitespace()
        .map(|w| w.to_uppercase())
        .collect()
}

/// Word label space: blank, `UNK`, then every word seen at least `min_count`
/// times, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, LabelId>,
    min_count: usize,
}

impl Vocabulary {
    fn from_words(words: Vec<String>, min_count: usize) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), LabelId::from(i + 2)))
            .collect();
        Vocabulary {
            words,
            index,
            min_count,
        }
    }

    pub fn unk_id(&self) -> LabelId {
        UNK_ID
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Retained words, excluding `UNK`.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of word labels including `UNK`.
    pub fn len_with_unk(&self) -> usize {
        self.words.len() + 1
    }

    /// Size of the label space including the blank.
    pub fn size(&self) -> usize {
        self.words.len() + 2
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn id(&self, word: &str) -> Option<LabelId> {
        self.index.get(word).copied()
    }

    pub fn lookup(&self, word: &str) -> LabelId {
        self.id(word).unwrap_or(UNK_ID)
    }

    /// Text of a word label; `UNK` for the unknown id, `None` outside the range.
    pub fn word(&self, id: LabelId) -> Option<&str> {
        match id.index() {
            1 => Some(UNK_TOKEN),
            i if i >= 2 => self.words.get(i - 2).map(String::as_str),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_PREFIX} words min_count={}\n", self.min_count);
        out.push_str(UNK_TOKEN);
        out.push('\n');
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format("vocabulary", "empty file"))?;
        let attrs = parse_header(header, "words")?;
        let min_count = attr_usize(&attrs, "min_count")?;
        match lines.next() {
            Some(UNK_TOKEN) => {}
            other => {
                return Err(Error::format(
                    "vocabulary",
                    format!("expected {UNK_TOKEN} on line 2, found {other:?}"),
                ))
            }
        }
        let words: Vec<String> = lines.map(str::to_string).collect();
        check_unique("vocabulary", &words)?;
        Ok(Vocabulary::from_words(words, min_count))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Counts whitespace tokens over `corpus` and keeps the words that occur at
/// least `min_count` times.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_count == 0 {
        return Err(Error::Config {
            key: "min_count".into(),
            value: "0".into(),
        });
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in corpus {
        for w in tokenize(line.as_ref()) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let words = counts
        .into_iter()
        .filter(|(w, c)| *c >= min_count && w != UNK_TOKEN)
        .map(|(w, _)| w)
        .collect();
    Ok(Vocabulary::from_words(words, min_count))
}

pub fn encode_words<S: AsRef<str>>(transcript: &[S], vocab: &Vocabulary) -> Vec<LabelId> {
    transcript
        .iter()
        .map(|w| vocab.lookup(&w.as_ref().to_uppercase()))
        .collect()
}

/// Maps word ids back to text. Ids outside the word range render as `UNK`.
pub fn decode_words(ids: &[LabelId], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .map(|&id| vocab.word(id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Character sets

/// Characters a word may be spelled with. The simple set adds `_`.
pub const BASE_CHARS: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9',
    '\'', '-', '.', '&',
];

pub const SEPARATOR: char = '_';

pub const SIMPLE_CHARSET_SIZE: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CharSetVariant {
    Simple,
    Positional,
}

impl CharSetVariant {
    pub fn name(self) -> &'static str {
        match self {
            CharSetVariant::Simple => "simple",
            CharSetVariant::Positional => "positional",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simple" => Some(CharSetVariant::Simple),
            "positional" => Some(CharSetVariant::Positional),
            _ => None,
        }
    }
}

/// Position of a character within its word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CharForm {
    Middle,
    Begin,
    End,
    /// Single-character word: begins and ends the word at once.
    BeginEnd,
}

impl CharForm {
    pub fn begins_word(self) -> bool {
        matches!(self, CharForm::Begin | CharForm::BeginEnd)
    }

    pub fn ends_word(self) -> bool {
        matches!(self, CharForm::End | CharForm::BeginEnd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CharSymbol {
    /// Inter-word whitespace `_`.
    Separator,
    Single { ch: char, form: CharForm },
    /// A doubled letter (`mm`); `e-2f` when it ends the word.
    Double { ch: char, word_final: bool },
}

impl CharSymbol {
    pub fn name(&self) -> String {
        match *self {
            CharSymbol::Separator => SEPARATOR.to_string(),
            CharSymbol::Single { ch, form } => match form {
                CharForm::Middle => ch.to_string(),
                CharForm::Begin => format!("b-{ch}"),
                CharForm::End => format!("e-{ch}"),
                CharForm::BeginEnd => format!("be-{ch}"),
            },
            CharSymbol::Double { ch, word_final } => {
                if word_final {
                    format!("e-2{ch}")
                } else {
                    format!("{ch}{ch}")
                }
            }
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let one = |s: &str| {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) if BASE_CHARS.contains(&c) => Some(c),
                _ => None,
            }
        };
        if name == "_" {
            return Some(CharSymbol::Separator);
        }
        if let Some(rest) = name.strip_prefix("be-") {
            return one(rest).map(|ch| CharSymbol::Single { ch, form: CharForm::BeginEnd });
        }
        if let Some(rest) = name.strip_prefix("b-") {
            return one(rest).map(|ch| CharSymbol::Single { ch, form: CharForm::Begin });
        }
        if let Some(rest) = name.strip_prefix("e-2") {
            if let Some(ch) = one(rest).filter(char::is_ascii_lowercase) {
                return Some(CharSymbol::Double { ch, word_final: true });
            }
        }
        if let Some(rest) = name.strip_prefix("e-") {
            return one(rest).map(|ch| CharSymbol::Single { ch, form: CharForm::End });
        }
        if let Some(ch) = one(name) {
            return Some(CharSymbol::Single { ch, form: CharForm::Middle });
        }
        let cs: Vec<char> = name.chars().collect();
        if cs.len() == 2 && cs[0] == cs[1] && cs[0].is_ascii_lowercase() {
            return Some(CharSymbol::Double { ch: cs[0], word_final: false });
        }
        None
    }

    /// Base characters this symbol stands for (empty for the separator).
    pub fn expand(&self, out: &mut String) {
        match *self {
            CharSymbol::Separator => {}
            CharSymbol::Single { ch, .. } => out.push(ch),
            CharSymbol::Double { ch, .. } => {
                out.push(ch);
                out.push(ch);
            }
        }
    }

    pub fn begins_word(&self) -> bool {
        matches!(self, CharSymbol::Single { form, .. } if form.begins_word())
    }

    pub fn ends_word(&self) -> bool {
        match self {
            CharSymbol::Single { form, .. } => form.ends_word(),
            CharSymbol::Double { word_final, .. } => *word_final,
            CharSymbol::Separator => false,
        }
    }
}

/// A character label space. Local ids run 1..=len (0 is the blank).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharSet {
    variant: CharSetVariant,
    symbols: Vec<CharSymbol>,
    index: HashMap<CharSymbol, LabelId>,
}

impl CharSet {
    fn from_symbols(variant: CharSetVariant, symbols: Vec<CharSymbol>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, LabelId::from(i + 1)))
            .collect();
        CharSet {
            variant,
            symbols,
            index,
        }
    }

    /// a–z, 0–9, `_`, apostrophe, hyphen, period, ampersand.
    pub fn simple() -> Self {
        let mut symbols: Vec<CharSymbol> = BASE_CHARS
            .iter()
            .take(36)
            .map(|&ch| CharSymbol::Single { ch, form: CharForm::Middle })
            .collect();
        symbols.push(CharSymbol::Separator);
        symbols.extend(
            BASE_CHARS[36..]
                .iter()
                .map(|&ch| CharSymbol::Single { ch, form: CharForm::Middle }),
        );
        debug_assert_eq!(symbols.len(), SIMPLE_CHARSET_SIZE);
        CharSet::from_symbols(CharSetVariant::Simple, symbols)
    }

    /// Separator, then begin/middle/end/begin-end forms of every base
    /// character, then a middle and a word-final doubled symbol per letter.
    pub fn positional() -> Self {
        let mut symbols = vec![CharSymbol::Separator];
        for &ch in BASE_CHARS {
            for form in [CharForm::Begin, CharForm::Middle, CharForm::End, CharForm::BeginEnd] {
                symbols.push(CharSymbol::Single { ch, form });
            }
        }
        for ch in 'a'..='z' {
            symbols.push(CharSymbol::Double { ch, word_final: false });
            symbols.push(CharSymbol::Double { ch, word_final: true });
        }
        CharSet::from_symbols(CharSetVariant::Positional, symbols)
    }

    pub fn new(variant: CharSetVariant) -> Self {
        match variant {
            CharSetVariant::Simple => CharSet::simple(),
            CharSetVariant::Positional => CharSet::positional(),
        }
    }

    pub fn variant(&self) -> CharSetVariant {
        self.variant
    }

    /// Number of symbols, excluding the blank.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[CharSymbol] {
        &self.symbols
    }

    pub fn id(&self, sym: CharSymbol) -> Option<LabelId> {
        self.index.get(&sym).copied()
    }

    pub fn symbol(&self, id: LabelId) -> Option<CharSymbol> {
        id.index()
            .checked_sub(1)
            .and_then(|i| self.symbols.get(i))
            .copied()
    }

    pub fn separator_id(&self) -> LabelId {
        self.id(CharSymbol::Separator)
            .expect("both inventories contain the separator")
    }

    /// Spells `word` (case-insensitive) as local character ids.
    pub fn spell(&self, word: &str) -> Result<Vec<LabelId>> {
        let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
        if chars.is_empty() {
            return Err(Error::format("word", "cannot spell an empty word"));
        }
        if let Some(&ch) = chars.iter().find(|c| !BASE_CHARS.contains(c)) {
            return Err(Error::UnknownCharacter {
                word: word.to_string(),
                ch,
            });
        }
        let symbols = match self.variant {
            CharSetVariant::Simple => chars
                .iter()
                .map(|&ch| CharSymbol::Single { ch, form: CharForm::Middle })
                .collect(),
            CharSetVariant::Positional => positional_symbols(&chars),
        };
        Ok(symbols
            .into_iter()
            .map(|s| self.id(s).expect("spelling only uses inventory symbols"))
            .collect())
    }

    /// Base-character text of a spelled sequence: doubled symbols expanded,
    /// position prefixes and separators dropped.
    pub fn spelled_text(&self, ids: &[LabelId]) -> String {
        let mut out = String::new();
        for &id in ids {
            if let Some(sym) = self.symbol(id) {
                sym.expand(&mut out);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_PREFIX} {}\n", self.variant.name());
        for s in &self.symbols {
            out.push_str(&s.name());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format("charset", "empty file"))?;
        let variant = header
            .strip_prefix(HEADER_PREFIX)
            .map(str::trim)
            .and_then(CharSetVariant::parse)
            .ok_or_else(|| Error::format("charset", format!("bad header {header:?}")))?;
        let symbols = parse_char_lines(lines)?;
        if variant == CharSetVariant::Simple && symbols.len() != SIMPLE_CHARSET_SIZE {
            return Err(Error::format(
                "charset",
                format!("simple set has {} symbols, expected {SIMPLE_CHARSET_SIZE}", symbols.len()),
            ));
        }
        Ok(CharSet::from_symbols(variant, symbols))
    }
}

fn parse_char_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Result<Vec<CharSymbol>> {
    let mut seen = std::collections::HashSet::new();
    lines
        .map(|l| {
            let sym = CharSymbol::parse(l)
                .ok_or_else(|| Error::format("charset", format!("unknown symbol {l:?}")))?;
            if !seen.insert(sym) {
                return Err(Error::format("charset", format!("duplicate symbol {l:?}")));
            }
            Ok(sym)
        })
        .collect()
}

/// Positional spelling. The first character takes the begin form (begin-end
/// for one-letter words); the rest are consumed left to right, pairing equal
/// adjacent letters into doubled symbols.
fn positional_symbols(chars: &[char]) -> Vec<CharSymbol> {
    let n = chars.len();
    if n == 1 {
        return vec![CharSymbol::Single { ch: chars[0], form: CharForm::BeginEnd }];
    }
    let mut out = vec![CharSymbol::Single { ch: chars[0], form: CharForm::Begin }];
    let mut i = 1;
    while i < n {
        let ch = chars[i];
        if i + 1 < n && chars[i + 1] == ch && ch.is_ascii_lowercase() {
            out.push(CharSymbol::Double { ch, word_final: i + 2 == n });
            i += 2;
        } else {
            let form = if i + 1 == n { CharForm::End } else { CharForm::Middle };
            out.push(CharSymbol::Single { ch, form });
            i += 1;
        }
    }
    out
}

/// Shorthand for [`CharSet::spell`].
pub fn spell_word(word: &str, charset: &CharSet) -> Result<Vec<LabelId>> {
    charset.spell(word)
}

// ---------------------------------------------------------------------------
// Joint alphabet

/// One softmax over blank, words (incl. `UNK`), and characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointAlphabet {
    vocab: Vocabulary,
    charset: CharSet,
}

impl JointAlphabet {
    pub fn new(vocab: Vocabulary, charset: CharSet) -> Self {
        JointAlphabet { vocab, charset }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn charset(&self) -> &CharSet {
        &self.charset
    }

    pub fn size(&self) -> usize {
        1 + self.vocab.len_with_unk() + self.charset.len()
    }

    /// Half-open id range of word labels (`UNK` first).
    pub fn word_range(&self) -> std::ops::Range<usize> {
        1..1 + self.vocab.len_with_unk()
    }

    pub fn char_range(&self) -> std::ops::Range<usize> {
        let start = self.word_range().end;
        start..start + self.charset.len()
    }

    pub fn is_word(&self, id: LabelId) -> bool {
        self.word_range().contains(&id.index())
    }

    pub fn is_char(&self, id: LabelId) -> bool {
        self.char_range().contains(&id.index())
    }

    pub fn is_unk(&self, id: LabelId) -> bool {
        id == UNK_ID
    }

    pub fn char_to_joint(&self, local: LabelId) -> LabelId {
        LabelId::from(self.char_range().start + local.index() - 1)
    }

    pub fn joint_to_char(&self, id: LabelId) -> Option<LabelId> {
        self.is_char(id)
            .then(|| LabelId::from(id.index() - self.char_range().start + 1))
    }

    pub fn char_symbol(&self, id: LabelId) -> Option<CharSymbol> {
        self.joint_to_char(id).and_then(|c| self.charset.symbol(c))
    }

    pub fn separator_id(&self) -> LabelId {
        self.char_to_joint(self.charset.separator_id())
    }

    pub fn word_text(&self, id: LabelId) -> Option<&str> {
        if self.is_word(id) {
            self.vocab.word(id)
        } else {
            None
        }
    }

    /// Printable name of any non-blank label.
    pub fn symbol_name(&self, id: LabelId) -> Option<String> {
        if let Some(w) = self.word_text(id) {
            return Some(w.to_string());
        }
        self.char_symbol(id).map(|s| s.name())
    }

    /// Spelling of `word` as joint ids.
    pub fn spell(&self, word: &str) -> Result<Vec<LabelId>> {
        Ok(self
            .charset
            .spell(word)?
            .into_iter()
            .map(|c| self.char_to_joint(c))
            .collect())
    }

    /// Base-character text of joint character ids; other ids are ignored.
    pub fn spelled_text(&self, ids: &[LabelId]) -> String {
        let mut out = String::new();
        for &id in ids {
            if let Some(sym) = self.char_symbol(id) {
                sym.expand(&mut out);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{HEADER_PREFIX} joint-{} min_count={} words={}\n",
            self.charset.variant.name(),
            self.vocab.min_count,
            self.vocab.len_with_unk()
        );
        out.push_str(UNK_TOKEN);
        out.push('\n');
        for w in &self.vocab.words {
            out.push_str(w);
            out.push('\n');
        }
        for s in &self.charset.symbols {
            out.push_str(&s.name());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format("alphabet", "empty file"))?;
        let body = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::format("alphabet", format!("bad header {header:?}")))?;
        let variant = body
            .split_whitespace()
            .next()
            .and_then(|v| v.strip_prefix("joint-"))
            .and_then(CharSetVariant::parse)
            .ok_or_else(|| Error::format("alphabet", format!("bad variant in {header:?}")))?;
        let attrs = parse_attrs(body.split_whitespace().skip(1))?;
        let min_count = attr_usize(&attrs, "min_count")?;
        let n_words = attr_usize(&attrs, "words")?;
        let all: Vec<&str> = lines.collect();
        if n_words == 0 || all.len() < n_words || all[0] != UNK_TOKEN {
            return Err(Error::format("alphabet", "word section is malformed"));
        }
        let words: Vec<String> = all[1..n_words].iter().map(|s| s.to_string()).collect();
        check_unique("alphabet", &words)?;
        let symbols = parse_char_lines(all[n_words..].iter().copied())?;
        Ok(JointAlphabet::new(
            Vocabulary::from_words(words, min_count),
            CharSet::from_symbols(variant, symbols),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_header(header: &str, variant: &str) -> Result<BTreeMap<String, String>> {
    let body = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::format("alphabet", format!("bad header {header:?}")))?;
    let mut parts = body.split_whitespace();
    if parts.next() != Some(variant) {
        return Err(Error::format("alphabet", format!("expected variant {variant} in {header:?}")));
    }
    parse_attrs(parts)
}

fn parse_attrs<'a>(parts: impl Iterator<Item = &'a str>) -> Result<BTreeMap<String, String>> {
    parts
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::format("alphabet", format!("bad header attribute {p:?}")))
        })
        .collect()
}

fn attr_usize(attrs: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    attrs
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format("alphabet", format!("missing or bad {key}")))
}

fn check_unique(what: &'static str, words: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for w in words {
        if w.is_empty() || w == UNK_TOKEN || !seen.insert(w) {
            return Err(Error::format(what, format!("bad or duplicate word {w:?}")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spell-and-recognize targets

/// Interleaved spell-then-recognize labels for one transcript.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SarTargetSequence {
    pub labels: Vec<LabelId>,
    pub transcript: Vec<String>,
}

/// `spelling WORD _ spelling WORD ...` over the joint alphabet. OOV words keep
/// their spelling and carry the `UNK` label.
pub fn build_sar_targets<S: AsRef<str>>(
    transcript: &[S],
    joint: &JointAlphabet,
) -> Result<SarTargetSequence> {
    let mut labels = Vec::new();
    let mut words = Vec::with_capacity(transcript.len());
    for (i, w) in transcript.iter().enumerate() {
        let w = w.as_ref().to_uppercase();
        if i > 0 {
            labels.push(joint.separator_id());
        }
        labels.extend(joint.spell(&w)?);
        labels.push(joint.vocab().lookup(&w));
        words.push(w);
    }
    Ok(SarTargetSequence {
        labels,
        transcript: words,
    })
}

/// One word group recovered from a spell-and-recognize label sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SarSegment {
    /// Closing word label; `None` for trailing characters with no word.
    pub word: Option<LabelId>,
    /// Character ids (joint space) preceding the word, separators removed.
    pub spelling: Vec<LabelId>,
    /// False when the word label is missing or, for the positional set, the
    /// spelling does not run from a begin form to an end form.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SarInversion {
    pub segments: Vec<SarSegment>,
}

impl SarInversion {
    /// `(word, spelling)` text pairs; a missing word label yields "".
    pub fn pairs(&self, joint: &JointAlphabet) -> Vec<(String, String)> {
        self.segments
            .iter()
            .map(|s| {
                let word = s
                    .word
                    .and_then(|id| joint.word_text(id))
                    .unwrap_or("")
                    .to_string();
                (word, joint.spelled_text(&s.spelling))
            })
            .collect()
    }

    /// Word track with every `UNK` replaced by its upper-cased spelling.
    pub fn words(&self, joint: &JointAlphabet) -> Vec<String> {
        self.segments
            .iter()
            .filter_map(|s| {
                let id = s.word?;
                if joint.is_unk(id) && !s.spelling.is_empty() {
                    Some(joint.spelled_text(&s.spelling).to_uppercase())
                } else {
                    joint.word_text(id).map(str::to_string)
                }
            })
            .collect()
    }
}

/// Splits a label sequence at word labels. Blanks and separators are skipped.
pub fn invert_sar_targets(labels: &[LabelId], joint: &JointAlphabet) -> SarInversion {
    let positional = joint.charset().variant() == CharSetVariant::Positional;
    let sep = joint.separator_id();
    let mut segments = Vec::new();
    let mut spelling: Vec<LabelId> = Vec::new();
    let well_formed = |sp: &[LabelId]| {
        if sp.is_empty() {
            return false;
        }
        if !positional {
            return true;
        }
        let first = joint.char_symbol(sp[0]);
        let last = joint.char_symbol(sp[sp.len() - 1]);
        let interior_ok = sp.iter().enumerate().all(|(i, &id)| {
            let s = joint.char_symbol(id).expect("spelling holds characters only");
            (i == 0 || !s.begins_word()) && (i + 1 == sp.len() || !s.ends_word())
        });
        first.is_some_and(|s| s.begins_word()) && last.is_some_and(|s| s.ends_word()) && interior_ok
    };
    for &id in labels {
        if id.is_blank() || id == sep {
            continue;
        }
        if joint.is_word(id) {
            let complete = well_formed(&spelling);
            segments.push(SarSegment {
                word: Some(id),
                spelling: std::mem::take(&mut spelling),
                complete,
            });
        } else if joint.is_char(id) {
            spelling.push(id);
        }
    }
    if !spelling.is_empty() {
        segments.push(SarSegment {
            word: None,
            spelling,
            complete: false,
        });
    }
    SarInversion { segments }
}

// ---------------------------------------------------------------------------
// Label spaces

/// The output label space of a model: plain words, or words plus characters
/// trained with spell-and-recognize targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelSpace {
    Words(Vocabulary),
    Joint(JointAlphabet),
}

impl LabelSpace {
    pub fn size(&self) -> usize {
        match self {
            LabelSpace::Words(v) => v.size(),
            LabelSpace::Joint(j) => j.size(),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            LabelSpace::Words(v) => v,
            LabelSpace::Joint(j) => j.vocab(),
        }
    }

    pub fn joint(&self) -> Option<&JointAlphabet> {
        match self {
            LabelSpace::Words(_) => None,
            LabelSpace::Joint(j) => Some(j),
        }
    }

    /// CTC target for a transcript.
    pub fn targets<S: AsRef<str>>(&self, transcript: &[S]) -> Result<Vec<LabelId>> {
        match self {
            LabelSpace::Words(v) => Ok(encode_words(transcript, v)),
            LabelSpace::Joint(j) => Ok(build_sar_targets(transcript, j)?.labels),
        }
    }

    /// `words`, `joint-simple` or `joint-positional`.
    pub fn kind(&self) -> String {
        match self {
            LabelSpace::Words(_) => "words".into(),
            LabelSpace::Joint(j) => format!("joint-{}", j.charset().variant().name()),
        }
    }

    /// Flat `labels.*` entries for a checkpoint config. Word lists are
    /// space-separated; character sets are implied by the kind.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let v = self.vocab();
        let mut kv = BTreeMap::new();
        kv.insert("labels.kind".into(), self.kind());
        kv.insert("labels.min_count".into(), v.min_count().to_string());
        kv.insert("labels.words".into(), v.words().join(" "));
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::format("label space", format!("missing {k}")))
        };
        let min_count = get("labels.min_count")?
            .parse()
            .map_err(|_| Error::format("label space", "bad labels.min_count"))?;
        let words: Vec<String> = get("labels.words")?.split_whitespace().map(str::to_string).collect();
        check_unique("label space", &words)?;
        let vocab = Vocabulary::from_words(words, min_count);
        let kind = get("labels.kind")?;
        if kind == "words" {
            return Ok(LabelSpace::Words(vocab));
        }
        let variant = kind
            .strip_prefix("joint-")
            .and_then(CharSetVariant::parse)
            .ok_or_else(|| Error::format("label space", format!("unknown kind {kind:?}")))?;
        Ok(LabelSpace::Joint(JointAlphabet::new(vocab, CharSet::new(variant))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(cs: &CharSet, ids: &[LabelId]) -> Vec<String> {
        ids.iter().map(|&i| cs.symbol(i).unwrap().name()).collect()
    }

    fn joint(words: &[&str]) -> JointAlphabet {
        let corpus: Vec<String> = words.iter().map(|s| s.to_string()).collect();
        JointAlphabet::new(build_vocabulary(&corpus, 1).unwrap(), CharSet::positional())
    }

    #[test]
    fn vocabulary_thresholds_counts() {
        let v = build_vocabulary(&["a a b", "a c"], 2).unwrap();
        assert_eq!(v.words(), ["A"]);
        assert_eq!(v.lookup("B"), v.unk_id());
        assert_eq!(v.lookup("C"), v.unk_id());
        assert_ne!(v.lookup("A"), v.unk_id());

        let v = build_vocabulary(&["x"], 1).unwrap();
        assert_eq!(v.words(), ["X"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: [&str; 0] = [];
        assert!(matches!(build_vocabulary(&empty, 5), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let v = build_vocabulary(&["a"], 1).unwrap();
        assert_eq!(encode_words(&["a", "zzz"], &v), vec![v.id("A").unwrap(), v.unk_id()]);
        assert!(encode_words::<&str>(&[], &v).is_empty());
    }

    #[test]
    fn simple_charset_has_41_symbols() {
        let cs = CharSet::simple();
        assert_eq!(cs.len(), 41);
        assert!(cs.id(CharSymbol::Separator).is_some());
        assert_eq!(cs.symbol(LabelId(0)), None);
    }

    #[test]
    fn spelling_matches_printed_examples() {
        let cs = CharSet::positional();
        assert_eq!(names(&cs, &cs.spell("THE").unwrap()), ["b-t", "h", "e-e"]);
        // the printed hypothesis "b-s u mm e r e-y" is a misspelling; the
        // doubled-letter handling is what matters here
        assert_eq!(
            names(&cs, &cs.spell("SUMMERY").unwrap()),
            ["b-s", "u", "mm", "e", "r", "e-y"]
        );
        assert_eq!(
            names(&cs, &cs.spell("SUMMARY").unwrap()),
            ["b-s", "u", "mm", "a", "r", "e-y"]
        );
        assert_eq!(names(&cs, &cs.spell("STUFF").unwrap()), ["b-s", "t", "u", "e-2f"]);
        assert_eq!(names(&cs, &cs.spell("A").unwrap()), ["be-a"]);
        assert_eq!(names(&cs, &cs.spell("ZZZ").unwrap()), ["b-z", "e-2z"]);
        assert_eq!(names(&cs, &cs.spell("LLAMA").unwrap()), ["b-l", "l", "a", "m", "e-a"]);
        assert_eq!(names(&cs, &cs.spell("BOOOK").unwrap()), ["b-b", "oo", "o", "e-k"]);
    }

    #[test]
    fn unknown_character_is_rejected() {
        let err = CharSet::positional().spell("CAFÉ").unwrap_err();
        assert!(matches!(err, Error::UnknownCharacter { ch: 'é', .. }));
    }

    #[test]
    fn sar_targets_for_the_cat_is_black() {
        let j = joint(&["THE CAT IS BLACK"]);
        let t = build_sar_targets(&tokenize("THE CAT IS BLACK"), &j).unwrap();
        let rendered: Vec<String> = t.labels.iter().map(|&id| j.symbol_name(id).unwrap()).collect();
        assert_eq!(
            rendered.join(" "),
            "b-t h e-e THE _ b-c a e-t CAT _ b-i e-s IS _ b-b l a c e-k BLACK"
        );
    }

    #[test]
    fn single_letter_word_uses_begin_end_form() {
        let j = joint(&["A"]);
        let t = build_sar_targets(&["A"], &j).unwrap();
        let rendered: Vec<String> = t.labels.iter().map(|&id| j.symbol_name(id).unwrap()).collect();
        assert_eq!(rendered, ["be-a", "A"]);
    }

    #[test]
    fn inversion_recovers_word_spelling_pairs() {
        let j = joint(&["THE CAT"]);
        let t = build_sar_targets(&["THE", "CAT"], &j).unwrap();
        let inv = invert_sar_targets(&t.labels, &j);
        assert_eq!(
            inv.pairs(&j),
            [("THE".to_string(), "the".to_string()), ("CAT".to_string(), "cat".to_string())]
        );
        assert!(inv.segments.iter().all(|s| s.complete));
    }

    #[test]
    fn trailing_characters_are_flagged_incomplete() {
        let j = joint(&["THE"]);
        let mut labels = build_sar_targets(&["THE"], &j).unwrap().labels;
        labels.push(j.separator_id());
        labels.extend(j.spell("CA").unwrap());
        let inv = invert_sar_targets(&labels, &j);
        assert_eq!(inv.segments.len(), 2);
        assert!(inv.segments[0].complete);
        assert_eq!(inv.segments[1].word, None);
        assert!(!inv.segments[1].complete);
        assert_eq!(j.spelled_text(&inv.segments[1].spelling), "ca");
    }

    #[test]
    fn oov_keeps_spelling_with_unk_label() {
        let j = joint(&["THE"]);
        let t = build_sar_targets(&["THE", "MURDERING"], &j).unwrap();
        assert_eq!(*t.labels.last().unwrap(), UNK_ID);
        let inv = invert_sar_targets(&t.labels, &j);
        assert_eq!(inv.words(&j), ["THE", "MURDERING"]);
    }

    #[test]
    fn joint_ranges_partition_the_label_space() {
        let j = joint(&["ONE TWO THREE"]);
        let k = j.size();
        assert_eq!(k, 1 + 4 + CharSet::positional().len());
        for i in 0..k {
            let id = LabelId::from(i);
            let hits = [id.is_blank(), j.is_word(id), j.is_char(id)]
                .iter()
                .filter(|&&b| b)
                .count();
            assert_eq!(hits, 1, "id {i}");
        }
        assert!(!j.is_word(LabelId::from(k)) && !j.is_char(LabelId::from(k)));
    }

    #[test]
    fn text_files_round_trip_exactly() {
        let j = joint(&["HELLO WORLD", "IT'S A-OK"]);
        let text = j.to_text();
        assert!(text.starts_with("#a2w-alphabet v1 joint-positional"));
        assert_eq!(JointAlphabet::from_text(&text).unwrap().to_text(), text);

        let v = j.vocab();
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), *v);
        for cs in [CharSet::simple(), CharSet::positional()] {
            let t = cs.to_text();
            assert_eq!(CharSet::from_text(&t).unwrap().to_text(), t);
        }
        // line number = id - 1 after the header
        let text = v.to_text();
        let lines: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(lines[0], "UNK");
        assert_eq!(v.id(lines[1]).unwrap(), LabelId(2));
    }

    #[test]
    fn symbol_names_parse_back() {
        for s in CharSet::positional().symbols() {
            assert_eq!(CharSymbol::parse(&s.name()), Some(*s));
        }
    }
}
