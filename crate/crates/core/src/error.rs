use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,

    #[error("character {ch:?} in word {word:?} is not in the character set")]
    UnknownCharacter { word: String, ch: char },

    #[error("blank label found at position {position} of a CTC target")]
    BlankInTarget { position: usize },

    #[error("no CTC alignment of {labels} labels ({repeats} adjacent repeats) fits in {frames} frames")]
    InfeasibleAlignment {
        frames: usize,
        labels: usize,
        repeats: usize,
    },

    #[error("CTC path probability underflowed to zero for a feasible target")]
    ZeroProbability,

    #[error("brute-force CTC oracle refuses T={frames}, K={labels} (limits T<=10, K<=6)")]
    OracleTooLarge { frames: usize, labels: usize },

    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("backward pass requested without a forward cache")]
    NoForwardCache,

    #[error("non-finite gradient in tensor {tensor}")]
    DivergedGradient { tensor: String },

    #[error("utterance {id}: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("reference transcript is empty but the hypothesis is not")]
    EmptyReference,

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("invalid config value for {key}: {value:?}")]
    Config { key: String, value: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn for_utterance(self, id: &str) -> Self {
        Error::Utterance {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
