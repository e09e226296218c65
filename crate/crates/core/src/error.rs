use std::fmt;

use thiserror::Error;

/// Where a lexicon problem was found: a line in a lexicon file, or the
/// position of a lemma that was built programmatically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Lemma(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Lemma(n) => write!(f, "lemma #{n}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("{at}: syntax error: {msg}")]
    Syntax { at: Location, msg: String },
    #[error("{at}: unknown label symbol `{symbol}`")]
    UnknownLabel { at: Location, symbol: String },
    #[error("{at}: empty label variant")]
    EmptyVariant { at: Location },
    #[error("{at}: special label `{symbol}` inside a variant")]
    SpecialInVariant { at: Location, symbol: String },
    #[error("{at}: duplicate lemma `{orth}`")]
    DuplicateLemma { at: Location, orth: String },
    #[error("{at}: duplicate variant in lemma `{orth}`")]
    DuplicateVariant { at: Location, orth: String },
    #[error("invalid label alphabet: {0}")]
    Alphabet(String),
    #[error("alphabet contains no lexical labels")]
    NoLexicalContent,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
    #[error("inconsistent topology: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("line {line}: non-finite cost")]
    NonFinite { line: usize },
    #[error("frame {t} out of range (T = {frames})")]
    FrameRange { t: usize, frames: usize },
    #[error("scorer input does not match scorer kind: {0}")]
    Input(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("line {line}: {msg}")]
    Arpa { line: usize, msg: String },
    #[error("token `{0}` is not in the LM vocabulary and the LM has no <unk>")]
    Oov(String),
    #[error("invalid LM configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FsaError {
    #[error("word `{0}` has no lemma in the lexicon")]
    UnknownWord(String),
    #[error("topology not supported for automaton generation: {0}")]
    UnsupportedTopology(String),
    #[error("no accepting path of length {frames}")]
    NoPath { frames: usize },
    #[error("score matrix has {got} columns, automaton labels need {need}")]
    Dimension { got: usize, need: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Fsa(#[from] FsaError),
    #[error(transparent)]
    Search(#[from] crate::search::SearchError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
