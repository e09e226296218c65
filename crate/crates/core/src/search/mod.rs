//! Beam search over the prefix tree.

mod config;
mod decoder;
mod hypothesis;
mod output;
mod prune;

pub use config::{BeamLimits, BeamMode, GlobalPruning, LookaheadMode, Recombination, SearchConfig};
pub use decoder::{Decoder, LmSlots};
pub use hypothesis::Hypothesis;
pub use output::{
    write_ctm, write_lattice, write_nbest, write_stats, DecodeResult, Lattice, LatticeEdge, NBestEntry, SearchStats,
    WordSpan,
};

use crate::error::{LmError, ScorerError};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    /// No hypothesis reached a valid end.
    #[error("search failed: {reason}")]
    Failure { reason: String, stats: Box<SearchStats> },
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}
