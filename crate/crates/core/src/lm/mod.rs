//! Language models used for word-end scoring, lookahead and recombination.
//! All costs are natural-log negative probabilities.

mod arpa;
mod lookahead;
mod simulated;

use std::fmt;
use std::sync::Arc;

pub use arpa::{load_arpa, NGramLm};
pub use lookahead::{build_lookahead_table, LookaheadCache, LookaheadTable};
pub use simulated::{combine_lms, make_simulated_lm, CombinedLm, FullContextLm, SimulatedKind, ZeroGramLm};

use crate::error::LmError;

/// Opaque, value-semantic LM history.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LmState {
    Empty,
    Ngram(Arc<[u32]>),
    Tokens(Arc<[Arc<str>]>),
    Composite(Arc<[LmState]>),
}

pub trait LanguageModel: Send + Sync + fmt::Debug {
    fn initial_state(&self) -> LmState;

    /// Context used for context-insensitive (unigram) lookahead.
    fn unigram_state(&self) -> LmState {
        self.initial_state()
    }

    fn score(&self, state: &LmState, token: &str) -> Result<(f64, LmState), LmError>;

    fn sentence_end(&self, state: &LmState) -> f64;

    /// True when `token` is scored without error.
    fn accepts(&self, token: &str) -> bool;

    /// `None` for models whose states never merge different histories.
    fn context_limit(&self) -> Option<usize>;
}

pub type SharedLm = Arc<dyn LanguageModel>;

pub fn lm_score(lm: &dyn LanguageModel, state: &LmState, token: &str) -> Result<(f64, LmState), LmError> {
    lm.score(state, token)
}

/// Scores a token sequence; an empty sequence leaves the state unchanged.
pub fn score_tokens<S: AsRef<str>>(
    lm: &dyn LanguageModel,
    state: &LmState,
    tokens: &[S],
) -> Result<(f64, LmState), LmError> {
    let mut cost = 0.0;
    let mut state = state.clone();
    for tok in tokens {
        let (c, next) = lm.score(&state, tok.as_ref())?;
        cost += c;
        state = next;
    }
    Ok((cost, state))
}

/// Cost of a full sentence including the sentence-end token.
pub fn sentence_cost<S: AsRef<str>>(lm: &dyn LanguageModel, tokens: &[S]) -> Result<f64, LmError> {
    let (cost, state) = score_tokens(lm, &lm.initial_state(), tokens)?;
    Ok(cost + lm.sentence_end(&state))
}
