use std::collections::HashSet;
use std::sync::Arc;

use super::arpa::UNKNOWN;
use super::{LanguageModel, LmState, SharedLm};
use crate::error::LmError;

/// Uniform distribution over a fixed vocabulary.
#[derive(Debug)]
pub struct ZeroGramLm {
    vocab: HashSet<String>,
    cost: f64,
}

impl ZeroGramLm {
    pub fn new<S: Into<String>>(vocab: impl IntoIterator<Item = S>) -> Result<Self, LmError> {
        let vocab: HashSet<String> = vocab.into_iter().map(Into::into).collect();
        if vocab.is_empty() {
            return Err(LmError::Config("0-gram LM needs a non-empty vocabulary".into()));
        }
        let cost = (vocab.len() as f64).ln();
        Ok(Self { vocab, cost })
    }
}

impl LanguageModel for ZeroGramLm {
    fn initial_state(&self) -> LmState {
        LmState::Empty
    }

    fn score(&self, _state: &LmState, token: &str) -> Result<(f64, LmState), LmError> {
        if self.accepts(token) {
            Ok((self.cost, LmState::Empty))
        } else {
            Err(LmError::Oov(token.to_string()))
        }
    }

    fn sentence_end(&self, _state: &LmState) -> f64 {
        self.cost
    }

    fn accepts(&self, token: &str) -> bool {
        self.vocab.contains(token) || self.vocab.contains(UNKNOWN)
    }

    fn context_limit(&self) -> Option<usize> {
        Some(0)
    }
}

/// Scores like its base model but keeps the full token history as state,
/// so no two different histories ever recombine.
#[derive(Debug)]
pub struct FullContextLm {
    base: SharedLm,
}

impl FullContextLm {
    pub fn new(base: SharedLm) -> Self {
        Self { base }
    }

    fn split<'a>(&self, state: &'a LmState) -> (&'a LmState, &'a [Arc<str>]) {
        match state {
            LmState::Composite(parts) => match &parts[..] {
                [base, LmState::Tokens(history)] => (base, history),
                _ => panic!("foreign LM state passed to full-context LM"),
            },
            _ => panic!("foreign LM state passed to full-context LM"),
        }
    }
}

impl LanguageModel for FullContextLm {
    fn initial_state(&self) -> LmState {
        LmState::Composite(Arc::from([self.base.initial_state(), LmState::Tokens(Arc::from([]))]))
    }

    fn unigram_state(&self) -> LmState {
        LmState::Composite(Arc::from([self.base.unigram_state(), LmState::Tokens(Arc::from([]))]))
    }

    fn score(&self, state: &LmState, token: &str) -> Result<(f64, LmState), LmError> {
        let (base, history) = self.split(state);
        let (cost, next) = self.base.score(base, token)?;
        let mut h: Vec<Arc<str>> = history.to_vec();
        h.push(Arc::from(token));
        Ok((cost, LmState::Composite(Arc::from([next, LmState::Tokens(Arc::from(h))]))))
    }

    fn sentence_end(&self, state: &LmState) -> f64 {
        self.base.sentence_end(self.split(state).0)
    }

    fn accepts(&self, token: &str) -> bool {
        self.base.accepts(token)
    }

    fn context_limit(&self) -> Option<usize> {
        None
    }
}

/// Weighted sum of several models' costs. Negative weights are allowed.
#[derive(Debug)]
pub struct CombinedLm {
    parts: Vec<(SharedLm, f64)>,
}

impl CombinedLm {
    fn parts<'a>(&self, state: &'a LmState) -> &'a [LmState] {
        match state {
            LmState::Composite(p) if p.len() == self.parts.len() => p,
            _ => panic!("foreign LM state passed to combined LM"),
        }
    }
}

impl LanguageModel for CombinedLm {
    fn initial_state(&self) -> LmState {
        LmState::Composite(self.parts.iter().map(|(lm, _)| lm.initial_state()).collect())
    }

    fn unigram_state(&self) -> LmState {
        LmState::Composite(self.parts.iter().map(|(lm, _)| lm.unigram_state()).collect())
    }

    fn score(&self, state: &LmState, token: &str) -> Result<(f64, LmState), LmError> {
        let mut cost = 0.0;
        let mut next = Vec::with_capacity(self.parts.len());
        for ((lm, w), s) in self.parts.iter().zip(self.parts(state)) {
            let (c, n) = lm.score(s, token)?;
            cost += w * c;
            next.push(n);
        }
        Ok((cost, LmState::Composite(next.into())))
    }

    fn sentence_end(&self, state: &LmState) -> f64 {
        self.parts
            .iter()
            .zip(self.parts(state))
            .map(|((lm, w), s)| w * lm.sentence_end(s))
            .sum()
    }

    fn accepts(&self, token: &str) -> bool {
        self.parts.iter().all(|(lm, _)| lm.accepts(token))
    }

    fn context_limit(&self) -> Option<usize> {
        self.parts
            .iter()
            .map(|(lm, _)| lm.context_limit())
            .try_fold(0, |acc, l| l.map(|l| acc.max(l)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimulatedKind {
    ZeroGram,
    FullContext,
}

pub fn make_simulated_lm<S: Into<String>>(
    kind: SimulatedKind,
    base: Option<SharedLm>,
    vocab: impl IntoIterator<Item = S>,
) -> Result<SharedLm, LmError> {
    match kind {
        SimulatedKind::ZeroGram => Ok(Arc::new(ZeroGramLm::new(vocab)?)),
        SimulatedKind::FullContext => {
            let base = base.ok_or_else(|| LmError::Config("full-context LM needs a base LM".into()))?;
            Ok(Arc::new(FullContextLm::new(base)))
        }
    }
}

pub fn combine_lms(parts: Vec<(SharedLm, f64)>) -> Result<SharedLm, LmError> {
    if parts.is_empty() {
        return Err(LmError::Config("combined LM needs at least one part".into()));
    }
    if parts.iter().any(|(_, w)| !w.is_finite()) {
        return Err(LmError::Config("combined LM weights must be finite".into()));
    }
    Ok(Arc::new(CombinedLm { parts }))
}
