use crate::lexicon::LabelId;
use crate::lm::LmState;
use crate::prefix_tree::{ExitId, NodeId};
use crate::scorer::S2SHistory;

/// A word arc waiting to be attached to the trace arena once its
/// hypothesis survives word-end pruning.
#[derive(Clone, Debug)]
pub(crate) struct TraceArc {
    pub from: u32,
    /// `None` for the final arc into an end node.
    pub exit: Option<ExitId>,
    pub start: usize,
    pub end: usize,
    pub am: f64,
    pub lm: f64,
}

/// One partial alignment. Costs are kept per component; `base` and `total`
/// are cached sums with the configured scales applied.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub node: NodeId,
    /// Frames consumed so far.
    pub t: usize,
    /// Last non-blank label emitted.
    pub last_label: Option<LabelId>,
    pub last_blank: bool,
    pub after_exit: bool,
    pub loop_count: u32,
    pub history: S2SHistory,
    pub lm_state: LmState,
    pub lookahead_state: LmState,
    pub recombination_state: LmState,
    pub am: f64,
    /// Unscaled LM cost of the completed words.
    pub lm: f64,
    /// Scaled lookahead cost of the current node.
    pub lookahead: f64,
    /// `am + lm_scale * lm`.
    pub base: f64,
    /// Number of FORWARD labels on the path.
    pub labels: u32,
    /// Frame at which the current word started.
    pub word_start: usize,
    /// Frames consumed up to the last label emission.
    pub label_end: usize,
    pub(crate) trace: u32,
    pub(crate) am_at_trace: f64,
    pub(crate) pending: Option<TraceArc>,
    pub(crate) created: u64,
}

impl Hypothesis {
    pub fn total(&self) -> f64 {
        self.base + self.lookahead
    }

    pub(crate) fn add_am(&mut self, cost: f64) {
        self.am += cost;
        self.base += cost;
    }
}
