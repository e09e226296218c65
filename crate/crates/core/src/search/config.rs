use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeamMode {
    /// Label, word-end and ended hypotheses share one beam.
    Global,
    /// Each hypothesis level has its own score + histogram beam.
    Individual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recombination {
    Viterbi,
    FullSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LookaheadMode {
    None,
    /// Context-insensitive table, computed once per tree.
    Unigram,
    /// One table per lookahead-LM context, kept in an LRU cache.
    Higher,
}

/// Score threshold relative to the best hypothesis plus a size cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamLimits {
    pub score_threshold: f64,
    pub histogram: usize,
}

impl BeamLimits {
    pub const UNLIMITED: BeamLimits = BeamLimits {
        score_threshold: f64::INFINITY,
        histogram: usize::MAX,
    };

    pub fn new(score_threshold: f64, histogram: usize) -> Self {
        Self {
            score_threshold,
            histogram,
        }
    }
}

impl Default for BeamLimits {
    fn default() -> Self {
        Self::UNLIMITED
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GlobalPruning {
    ScoreHistogram(BeamLimits),
    /// Keep the top-k hypotheses.
    FixedSize(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub beam_mode: BeamMode,
    pub global: GlobalPruning,
    pub label_beam: BeamLimits,
    pub word_end_beam: BeamLimits,
    pub ended_beam: BeamLimits,
    /// Drop labels whose per-step cost exceeds the best entry of the same
    /// score vector by more than this.
    pub local_threshold: f64,
    /// When the blank cost is at or below this, only blank is expanded.
    pub blank_threshold: f64,
    /// EOS is admitted only within this margin of the best label cost.
    pub eos_threshold: f64,
    /// `U_max = ceil(ratio * T)` for non time-synchronous topologies.
    pub max_step_ratio: f64,
    pub recombination: Recombination,
    /// Label-context length used for recombination; `None` uses the full
    /// scorer context.
    pub recombination_history_limit: Option<usize>,
    pub length_normalization: bool,
    pub early_stopping: bool,
    pub lm_scale: f64,
    pub lookahead: LookaheadMode,
    pub lookahead_scale: f64,
    pub lookahead_cache: usize,
    pub nbest: usize,
    /// Keep recombined word-end alternatives for lattice output.
    pub lattice: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam_mode: BeamMode::Individual,
            global: GlobalPruning::ScoreHistogram(BeamLimits::UNLIMITED),
            label_beam: BeamLimits::UNLIMITED,
            word_end_beam: BeamLimits::UNLIMITED,
            ended_beam: BeamLimits::UNLIMITED,
            local_threshold: f64::INFINITY,
            blank_threshold: f64::NEG_INFINITY,
            eos_threshold: f64::INFINITY,
            max_step_ratio: 2.0,
            recombination: Recombination::Viterbi,
            recombination_history_limit: None,
            length_normalization: false,
            early_stopping: true,
            lm_scale: 1.0,
            lookahead: LookaheadMode::None,
            lookahead_scale: 1.0,
            lookahead_cache: 1024,
            nbest: 10,
            lattice: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite_or_inf = |name: &str, v: f64| {
            if v.is_nan() {
                Err(format!("{name} must be a number"))
            } else {
                Ok(())
            }
        };
        for (name, v) in [
            ("label score threshold", self.label_beam.score_threshold),
            ("word-end score threshold", self.word_end_beam.score_threshold),
            ("ended score threshold", self.ended_beam.score_threshold),
            ("local threshold", self.local_threshold),
            ("blank threshold", self.blank_threshold),
            ("eos threshold", self.eos_threshold),
        ] {
            finite_or_inf(name, v)?;
        }
        if !(self.max_step_ratio.is_finite() && self.max_step_ratio >= 0.0) {
            return Err("max step ratio must be finite and non-negative".into());
        }
        if !self.lm_scale.is_finite() || !self.lookahead_scale.is_finite() {
            return Err("LM scales must be finite".into());
        }
        if let GlobalPruning::FixedSize(0) = self.global {
            return Err("fixed beam size must be positive".into());
        }
        if self.nbest == 0 {
            return Err("N-best size must be positive".into());
        }
        Ok(())
    }
}

impl fmt::Display for BeamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeamMode::Global => "global",
            BeamMode::Individual => "individual",
        })
    }
}

impl fmt::Display for Recombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recombination::Viterbi => "viterbi",
            Recombination::FullSum => "full_sum",
        })
    }
}

impl fmt::Display for LookaheadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LookaheadMode::None => "none",
            LookaheadMode::Unigram => "unigram",
            LookaheadMode::Higher => "higher",
        })
    }
}
