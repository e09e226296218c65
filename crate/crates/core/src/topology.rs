//! Label topologies built from loop, blank and vertical transitions.

use std::fmt;
use std::str::FromStr;

use crate::error::TopologyError;
use crate::lexicon::{LabelAlphabet, LabelId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    /// Advance to a successor tree node, emitting its label.
    Forward,
    /// Repeat the current node's label.
    Loop,
    Blank,
    /// Leave the tree through an exit; never consumes a frame.
    Exit,
    /// Emit the end-of-sentence label at a word boundary.
    Eos,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 5] = [
        TransitionKind::Forward,
        TransitionKind::Loop,
        TransitionKind::Blank,
        TransitionKind::Exit,
        TransitionKind::Eos,
    ];

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionSet(u8);

impl TransitionSet {
    pub fn insert(&mut self, kind: TransitionKind) {
        self.0 |= kind.bit();
    }

    pub fn contains(self, kind: TransitionKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = TransitionKind> {
        TransitionKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

impl FromIterator<TransitionKind> for TransitionSet {
    fn from_iter<I: IntoIterator<Item = TransitionKind>>(iter: I) -> Self {
        let mut set = TransitionSet::default();
        for k in iter {
            set.insert(k);
        }
        set
    }
}

impl fmt::Debug for TransitionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Ctc,
    Hmm,
    Rna,
    Rnnt,
    LabelSync,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Ctc => "ctc",
            Preset::Hmm => "hmm",
            Preset::Rna => "rna",
            Preset::Rnnt => "rnnt",
            Preset::LabelSync => "label_sync",
        }
    }
}

impl FromStr for Preset {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ctc" => Preset::Ctc,
            "hmm" => Preset::Hmm,
            "rna" => Preset::Rna,
            "rnnt" => Preset::Rnnt,
            "label_sync" => Preset::LabelSync,
            other => return Err(TopologyError::UnknownPreset(other.to_string())),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TopologyFlags {
    pub allow_loop: bool,
    pub blank: bool,
    pub vertical: bool,
    pub min_loop_occurrence: u32,
}

impl From<Preset> for TopologyFlags {
    fn from(p: Preset) -> Self {
        let (allow_loop, blank, vertical) = match p {
            Preset::Ctc => (true, true, false),
            Preset::Hmm => (true, false, false),
            Preset::Rna => (false, true, false),
            Preset::Rnnt => (false, true, true),
            Preset::LabelSync => (false, false, true),
        };
        TopologyFlags {
            allow_loop,
            blank,
            vertical,
            min_loop_occurrence: 0,
        }
    }
}

/// How hypotheses finish.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ending {
    /// Time-synchronous: the whole search stops at step `u = T`.
    AtLastStep,
    /// Alignment-synchronous: a hypothesis ends once `t_u = T`.
    AtLastFrame,
    /// Label-synchronous: a hypothesis ends by emitting EOS.
    Eos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub allow_loop: bool,
    pub blank: Option<LabelId>,
    pub allow_vertical: bool,
    pub min_loop_occurrence: u32,
    pub eos: Option<LabelId>,
}

/// The part of a hypothesis that decides which transitions are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TopologyState {
    pub at_root: bool,
    pub loop_count: u32,
    pub has_exits: bool,
    pub has_successors: bool,
    pub frames_left: usize,
    /// The last emitted symbol was blank.
    pub last_blank: bool,
    /// The hypothesis has just left a tree through an exit.
    pub after_exit: bool,
}

pub fn make_topology(flags: TopologyFlags, alphabet: &LabelAlphabet) -> Result<Topology, TopologyError> {
    if flags.vertical && flags.allow_loop {
        return Err(TopologyError::Inconsistent("vertical and loop transitions are mutually exclusive".into()));
    }
    if flags.min_loop_occurrence > 0 && !flags.allow_loop {
        return Err(TopologyError::Inconsistent("minimum loop occurrence requires loop transitions".into()));
    }
    let blank = if flags.blank {
        Some(alphabet.blank().ok_or_else(|| {
            TopologyError::Inconsistent("topology uses blank but the alphabet declares none".into())
        })?)
    } else {
        None
    };
    let eos = alphabet.eos();
    if flags.vertical && !flags.blank && eos.is_none() {
        return Err(TopologyError::Inconsistent(
            "label-synchronous topology needs an EOS label in the alphabet".into(),
        ));
    }
    Ok(Topology {
        allow_loop: flags.allow_loop,
        blank,
        allow_vertical: flags.vertical,
        min_loop_occurrence: flags.min_loop_occurrence,
        eos,
    })
}

pub fn make_preset(preset: Preset, alphabet: &LabelAlphabet) -> Result<Topology, TopologyError> {
    make_topology(preset.into(), alphabet)
}

impl Topology {
    pub fn time_synchronous(&self) -> bool {
        !self.allow_vertical
    }

    pub fn ending(&self) -> Ending {
        match (self.allow_vertical, self.blank.is_some()) {
            (false, _) => Ending::AtLastStep,
            (true, true) => Ending::AtLastFrame,
            (true, false) => Ending::Eos,
        }
    }

    /// Frames consumed by a transition of `kind`.
    pub fn frame_advance(&self, kind: TransitionKind) -> usize {
        match kind {
            TransitionKind::Exit | TransitionKind::Eos => 0,
            TransitionKind::Loop | TransitionKind::Blank => 1,
            TransitionKind::Forward => usize::from(self.time_synchronous()),
        }
    }

    /// With both loop and blank, a label cannot directly follow itself: the
    /// two emissions would read as a loop.
    pub fn forbids_direct_repeat(&self) -> bool {
        self.allow_loop && self.blank.is_some()
    }

    pub fn allowed_transitions(&self, s: &TopologyState) -> TransitionSet {
        let mut set = TransitionSet::default();
        let loops_done = s.loop_count >= self.min_loop_occurrence;
        if s.has_exits && !s.at_root && loops_done {
            set.insert(TransitionKind::Exit);
        }
        if self.ending() == Ending::Eos {
            if s.at_root && self.eos.is_some() {
                set.insert(TransitionKind::Eos);
            }
        } else if s.frames_left == 0 {
            return set;
        }
        if s.has_successors && (s.at_root || loops_done) {
            set.insert(TransitionKind::Forward);
        }
        if self.allow_loop && !s.at_root && !s.last_blank {
            set.insert(TransitionKind::Loop);
        }
        if self.blank.is_some() && !s.after_exit && (s.at_root || loops_done) {
            set.insert(TransitionKind::Blank);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TransitionKind::*;

    fn alphabet() -> LabelAlphabet {
        LabelAlphabet::new(["a", "b", "<b>", "</s>"])
            .unwrap()
            .with_specials(Some("<b>"), Some("</s>"))
            .unwrap()
    }

    fn state() -> TopologyState {
        TopologyState {
            at_root: false,
            loop_count: 0,
            has_exits: true,
            has_successors: true,
            frames_left: 3,
            last_blank: false,
            after_exit: false,
        }
    }

    #[test]
    fn presets() {
        let a = alphabet();
        let ctc = make_preset(Preset::Ctc, &a).unwrap();
        assert!(ctc.allow_loop && ctc.blank.is_some() && !ctc.allow_vertical);
        assert_eq!(ctc.ending(), Ending::AtLastStep);

        let rnnt = make_preset(Preset::Rnnt, &a).unwrap();
        assert!(rnnt.blank.is_some() && rnnt.allow_vertical && !rnnt.allow_loop);
        assert_eq!(rnnt.frame_advance(Forward), 0);
        assert_eq!(rnnt.frame_advance(Blank), 1);
        assert_eq!(rnnt.ending(), Ending::AtLastFrame);

        let hmm = make_preset(Preset::Hmm, &a).unwrap();
        assert!(hmm.allow_loop && hmm.blank.is_none());
        let rna = make_preset(Preset::Rna, &a).unwrap();
        assert!(!rna.allow_loop && rna.blank.is_some());
        let ls = make_preset(Preset::LabelSync, &a).unwrap();
        assert_eq!(ls.ending(), Ending::Eos);
        assert_eq!(ls.frame_advance(Forward), 0);
    }

    #[test]
    fn inconsistent_flags() {
        let a = alphabet();
        let vl = TopologyFlags {
            allow_loop: true,
            vertical: true,
            ..Default::default()
        };
        assert!(matches!(make_topology(vl, &a), Err(TopologyError::Inconsistent(_))));
        let ml = TopologyFlags {
            min_loop_occurrence: 1,
            ..Default::default()
        };
        assert!(make_topology(ml, &a).is_err());
        let no_blank = LabelAlphabet::new(["a"]).unwrap();
        assert!(make_preset(Preset::Ctc, &no_blank).is_err());
        assert!(make_preset(Preset::LabelSync, &no_blank).is_err());
        assert!(matches!("foo".parse::<Preset>(), Err(TopologyError::UnknownPreset(_))));
    }

    #[test]
    fn ctc_mid_tree() {
        let ctc = make_preset(Preset::Ctc, &alphabet()).unwrap();
        let set = ctc.allowed_transitions(&state());
        assert_eq!(set, [Forward, Loop, Blank, Exit].into_iter().collect());
    }

    #[test]
    fn rnnt_out_of_frames() {
        let rnnt = make_preset(Preset::Rnnt, &alphabet()).unwrap();
        let s = TopologyState {
            frames_left: 0,
            ..state()
        };
        assert_eq!(rnnt.allowed_transitions(&s), [Exit].into_iter().collect());
    }

    #[test]
    fn hmm_min_loop() {
        let hmm = make_topology(
            TopologyFlags {
                min_loop_occurrence: 1,
                ..Preset::Hmm.into()
            },
            &alphabet(),
        )
        .unwrap();
        assert_eq!(hmm.allowed_transitions(&state()), [Loop].into_iter().collect());
        let s = TopologyState {
            loop_count: 1,
            ..state()
        };
        assert_eq!(hmm.allowed_transitions(&s), [Forward, Loop, Exit].into_iter().collect());
    }

    #[test]
    fn root_rules() {
        let ctc = make_preset(Preset::Ctc, &alphabet()).unwrap();
        let root = TopologyState {
            at_root: true,
            has_exits: false,
            ..state()
        };
        assert_eq!(ctc.allowed_transitions(&root), [Forward, Blank].into_iter().collect());
        let after_exit = TopologyState {
            after_exit: true,
            ..root
        };
        assert_eq!(ctc.allowed_transitions(&after_exit), [Forward].into_iter().collect());
        let after_blank = TopologyState {
            last_blank: true,
            ..state()
        };
        assert!(!ctc.allowed_transitions(&after_blank).contains(Loop));

        let ls = make_preset(Preset::LabelSync, &alphabet()).unwrap();
        assert_eq!(ls.allowed_transitions(&root), [Forward, Eos].into_iter().collect());
        assert_eq!(ls.allowed_transitions(&state()), [Forward, Exit].into_iter().collect());
    }

    #[test]
    fn frame_advance_rules() {
        let a = alphabet();
        for p in [Preset::Ctc, Preset::Hmm, Preset::Rna, Preset::Rnnt, Preset::LabelSync] {
            let t = make_preset(p, &a).unwrap();
            assert_eq!(t.frame_advance(Exit), 0);
            assert_eq!(t.frame_advance(Loop), 1);
            assert_eq!(t.frame_advance(Blank), 1);
            assert_eq!(t.frame_advance(Forward), usize::from(t.time_synchronous()));
        }
    }
}
