use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::config::{BeamLimits, BeamMode, GlobalPruning, LookaheadMode, Recombination, SearchConfig};
use super::hypothesis::{Hypothesis, TraceArc};
use super::output::{DecodeResult, Lattice, LatticeEdge, NBestEntry, SearchStats, WordSpan};
use super::prune::{keep_best, prune, rank_cmp, Pruned};
use super::SearchError;
use crate::lexicon::LabelId;
use crate::lm::{score_tokens, LmState, LookaheadCache, LookaheadTable, SharedLm};
use crate::prefix_tree::{PrefixTree, ROOT};
use crate::scorer::{Context, EncoderState, S2SHistory, Scorer};
use crate::semiring::neg_log_add;
use crate::topology::{Ending, Topology, TopologyState, TransitionKind};

/// The three LM roles. Lookahead and recombination fall back to the scoring
/// LM when unset.
#[derive(Clone, Debug, Default)]
pub struct LmSlots {
    pub scoring: Option<SharedLm>,
    pub lookahead: Option<SharedLm>,
    pub recombination: Option<SharedLm>,
}

impl LmSlots {
    pub fn scoring(lm: SharedLm) -> Self {
        Self {
            scoring: Some(lm),
            ..Self::default()
        }
    }
}

/// Immutable search setup shared by any number of concurrent decodes.
pub struct Decoder {
    tree: Arc<PrefixTree>,
    topology: Topology,
    scorer: Arc<Scorer>,
    config: SearchConfig,
    scoring: Option<SharedLm>,
    lookahead_lm: Option<SharedLm>,
    recombination_lm: Option<SharedLm>,
    unigram: Option<Arc<LookaheadTable>>,
}

impl Decoder {
    pub fn new(
        tree: Arc<PrefixTree>,
        topology: Topology,
        scorer: Arc<Scorer>,
        lms: LmSlots,
        config: SearchConfig,
    ) -> Result<Self, SearchError> {
        config.validate().map_err(SearchError::Config)?;
        let labels = tree.lexicon().alphabet().len();
        if scorer.labels() != labels {
            return Err(SearchError::Config(format!(
                "scorer has {} labels, alphabet has {labels}",
                scorer.labels()
            )));
        }
        let scoring = lms.scoring;
        let lookahead_lm = match config.lookahead {
            LookaheadMode::None => None,
            _ => Some(lms.lookahead.or_else(|| scoring.clone()).ok_or_else(|| {
                SearchError::Config("lookahead needs a scoring or lookahead LM".into())
            })?),
        };
        let recombination_lm = lms.recombination.or_else(|| scoring.clone());

        if config.recombination == Recombination::FullSum {
            let full_s2s =
                scorer.history_spec().context_size.is_none() && config.recombination_history_limit.is_none();
            let full_lm = recombination_lm.as_ref().is_some_and(|lm| lm.context_limit().is_none());
            if !full_s2s && !full_lm {
                return Err(SearchError::Config(
                    "full-sum recombination needs a full label context or a full-context recombination LM".into(),
                ));
            }
        }
        for lm in [&scoring, &lookahead_lm, &recombination_lm].into_iter().flatten() {
            for exit in tree.exits() {
                if let Some(tok) = exit.lm_tokens.iter().find(|t| !lm.accepts(t)) {
                    return Err(SearchError::Lm(crate::error::LmError::Oov(tok.clone())));
                }
            }
        }
        let unigram = match (&config.lookahead, &lookahead_lm) {
            (LookaheadMode::Unigram, Some(lm)) => Some(Arc::new(crate::lm::build_lookahead_table(
                &tree,
                &**lm,
                &lm.unigram_state(),
            )?)),
            _ => None,
        };
        Ok(Self {
            tree,
            topology,
            scorer,
            config,
            scoring,
            lookahead_lm,
            recombination_lm,
            unigram,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn tree(&self) -> &Arc<PrefixTree> {
        &self.tree
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn scorer(&self) -> &Arc<Scorer> {
        &self.scorer
    }

    /// Step limit for an utterance of `frames` frames.
    pub fn max_steps(&self, frames: usize) -> usize {
        if self.topology.time_synchronous() {
            frames
        } else {
            (self.config.max_step_ratio * frames as f64).ceil() as usize
        }
    }

    pub fn decode(&self, enc: &EncoderState) -> Result<DecodeResult, SearchError> {
        let start = Instant::now();
        let mut search = Search::new(self, enc)?;
        search.run()?;
        let mut result = search.finalize()?;
        result.stats.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        Ok(result)
    }
}

#[derive(Clone, Debug)]
struct TraceNode {
    t: usize,
    /// The first arc is the node's own best path.
    arcs: SmallVec<[TraceArc; 1]>,
}

struct Ended {
    hyp: Hypothesis,
    final_node: u32,
    lemmas: Vec<usize>,
    rank: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fate {
    Live,
    End,
    Drop,
}

#[derive(Hash, PartialEq, Eq)]
struct RecombKey {
    node: u32,
    t: usize,
    last: LabelId,
    flags: u8,
    loops: u32,
    history: Context,
    lm: LmState,
}

struct Search<'d> {
    d: &'d Decoder,
    enc: &'d EncoderState,
    frames: usize,
    max_steps: usize,
    ending: Ending,
    beam: Vec<Hypothesis>,
    ended: Vec<Ended>,
    ended_index: HashMap<Vec<usize>, usize>,
    arena: Vec<TraceNode>,
    cache: LookaheadCache,
    stats: SearchStats,
    next_id: u64,
}

impl<'d> Search<'d> {
    fn new(d: &'d Decoder, enc: &'d EncoderState) -> Result<Self, SearchError> {
        let frames = enc.frames();
        let mut s = Search {
            d,
            enc,
            frames,
            max_steps: d.max_steps(frames),
            ending: d.topology.ending(),
            beam: Vec::new(),
            ended: Vec::new(),
            ended_index: HashMap::new(),
            arena: vec![TraceNode {
                t: 0,
                arcs: SmallVec::new(),
            }],
            cache: LookaheadCache::new(d.config.lookahead_cache),
            stats: SearchStats {
                frames,
                ..SearchStats::default()
            },
            next_id: 0,
        };
        let initial_state = |lm: &Option<SharedLm>| lm.as_ref().map_or(LmState::Empty, |lm| lm.initial_state());
        let mut h = Hypothesis {
            node: ROOT,
            t: 0,
            last_label: None,
            last_blank: false,
            after_exit: false,
            loop_count: 0,
            history: d.scorer.initial_history(),
            lm_state: initial_state(&d.scoring),
            lookahead_state: initial_state(&d.lookahead_lm),
            recombination_state: initial_state(&d.recombination_lm),
            am: 0.0,
            lm: 0.0,
            lookahead: 0.0,
            base: 0.0,
            labels: 0,
            word_start: 0,
            label_end: 0,
            trace: 0,
            am_at_trace: 0.0,
            pending: None,
            created: s.next(),
        };
        let table = s.table_for(&h.lookahead_state)?;
        s.set_lookahead(&mut h, table.as_deref());
        s.beam.push(h);
        Ok(s)
    }

    fn next(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id - 1
    }

    fn run(&mut self) -> Result<(), SearchError> {
        if self.ending != Ending::Eos && self.frames == 0 {
            let h = self.beam.pop().expect("initial hypothesis");
            self.finish(h);
            return Ok(());
        }
        for u in 1..=self.max_steps {
            if self.beam.is_empty() {
                break;
            }
            self.step(u)?;
            self.stats.steps = u;
            if self.topology().time_synchronous() {
                debug_assert!(self.beam.iter().all(|h| h.t == u));
            }
            if self.should_stop() {
                self.stats.early_stop = true;
                self.beam.clear();
            }
        }
        Ok(())
    }

    fn topology(&self) -> &'d Topology {
        &self.d.topology
    }

    fn table_for(&mut self, state: &LmState) -> Result<Option<Arc<LookaheadTable>>, SearchError> {
        Ok(match self.d.config.lookahead {
            LookaheadMode::None => None,
            LookaheadMode::Unigram => self.d.unigram.clone(),
            LookaheadMode::Higher => {
                let lm = self.d.lookahead_lm.as_ref().expect("validated");
                Some(self.cache.get(&self.d.tree, &**lm, state)?)
            }
        })
    }

    fn set_lookahead(&self, h: &mut Hypothesis, table: Option<&LookaheadTable>) {
        h.lookahead = table.map_or(0.0, |t| self.d.config.lookahead_scale * t.value(h.node));
    }

    fn topology_state(&self, h: &Hypothesis) -> TopologyState {
        let node = &self.d.tree.nodes()[h.node as usize];
        TopologyState {
            at_root: h.node == ROOT,
            loop_count: h.loop_count,
            has_exits: !node.exits.is_empty(),
            has_successors: !node.children.is_empty(),
            frames_left: match self.ending {
                Ending::Eos => usize::MAX,
                _ => self.frames - h.t,
            },
            last_blank: h.last_blank,
            after_exit: h.after_exit,
        }
    }

    fn step(&mut self, u: usize) -> Result<(), SearchError> {
        let d = self.d;
        let beam = std::mem::take(&mut self.beam);
        let mut index: FxHashMap<(&S2SHistory, usize), usize> = FxHashMap::default();
        let mut queries: Vec<(&S2SHistory, usize)> = Vec::new();
        let qidx: Vec<usize> = beam
            .iter()
            .map(|h| {
                *index.entry((&h.history, h.t)).or_insert_with(|| {
                    queries.push((&h.history, h.t));
                    queries.len() - 1
                })
            })
            .collect();
        let rows = d.scorer.score_batch(self.enc, &queries)?;
        self.stats.scorer_queries += queries.len();
        self.stats.scorer_calls += d.scorer.calls_for(queries.len());

        let (mut labels, eos) = self.expand(&beam, &rows, &qidx)?;
        drop(rows);
        drop(index);
        drop(queries);
        self.stats.expanded += labels.len() + eos.len();

        let (live_labels, live_word_ends) = match d.config.beam_mode {
            BeamMode::Individual => {
                self.prune_level(&mut labels, d.config.label_beam);
                let labels = self.recombine(labels, false);
                let mut word_ends = self.word_ends(&labels)?;
                self.prune_level(&mut word_ends, d.config.word_end_beam);
                let word_ends = self.recombine(word_ends, true);
                let (live_labels, mut ending) = self.classify(labels, u);
                let (live_word_ends, e) = self.classify(word_ends, u);
                ending.extend(e);
                for h in eos.into_iter().chain(ending) {
                    self.finish(h);
                }
                self.prune_ended(d.config.ended_beam);
                (live_labels, live_word_ends)
            }
            BeamMode::Global => {
                let word_ends = self.word_ends(&labels)?;
                let (mut live_labels, mut ending) = self.classify(labels, u);
                let (mut live_word_ends, e) = self.classify(word_ends, u);
                ending.extend(e);
                for h in eos.into_iter().chain(ending) {
                    self.finish(h);
                }
                self.prune_global(&mut live_labels, &mut live_word_ends);
                let labels = self.recombine(live_labels, false);
                let word_ends = self.recombine(live_word_ends, true);
                (labels, word_ends)
            }
        };
        self.stats.label_beam_max = self.stats.label_beam_max.max(live_labels.len());
        self.stats.label_beam_sum += live_labels.len();
        self.stats.word_end_beam_max = self.stats.word_end_beam_max.max(live_word_ends.len());
        self.stats.word_end_beam_sum += live_word_ends.len();
        self.beam = live_labels;
        self.beam.extend(live_word_ends);
        Ok(())
    }

    fn child(&mut self, h: &Hypothesis, kind: TransitionKind, label: LabelId, cost: f64) -> Hypothesis {
        let mut n = h.clone();
        n.t += self.d.topology.frame_advance(kind);
        n.add_am(cost);
        n.history = self.d.scorer.extend_history(&h.history, label, kind);
        n.after_exit = false;
        n.created = self.next();
        n
    }

    /// Emitting transitions of every beam entry, in parent, kind, label order.
    fn expand(
        &mut self,
        beam: &[Hypothesis],
        rows: &[&[f64]],
        qidx: &[usize],
    ) -> Result<(Vec<Hypothesis>, Vec<Hypothesis>), SearchError> {
        let d = self.d;
        let topo = &d.topology;
        let cfg = &d.config;
        let mut labels = Vec::with_capacity(beam.len() * 4);
        let mut eos = Vec::new();
        for (h, &qi) in beam.iter().zip(qidx) {
            let row = rows[qi];
            let node = &d.tree.nodes()[h.node as usize];
            let allowed = topo.allowed_transitions(&self.topology_state(h));
            let best = row.iter().copied().fold(f64::INFINITY, f64::min);
            let limit = best + cfg.local_threshold;
            let blank_only = match topo.blank {
                Some(b) if allowed.contains(TransitionKind::Blank) => row[b as usize] <= cfg.blank_threshold,
                _ => false,
            };
            let table = self.table_for(&h.lookahead_state)?;

            if allowed.contains(TransitionKind::Forward) {
                for &(label, child) in &node.children {
                    if topo.forbids_direct_repeat() && !h.last_blank && h.last_label == Some(label) {
                        continue;
                    }
                    if blank_only {
                        self.stats.pruned_blank += 1;
                        continue;
                    }
                    let c = row[label as usize];
                    if c > limit {
                        self.stats.pruned_local += 1;
                        continue;
                    }
                    let mut n = self.child(h, TransitionKind::Forward, label, c);
                    n.node = child;
                    n.loop_count = 0;
                    n.last_label = Some(label);
                    n.last_blank = false;
                    n.labels += 1;
                    if h.node == ROOT {
                        n.word_start = h.t;
                    }
                    n.label_end = n.t.max((h.t + 1).min(self.frames));
                    self.set_lookahead(&mut n, table.as_deref());
                    labels.push(n);
                }
            }
            if allowed.contains(TransitionKind::Loop) {
                let label = node.label.expect("loops only at non-root nodes");
                let c = row[label as usize];
                if blank_only {
                    self.stats.pruned_blank += 1;
                } else if c > limit {
                    self.stats.pruned_local += 1;
                } else {
                    let mut n = self.child(h, TransitionKind::Loop, label, c);
                    n.loop_count = h.loop_count.saturating_add(1);
                    n.label_end = n.t;
                    labels.push(n);
                }
            }
            if let (true, Some(b)) = (allowed.contains(TransitionKind::Blank), topo.blank) {
                let c = row[b as usize];
                if c > limit {
                    self.stats.pruned_local += 1;
                } else {
                    let mut n = self.child(h, TransitionKind::Blank, b, c);
                    n.last_blank = true;
                    labels.push(n);
                }
            }
            if let (true, Some(e)) = (allowed.contains(TransitionKind::Eos), topo.eos) {
                let c = row[e as usize];
                let best_label = row
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != e as usize)
                    .map(|(_, &v)| v)
                    .fold(f64::INFINITY, f64::min);
                if c - best_label > cfg.eos_threshold {
                    self.stats.pruned_eos += 1;
                } else {
                    eos.push(self.child(h, TransitionKind::Eos, e, c));
                }
            }
        }
        Ok((labels, eos))
    }

    /// Word-end hypotheses for every exit reachable from `labels`. They sit
    /// at the root of the next tree at the same `t`.
    fn word_ends(&mut self, labels: &[Hypothesis]) -> Result<Vec<Hypothesis>, SearchError> {
        let d = self.d;
        let same = |a: &Option<SharedLm>, b: &Option<SharedLm>| match (a, b) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        };
        let la_shared = same(&d.lookahead_lm, &d.scoring);
        let rc_shared = same(&d.recombination_lm, &d.scoring);
        let mut out = Vec::new();
        for c in labels {
            let node = &d.tree.nodes()[c.node as usize];
            if node.exits.is_empty() || !d.topology.allowed_transitions(&self.topology_state(c)).contains(TransitionKind::Exit)
            {
                continue;
            }
            for &e in &node.exits {
                let exit = d.tree.exit(e);
                let mut w = c.clone();
                w.node = ROOT;
                w.after_exit = true;
                w.loop_count = 0;
                w.lookahead = 0.0;
                let mut word_lm = 0.0;
                if let Some(lm) = &d.scoring {
                    let (cost, state) = score_tokens(&**lm, &c.lm_state, &exit.lm_tokens)?;
                    word_lm = cost;
                    w.lm += cost;
                    w.base += d.config.lm_scale * cost;
                    w.lm_state = state;
                }
                if let Some(lm) = &d.lookahead_lm {
                    w.lookahead_state = if la_shared {
                        w.lm_state.clone()
                    } else {
                        score_tokens(&**lm, &c.lookahead_state, &exit.lm_tokens)?.1
                    };
                }
                if let Some(lm) = &d.recombination_lm {
                    w.recombination_state = if rc_shared {
                        w.lm_state.clone()
                    } else {
                        score_tokens(&**lm, &c.recombination_state, &exit.lm_tokens)?.1
                    };
                }
                w.pending = Some(TraceArc {
                    from: c.trace,
                    exit: Some(e),
                    start: c.word_start,
                    end: c.label_end,
                    am: c.am - c.am_at_trace,
                    lm: word_lm,
                });
                w.created = self.next();
                out.push(w);
            }
        }
        Ok(out)
    }

    fn fate(&self, h: &Hypothesis, u: usize) -> Fate {
        let fate = match self.ending {
            Ending::AtLastStep if u == self.frames => {
                if h.node == ROOT {
                    Fate::End
                } else {
                    Fate::Drop
                }
            }
            Ending::AtLastFrame if h.t == self.frames => {
                if h.node == ROOT {
                    Fate::End
                } else {
                    Fate::Drop
                }
            }
            _ => Fate::Live,
        };
        if fate == Fate::Live && u >= self.max_steps {
            Fate::Drop
        } else {
            fate
        }
    }

    /// Splits into live and ending hypotheses; the rest are dropped.
    fn classify(&mut self, hyps: Vec<Hypothesis>, u: usize) -> (Vec<Hypothesis>, Vec<Hypothesis>) {
        let mut live = Vec::with_capacity(hyps.len());
        let mut ending = Vec::new();
        for h in hyps {
            match self.fate(&h, u) {
                Fate::Live => live.push(h),
                Fate::End => ending.push(h),
                Fate::Drop => self.stats.pruned_length += 1,
            }
        }
        (live, ending)
    }

    fn count(&mut self, p: Pruned) {
        self.stats.pruned_score += p.score;
        self.stats.pruned_histogram += p.histogram;
    }

    fn prune_level(&mut self, hyps: &mut Vec<Hypothesis>, limits: BeamLimits) {
        let p = prune(hyps, limits.score_threshold, limits.histogram, |h| (h.total(), h.created));
        self.count(p);
    }

    fn prune_ended(&mut self, limits: BeamLimits) {
        let before = self.ended.len();
        let p = prune(&mut self.ended, limits.score_threshold, limits.histogram, |e| (e.rank, e.hyp.created));
        self.count(p);
        if self.ended.len() != before {
            self.reindex_ended();
        }
    }

    /// One beam over live labels, live word ends and the ended set.
    fn prune_global(&mut self, labels: &mut Vec<Hypothesis>, word_ends: &mut Vec<Hypothesis>) {
        let mut items: Vec<(f64, u64, u8, usize)> = Vec::with_capacity(labels.len() + word_ends.len() + self.ended.len());
        items.extend(labels.iter().enumerate().map(|(i, h)| (h.total(), h.created, 0u8, i)));
        items.extend(word_ends.iter().enumerate().map(|(i, h)| (h.total(), h.created, 1, i)));
        items.extend(self.ended.iter().enumerate().map(|(i, e)| (e.rank, e.hyp.created, 2, i)));
        let before = items.len();
        match self.d.config.global {
            GlobalPruning::ScoreHistogram(limits) => {
                let p = prune(&mut items, limits.score_threshold, limits.histogram, |x| (x.0, x.1));
                self.count(p);
            }
            GlobalPruning::FixedSize(k) => {
                keep_best(&mut items, k, |x| (x.0, x.1));
                self.stats.pruned_histogram += before - items.len();
            }
        }
        if items.len() == before {
            return;
        }
        let mut keep = [vec![false; labels.len()], vec![false; word_ends.len()], vec![false; self.ended.len()]];
        for &(_, _, level, i) in &items {
            keep[level as usize][i] = true;
        }
        retain_mask(labels, &keep[0]);
        retain_mask(word_ends, &keep[1]);
        let ended_before = self.ended.len();
        retain_mask(&mut self.ended, &keep[2]);
        if self.ended.len() != ended_before {
            self.reindex_ended();
        }
    }

    fn key(&self, h: &Hypothesis) -> RecombKey {
        let topo = &self.d.topology;
        let mut flags = 0u8;
        if topo.allow_loop && topo.blank.is_some() && h.last_blank {
            flags |= 1;
        }
        if topo.blank.is_some() && h.after_exit {
            flags |= 2;
        }
        RecombKey {
            node: h.node,
            t: h.t,
            last: if topo.forbids_direct_repeat() && !h.last_blank {
                h.last_label.unwrap_or(LabelId::MAX)
            } else {
                LabelId::MAX
            },
            flags,
            loops: h.loop_count.min(topo.min_loop_occurrence),
            history: Context::from_slice(h.history.suffix(self.d.config.recombination_history_limit)),
            lm: h.recombination_state.clone(),
        }
    }

    /// Merges hypotheses with equal keys. Word-end survivors get their trace
    /// node; with lattices on, merged-away word arcs are kept on it.
    fn recombine(&mut self, hyps: Vec<Hypothesis>, word_level: bool) -> Vec<Hypothesis> {
        let full_sum = self.d.config.recombination == Recombination::FullSum;
        let lattice = self.d.config.lattice;
        let mut index: FxHashMap<RecombKey, usize> = FxHashMap::default();
        let mut out: Vec<Hypothesis> = Vec::with_capacity(hyps.len());
        let mut losers: Vec<Vec<TraceArc>> = Vec::new();
        for h in hyps {
            let key = self.key(&h);
            match index.get(&key) {
                None => {
                    index.insert(key, out.len());
                    out.push(h);
                    if word_level {
                        losers.push(Vec::new());
                    }
                }
                Some(&i) => {
                    self.stats.recombined += 1;
                    let w = &mut out[i];
                    let mut l = h;
                    if rank_cmp((l.total(), l.created), (w.total(), w.created)).is_lt() {
                        std::mem::swap(w, &mut l);
                    }
                    if full_sum {
                        let merged = neg_log_add(w.base, l.base);
                        let delta = merged - w.base;
                        w.add_am(delta);
                    }
                    if word_level && lattice {
                        if let Some(arc) = l.pending.take() {
                            losers[i].push(arc);
                        }
                    }
                }
            }
        }
        if word_level {
            for (h, extra) in out.iter_mut().zip(losers) {
                let own = h.pending.take().expect("word ends carry a pending arc");
                let mut arcs: SmallVec<[TraceArc; 1]> = SmallVec::new();
                arcs.push(own);
                arcs.extend(extra);
                self.arena.push(TraceNode { t: h.t, arcs });
                h.trace = (self.arena.len() - 1) as u32;
                h.am_at_trace = h.am;
            }
        }
        out
    }

    fn walk(&self, mut node: u32) -> impl Iterator<Item = &TraceArc> + '_ {
        std::iter::from_fn(move || {
            let arc = self.arena[node as usize].arcs.first()?;
            node = arc.from;
            Some(arc)
        })
    }

    fn lemma_sequence(&self, trace: u32) -> Vec<usize> {
        let mut seq: Vec<usize> = self
            .walk(trace)
            .filter_map(|a| a.exit.map(|e| self.d.tree.exit(e).lemma))
            .collect();
        seq.reverse();
        seq
    }

    /// Adds sentence-end cost and merges into the ended set.
    fn finish(&mut self, mut h: Hypothesis) {
        let d = self.d;
        if let Some(arc) = h.pending.take() {
            self.arena.push(TraceNode {
                t: h.t,
                arcs: SmallVec::from_elem(arc, 1),
            });
            h.trace = (self.arena.len() - 1) as u32;
            h.am_at_trace = h.am;
        }
        let end_lm = d.scoring.as_ref().map_or(0.0, |lm| lm.sentence_end(&h.lm_state));
        h.lm += end_lm;
        h.base += d.config.lm_scale * end_lm;
        h.lookahead = 0.0;
        self.arena.push(TraceNode {
            t: h.t,
            arcs: SmallVec::from_elem(
                TraceArc {
                    from: h.trace,
                    exit: None,
                    start: h.t,
                    end: h.t,
                    am: h.am - h.am_at_trace,
                    lm: end_lm,
                },
                1,
            ),
        });
        let final_node = (self.arena.len() - 1) as u32;
        let lemmas = self.lemma_sequence(h.trace);
        let rank = self.rank(&h);
        let entry = Ended {
            hyp: h,
            final_node,
            lemmas,
            rank,
        };
        match self.ended_index.get(&entry.lemmas) {
            None => {
                self.ended_index.insert(entry.lemmas.clone(), self.ended.len());
                self.ended.push(entry);
            }
            Some(&i) => {
                self.stats.recombined += 1;
                let mut l = entry;
                let better = rank_cmp((l.rank, l.hyp.created), (self.ended[i].rank, self.ended[i].hyp.created)).is_lt();
                if better {
                    std::mem::swap(&mut self.ended[i], &mut l);
                }
                if d.config.recombination == Recombination::FullSum {
                    let w = &mut self.ended[i].hyp;
                    let merged = neg_log_add(w.base, l.hyp.base);
                    let delta = merged - w.base;
                    w.add_am(delta);
                    let rank = self.rank(&self.ended[i].hyp);
                    self.ended[i].rank = rank;
                }
                if d.config.lattice {
                    let arc = self.arena[l.final_node as usize].arcs[0].clone();
                    let winner = self.ended[i].final_node as usize;
                    self.arena[winner].arcs.push(arc);
                }
            }
        }
    }

    fn rank(&self, h: &Hypothesis) -> f64 {
        if self.d.config.length_normalization {
            h.total() / f64::from(h.labels.max(1))
        } else {
            h.total()
        }
    }

    fn reindex_ended(&mut self) {
        self.ended_index = self
            .ended
            .iter()
            .enumerate()
            .map(|(i, e)| (e.lemmas.clone(), i))
            .collect();
    }

    /// No live hypothesis can still beat the best ended one.
    fn should_stop(&self) -> bool {
        let cfg = &self.d.config;
        if !cfg.early_stopping
            || cfg.recombination != Recombination::Viterbi
            || cfg.length_normalization
            || self.ending == Ending::AtLastStep
            || self.beam.is_empty()
        {
            return false;
        }
        let Some(best) = self.ended.iter().map(|e| e.hyp.total()).reduce(f64::min) else {
            return false;
        };
        self.beam.iter().all(|h| h.base >= best)
    }

    fn words(&self, final_node: u32) -> Vec<WordSpan> {
        let mut words: Vec<WordSpan> = self
            .walk(final_node)
            .filter_map(|a| {
                a.exit.map(|e| {
                    let exit = self.d.tree.exit(e);
                    WordSpan {
                        lemma: exit.lemma,
                        orth: exit.orth.clone(),
                        start: a.start,
                        end: a.end,
                        am: a.am,
                        lm: a.lm,
                    }
                })
            })
            .collect();
        words.reverse();
        words
    }

    fn finalize(mut self) -> Result<DecodeResult, SearchError> {
        self.stats.ended = self.ended.len();
        self.stats.lookahead_tables = self.cache.built() + usize::from(self.d.unigram.is_some());
        if self.ended.is_empty() {
            return Err(SearchError::Failure {
                reason: "no hypothesis reached a valid end".into(),
                stats: Box::new(self.stats),
            });
        }
        let mut order: Vec<usize> = (0..self.ended.len()).collect();
        order.sort_by(|&a, &b| {
            let (a, b) = (&self.ended[a], &self.ended[b]);
            rank_cmp((a.rank, a.hyp.created), (b.rank, b.hyp.created))
        });
        let nbest = order
            .iter()
            .take(self.d.config.nbest)
            .map(|&i| {
                let e = &self.ended[i];
                NBestEntry {
                    words: self.words(e.final_node),
                    cost: e.rank,
                    total: e.hyp.total(),
                    am: e.hyp.am,
                    lm: e.hyp.lm,
                }
            })
            .collect();
        let lattice = self.d.config.lattice.then(|| self.lattice());
        Ok(DecodeResult {
            nbest,
            lattice,
            stats: self.stats,
        })
    }

    fn lattice(&self) -> Lattice {
        let mut seen = vec![false; self.arena.len()];
        let mut stack: Vec<u32> = self.ended.iter().map(|e| e.final_node).collect();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n as usize], true) {
                continue;
            }
            stack.extend(self.arena[n as usize].arcs.iter().map(|a| a.from));
        }
        let mut ids: Vec<usize> = (0..self.arena.len()).filter(|&i| seen[i]).collect();
        ids.sort_by_key(|&i| (self.arena[i].t, i));
        let mut map = vec![usize::MAX; self.arena.len()];
        for (new, &old) in ids.iter().enumerate() {
            map[old] = new;
        }
        let mut edges = Vec::new();
        for &old in &ids {
            for a in &self.arena[old].arcs {
                edges.push(LatticeEdge {
                    from: map[a.from as usize],
                    to: map[old],
                    word: a.exit.map(|e| self.d.tree.exit(e).orth.clone()),
                    am: a.am,
                    lm: a.lm,
                });
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        let mut finals: Vec<usize> = self.ended.iter().map(|e| map[e.final_node as usize]).collect();
        finals.sort_unstable();
        Lattice {
            nodes: ids.iter().map(|&i| self.arena[i].t).collect(),
            edges,
            finals,
        }
    }
}

fn retain_mask<T>(items: &mut Vec<T>, keep: &[bool]) {
    let mut i = 0;
    items.retain(|_| {
        i += 1;
        keep[i - 1]
    });
}
