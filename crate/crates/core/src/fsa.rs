//! Sentence automata for forced alignment and export. Labels sit on edges
//! and every edge consumes one frame, so a length-T path is an alignment.

use std::fmt::Write as _;

use crate::error::FsaError;
use crate::lexicon::{LabelAlphabet, LabelId, Lexicon};
use crate::scorer::ScoreMatrix;
use crate::semiring::neg_log_sum;
use crate::topology::Topology;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsaEdge {
    pub from: usize,
    pub to: usize,
    pub label: LabelId,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fsa {
    pub states: usize,
    /// Sorted.
    pub finals: Vec<usize>,
    /// Sorted by `(from, to, label)`.
    pub edges: Vec<FsaEdge>,
}

#[derive(Clone, Copy)]
enum Shape {
    Ctc { blank: LabelId },
    Hmm,
    Rna { blank: LabelId },
}

/// One label occurrence in the sentence's label DAG.
struct Position {
    label: LabelId,
    preds: Vec<usize>,
    /// No predecessor position: enters from the initial state.
    initial: bool,
}

struct Builder {
    edges: Vec<FsaEdge>,
    states: usize,
}

impl Builder {
    fn state(&mut self) -> usize {
        self.states += 1;
        self.states - 1
    }

    fn edge(&mut self, from: usize, to: usize, label: LabelId) {
        self.edges.push(FsaEdge {
            from,
            to,
            label,
            weight: 0.0,
        });
    }
}

/// Builds the automaton of `sentence` with every label variant of every
/// matching lemma in parallel.
pub fn build_fsa<S: AsRef<str>>(sentence: &[S], lexicon: &Lexicon, topology: &Topology) -> Result<Fsa, FsaError> {
    let shape = match (topology.allow_vertical, topology.allow_loop, topology.blank) {
        (false, true, Some(blank)) => Shape::Ctc { blank },
        (false, true, None) => Shape::Hmm,
        (false, false, Some(blank)) => Shape::Rna { blank },
        _ => {
            return Err(FsaError::UnsupportedTopology(
                "only ctc, hmm and rna topologies have sentence automata".into(),
            ))
        }
    };
    let by_orth = lexicon.lemmata_by_orth();
    let mut positions: Vec<Position> = Vec::new();
    let mut ends: Vec<usize> = Vec::new();
    for (w, word) in sentence.iter().enumerate() {
        let word = word.as_ref();
        let lemmata = by_orth.get(word).ok_or_else(|| FsaError::UnknownWord(word.to_string()))?;
        let mut variants: Vec<&Vec<LabelId>> = lemmata
            .iter()
            .flat_map(|&l| lexicon.lemmata()[l].variants.iter())
            .collect();
        variants.sort();
        variants.dedup();
        let mut word_ends = Vec::new();
        for variant in variants {
            for (i, &label) in variant.iter().enumerate() {
                let (preds, initial) = if i > 0 {
                    (vec![positions.len() - 1], false)
                } else {
                    (ends.clone(), w == 0)
                };
                positions.push(Position { label, preds, initial });
            }
            word_ends.push(positions.len() - 1);
        }
        ends = word_ends;
    }

    let min_loop = topology.min_loop_occurrence as usize;
    let mut b = Builder {
        edges: Vec::new(),
        states: 1,
    };
    // Entry and exit states per position.
    let mut entry: Vec<usize> = Vec::with_capacity(positions.len());
    let mut exits: Vec<Vec<usize>> = Vec::with_capacity(positions.len());
    let mut label_state: Vec<usize> = Vec::with_capacity(positions.len());
    for p in &positions {
        let first = b.state();
        let mut last = first;
        if !matches!(shape, Shape::Rna { .. }) {
            for _ in 0..min_loop {
                let next = b.state();
                b.edge(last, next, p.label);
                last = next;
            }
        }
        entry.push(first);
        label_state.push(last);
        match shape {
            Shape::Ctc { blank } => {
                b.edge(last, last, p.label);
                let bs = b.state();
                b.edge(last, bs, blank);
                b.edge(bs, bs, blank);
                exits.push(vec![last, bs]);
            }
            Shape::Hmm => {
                b.edge(last, last, p.label);
                exits.push(vec![last]);
            }
            Shape::Rna { blank } => {
                b.edge(last, last, blank);
                exits.push(vec![last]);
            }
        }
    }
    if let Shape::Ctc { blank } | Shape::Rna { blank } = shape {
        b.edge(0, 0, blank);
    }
    for (i, p) in positions.iter().enumerate() {
        if p.initial {
            b.edge(0, entry[i], p.label);
        }
        for &q in &p.preds {
            for &s in &exits[q] {
                let direct_repeat = s == label_state[q] && positions[q].label == p.label;
                if matches!(shape, Shape::Ctc { .. }) && direct_repeat {
                    continue;
                }
                b.edge(s, entry[i], p.label);
            }
        }
    }
    let mut finals: Vec<usize> = if sentence.is_empty() {
        vec![0]
    } else {
        ends.iter().flat_map(|&e| exits[e].iter().copied()).collect()
    };
    finals.sort_unstable();
    finals.dedup();
    let mut edges = b.edges;
    sort_edges(&mut edges);
    Ok(Fsa {
        states: b.states,
        finals,
        edges,
    })
}

fn sort_edges(edges: &mut Vec<FsaEdge>) {
    edges.sort_by_key(|e| (e.from, e.to, e.label));
    edges.dedup_by(|a, b| (a.from, a.to, a.label) == (b.from, b.to, b.label));
}

impl Fsa {
    /// Same paths read backwards: a fresh initial state stands for all old
    /// finals and the old initial state becomes the only final.
    pub fn reversed(&self) -> Fsa {
        let mut edges: Vec<FsaEdge> = self
            .edges
            .iter()
            .map(|e| FsaEdge {
                from: e.to + 1,
                to: e.from + 1,
                ..*e
            })
            .collect();
        for e in &self.edges {
            if self.finals.binary_search(&e.to).is_ok() {
                edges.push(FsaEdge {
                    from: 0,
                    to: e.from + 1,
                    ..*e
                });
            }
        }
        let mut finals = vec![1];
        if self.finals.contains(&0) {
            finals.insert(0, 0);
        }
        sort_edges(&mut edges);
        Fsa {
            states: self.states + 1,
            finals,
            edges,
        }
    }

    fn check(&self, scores: &ScoreMatrix) -> Result<(), FsaError> {
        let need = self.edges.iter().map(|e| e.label as usize + 1).max().unwrap_or(0);
        if scores.frames() > 0 && scores.labels() < need {
            return Err(FsaError::Dimension {
                got: scores.labels(),
                need,
            });
        }
        Ok(())
    }
}

pub fn export_fsa(fsa: &Fsa, alphabet: &LabelAlphabet) -> String {
    let mut out = format!("FSA {} INITIAL 0 FINAL", fsa.states);
    for f in &fsa.finals {
        let _ = write!(out, " {f}");
    }
    out.push('\n');
    for e in &fsa.edges {
        let _ = writeln!(out, "{} {} {} {:.6}", e.from, e.to, alphabet.symbol(e.label), e.weight);
    }
    out
}

/// Reads the export format back.
pub fn parse_fsa(text: &str, alphabet: &LabelAlphabet) -> Result<Fsa, FsaError> {
    let err = |line: usize, msg: &str| FsaError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing FSA header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "FSA" || fields[2] != "INITIAL" || fields[3] != "0" || fields[4] != "FINAL" {
        return Err(err(1, "expected `FSA <states> INITIAL 0 FINAL <ids>`"));
    }
    let states: usize = fields[1].parse().map_err(|_| err(1, "bad state count"))?;
    let finals = fields[5..]
        .iter()
        .map(|f| f.parse::<usize>().ok().filter(|&s| s < states))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| err(1, "bad final state"))?;
    let mut edges = Vec::new();
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(line, "expected `<from> <to> <label> <weight>`"));
        }
        let state = |s: &str| s.parse::<usize>().ok().filter(|&s| s < states);
        let from = state(f[0]).ok_or_else(|| err(line, "bad source state"))?;
        let to = state(f[1]).ok_or_else(|| err(line, "bad target state"))?;
        let label = alphabet.id(f[2]).ok_or_else(|| err(line, "unknown label"))?;
        let weight: f64 = f[3]
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| err(line, "bad weight"))?;
        edges.push(FsaEdge { from, to, label, weight });
    }
    Ok(Fsa { states, finals, edges })
}

/// Best length-T path: one label per frame and its summed cost.
pub fn fsa_viterbi_align(fsa: &Fsa, scores: &ScoreMatrix) -> Result<(Vec<LabelId>, f64), FsaError> {
    fsa.check(scores)?;
    let frames = scores.frames();
    let mut cost = vec![f64::INFINITY; fsa.states];
    cost[0] = 0.0;
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(frames);
    for t in 0..frames {
        let row = scores.row(t);
        let mut next = vec![f64::INFINITY; fsa.states];
        let mut bp = vec![usize::MAX; fsa.states];
        for (i, e) in fsa.edges.iter().enumerate() {
            let c = cost[e.from] + e.weight + row[e.label as usize];
            if c < next[e.to] {
                next[e.to] = c;
                bp[e.to] = i;
            }
        }
        cost = next;
        back.push(bp);
    }
    let (best, &total) = fsa
        .finals
        .iter()
        .map(|&f| (f, &cost[f]))
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, c)| c.is_finite())
        .ok_or(FsaError::NoPath { frames })?;
    let mut labels = vec![0; frames];
    let mut state = best;
    for t in (0..frames).rev() {
        let e = &fsa.edges[back[t][state]];
        labels[t] = e.label;
        state = e.from;
    }
    Ok((labels, total))
}

/// `-ln` of the summed probability of all length-T accepting paths.
pub fn fsa_forward(fsa: &Fsa, scores: &ScoreMatrix) -> Result<f64, FsaError> {
    fsa.check(scores)?;
    let mut alpha = vec![f64::INFINITY; fsa.states];
    alpha[0] = 0.0;
    for t in 0..scores.frames() {
        let row = scores.row(t);
        let mut terms: Vec<Vec<f64>> = vec![Vec::new(); fsa.states];
        for e in &fsa.edges {
            if alpha[e.from].is_finite() {
                terms[e.to].push(alpha[e.from] + e.weight + row[e.label as usize]);
            }
        }
        alpha = terms.into_iter().map(neg_log_sum).collect();
    }
    finish(fsa.finals.iter().map(|&f| alpha[f]), scores.frames())
}

/// Same quantity as [`fsa_forward`], computed from the final states back.
pub fn fsa_backward(fsa: &Fsa, scores: &ScoreMatrix) -> Result<f64, FsaError> {
    fsa.check(scores)?;
    let mut beta = vec![f64::INFINITY; fsa.states];
    for &f in &fsa.finals {
        beta[f] = 0.0;
    }
    for t in (0..scores.frames()).rev() {
        let row = scores.row(t);
        let mut terms: Vec<Vec<f64>> = vec![Vec::new(); fsa.states];
        for e in &fsa.edges {
            if beta[e.to].is_finite() {
                terms[e.from].push(beta[e.to] + e.weight + row[e.label as usize]);
            }
        }
        beta = terms.into_iter().map(neg_log_sum).collect();
    }
    finish(std::iter::once(beta[0]), scores.frames())
}

fn finish(costs: impl Iterator<Item = f64>, frames: usize) -> Result<f64, FsaError> {
    let total = neg_log_sum(costs);
    if total.is_finite() {
        Ok(total)
    } else {
        Err(FsaError::NoPath { frames })
    }
}

/// Time-reversed copy of a score matrix.
pub fn reverse_scores(scores: &ScoreMatrix) -> ScoreMatrix {
    let rows: Vec<Vec<f64>> = (0..scores.frames()).rev().map(|t| scores.row(t).to_vec()).collect();
    if rows.is_empty() {
        return scores.clone();
    }
    ScoreMatrix::from_rows(&rows).expect("rows of a valid matrix")
}
