//! Random instances and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the search code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexbeam::lexicon::{build_open_vocab, LabelAlphabet, LabelId, Lemma, Lexicon};
use lexbeam::lm::{load_arpa, make_simulated_lm, SharedLm, SimulatedKind};
use lexbeam::prefix_tree::PrefixTree;
use lexbeam::scorer::{ScoreMatrix, Scorer, SegmentInput};
use lexbeam::search::{DecodeResult, Decoder, LmSlots, Recombination, SearchConfig, SearchError};
use lexbeam::topology::{make_preset, Preset};

pub const BIGRAM: &str = include_str!("../data/bigram.arpa");
pub const BLANK: &str = "<b>";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol || (a.is_infinite() && a == b)
}

/// `-ln sum e^-c`, written out independently of the library.
pub fn lse(costs: &[f64]) -> f64 {
    let m = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if m.is_infinite() {
        return m;
    }
    m - costs.iter().map(|c| (m - c).exp()).sum::<f64>().ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmKind {
    None,
    ZeroGram,
    Bigram,
}

/// Plain back-off bigram evaluation over the bundled ARPA file.
pub struct RefBigram {
    uni: HashMap<String, (f64, f64)>,
    bi: HashMap<(String, String), f64>,
}

impl RefBigram {
    pub fn load(text: &str) -> Self {
        let mut uni = HashMap::new();
        let mut bi = HashMap::new();
        let mut section = 0;
        for line in text.lines() {
            let line = line.trim();
            match line {
                "\\1-grams:" => section = 1,
                "\\2-grams:" => section = 2,
                "" => {}
                _ if line.starts_with('\\') || line.starts_with("ngram") => section = if line == "\\end\\" { 0 } else { section },
                _ => {
                    let f: Vec<&str> = line.split_whitespace().collect();
                    let p: f64 = f[0].parse().unwrap();
                    if section == 1 {
                        let bo = f.get(2).map_or(0.0, |b| b.parse().unwrap());
                        uni.insert(f[1].to_string(), (p, bo));
                    } else if section == 2 {
                        bi.insert((f[1].to_string(), f[2].to_string()), p);
                    }
                }
            }
        }
        Self { uni, bi }
    }

    /// log10 P(w | v).
    fn log10(&self, v: &str, w: &str) -> f64 {
        match self.bi.get(&(v.to_string(), w.to_string())) {
            Some(&p) => p,
            None => self.uni[v].1 + self.uni[w].0,
        }
    }

    pub fn sentence_cost(&self, tokens: &[String]) -> f64 {
        let mut prev = "<s>".to_string();
        let mut total = 0.0;
        for t in tokens.iter().chain(std::iter::once(&"</s>".to_string())) {
            total += self.log10(&prev, t);
            prev = t.clone();
        }
        -total * std::f64::consts::LN_10
    }

    pub fn word_cost_unigram(&self, w: &str) -> f64 {
        -self.uni[w].0 * std::f64::consts::LN_10
    }

    /// Cost of one word given the previous token.
    pub fn word_cost(&self, prev: &str, w: &str) -> f64 {
        -self.log10(prev, w) * std::f64::consts::LN_10
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub preset: Preset,
    pub lexicon: Arc<Lexicon>,
    pub open_vocab: bool,
    pub lm: LmKind,
    pub lm_scale: f64,
    /// `T x A` costs.
    pub scores: Vec<Vec<f64>>,
}

pub fn random_lexicon(rng: &mut impl Rng, labels: usize, blank: bool) -> (Lexicon, bool) {
    let mut symbols: Vec<String> = (0..labels).map(|i| format!("w{i}")).collect();
    if blank {
        symbols.push(BLANK.into());
    }
    let alphabet = LabelAlphabet::new(symbols)
        .unwrap()
        .with_specials(blank.then_some(BLANK), None)
        .unwrap();
    if rng.random_bool(0.3) {
        return (build_open_vocab(&alphabet).unwrap(), true);
    }
    let n = rng.random_range(1..=5);
    let lemmata = (0..n)
        .map(|i| {
            let mut variants: Vec<Vec<LabelId>> = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                let len = rng.random_range(1..=3);
                let v: Vec<LabelId> = (0..len).map(|_| rng.random_range(0..labels as LabelId)).collect();
                if !variants.contains(&v) {
                    variants.push(v);
                }
            }
            Lemma {
                orth: format!("w{i}"),
                variants,
                lm_tokens: Some(vec![format!("w{i}")]),
            }
        })
        .collect();
    (Lexicon::new(alphabet, lemmata).unwrap(), false)
}

pub fn random_scores(rng: &mut impl Rng, frames: usize, labels: usize) -> Vec<Vec<f64>> {
    (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..labels).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.iter().map(|p| -(p / z).ln()).collect()
        })
        .collect()
}

impl Instance {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let preset = *[Preset::Ctc, Preset::Hmm, Preset::Rna, Preset::Rnnt].choose(&mut r).unwrap();
        let blank = preset != Preset::Hmm;
        let labels = r.random_range(1..=if blank { 3 } else { 4 });
        let (lexicon, open_vocab) = random_lexicon(&mut r, labels, blank);
        let lm = *[LmKind::None, LmKind::ZeroGram, LmKind::Bigram].choose(&mut r).unwrap();
        let lm_scale = *[1.0, 0.6].choose(&mut r).unwrap();
        let max_frames = if preset == Preset::Rnnt { 5 } else { 6 };
        let frames = r.random_range(0..=max_frames);
        let scores = random_scores(&mut r, frames, lexicon.alphabet().len());
        Self {
            seed,
            preset,
            lexicon: Arc::new(lexicon),
            open_vocab,
            lm,
            lm_scale,
            scores,
        }
    }

    pub fn frames(&self) -> usize {
        self.scores.len()
    }

    pub fn matrix(&self) -> ScoreMatrix {
        if self.scores.is_empty() {
            ScoreMatrix::new(0, self.lexicon.alphabet().len(), vec![]).unwrap()
        } else {
            ScoreMatrix::from_rows(&self.scores).unwrap()
        }
    }

    pub fn blank(&self) -> Option<LabelId> {
        self.lexicon.alphabet().blank()
    }

    pub fn vocab(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .lexicon
            .lemmata()
            .iter()
            .flat_map(|l| l.lm_tokens.clone().unwrap_or_default())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn library_lm(&self) -> Option<SharedLm> {
        match self.lm {
            LmKind::None => None,
            LmKind::ZeroGram => Some(make_simulated_lm(SimulatedKind::ZeroGram, None, self.vocab()).unwrap()),
            LmKind::Bigram => Some(Arc::new(load_arpa(BIGRAM).unwrap())),
        }
    }

    /// Sentence LM cost by the reference evaluators (unscaled).
    pub fn lm_cost(&self, lemmas: &[usize]) -> f64 {
        let tokens: Vec<String> = lemmas
            .iter()
            .flat_map(|&l| self.lexicon.lemmata()[l].lm_tokens.clone().unwrap_or_default())
            .collect();
        match self.lm {
            LmKind::None => 0.0,
            LmKind::ZeroGram => (tokens.len() + 1) as f64 * (self.vocab().len() as f64).ln(),
            LmKind::Bigram => RefBigram::load(BIGRAM).sentence_cost(&tokens),
        }
    }

    /// Slots used for decoding: full-sum additionally gets a full-context
    /// recombination LM.
    pub fn slots(&self, config: &SearchConfig) -> LmSlots {
        let scoring = self.library_lm();
        let recombination = (config.recombination == Recombination::FullSum).then(|| {
            let base = scoring
                .clone()
                .unwrap_or_else(|| make_simulated_lm(SimulatedKind::ZeroGram, None, self.vocab()).unwrap());
            make_simulated_lm(SimulatedKind::FullContext, Some(base), Vec::<String>::new()).unwrap()
        });
        LmSlots {
            scoring,
            lookahead: None,
            recombination,
        }
    }

    pub fn decoder_with(&self, lexicon: Arc<Lexicon>, config: SearchConfig) -> Result<Decoder, SearchError> {
        let topo = make_preset(self.preset, lexicon.alphabet()).unwrap();
        let slots = self.slots(&config);
        let config = SearchConfig {
            lm_scale: self.lm_scale,
            ..config
        };
        Decoder::new(
            Arc::new(PrefixTree::build(lexicon.clone())),
            topo,
            Arc::new(Scorer::precomputed(lexicon.alphabet().len())),
            slots,
            config,
        )
    }

    pub fn decode(&self, config: SearchConfig) -> Result<DecodeResult, SearchError> {
        let d = self.decoder_with(self.lexicon.clone(), config)?;
        let enc = d.scorer().init_segment(SegmentInput::Matrix(self.matrix())).unwrap();
        d.decode(&enc)
    }
}

/// Per-transcription reference costs.
#[derive(Clone, Debug)]
pub struct OracleEntry {
    pub lemmas: Vec<usize>,
    pub viterbi: f64,
    pub full_sum: f64,
}

/// Alignment costs `(min, all path costs)` of one label sequence.
struct Paths {
    min: f64,
    costs: Vec<f64>,
}

impl Paths {
    fn add(&mut self, c: f64) {
        self.min = self.min.min(c);
        self.costs.push(c);
    }
}

fn paths() -> Paths {
    Paths {
        min: f64::INFINITY,
        costs: Vec::new(),
    }
}

/// Enumerates every frame-level path of the topology and groups the path
/// costs by emitted label sequence.
pub fn enumerate_alignments(inst: &Instance, max_labels: usize) -> HashMap<Vec<LabelId>, (f64, f64)> {
    let t_len = inst.frames();
    let a_len = inst.lexicon.alphabet().len();
    let blank = inst.blank();
    let s = &inst.scores;
    let mut groups: HashMap<Vec<LabelId>, Paths> = HashMap::new();
    match inst.preset {
        Preset::Ctc | Preset::Rna => {
            let b = blank.unwrap();
            let total = a_len.pow(t_len as u32);
            for mut code in 0..total {
                let mut frames = Vec::with_capacity(t_len);
                for _ in 0..t_len {
                    frames.push((code % a_len) as LabelId);
                    code /= a_len;
                }
                let cost: f64 = frames.iter().enumerate().map(|(t, &l)| s[t][l as usize]).sum();
                let mut y = Vec::new();
                for (t, &l) in frames.iter().enumerate() {
                    let repeat = inst.preset == Preset::Ctc && t > 0 && frames[t - 1] == l;
                    if l != b && !repeat {
                        y.push(l);
                    }
                }
                groups.entry(y).or_insert_with(paths).add(cost);
            }
        }
        Preset::Hmm => {
            // Every frame string split into runs of equal labels; each run
            // may be cut into several consecutive label occurrences.
            let total = a_len.pow(t_len as u32);
            for mut code in 0..total {
                let mut frames = Vec::with_capacity(t_len);
                for _ in 0..t_len {
                    frames.push((code % a_len) as LabelId);
                    code /= a_len;
                }
                let cost: f64 = frames.iter().enumerate().map(|(t, &l)| s[t][l as usize]).sum();
                // Bit i set: a new occurrence starts at frame i+1.
                let cuts = t_len.saturating_sub(1);
                for mask in 0u32..(1 << cuts) {
                    let valid = (0..cuts).all(|i| mask & (1 << i) == 0 || frames[i] == frames[i + 1]);
                    if !valid {
                        continue;
                    }
                    let mut y = Vec::new();
                    for (t, &l) in frames.iter().enumerate() {
                        if t == 0 || frames[t - 1] != l || mask & (1 << (t - 1)) != 0 {
                            y.push(l);
                        }
                    }
                    groups.entry(y).or_insert_with(paths).add(cost);
                }
            }
        }
        Preset::Rnnt => {
            // Symbol strings with exactly T blanks, ending on a blank, at
            // most 2T symbols; labels are read at the current frame.
            let b = blank.unwrap();
            let labels: Vec<LabelId> = (0..a_len as LabelId).filter(|&l| l != b).collect();
            fn rec(
                t: usize,
                y: &mut Vec<LabelId>,
                cost: f64,
                ctx: (&[Vec<f64>], &[LabelId], LabelId, usize, usize),
                groups: &mut HashMap<Vec<LabelId>, Paths>,
            ) {
                let (s, labels, b, t_len, max_labels) = ctx;
                if t == t_len {
                    groups.entry(y.clone()).or_insert_with(paths).add(cost);
                    return;
                }
                rec(t + 1, y, cost + s[t][b as usize], ctx, groups);
                if y.len() < max_labels {
                    for &l in labels {
                        y.push(l);
                        rec(t, y, cost + s[t][l as usize], ctx, groups);
                        y.pop();
                    }
                }
            }
            let mut y = Vec::new();
            rec(0, &mut y, 0.0, (s, &labels, b, t_len, max_labels.min(t_len)), &mut groups);
        }
        Preset::LabelSync => unreachable!(),
    }
    groups
        .into_iter()
        .filter(|(y, _)| y.len() <= max_labels)
        .map(|(y, p)| (y, (p.min, lse(&p.costs))))
        .collect()
}

/// Exhaustive reference: every lemma sequence and variant choice whose
/// labels have an alignment, with Viterbi and summed costs.
pub fn oracle(inst: &Instance) -> Vec<OracleEntry> {
    let t_len = inst.frames();
    let am = enumerate_alignments(inst, t_len);
    let lemmata = inst.lexicon.lemmata();
    let mut acc: BTreeMap<Vec<usize>, (f64, Vec<f64>)> = BTreeMap::new();
    let mut stack: Vec<(Vec<usize>, Vec<LabelId>)> = vec![(Vec::new(), Vec::new())];
    while let Some((words, labels)) = stack.pop() {
        if let Some(&(min, sum)) = am.get(&labels) {
            let e = acc.entry(words.clone()).or_insert((f64::INFINITY, Vec::new()));
            e.0 = e.0.min(min);
            e.1.push(sum);
        }
        for (li, lemma) in lemmata.iter().enumerate() {
            for v in &lemma.variants {
                if labels.len() + v.len() <= t_len {
                    let mut w = words.clone();
                    w.push(li);
                    let mut l = labels.clone();
                    l.extend_from_slice(v);
                    stack.push((w, l));
                }
            }
        }
    }
    let mut out: Vec<OracleEntry> = acc
        .into_iter()
        .map(|(lemmas, (min, sums))| {
            let lm = inst.lm_scale * inst.lm_cost(&lemmas);
            OracleEntry {
                viterbi: min + lm,
                full_sum: lse(&sums) + lm,
                lemmas,
            }
        })
        .collect();
    out.sort_by(|a, b| a.viterbi.total_cmp(&b.viterbi));
    out
}

/// Transcriptions whose Viterbi cost is within `tol` of the best.
pub fn best_set(entries: &[OracleEntry], tol: f64) -> Vec<&OracleEntry> {
    let best = entries[0].viterbi;
    entries.iter().filter(|e| e.viterbi <= best + tol).collect()
}

/// Prints one summary line per acceptance criterion.
pub fn report(id: usize, name: &str, ok: bool, detail: &str) {
    println!("ACCEPTANCE {id:>2} {} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}
