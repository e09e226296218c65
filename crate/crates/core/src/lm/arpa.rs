use std::collections::HashMap;
use std::f64::consts::LN_10;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::{LanguageModel, LmState};
use crate::error::LmError;

pub const SENTENCE_BEGIN: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";
pub const UNKNOWN: &str = "<unk>";

#[derive(Clone, Copy, Debug)]
struct Entry {
    cost: f64,
    backoff: f64,
}

/// Back-off n-gram model read from an ARPA file. Log10 values are converted
/// to natural-log costs at load time.
#[derive(Debug)]
pub struct NGramLm {
    order: usize,
    vocab: HashMap<String, u32>,
    /// One table per order; keys are token-id tuples.
    grams: Vec<FxHashMap<Box<[u32]>, Entry>>,
    begin: Option<u32>,
    end: Option<u32>,
    unk: Option<u32>,
}

pub fn load_arpa(text: &str) -> Result<NGramLm, LmError> {
    let err = |line: usize, msg: String| LmError::Arpa { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => return Err(err(1, "missing \\data\\ section".into())),
        }
    }
    let mut counts: Vec<usize> = Vec::new();
    let mut pending = None;
    for (line, l) in lines.by_ref() {
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("ngram ") {
            let (n, c) = rest
                .split_once('=')
                .ok_or_else(|| err(line, format!("bad count line `{l}`")))?;
            let n: usize = n.trim().parse().map_err(|_| err(line, format!("bad order `{n}`")))?;
            let c: usize = c.trim().parse().map_err(|_| err(line, format!("bad count `{c}`")))?;
            if n != counts.len() + 1 {
                return Err(err(line, format!("unexpected order {n}")));
            }
            counts.push(c);
        } else {
            pending = Some((line, l));
            break;
        }
    }
    if counts.is_empty() {
        return Err(err(1, "no ngram counts in \\data\\".into()));
    }

    let order = counts.len();
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut grams: Vec<FxHashMap<Box<[u32]>, Entry>> = vec![FxHashMap::default(); order];
    let mut current: Option<usize> = None;
    let mut seen = vec![0usize; order];
    let mut ended = false;

    let rest = pending.into_iter().chain(lines);
    for (line, l) in rest {
        if l.is_empty() {
            continue;
        }
        if l == "\\end\\" {
            ended = true;
            break;
        }
        if let Some(header) = l.strip_prefix('\\') {
            let n = header
                .strip_suffix("-grams:")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1 && n <= order)
                .ok_or_else(|| err(line, format!("bad section header `{l}`")))?;
            if let Some(prev) = current {
                if seen[prev - 1] != counts[prev - 1] {
                    return Err(err(
                        line,
                        format!("{prev}-grams: {} entries, header says {}", seen[prev - 1], counts[prev - 1]),
                    ));
                }
            }
            current = Some(n);
            continue;
        }
        let n = current.ok_or_else(|| err(line, "entry outside an n-gram section".into()))?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != n + 1 && fields.len() != n + 2 {
            return Err(err(line, format!("expected {n} tokens")));
        }
        let parse = |f: &str| -> Result<f64, LmError> {
            let v: f64 = f.parse().map_err(|_| err(line, format!("bad number `{f}`")))?;
            if v.is_nan() || v == f64::INFINITY {
                return Err(err(line, format!("bad number `{f}`")));
            }
            Ok(v)
        };
        let logprob = parse(fields[0])?;
        let backoff = if fields.len() == n + 2 { parse(fields[n + 1])? } else { 0.0 };
        let mut key = Vec::with_capacity(n);
        for tok in &fields[1..=n] {
            let id = match vocab.get(*tok) {
                Some(&id) => id,
                None if n == 1 => {
                    let id = vocab.len() as u32;
                    vocab.insert(tok.to_string(), id);
                    id
                }
                None => return Err(err(line, format!("token `{tok}` has no unigram"))),
            };
            key.push(id);
        }
        grams[n - 1].insert(
            key.into_boxed_slice(),
            Entry {
                cost: -logprob * LN_10,
                backoff: -backoff * LN_10,
            },
        );
        seen[n - 1] += 1;
    }
    if !ended {
        return Err(err(text.lines().count(), "missing \\end\\".into()));
    }
    if let Some(last) = current {
        if seen[last - 1] != counts[last - 1] {
            return Err(err(
                text.lines().count(),
                format!("{last}-grams: {} entries, header says {}", seen[last - 1], counts[last - 1]),
            ));
        }
    }
    for (n, (&s, &c)) in seen.iter().zip(&counts).enumerate() {
        if s != c {
            return Err(err(1, format!("{}-grams: {s} entries, header says {c}", n + 1)));
        }
    }

    Ok(NGramLm {
        order,
        begin: vocab.get(SENTENCE_BEGIN).copied(),
        end: vocab.get(SENTENCE_END).copied(),
        unk: vocab.get(UNKNOWN).copied(),
        vocab,
        grams,
    })
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn token_id(&self, token: &str) -> Result<u32, LmError> {
        self.vocab
            .get(token)
            .copied()
            .or(self.unk)
            .ok_or_else(|| LmError::Oov(token.to_string()))
    }

    /// `cost(w | h)` by the back-off recursion.
    fn cost(&self, history: &[u32], word: u32) -> f64 {
        let mut backoff = 0.0;
        let mut key: Vec<u32> = Vec::with_capacity(history.len() + 1);
        for start in 0..=history.len() {
            let ctx = &history[start..];
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.grams[ctx.len()].get(key.as_slice()) {
                return backoff + e.cost;
            }
            if !ctx.is_empty() {
                if let Some(e) = self.grams[ctx.len() - 1].get(ctx) {
                    backoff += e.backoff;
                }
            }
        }
        unreachable!("token ids always have a unigram entry")
    }

    fn history<'a>(&self, state: &'a LmState) -> &'a [u32] {
        match state {
            LmState::Ngram(h) => h,
            _ => &[],
        }
    }

    fn advance(&self, history: &[u32], word: u32) -> LmState {
        let keep = self.order - 1;
        let mut next: Vec<u32> = Vec::with_capacity(keep);
        if keep > 0 {
            let start = (history.len() + 1).saturating_sub(keep);
            next.extend(history.iter().copied().chain(std::iter::once(word)).skip(start));
        }
        LmState::Ngram(Arc::from(next))
    }
}

impl LanguageModel for NGramLm {
    fn initial_state(&self) -> LmState {
        match self.begin {
            Some(b) if self.order > 1 => LmState::Ngram(Arc::from([b])),
            _ => LmState::Ngram(Arc::from([])),
        }
    }

    fn unigram_state(&self) -> LmState {
        LmState::Ngram(Arc::from([]))
    }

    fn score(&self, state: &LmState, token: &str) -> Result<(f64, LmState), LmError> {
        let word = self.token_id(token)?;
        let history = self.history(state);
        Ok((self.cost(history, word), self.advance(history, word)))
    }

    fn sentence_end(&self, state: &LmState) -> f64 {
        match self.end {
            Some(end) => self.cost(self.history(state), end),
            None => 0.0,
        }
    }

    fn accepts(&self, token: &str) -> bool {
        self.token_id(token).is_ok()
    }

    fn context_limit(&self) -> Option<usize> {
        Some(self.order - 1)
    }
}
