use std::fmt::Write as _;

/// One recognized word with its frame span `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordSpan {
    pub lemma: usize,
    pub orth: String,
    pub start: usize,
    pub end: usize,
    /// Acoustic cost since the previous word end.
    pub am: f64,
    /// Unscaled LM cost of the word.
    pub lm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NBestEntry {
    pub words: Vec<WordSpan>,
    /// Ranking cost, length-normalized if configured.
    pub cost: f64,
    /// `am + lm_scale * lm`.
    pub total: f64,
    pub am: f64,
    /// Unscaled LM cost including sentence end.
    pub lm: f64,
}

impl NBestEntry {
    pub fn orths(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.orth.as_str()).filter(|o| !o.is_empty()).collect()
    }

    pub fn lemmas(&self) -> Vec<usize> {
        self.words.iter().map(|w| w.lemma).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEdge {
    pub from: usize,
    pub to: usize,
    /// `None` on the final arc into an end node.
    pub word: Option<String>,
    pub am: f64,
    pub lm: f64,
}

/// Word graph with nodes numbered in `(t, creation)` order, so every edge
/// goes from a lower to a higher id.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Lattice {
    /// Frame of each node.
    pub nodes: Vec<usize>,
    pub edges: Vec<LatticeEdge>,
    pub finals: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    pub frames: usize,
    pub steps: usize,
    pub label_beam_max: usize,
    pub label_beam_sum: usize,
    pub word_end_beam_max: usize,
    pub word_end_beam_sum: usize,
    pub ended: usize,
    pub scorer_queries: usize,
    pub scorer_calls: usize,
    pub expanded: usize,
    pub pruned_local: usize,
    pub pruned_blank: usize,
    pub pruned_eos: usize,
    pub pruned_score: usize,
    pub pruned_histogram: usize,
    pub pruned_length: usize,
    pub recombined: usize,
    pub lookahead_tables: usize,
    pub early_stop: bool,
    /// Wall-clock time; reported in the log only, never in STATS lines.
    pub wall_ms: f64,
}

impl SearchStats {
    fn avg(sum: usize, steps: usize) -> f64 {
        if steps == 0 {
            0.0
        } else {
            sum as f64 / steps as f64
        }
    }

    pub fn label_beam_avg(&self) -> f64 {
        Self::avg(self.label_beam_sum, self.steps)
    }

    pub fn word_end_beam_avg(&self) -> f64 {
        Self::avg(self.word_end_beam_sum, self.steps)
    }

    /// Multi-line summary for the decode log.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "  frames            {}", self.frames);
        let _ = writeln!(s, "  steps             {}", self.steps);
        let _ = writeln!(
            s,
            "  label beam        max {} avg {:.2}",
            self.label_beam_max,
            self.label_beam_avg()
        );
        let _ = writeln!(
            s,
            "  word-end beam     max {} avg {:.2}",
            self.word_end_beam_max,
            self.word_end_beam_avg()
        );
        let _ = writeln!(s, "  ended             {}", self.ended);
        let _ = writeln!(s, "  scorer            {} calls, {} queries", self.scorer_calls, self.scorer_queries);
        let _ = writeln!(
            s,
            "  pruned            local {} blank {} eos {} score {} histogram {} length {}",
            self.pruned_local, self.pruned_blank, self.pruned_eos, self.pruned_score, self.pruned_histogram, self.pruned_length
        );
        let _ = writeln!(s, "  recombined        {}", self.recombined);
        let _ = writeln!(s, "  lookahead tables  {}", self.lookahead_tables);
        let _ = writeln!(s, "  wall time         {:.1} ms", self.wall_ms);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// Sorted by ranking cost, then creation order. Never empty.
    pub nbest: Vec<NBestEntry>,
    pub lattice: Option<Lattice>,
    pub stats: SearchStats,
}

impl DecodeResult {
    pub fn best(&self) -> &NBestEntry {
        &self.nbest[0]
    }
}

pub fn write_ctm(out: &mut String, rec: &str, channel: &str, words: &[WordSpan], frame_shift: f64) {
    let _ = writeln!(out, ";; {rec}");
    for w in words.iter().filter(|w| !w.orth.is_empty()) {
        let begin = w.start as f64 * frame_shift;
        let dur = (w.end - w.start) as f64 * frame_shift;
        let _ = writeln!(out, "{rec} {channel} {begin:.2} {dur:.2} {}", w.orth);
    }
}

pub fn write_nbest(out: &mut String, rec: &str, nbest: &[NBestEntry]) {
    let _ = writeln!(out, ";; {rec}");
    for (rank, e) in nbest.iter().enumerate() {
        let _ = write!(out, "{} {:.6}", rank + 1, e.cost);
        for w in e.orths() {
            let _ = write!(out, " {w}");
        }
        out.push('\n');
    }
}

pub fn write_lattice(out: &mut String, rec: &str, lattice: &Lattice) {
    let _ = writeln!(out, ";; {rec}");
    let _ = writeln!(out, "LATTICE {}", lattice.nodes.len());
    for (id, t) in lattice.nodes.iter().enumerate() {
        let _ = writeln!(out, "NODE {id} {t}");
    }
    for e in &lattice.edges {
        let word = e.word.as_deref().unwrap_or("ε");
        let _ = writeln!(out, "EDGE {} {} {word} {:.6} {:.6}", e.from, e.to, e.am, e.lm);
    }
    let _ = write!(out, "FINAL");
    for f in &lattice.finals {
        let _ = write!(out, " {f}");
    }
    out.push('\n');
}

pub fn write_stats(out: &mut String, rec: &str, s: &SearchStats) {
    let _ = writeln!(
        out,
        "STATS rec={rec} frames={} steps={} label_beam_max={} label_beam_avg={:.2} word_end_beam_max={} \
         word_end_beam_avg={:.2} ended={} scorer_calls={} scorer_queries={} expanded={} pruned_local={} \
         pruned_blank={} pruned_eos={} pruned_score={} pruned_histogram={} pruned_length={} recombined={} \
         lookahead_tables={} early_stop={}",
        s.frames,
        s.steps,
        s.label_beam_max,
        s.label_beam_avg(),
        s.word_end_beam_max,
        s.word_end_beam_avg(),
        s.ended,
        s.scorer_calls,
        s.scorer_queries,
        s.expanded,
        s.pruned_local,
        s.pruned_blank,
        s.pruned_eos,
        s.pruned_score,
        s.pruned_histogram,
        s.pruned_length,
        s.recombined,
        s.lookahead_tables,
        u8::from(s.early_stop)
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(orth: &str, start: usize, end: usize) -> WordSpan {
        WordSpan {
            lemma: 0,
            orth: orth.into(),
            start,
            end,
            am: 0.0,
            lm: 0.0,
        }
    }

    #[test]
    fn ctm_lines() {
        let mut s = String::new();
        write_ctm(&mut s, "rec1", "1", &[span("cat", 0, 40)], 0.01);
        assert_eq!(s, ";; rec1\nrec1 1 0.00 0.40 cat\n");
        let mut e = String::new();
        write_ctm(&mut e, "rec1", "1", &[], 0.01);
        assert_eq!(e, ";; rec1\n");
    }

    #[test]
    fn nbest_lines() {
        let entry = |cost: f64, words: &[&str]| NBestEntry {
            words: words.iter().map(|w| span(w, 0, 1)).collect(),
            cost,
            total: cost,
            am: cost,
            lm: 0.0,
        };
        let mut s = String::new();
        write_nbest(&mut s, "r", &[entry(0.5, &["a"]), entry(1.25, &["a", "b"])]);
        assert_eq!(s, ";; r\n1 0.500000 a\n2 1.250000 a b\n");
    }
}
