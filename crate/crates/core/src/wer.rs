//! Word error rate by unit-cost Levenshtein alignment.

use std::fmt;

/// Edit counts of one or more aligned sentence pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WerCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
}

impl WerCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Percentage of reference words. An empty reference gives 0% without
    /// errors and infinity with any.
    pub fn percent(&self) -> f64 {
        if self.reference_words == 0 {
            return if self.errors() == 0 { 0.0 } else { f64::INFINITY };
        }
        100.0 * self.errors() as f64 / self.reference_words as f64
    }

    pub fn add(&mut self, other: WerCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_words += other.reference_words;
    }
}

impl fmt::Display for WerCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "WER {:.3}% ({} errors / {} words: S={} I={} D={})",
            self.percent(),
            self.errors(),
            self.reference_words,
            self.substitutions,
            self.insertions,
            self.deletions
        )
    }
}

/// Minimum-edit alignment of `hyp` against `reference`. Among alignments of
/// equal cost, substitutions are preferred over insertion/deletion pairs.
pub fn align_words<S: AsRef<str>>(reference: &[S], hyp: &[S]) -> WerCounts {
    let (n, m) = (reference.len(), hyp.len());
    // (cost, substitutions, insertions, deletions)
    let mut prev: Vec<(usize, usize, usize, usize)> = (0..=m).map(|j| (j, 0, j, 0)).collect();
    for i in 1..=n {
        let mut cur = vec![(i, 0, 0, i); m + 1];
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hyp[j - 1].as_ref();
            let diag = prev[j - 1];
            let sub = (diag.0 + usize::from(!same), diag.1 + usize::from(!same), diag.2, diag.3);
            let ins = (cur[j - 1].0 + 1, cur[j - 1].1, cur[j - 1].2 + 1, cur[j - 1].3);
            let del = (prev[j].0 + 1, prev[j].1, prev[j].2, prev[j].3 + 1);
            cur[j] = [sub, ins, del].into_iter().min_by_key(|c| (c.0, c.2 + c.3)).unwrap();
        }
        prev = cur;
    }
    let (_, substitutions, insertions, deletions) = prev[m];
    WerCounts {
        substitutions,
        insertions,
        deletions,
        reference_words: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn worked_example() {
        let c = align_words(&words("a b c"), &words("a c d"));
        assert_eq!(c.errors(), 2);
        assert!((c.percent() - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(format!("{:.3}", c.percent()), "66.667");
    }

    #[test]
    fn identical_and_empty() {
        assert_eq!(align_words(&words("x y"), &words("x y")).percent(), 0.0);
        let c = align_words(&words("a"), &[]);
        assert_eq!((c.deletions, c.percent()), (1, 100.0));
        assert_eq!(align_words::<&str>(&[], &[]).percent(), 0.0);
    }

    /// Minimum edits over every monotone alignment, enumerated recursively.
    fn brute(r: &[u8], h: &[u8]) -> usize {
        match (r.split_first(), h.split_first()) {
            (None, _) => h.len(),
            (_, None) => r.len(),
            (Some((a, rr)), Some((b, hh))) => {
                let sub = brute(rr, hh) + usize::from(a != b);
                sub.min(brute(rr, h) + 1).min(brute(r, hh) + 1)
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(r in prop::collection::vec(0u8..3, 0..=5), h in prop::collection::vec(0u8..3, 0..=5)) {
            let rs: Vec<String> = r.iter().map(u8::to_string).collect();
            let hs: Vec<String> = h.iter().map(u8::to_string).collect();
            let c = align_words(&rs, &hs);
            prop_assert_eq!(c.errors(), brute(&r, &h));
            // Every reference word is matched, substituted or deleted.
            prop_assert!(c.substitutions + c.deletions <= r.len());
            prop_assert_eq!(r.len() + c.insertions - c.deletions, h.len());
        }
    }
}
