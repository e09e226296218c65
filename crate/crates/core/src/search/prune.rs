use std::cmp::Ordering;

/// Outcome counts of one pruning pass.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Pruned {
    pub score: usize,
    pub histogram: usize,
}

/// Prunes `items` in place by a score threshold relative to the best cost
/// and then to at most `histogram` entries. Survivors keep their order.
/// `key` returns the ranking cost and a tie-break rank.
pub(crate) fn prune<T>(items: &mut Vec<T>, threshold: f64, histogram: usize, key: impl Fn(&T) -> (f64, u64)) -> Pruned {
    let mut out = Pruned::default();
    if items.is_empty() {
        return out;
    }
    if threshold < f64::INFINITY {
        let best = items.iter().map(|h| key(h).0).fold(f64::INFINITY, f64::min);
        let before = items.len();
        items.retain(|h| key(h).0 <= best + threshold);
        out.score = before - items.len();
    }
    if items.len() > histogram {
        let before = items.len();
        keep_best(items, histogram, &key);
        out.histogram = before - items.len();
    }
    out
}

pub(crate) fn rank_cmp(a: (f64, u64), b: (f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` best entries by `key`, preserving the original order.
pub(crate) fn keep_best<T>(items: &mut Vec<T>, k: usize, key: impl Fn(&T) -> (f64, u64)) {
    if items.len() <= k {
        return;
    }
    if k == 0 {
        items.clear();
        return;
    }
    let keys: Vec<(f64, u64)> = items.iter().map(&key).collect();
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.select_nth_unstable_by(k - 1, |&a, &b| rank_cmp(keys[a], keys[b]));
    let mut keep = vec![false; items.len()];
    for &i in &idx[..k] {
        keep[i] = true;
    }
    let mut i = 0;
    items.retain(|_| {
        i += 1;
        keep[i - 1]
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_then_histogram() {
        let mut v = vec![3.0, 1.0, 2.5, 1.5, 9.0];
        let p = prune(&mut v, 2.0, 2, |&c| (c, 0));
        assert_eq!(v, vec![1.0, 1.5]);
        assert_eq!((p.score, p.histogram), (1, 2));
    }

    #[test]
    fn ties_break_by_rank() {
        let mut v = vec![(1.0, 3u64), (1.0, 1), (1.0, 2)];
        keep_best(&mut v, 2, |&(c, r)| (c, r));
        assert_eq!(v, vec![(1.0, 1), (1.0, 2)]);
    }

    proptest! {
        #[test]
        fn keeps_exactly_the_best(costs in prop::collection::vec(0.0f64..10.0, 0..40), k in 0usize..50) {
            let mut items: Vec<(f64, u64)> = costs.iter().enumerate().map(|(i, &c)| (c, i as u64)).collect();
            let mut sorted = items.clone();
            sorted.sort_by(|a, b| rank_cmp(*a, *b));
            keep_best(&mut items, k, |&x| x);
            let mut expect: Vec<_> = sorted.into_iter().take(k).collect();
            expect.sort_by_key(|x| x.1);
            prop_assert_eq!(items, expect);
        }
    }
}
