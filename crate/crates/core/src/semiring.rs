//! Log-semiring arithmetic on costs (negative log probabilities).

/// `-ln(e^-a + e^-b)`.
pub fn neg_log_add(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY {
        return b;
    }
    if b == f64::INFINITY {
        return a;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    lo - (lo - hi).exp().ln_1p()
}

/// `-ln sum_i e^-c_i`; infinity for an empty input.
pub fn neg_log_sum(costs: impl IntoIterator<Item = f64>) -> f64 {
    let costs: Vec<f64> = costs.into_iter().collect();
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if lo == f64::INFINITY {
        return lo;
    }
    lo - costs.iter().map(|c| (lo - c).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums() {
        assert!((neg_log_add(1.0, 2.0) - 0.686738).abs() < 1e-6);
        assert!((neg_log_sum([1.0, 2.0]) - 0.686738).abs() < 1e-6);
        assert_eq!(neg_log_add(f64::INFINITY, 3.0), 3.0);
        assert_eq!(neg_log_sum([]), f64::INFINITY);
        let p: f64 = [0.12f64, 0.42, 0.06].iter().sum();
        let c = neg_log_sum([0.12f64, 0.42, 0.06].map(|p| -p.ln()));
        assert!((c + p.ln()).abs() < 1e-12);
    }
}
