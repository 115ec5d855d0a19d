use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Largest sample size accepted by [`PValueMethod::ExactPermutation`].
pub const MAX_EXACT_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Two-sided Student t approximation with n - 2 degrees of freedom.
    #[default]
    TApprox,
    /// Two-sided exact test over all n! permutations of y.
    ExactPermutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with a t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, EvalError> {
    spearman_with(x, y, PValueMethod::TApprox)
}

pub fn spearman_with(
    x: &[f64],
    y: &[f64],
    method: PValueMethod,
) -> Result<CorrelationResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::TooFewPoints(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NotFinite);
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or(EvalError::ZeroVariance)?;
    let p_value = match method {
        PValueMethod::TApprox => t_approx_p(rho, n),
        PValueMethod::ExactPermutation => {
            if n > MAX_EXACT_N {
                return Err(EvalError::TooManyForExact {
                    n,
                    max: MAX_EXACT_N,
                });
            }
            permutation_p(&rx, &ry, rho)
        }
    };
    Ok(CorrelationResult { rho, p_value, n })
}

fn t_approx_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Share of permutations of `ry` whose |rho| reaches the observed |rho|.
fn permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let target = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).map_or(false, |r| r.abs() >= target) {
            hits += 1;
        }
    };
    // Heap's algorithm, iterative form
    let n = perm.len();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn perfect_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
        assert_eq!(up.rho, 1.0);
        assert_eq!(up.p_value, 0.0);
        let down = spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(down.rho, -1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0]),
            Err(EvalError::TooFewPoints(2))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::ZeroVariance)
        ));
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(EvalError::LengthMismatch(3, 2))
        ));
        assert!(matches!(
            spearman(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::NotFinite)
        ));
        let big: Vec<f64> = (0..11).map(f64::from).collect();
        assert!(matches!(
            spearman_with(&big, &big, PValueMethod::ExactPermutation),
            Err(EvalError::TooManyForExact { .. })
        ));
    }

    #[test]
    fn t_approx_reference_value() {
        // x = 1..10, y a fixed shuffle without ties: rho = 1 - 6*sum(d^2)/(n(n^2-1))
        // with sum(d^2) = 16.
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0, 10.0, 8.0, 9.0];
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        assert_eq!(d2, 16.0);
        let expected = 1.0 - 6.0 * d2 / (10.0 * 99.0);
        let r = spearman(&x, &y).unwrap();
        assert!((r.rho - expected).abs() < 1e-12);
        // t = rho*sqrt(8/(1-rho^2)) ~ 5.94 with 8 df: two-sided p well below 0.001
        assert!(r.p_value > 0.0 && r.p_value < 1e-3);
    }

    #[test]
    fn exact_test_on_small_sample() {
        // n = 4, perfect order: only the identity and its reverse reach |rho| = 1.
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = spearman_with(&x, &x, PValueMethod::ExactPermutation).unwrap();
        assert!((r.p_value - 2.0 / 24.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_rank_invariant(
            pairs in prop::collection::vec((0u8..6, -50.0f64..50.0), 3..30),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let Ok(a) = spearman(&x, &y) else { return Ok(()) };
            let b = spearman(&y, &x).unwrap();
            prop_assert!((a.rho - b.rho).abs() < 1e-12);
            prop_assert!(a.rho.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
            let ex: Vec<f64> = x.iter().map(|v| (v / 10.0).exp()).collect();
            let af: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
            prop_assert!((spearman(&ex, &y).unwrap().rho - a.rho).abs() < 1e-12);
            prop_assert!((spearman(&x, &af).unwrap().rho - a.rho).abs() < 1e-12);
        }
    }
}
