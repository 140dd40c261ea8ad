use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest pooled sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApproximation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    /// U statistic of the first sample.
    pub u: f64,
    /// U statistic of the second sample; `u + u_other = n1 * n2`.
    pub u_other: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: TestMethod,
    pub n1: usize,
    pub n2: usize,
}

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of arrangements of `n1` and `n2` untied observations giving each
/// value of U for the first sample, indexed by U.
pub fn exact_u_counts(n1: usize, n2: usize) -> Vec<u64> {
    // counts[m][n][u], built up one sample size at a time: the largest of
    // m + n observations is either from the first sample (adding n to U)
    // or from the second.
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<u64>> = (0..=n2).map(|_| vec![1]).collect();
    for m in 1..=n1 {
        let mut cur: Vec<Vec<u64>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1]);
        for n in 1..=n2 {
            let mut row = vec![0u64; m * n + 1];
            for (u, &c) in prev[n].iter().enumerate() {
                row[u + n] += c;
            }
            for (u, &c) in cur[n - 1].iter().enumerate() {
                row[u] += c;
            }
            cur.push(row);
        }
        prev = cur;
    }
    let mut out = prev.swap_remove(n2);
    out.resize(max_u + 1, 0);
    out
}

/// Mann-Whitney U test with midranks for ties.
///
/// Uses the exact null distribution when `n1 + n2 <= 12` and there are no
/// ties, otherwise the normal approximation with tie and continuity
/// corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<StatTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input(format!("samples of size {} and {}; both must be non-empty", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Input("samples contain NaN".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let nn = (n1 * n2) as f64;

    let (p, method) = if ties.is_empty() && n1 + n2 <= EXACT_LIMIT {
        let counts = exact_u_counts(n1, n2);
        let total: u64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower = counts[..=k].iter().sum::<u64>() as f64 / total as f64;
        let upper = counts[k..].iter().sum::<u64>() as f64 / total as f64;
        let p = match alternative {
            Alternative::Less => lower,
            Alternative::Greater => upper,
            Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        };
        (p, TestMethod::Exact)
    } else {
        let n = (n1 + n2) as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = nn / 12.0 * ((n + 1.0) - tie_term);
        let mean = nn / 2.0;
        let p = if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            let phi = Normal::standard();
            match alternative {
                Alternative::Less => phi.cdf((u - mean + 0.5) / sd),
                Alternative::Greater => phi.sf((u - mean - 0.5) / sd),
                Alternative::TwoSided => {
                    let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
                    (2.0 * phi.sf(z)).min(1.0)
                }
            }
        };
        (p, TestMethod::NormalApproximation)
    };
    Ok(StatTestResult {
        u,
        u_other: nn - u,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        alternative,
        method,
        n1,
        n2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.u_other, 9.0);
        assert_eq!(r.method, TestMethod::Exact);
        assert!((r.p_value - 0.05).abs() < 1e-15);
        let g = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert_eq!(g.p_value, 1.0);
        let t = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).unwrap();
        assert!((t.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [0.91, 0.93, 0.95, 0.97];
        let r = mann_whitney_u(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.method, TestMethod::NormalApproximation);
        assert_eq!(r.u, 8.0);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn all_tied_has_zero_variance() {
        let r = mann_whitney_u(&[1.0; 4], &[1.0; 5], Alternative::Less).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn counts_are_symmetric_and_sum_to_binomial() {
        let c = exact_u_counts(4, 6);
        assert_eq!(c.len(), 25);
        assert_eq!(c.iter().sum::<u64>(), 210);
        for u in 0..c.len() {
            assert_eq!(c[u], c[c.len() - 1 - u]);
        }
        assert_eq!(exact_u_counts(3, 3), vec![1, 1, 2, 3, 3, 3, 3, 2, 1, 1]);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![2]);
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(matches!(mann_whitney_u(&[], &[1.0], Alternative::Less), Err(Error::Input(_))));
    }
}
