use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ranks;
use crate::{Error, Result};

/// Largest number of non-zero differences handled by the exact null
/// distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    Normal,
    /// Every difference was zero; `p` is set to 1.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    /// Non-zero differences that entered the test.
    pub n: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub m_comparisons: usize,
    pub corrected_threshold: f64,
    pub significant: bool,
    pub method: TestMethod,
}

impl TestResult {
    /// Re-evaluates significance for a different family size.
    pub fn with_correction(mut self, alpha: f64, m: usize) -> Result<Self> {
        self.alpha = alpha;
        self.m_comparisons = m;
        self.corrected_threshold = bonferroni_threshold(alpha, m)?;
        self.significant = self.p_value < self.corrected_threshold;
        Ok(self)
    }
}

pub fn bonferroni_threshold(alpha: f64, m: usize) -> Result<f64> {
    if m == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} with {m} comparisons")));
    }
    Ok(alpha / m as f64)
}

/// Paired two-sided Wilcoxon signed-rank test of `a - b`.
///
/// Zero differences are dropped before ranking and tied magnitudes share
/// average ranks. Up to [`EXACT_MAX_N`] non-zero pairs the p-value is exact:
/// the null distribution of the (doubled, hence integral) rank sum is built
/// by counting sign assignments, so ties are handled exactly as well. Above
/// that, a normal approximation with tie-corrected variance is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], alpha: f64, m_comparisons: usize) -> Result<TestResult> {
    let threshold = bonferroni_threshold(alpha, m_comparisons)?;
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired differences".into()));
    }
    let nz: Vec<f64> = diffs.into_iter().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    let base = TestResult {
        statistic: 0.0,
        n,
        p_value: 1.0,
        alpha,
        m_comparisons,
        corrected_threshold: threshold,
        significant: false,
        method: TestMethod::Degenerate,
    };
    if n == 0 {
        return Ok(base);
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let r = ranks(&abs);
    let w_plus: f64 = r.iter().zip(&nz).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();

    let (p, method) = if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = r.iter().map(|v| (2.0 * v).round() as usize).collect();
        (exact_p(&doubled, (2.0 * w_plus).round() as usize), TestMethod::Exact)
    } else {
        (normal_p(&abs, n, w_plus), TestMethod::Normal)
    };
    let p_value = p.min(1.0);
    Ok(TestResult { statistic: w_plus, p_value, significant: p_value < threshold, method, ..base })
}

/// `P(|W - mu| >= |w - mu|)` under the sign-flip null, in doubled-rank units.
fn exact_p(doubled: &[usize], w: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let dev = |s: usize| (2 * s).abs_diff(total);
    let observed = dev(w);
    let extreme: u64 = counts.iter().enumerate().filter(|&(s, _)| dev(s) >= observed).map(|(_, &c)| c).sum();
    extreme as f64 / 2f64.powi(doubled.len() as i32)
}

fn normal_p(abs: &[f64], n: usize, w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean).abs() / var.sqrt();
    let std = Normal::standard();
    2.0 * (1.0 - std.cdf(z))
}
