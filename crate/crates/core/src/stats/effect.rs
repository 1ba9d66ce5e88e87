use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMagnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl std::fmt::Display for EffectMagnitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EffectMagnitude::Negligible => "negligible",
            EffectMagnitude::Small => "small",
            EffectMagnitude::Medium => "medium",
            EffectMagnitude::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeReport {
    pub d_c: f64,
    pub m: usize,
    pub n: usize,
    /// Number of pairs with `x > y` and `x < y`.
    pub greater: u64,
    pub less: u64,
    pub magnitude: EffectMagnitude,
}

pub fn classify_effect(d_c: f64) -> Result<EffectMagnitude> {
    let a = d_c.abs();
    if !(a <= 1.0) {
        return Err(Error::InvalidArgument(format!("effect size {d_c} outside [-1, 1]")));
    }
    Ok(if a < 0.11 {
        EffectMagnitude::Negligible
    } else if a < 0.28 {
        EffectMagnitude::Small
    } else if a < 0.43 {
        EffectMagnitude::Medium
    } else {
        EffectMagnitude::Large
    })
}

/// Cliff's delta in O((m + n) log n): sort `y` once, then binary-search
/// each `x_i`.
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<EffectSizeReport> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("Cliff's delta needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("input sample".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut greater, mut less) = (0u64, 0u64);
    for &xi in x {
        greater += sorted.partition_point(|&v| v < xi) as u64;
        less += (sorted.len() - sorted.partition_point(|&v| v <= xi)) as u64;
    }
    let total = (x.len() as u64 * y.len() as u64) as f64;
    let d_c = (greater as f64 - less as f64) / total;
    Ok(EffectSizeReport { d_c, m: x.len(), n: y.len(), greater, less, magnitude: classify_effect(d_c)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_boundaries() {
        use EffectMagnitude::*;
        let cases = [(0.0, Negligible), (0.1099, Negligible), (0.11, Small), (0.2799, Small), (0.28, Medium), (-0.30, Medium), (0.43, Large), (-1.0, Large)];
        for (d, m) in cases {
            assert_eq!(classify_effect(d).unwrap(), m, "{d}");
        }
        assert!(classify_effect(1.01).is_err());
        assert!(classify_effect(f64::NAN).is_err());
    }

    #[test]
    fn examples() {
        let same = cliffs_delta(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert_eq!((same.d_c, same.magnitude), (0.0, EffectMagnitude::Negligible));
        let all = cliffs_delta(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((all.d_c, all.magnitude), (1.0, EffectMagnitude::Large));
        let r = cliffs_delta(&[1.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!((r.d_c, r.magnitude), (-0.25, EffectMagnitude::Small));
        assert!(cliffs_delta(&[], &[1.0]).is_err());
    }
}
