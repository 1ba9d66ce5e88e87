use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub mean: f64,
    /// `1.96 * s / sqrt(n)` with the sample standard deviation `s`.
    pub ci95_halfwidth: f64,
    pub n: usize,
    /// Set when `n == 1`: the spread is undefined and reported as 0.
    pub single_sample: bool,
}

/// Mean and normal-approximation 95% confidence half-width of pooled scores.
pub fn aggregate(values: &[f64]) -> Result<ConditionAggregate> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty score list".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(ConditionAggregate { mean, ci95_halfwidth: 0.0, n, single_sample: true });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(ConditionAggregate { mean, ci95_halfwidth: 1.96 * var.sqrt() / (n as f64).sqrt(), n, single_sample: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let one = aggregate(&[0.5]).unwrap();
        assert_eq!((one.mean, one.ci95_halfwidth, one.single_sample), (0.5, 0.0, true));
        let two = aggregate(&[0.0, 1.0]).unwrap();
        assert_eq!(two.mean, 0.5);
        assert!((two.ci95_halfwidth - 0.98).abs() < 1e-12);
        assert_eq!(aggregate(&[0.3; 5]).unwrap().ci95_halfwidth, 0.0);
        assert!(aggregate(&[]).is_err());
    }
}
