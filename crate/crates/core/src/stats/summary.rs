use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least-squares line `y = slope * x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::shape(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("line fit with constant x".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit { slope, intercept: my - slope * mx })
}

/// Linearly interpolated quantile of sorted data (type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn boxplot(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("box plot of an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input sample".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
    Ok(BoxStats {
        n: s.len(),
        median,
        q1,
        q3,
        whisker_low: inside.first().copied().unwrap_or(median),
        whisker_high: inside.last().copied().unwrap_or(median),
        outliers: s.iter().copied().filter(|v| !(lo..=hi).contains(v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_examples() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 2.0).abs() < 1e-12);

        let f = fit_line(&[0.0, 1.0, 2.0], &[0.0, 0.0, 3.0]).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12 && (f.intercept + 0.5).abs() < 1e-12);

        let f = fit_line(&[-1.0, -1.0, 1.0, 1.0], &[3.0, 5.0, 3.0, 5.0]).unwrap();
        assert_eq!((f.slope, f.intercept), (0.0, 4.0));

        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn box_with_outlier() {
        let b = boxplot(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (3.0, 5.0, 7.0));
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 8.0));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[7.0], 0.9), 7.0);
    }
}
