use crate::{Error, Result};

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn bessel_i0(x: f64) -> f64 {
    let (mut sum, mut term, mut k) = (1.0, 1.0, 1.0);
    while term > 1e-16 * sum {
        term *= (x / (2.0 * k)).powi(2);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Rational-ratio resampling with a Kaiser-windowed sinc low-pass
/// (beta 5, ten zero crossings per side at the narrower rate).
pub fn resample(x: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
    if from == 0 || to == 0 {
        return Err(Error::InvalidArgument("sample rates must be positive".into()));
    }
    if from == to {
        return Ok(x.to_vec());
    }
    let g = gcd(from, to);
    let (up, down) = ((to / g) as usize, (from / g) as usize);
    let max_rate = up.max(down);
    let half = 10 * max_rate;
    let fc = 1.0 / max_rate as f64;
    let beta = 5.0;
    let i0b = bessel_i0(beta);
    let h: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let t = k as f64 - half as f64;
            let arg = std::f64::consts::PI * fc * t;
            let sinc = if t == 0.0 { 1.0 } else { arg.sin() / arg };
            let r = t / half as f64;
            let win = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            up as f64 * fc * sinc * win
        })
        .collect();

    let out_len = (x.len() * up).div_ceil(down);
    let mut y = vec![0.0; out_len];
    for (m, ym) in y.iter_mut().enumerate() {
        // Position of output sample m on the upsampled grid, filter centred on it.
        let centre = (m * down) as isize;
        let lo = ((centre - half as isize).max(0) as usize).div_ceil(up);
        let hi = (((centre + half as isize) / up as isize) as usize).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        for n in lo..=hi {
            let k = (centre - (n * up) as isize + half as isize) as usize;
            acc += x[n] * h[k];
        }
        *ym = acc;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_survives_16k_to_10k() {
        let f = 1000.0;
        let x: Vec<f64> = (0..16_000).map(|n| (std::f64::consts::TAU * f * n as f64 / 16_000.0).sin()).collect();
        let y = resample(&x, 16_000, 10_000).unwrap();
        assert_eq!(y.len(), 10_000);
        for (m, v) in y.iter().enumerate().skip(200).take(9_600) {
            let expect = (std::f64::consts::TAU * f * m as f64 / 10_000.0).sin();
            assert!((v - expect).abs() < 2e-3, "{m}: {v} vs {expect}");
        }
    }

    #[test]
    fn content_above_new_nyquist_is_removed() {
        let x: Vec<f64> = (0..16_000).map(|n| (std::f64::consts::TAU * 6500.0 * n as f64 / 16_000.0).sin()).collect();
        let y = resample(&x, 16_000, 10_000).unwrap();
        let rms = (y[200..9_800].iter().map(|v| v * v).sum::<f64>() / 9_600.0).sqrt();
        assert!(rms < 0.01, "{rms}");
    }

    #[test]
    fn identity_rate() {
        assert_eq!(resample(&[1.0, 2.0], 8000, 8000).unwrap(), vec![1.0, 2.0]);
    }
}
