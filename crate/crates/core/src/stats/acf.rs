//! Sample autocorrelation and partial autocorrelation.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AcfResult {
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub conf_band: f64,
}

/// Biased-denominator ACF for lags `0..=max_lag` and the PACF from the
/// Durbin-Levinson recursion (`pacf[0] = 1`).
pub fn acf_pacf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::InvalidInput(format!(
            "ACF to lag {max_lag} needs more than {} observations, got {n}",
            max_lag + 1
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ACF series has missing values".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if c0 == 0.0 {
        return Err(Error::Numerical("ACF of a zero-variance series".into()));
    }
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect();

    let mut pacf = vec![1.0; max_lag + 1];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = acf[k] - phi.iter().enumerate().map(|(j, p)| p * acf[k - 1 - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 0..prev.len() {
            phi[j] = prev[j] - a * prev[prev.len() - 1 - j];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        pacf[k] = a;
    }
    Ok(AcfResult {
        acf,
        pacf,
        conf_band: 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities() {
        let s: Vec<f64> = (0..200).map(|i| ((i * 37) % 23) as f64).collect();
        let r = acf_pacf(&s, 10).unwrap();
        assert_eq!(r.acf[0], 1.0);
        assert_eq!(r.pacf[1], r.acf[1]);
        assert_eq!(r.acf.len(), 11);
        assert!((r.conf_band - 1.96 / 200f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pacf_matches_yule_walker_solve() {
        let s: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.31).sin() + ((i * 13) % 7) as f64 * 0.1).collect();
        let r = acf_pacf(&s, 4).unwrap();
        // Last coefficient of the order-4 Yule-Walker system.
        let m = nalgebra::DMatrix::from_fn(4, 4, |i, j| r.acf[i.abs_diff(j)]);
        let rhs = nalgebra::DVector::from_fn(4, |i, _| r.acf[i + 1]);
        let sol = m.lu().solve(&rhs).unwrap();
        assert!((sol[3] - r.pacf[4]).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(acf_pacf(&[1.0; 50], 5).is_err());
        assert!(acf_pacf(&[1.0, 2.0, 3.0], 2).is_err());
    }
}
