//! Augmented Dickey-Fuller test with a constant term.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::least_squares;

/// MacKinnon (2010) response-surface coefficients, constant only, one
/// series: value = b0 + b1/T + b2/T^2 + b3/T^3.
const CRIT_COEFS: [(&str, [f64; 4]); 3] = [
    ("1%", [-3.43035, -6.5393, -16.786, -79.433]),
    ("5%", [-2.86154, -2.8903, -4.234, -40.040]),
    ("10%", [-2.56677, -1.5384, -2.809, 0.0]),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub critical_values: BTreeMap<String, f64>,
    pub reject_at_5pct: bool,
}

/// Finite-sample critical value at `level` ("1%", "5%" or "10%").
pub fn critical_value(level: &str, n_obs: usize) -> Option<f64> {
    let inv = 1.0 / n_obs as f64;
    CRIT_COEFS
        .iter()
        .find(|(l, _)| *l == level)
        .map(|(_, b)| b[0] + inv * (b[1] + inv * (b[2] + inv * b[3])))
}

/// Regression of `dy[t]` on a constant, `y[t-1]` and `lags` lagged
/// differences, over the last `nobs` differences.
fn design(y: &[f64], dy: &[f64], lags: usize, nobs: usize) -> (DMatrix<f64>, Vec<f64>) {
    let m = dy.len();
    let first = m - nobs;
    let x = DMatrix::from_fn(nobs, 2 + lags, |r, c| {
        let t = first + r;
        match c {
            0 => 1.0,
            1 => y[t],
            _ => dy[t - (c - 1)],
        }
    });
    (x, dy[first..].to_vec())
}

fn aic(ssr: f64, nobs: usize, k: usize) -> f64 {
    let n = nobs as f64;
    let llf = -n / 2.0 * ((2.0 * std::f64::consts::PI).ln() + (ssr / n).ln() + 1.0);
    -2.0 * llf + 2.0 * k as f64
}

/// ADF test choosing the lag order in `0..=max_lags` by minimum AIC.
///
/// All candidate orders are compared on the common sample that the largest
/// order allows; the chosen order is then refitted on its full sample.
pub fn adf_test(series: &[f64], max_lags: usize) -> Result<AdfResult> {
    if series.len() < 20 + max_lags {
        return Err(Error::InvalidInput(format!(
            "ADF needs at least {} observations, got {}",
            20 + max_lags,
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ADF series has missing values".into()));
    }
    if series.iter().all(|v| *v == series[0]) {
        return Err(Error::Numerical("ADF regression is singular for a constant series".into()));
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let common = dy.len() - max_lags;
    let mut best = (f64::INFINITY, 0usize);
    for lags in 0..=max_lags {
        let (x, z) = design(series, &dy, lags, common);
        let ls = least_squares(&x, &z)?;
        let ic = aic(ls.ssr, common, lags + 2);
        if ic < best.0 {
            best = (ic, lags);
        }
    }
    let lags = best.1;

    let nobs = dy.len() - lags;
    let (x, z) = design(series, &dy, lags, nobs);
    let ls = least_squares(&x, &z)?;
    if ls.rank_deficient {
        return Err(Error::Numerical("ADF regression is singular".into()));
    }
    let sigma2 = ls.ssr / (nobs - x.ncols()) as f64;
    let statistic = ls.beta[1] / (sigma2 * ls.xtx_inv_diag[1]).sqrt();
    let critical_values: BTreeMap<String, f64> = CRIT_COEFS
        .iter()
        .map(|(l, _)| (l.to_string(), critical_value(l, nobs).expect("known level")))
        .collect();
    let reject_at_5pct = statistic < critical_values["5%"];
    Ok(AdfResult {
        statistic,
        lags_used: lags,
        n_obs: nobs,
        critical_values,
        reject_at_5pct,
    })
}
