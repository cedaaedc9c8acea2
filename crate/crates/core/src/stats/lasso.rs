//! LASSO regularization path by cyclic coordinate descent.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 100_000;

/// Solutions along a decreasing penalty path. Coefficients are on the
/// standardized scale (columns centered, population sd 1); `original`
/// converts them back.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub coefs: Vec<Vec<f64>>,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
}

impl LassoPath {
    /// Intercept and slopes on the original scale for path index `i`.
    pub fn original(&self, i: usize) -> (f64, Vec<f64>) {
        let slopes: Vec<f64> = self.coefs[i]
            .iter()
            .zip(&self.x_sd)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        let intercept =
            self.y_mean - slopes.iter().zip(&self.x_mean).map(|(b, m)| b * m).sum::<f64>();
        (intercept, slopes)
    }

    pub fn predict(&self, i: usize, x: &DMatrix<f64>) -> Vec<f64> {
        let (b0, b) = self.original(i);
        (0..x.nrows())
            .map(|r| b0 + (0..x.ncols()).map(|c| b[c] * x[(r, c)]).sum::<f64>())
            .collect()
    }
}

struct Standardized {
    cols: Vec<Vec<f64>>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

fn standardize(x: &DMatrix<f64>, y: &[f64]) -> Standardized {
    let n = x.nrows() as f64;
    let mut cols = Vec::with_capacity(x.ncols());
    let mut mean = Vec::with_capacity(x.ncols());
    let mut sd = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let c = x.column(j);
        let m = c.iter().sum::<f64>() / n;
        let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        cols.push(if s > 0.0 {
            c.iter().map(|v| (v - m) / s).collect()
        } else {
            vec![0.0; x.nrows()]
        });
        mean.push(m);
        sd.push(s);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    Standardized {
        cols,
        mean,
        sd,
        y: y.iter().map(|v| v - y_mean).collect(),
        y_mean,
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() || x.nrows() < 2 {
        return Err(Error::InvalidInput("LASSO needs matching X and y with at least 2 rows".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("LASSO inputs must be finite".into()));
    }
    Ok(())
}

/// Smallest penalty at which every coefficient is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let s = standardize(x, y);
    let n = y.len() as f64;
    Ok(s.cols
        .iter()
        .map(|c| (c.iter().zip(&s.y).map(|(a, b)| a * b).sum::<f64>() / n).abs())
        .fold(0.0, f64::max))
}

/// `count` penalties spaced evenly in log from `lambda_max` down to
/// `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| lambda_max * (step * i as f64).exp()).collect()
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimize `(1/2n)||y - Xb||^2 + lambda ||b||_1` for every penalty in
/// `lambdas` (strictly decreasing), warm-starting each from the last.
pub fn lasso_path(x: &DMatrix<f64>, y: &[f64], lambdas: &[f64]) -> Result<LassoPath> {
    check_inputs(x, y)?;
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidInput("LASSO penalties must be finite and non-negative".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("LASSO penalties must be strictly decreasing".into()));
    }
    let s = standardize(x, y);
    let n = y.len() as f64;
    let p = s.cols.len();
    let mut beta = vec![0.0; p];
    let mut resid = s.y.clone();
    let mut coefs = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                if s.sd[j] == 0.0 {
                    continue;
                }
                let col = &s.cols[j];
                let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n + beta[j];
                let new = soft(rho, lambda);
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (r, a) in resid.iter_mut().zip(col) {
                        *r -= a * delta;
                    }
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "coordinate descent did not converge at lambda {lambda}"
            )));
        }
        coefs.push(beta.clone());
    }
    Ok(LassoPath {
        lambdas: lambdas.to_vec(),
        coefs,
        x_mean: s.mean,
        x_sd: s.sd,
        y_mean: s.y_mean,
    })
}
