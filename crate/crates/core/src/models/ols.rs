//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of an R diagonal entry below which the design is treated
/// as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Ridge added to the normal equations of a rank-deficient design, relative
/// to the mean diagonal of `X'X`.
const RIDGE_JITTER: f64 = 1e-10;

/// Solution of `min ||y - X b||^2` for a design that already holds any
/// intercept column.
#[derive(Clone, Debug)]
pub(crate) struct LeastSquares {
    pub beta: Vec<f64>,
    pub ssr: f64,
    /// Diagonal of `(X'X)^-1`, for standard errors.
    pub xtx_inv_diag: Vec<f64>,
    pub rank_deficient: bool,
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput("design and response lengths differ".into()));
    }
    if p == 0 || n < p {
        return Err(Error::InvalidInput(format!(
            "least squares needs at least as many rows as columns ({n} < {p})"
        )));
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let deficient = max_diag == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag);

    let (beta, inv_diag) = if deficient {
        let mut xtx = x.transpose() * x;
        let scale = (0..p).map(|i| xtx[(i, i)]).sum::<f64>() / p as f64;
        let ridge = RIDGE_JITTER * scale.max(f64::MIN_POSITIVE);
        for i in 0..p {
            xtx[(i, i)] += ridge;
        }
        let chol = xtx
            .cholesky()
            .ok_or_else(|| Error::Numerical("regularized normal equations not positive definite".into()))?;
        let beta = chol.solve(&(x.transpose() * &yv));
        let inv = chol.inverse();
        (beta, (0..p).map(|i| inv[(i, i)]).collect::<Vec<_>>())
    } else {
        let qty = qr.q().transpose() * &yv;
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
        let diag = (0..p).map(|i| r_inv.row(i).norm_squared()).collect();
        (beta, diag)
    };
    let resid = &yv - x * &beta;
    Ok(LeastSquares {
        beta: beta.iter().copied().collect(),
        ssr: resid.norm_squared(),
        xtx_inv_diag: inv_diag,
        rank_deficient: deficient,
    })
}

/// Fitted linear model. `names[0]` is `"intercept"`; `coefficients` aligns
/// with `names`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub n_train: usize,
    pub condition_warning: bool,
}

impl LinearFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names[1..]
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.names.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.names.len() - 1,
                x.ncols()
            )));
        }
        Ok((0..x.nrows())
            .map(|i| {
                let mut acc = self.coefficients[0];
                for j in 0..x.ncols() {
                    acc += self.coefficients[j + 1] * x[(i, j)];
                }
                acc
            })
            .collect())
    }
}

/// Fit `y ~ 1 + X` by Householder QR, falling back to ridge-jittered normal
/// equations (and setting `condition_warning`) when the design is rank
/// deficient.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LinearFit> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(Error::InvalidInput(format!(
            "{} feature names for {p} columns",
            names.len()
        )));
    }
    if n < p + 1 {
        return Err(Error::InvalidInput(format!(
            "OLS needs at least {} rows, got {n}",
            p + 1
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("OLS inputs must be finite".into()));
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let ls = least_squares(&design, y)?;
    let mut all_names = Vec::with_capacity(p + 1);
    all_names.push("intercept".to_string());
    all_names.extend(names.iter().cloned());
    Ok(LinearFit {
        names: all_names,
        coefficients: ls.beta,
        n_train: n,
        condition_warning: ls.rank_deficient,
    })
}
