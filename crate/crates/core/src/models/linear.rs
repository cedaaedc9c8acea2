//! Design matrices for the AR(p) and HAR benchmarks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::{horizon_target, ops::lag, rolling_stats, RollingKind};

/// Regressors, response and the source row of each design row.
#[derive(Clone, Debug)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub rows: Vec<usize>,
    pub names: Vec<String>,
}

/// The HAR windows of the main experiments: 250 ms, 2 s and 10 s.
pub const HAR_WINDOWS: [usize; 3] = [1, 8, 40];
/// The 1 s / 10 s / 60 s alternative.
pub const HAR_WINDOWS_LONG: [usize; 3] = [4, 40, 240];

/// Columns `LWI_t, LWI_{t-1}, ..., LWI_{t-p+1}` over the full series.
pub fn ar_columns(lwi: &[f64], p: usize) -> Result<Vec<(String, Vec<f64>)>> {
    if p == 0 {
        return Err(Error::Config("AR order must be at least 1".into()));
    }
    Ok((0..p)
        .map(|i| {
            let name = if i == 0 {
                "LWI".to_string()
            } else {
                format!("LWI_lag{i}")
            };
            (name, lag(lwi, i))
        })
        .collect())
}

/// Trailing means of LWI over each window, ending at `t`.
pub fn har_columns(lwi: &[f64], windows: &[usize]) -> Result<Vec<(String, Vec<f64>)>> {
    if windows.is_empty() || windows[0] == 0 || windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "HAR windows must be positive and strictly increasing, got {windows:?}"
        )));
    }
    windows
        .iter()
        .map(|&w| Ok((format!("LWI_mean{w}"), rolling_stats(lwi, w, RollingKind::Mean)?)))
        .collect()
}

fn assemble(columns: Vec<(String, Vec<f64>)>, y_full: Vec<f64>) -> Result<Design> {
    let n = y_full.len();
    let rows: Vec<usize> = (0..n)
        .filter(|&t| !y_full[t].is_nan() && columns.iter().all(|(_, c)| !c[t].is_nan()))
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidInput("design is empty after dropping missing rows".into()));
    }
    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| columns[j].1[rows[i]]);
    Ok(Design {
        x,
        y: rows.iter().map(|&t| y_full[t]).collect(),
        rows,
        names: columns.into_iter().map(|(n, _)| n).collect(),
    })
}

/// AR(p) design: row `t` holds the last `p` LWI values; the response is the
/// mean LWI over `(t, t+k]`.
pub fn ar_design(lwi: &[f64], p: usize, k: usize) -> Result<Design> {
    assemble(ar_columns(lwi, p)?, horizon_target(lwi, k))
}

/// HAR design: row `t` holds trailing LWI means over each window.
pub fn har_design(lwi: &[f64], windows: &[usize], k: usize) -> Result<Design> {
    assemble(har_columns(lwi, windows)?, horizon_target(lwi, k))
}
