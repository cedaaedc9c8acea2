//! Column-level feature computations. Missing values are `NaN`.

use crate::error::{Error, Result};
use crate::grid::GridBin;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RollingKind {
    Mean,
    Sd,
}

/// Single-bin LWI: L1 cancels over prior smoothed depth plus floored adds.
pub fn lwi_value(cancels: f64, ma_depth_prev: f64, adds: f64, epsilon: f64) -> f64 {
    cancels / (ma_depth_prev + adds.max(epsilon))
}

/// LWI per bin. The denominator uses the mean L1 depth over the
/// `ma_window` bins strictly before `t`, so the first `ma_window` values are
/// missing.
pub fn compute_lwi(bins: &[GridBin], epsilon: f64, ma_window: usize) -> Result<Vec<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if ma_window == 0 {
        return Err(Error::Config("LWI depth window must be at least 1 bin".into()));
    }
    let depth: Vec<f64> = bins.iter().map(|b| b.depth_l1() as f64).collect();
    let mut out = vec![f64::NAN; bins.len()];
    for t in ma_window..bins.len() {
        let ma = depth[t - ma_window..t].iter().sum::<f64>() / ma_window as f64;
        out[t] = lwi_value(
            bins[t].cancels_l1 as f64,
            ma,
            bins[t].adds_l1 as f64,
            epsilon,
        );
    }
    Ok(out)
}

/// Queue imbalance at L1; zero when both depths are zero.
pub fn compute_qi(bins: &[GridBin]) -> Vec<f64> {
    bins.iter()
        .map(|b| {
            let bid = b.book.bid_depth_l1 as f64;
            let ask = b.book.ask_depth_l1 as f64;
            if bid + ask == 0.0 {
                0.0
            } else {
                (bid - ask) / (bid + ask)
            }
        })
        .collect()
}

/// Per-bin order flow imbalance from the best-quote event rule.
pub fn compute_ofi(bins: &[GridBin]) -> Vec<f64> {
    bins.iter().map(|b| b.ofi as f64).collect()
}

/// Trailing-window mean or unbiased standard deviation ending at `t`
/// inclusive. Missing until the window is full or while it holds a missing
/// value.
pub fn rolling_stats(col: &[f64], window: usize, kind: RollingKind) -> Result<Vec<f64>> {
    let min = match kind {
        RollingKind::Mean => 1,
        RollingKind::Sd => 2,
    };
    if window < min {
        return Err(Error::Config(format!(
            "rolling {kind:?} needs a window of at least {min}"
        )));
    }
    let mut out = vec![f64::NAN; col.len()];
    for t in window.saturating_sub(1)..col.len() {
        let w = &col[t + 1 - window..=t];
        if w.iter().any(|v| v.is_nan()) {
            continue;
        }
        let mean = w.iter().sum::<f64>() / window as f64;
        out[t] = match kind {
            RollingKind::Mean => mean,
            RollingKind::Sd => {
                let ss: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (window - 1) as f64).sqrt()
            }
        };
    }
    Ok(out)
}

/// Trailing sums of L1 adds and cancels over `window` bins, in shares per
/// second.
pub fn activity_rates(bins: &[GridBin], window: usize, grid_ns: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if window == 0 || grid_ns == 0 {
        return Err(Error::Config("activity window and grid must be positive".into()));
    }
    let seconds = window as f64 * grid_ns as f64 / 1e9;
    let mut adds = vec![f64::NAN; bins.len()];
    let mut cancels = vec![f64::NAN; bins.len()];
    for t in window - 1..bins.len() {
        let w = &bins[t + 1 - window..=t];
        adds[t] = w.iter().map(|b| b.adds_l1 as f64).sum::<f64>() / seconds;
        cancels[t] = w.iter().map(|b| b.cancels_l1 as f64).sum::<f64>() / seconds;
    }
    Ok((adds, cancels))
}

/// `out[t] = col[t - n]`.
pub fn lag(col: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; col.len()];
    if n < col.len() {
        out[n..].copy_from_slice(&col[..col.len() - n]);
    }
    out
}

/// `out[t] = col[t] - col[t - n]`.
pub fn diff(col: &[f64], n: usize) -> Vec<f64> {
    let lagged = lag(col, n);
    col.iter().zip(&lagged).map(|(a, b)| a - b).collect()
}

/// Mean of `lwi[t+1..=t+k]`; missing for the last `k` rows.
pub fn horizon_target(lwi: &[f64], k: usize) -> Vec<f64> {
    let n = lwi.len();
    let mut out = vec![f64::NAN; n];
    if k == 0 {
        return out;
    }
    for t in 0..n.saturating_sub(k) {
        let w = &lwi[t + 1..=t + k];
        out[t] = w.iter().sum::<f64>() / k as f64;
    }
    out
}

/// One-bin log returns of the mid price.
pub fn mid_log_returns(bins: &[GridBin]) -> Vec<f64> {
    let mut out = vec![f64::NAN; bins.len()];
    for t in 1..bins.len() {
        if let (Some(a), Some(b)) = (bins[t - 1].mid_px(), bins[t].mid_px()) {
            out[t] = (b / a).ln();
        }
    }
    out
}

/// Bid-ask spread in currency units.
pub fn spread_series(bins: &[GridBin]) -> Vec<f64> {
    bins.iter()
        .map(|b| b.spread().map_or(f64::NAN, |s| s as f64 / crate::mbo::PRICE_SCALE as f64))
        .collect()
}
