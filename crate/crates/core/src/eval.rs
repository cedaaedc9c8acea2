//! Embargoed expanding-window walk-forward evaluation.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFrame, CONSENSUS_FEATURES};
use crate::models::{
    ar_columns, gbt_fit, har_columns, ols_fit, FittedModel, GbtParams, HAR_WINDOWS,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub embargo: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkForwardPlan {
    pub folds: Vec<Fold>,
    pub n_folds: usize,
    pub embargo_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub n_folds: usize,
    pub embargo_bins: usize,
    /// Share of evaluable rows in the first training block.
    pub initial_train_fraction: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            n_folds: 5,
            embargo_bins: 240,
            initial_train_fraction: 0.4,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds == 0 {
            return Err(Error::Config("n_folds must be positive".into()));
        }
        if !(self.initial_train_fraction > 0.0 && self.initial_train_fraction < 1.0) {
            return Err(Error::Config("initial_train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn plan(&self, n: usize) -> Result<WalkForwardPlan> {
        self.validate()?;
        let initial = (self.initial_train_fraction * n as f64).floor() as usize;
        make_plan(n, self.n_folds, self.embargo_bins, initial)
    }
}

/// Split `0..n` into `n_folds` contiguous test blocks after an initial
/// training block and an embargo gap.
///
/// Blocks hold `ceil((n - initial - embargo) / n_folds)` rows, the last one
/// taking what remains. Fold `f` trains on every row before its embargo.
pub fn make_plan(n: usize, n_folds: usize, embargo_bins: usize, initial_train: usize) -> Result<WalkForwardPlan> {
    if n_folds == 0 {
        return Err(Error::InvalidInput("plan needs at least one fold".into()));
    }
    if initial_train == 0 {
        return Err(Error::InvalidInput("initial training block is empty".into()));
    }
    let start = initial_train + embargo_bins;
    if start >= n {
        return Err(Error::InvalidInput(format!(
            "initial training ({initial_train}) plus embargo ({embargo_bins}) leaves no test rows of {n}"
        )));
    }
    let block = (n - start).div_ceil(n_folds);
    if start + (n_folds - 1) * block >= n {
        return Err(Error::InvalidInput(format!(
            "{} evaluable rows cannot fill {n_folds} non-empty test blocks",
            n - start
        )));
    }
    let folds = (0..n_folds)
        .map(|f| {
            let lo = start + f * block;
            let hi = if f + 1 == n_folds { n } else { (lo + block).min(n) };
            Fold {
                train: 0..lo - embargo_bins,
                embargo: lo - embargo_bins..lo,
                test: lo..hi,
            }
        })
        .collect();
    Ok(WalkForwardPlan {
        folds,
        n_folds,
        embargo_bins,
    })
}

/// Out-of-sample R² against the mean of `y_true`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::InvalidInput("r2 needs equal non-empty inputs".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidInput("r2 is undefined for a constant target".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::InvalidInput("rmse needs equal non-empty inputs".into()));
    }
    let mse = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / y_true.len() as f64;
    Ok(mse.sqrt())
}

/// Adjusted Fisher-Pearson skewness; `NaN` below 3 points or at zero
/// variance.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return f64::NAN;
    }
    m3 / m2.powf(1.5) * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ar {
        p: usize,
    },
    Har {
        windows: Vec<usize>,
    },
    Gbt {
        features: Vec<String>,
        #[serde(default)]
        params: GbtParams,
    },
}

impl ModelSpec {
    pub fn ar5() -> Self {
        ModelSpec::Ar { p: 5 }
    }

    pub fn har() -> Self {
        ModelSpec::Har {
            windows: HAR_WINDOWS.to_vec(),
        }
    }

    pub fn gbt() -> Self {
        ModelSpec::Gbt {
            features: CONSENSUS_FEATURES.iter().map(|s| s.to_string()).collect(),
            params: GbtParams::default(),
        }
    }

    pub fn default_suite() -> Vec<Self> {
        vec![Self::ar5(), Self::har(), Self::gbt()]
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Ar { p } => format!("AR({p})"),
            ModelSpec::Har { .. } => "HAR".into(),
            ModelSpec::Gbt { .. } => "GBT".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Ar { p } if *p == 0 => Err(Error::Config("AR order must be positive".into())),
            ModelSpec::Har { windows } if windows.is_empty() || windows.windows(2).any(|w| w[1] <= w[0]) || windows[0] == 0 => {
                Err(Error::Config("HAR windows must be positive and strictly increasing".into()))
            }
            ModelSpec::Gbt { features, params } => {
                if features.is_empty() {
                    return Err(Error::Config("GBT feature list is empty".into()));
                }
                params.validate()
            }
            _ => Ok(()),
        }
    }

    /// Regressor columns over the whole frame.
    fn columns(&self, frame: &FeatureFrame) -> Result<Vec<(String, Vec<f64>)>> {
        let lwi = || {
            frame
                .lwi()
                .ok_or_else(|| Error::InvalidInput("frame has no LWI column".into()))
        };
        match self {
            ModelSpec::Ar { p } => ar_columns(lwi()?, *p),
            ModelSpec::Har { windows } => har_columns(lwi()?, windows),
            ModelSpec::Gbt { features, .. } => features
                .iter()
                .map(|n| {
                    frame
                        .column(n)
                        .map(|c| (n.clone(), c.to_vec()))
                        .ok_or_else(|| Error::InvalidInput(format!("frame has no column {n}")))
                })
                .collect(),
        }
    }
}

/// Regressors and target of one model restricted to its usable rows:
/// modelable rows whose regressors are all present.
pub struct CellData {
    pub names: Vec<String>,
    pub rows: Vec<usize>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl CellData {
    pub fn new(frame: &FeatureFrame, model: &ModelSpec, k: usize) -> Result<Self> {
        let target = frame
            .target(k)
            .ok_or_else(|| Error::InvalidInput(format!("frame has no target for horizon {k}")))?;
        let cols = model.columns(frame)?;
        let rows: Vec<usize> = frame
            .modelable_rows()
            .into_iter()
            .filter(|&t| cols.iter().all(|(_, c)| c[t].is_finite()) && target[t].is_finite())
            .collect();
        Ok(Self {
            names: cols.iter().map(|(n, _)| n.clone()).collect(),
            x: cols.into_iter().map(|(_, c)| c).collect(),
            y: target.to_vec(),
            rows,
        })
    }

    fn design(&self, idx: Range<usize>) -> (nalgebra::DMatrix<f64>, Vec<f64>) {
        let rows = &self.rows[idx];
        let x = nalgebra::DMatrix::from_fn(rows.len(), self.x.len(), |i, j| self.x[j][rows[i]]);
        (x, rows.iter().map(|&r| self.y[r]).collect())
    }
}

pub struct FoldFit {
    pub model: FittedModel,
    pub test_rows: Vec<usize>,
    pub y_true: Vec<f64>,
    pub y_pred: Vec<f64>,
}

/// Fit on a fold's training rows and predict its test rows. Fold ranges
/// index into `data.rows`.
pub fn fit_fold(data: &CellData, model: &ModelSpec, fold: &Fold, seed: u64) -> Result<FoldFit> {
    let (x_train, y_train) = data.design(fold.train.clone());
    let (x_test, y_true) = data.design(fold.test.clone());
    let fitted = match model {
        ModelSpec::Ar { .. } | ModelSpec::Har { .. } => {
            FittedModel::Linear(ols_fit(&x_train, &y_train, &data.names)?)
        }
        ModelSpec::Gbt { params, .. } => {
            let params = GbtParams {
                seed,
                ..params.clone()
            };
            FittedModel::Gbt(gbt_fit(&x_train, &y_train, &data.names, &params)?)
        }
    };
    let y_pred = fitted.predict(&x_test)?;
    Ok(FoldFit {
        model: fitted,
        test_rows: data.rows[fold.test.clone()].to_vec(),
        y_true,
        y_pred,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub symbol: String,
    pub model: String,
    pub horizon: usize,
    pub horizon_ms: u64,
    pub fold: usize,
    pub n_test: usize,
    pub r2: f64,
    pub rmse: f64,
    pub resid_mean: f64,
    pub resid_skew: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastRow {
    pub symbol: String,
    pub model: String,
    pub horizon_ms: u64,
    pub fold: usize,
    pub bin_index: u64,
    pub ts_ns: u64,
    pub y_true: f64,
    pub y_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub symbol: String,
    pub model: String,
    pub horizon: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<FoldMetrics>,
    pub failures: Vec<CellFailure>,
    pub forecasts: Vec<ForecastRow>,
}

impl EvalReport {
    pub fn merge(reports: impl IntoIterator<Item = EvalReport>) -> Self {
        let mut out = EvalReport::default();
        for r in reports {
            out.rows.extend(r.rows);
            out.failures.extend(r.failures);
            out.forecasts.extend(r.forecasts);
        }
        out
    }

    /// Mean R² over folds keyed by (symbol, model, horizon in bins).
    pub fn mean_r2(&self) -> BTreeMap<(String, String, usize), f64> {
        let mut acc: BTreeMap<(String, String, usize), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc
                .entry((r.symbol.clone(), r.model.clone(), r.horizon))
                .or_default();
            e.0 += r.r2;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
    }

    pub fn mean_r2_of(&self, symbol: &str, model: &str, horizon: usize) -> Option<f64> {
        self.mean_r2()
            .get(&(symbol.to_string(), model.to_string(), horizon))
            .copied()
    }

    /// Residuals `y_true - y_pred` of one cell, concatenated over folds.
    pub fn residuals(&self, symbol: &str, model: &str, horizon_ms: u64) -> Vec<f64> {
        self.forecasts
            .iter()
            .filter(|f| f.symbol == symbol && f.model == model && f.horizon_ms == horizon_ms)
            .map(|f| f.y_true - f.y_pred)
            .collect()
    }
}

fn run_cell(frame: &FeatureFrame, model: &ModelSpec, k: usize, plan: &PlanParams, seed: u64) -> Result<(Vec<FoldMetrics>, Vec<ForecastRow>)> {
    let data = CellData::new(frame, model, k)?;
    let wf = plan.plan(data.rows.len())?;
    let label = model.label();
    let horizon_ms = k as u64 * frame.grid_ns / 1_000_000;
    let mut metrics = Vec::with_capacity(wf.folds.len());
    let mut forecasts = Vec::new();
    for (f, fold) in wf.folds.iter().enumerate() {
        let fit = fit_fold(&data, model, fold, seed.wrapping_add(f as u64))?;
        let resid: Vec<f64> = fit.y_true.iter().zip(&fit.y_pred).map(|(t, p)| t - p).collect();
        metrics.push(FoldMetrics {
            symbol: frame.symbol.clone(),
            model: label.clone(),
            horizon: k,
            horizon_ms,
            fold: f + 1,
            n_test: resid.len(),
            r2: r2(&fit.y_true, &fit.y_pred)?,
            rmse: rmse(&fit.y_true, &fit.y_pred)?,
            resid_mean: resid.iter().sum::<f64>() / resid.len() as f64,
            resid_skew: skewness(&resid),
        });
        for (i, &row) in fit.test_rows.iter().enumerate() {
            forecasts.push(ForecastRow {
                symbol: frame.symbol.clone(),
                model: label.clone(),
                horizon_ms,
                fold: f + 1,
                bin_index: frame.bin_index[row],
                ts_ns: frame.bin_start_ns(row),
                y_true: fit.y_true[i],
                y_pred: fit.y_pred[i],
            });
        }
    }
    Ok((metrics, forecasts))
}

/// Walk-forward evaluation of every (model, horizon) cell. Cells run in
/// parallel; a failing cell is recorded and skipped.
pub fn run_experiment(frame: &FeatureFrame, models: &[ModelSpec], horizons: &[usize], plan: &PlanParams, seed: u64) -> Result<EvalReport> {
    plan.validate()?;
    for m in models {
        m.validate()?;
    }
    let cells: Vec<(&ModelSpec, usize)> = models
        .iter()
        .flat_map(|m| horizons.iter().map(move |&k| (m, k)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(m, k)| run_cell(frame, m, k, plan, seed))
        .collect();
    let mut report = EvalReport::default();
    for ((m, k), res) in cells.into_iter().zip(results) {
        match res {
            Ok((metrics, forecasts)) => {
                report.rows.extend(metrics);
                report.forecasts.extend(forecasts);
            }
            Err(e) => {
                log::warn!("{} {} k={k}: {e}", frame.symbol, m.label());
                report.failures.push(CellFailure {
                    symbol: frame.symbol.clone(),
                    model: m.label(),
                    horizon: k,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}

pub fn horizon_label(ms: u64) -> String {
    if ms >= 1000 && ms.is_multiple_of(1000) {
        format!("{}s", ms / 1000)
    } else {
        format!("{ms}ms")
    }
}

/// `symbol,model,horizon_ms,fold,r2,rmse,resid_mean,resid_skew`.
pub fn write_report_csv<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["symbol", "model", "horizon_ms", "fold", "r2", "rmse", "resid_mean", "resid_skew"])?;
    for r in &report.rows {
        w.write_record([
            r.symbol.clone(),
            r.model.clone(),
            r.horizon_ms.to_string(),
            r.fold.to_string(),
            r.r2.to_string(),
            r.rmse.to_string(),
            r.resid_mean.to_string(),
            r.resid_skew.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean R² per symbol and model, one column per horizon. Failed cells are
/// left empty.
pub fn write_summary_csv<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let mut horizons: Vec<u64> = report
        .rows
        .iter()
        .map(|r| r.horizon_ms)
        .collect();
    horizons.sort_unstable();
    horizons.dedup();
    let mut cells: BTreeMap<(String, String), BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for r in &report.rows {
        let key = (r.symbol.clone(), r.model.clone());
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        let e = cells.entry(key).or_default().entry(r.horizon_ms).or_default();
        e.0 += r.r2;
        e.1 += 1;
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["symbol".to_string(), "model".to_string()];
    header.extend(horizons.iter().map(|&h| horizon_label(h)));
    w.write_record(&header)?;
    for key in order {
        let by_h = &cells[&key];
        let mut rec = vec![key.0.clone(), key.1.clone()];
        rec.extend(horizons.iter().map(|h| {
            by_h.get(h)
                .map(|(s, c)| format!("{:.3}", s / *c as f64))
                .unwrap_or_default()
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `symbol,model,horizon_ms,fold,bin_index,ts_ns,y_true,y_pred`.
pub fn write_forecasts_csv<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["symbol", "model", "horizon_ms", "fold", "bin_index", "ts_ns", "y_true", "y_pred"])?;
    for f in &report.forecasts {
        w.write_record([
            f.symbol.clone(),
            f.model.clone(),
            f.horizon_ms.to_string(),
            f.fold.to_string(),
            f.bin_index.to_string(),
            f.ts_ns.to_string(),
            f.y_true.to_string(),
            f.y_pred.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
