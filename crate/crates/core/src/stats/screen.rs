//! Per-symbol feature screening by mutual information, boosted-tree gain and
//! LASSO magnitude.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{lambda_grid, lambda_max, lasso_path};
use super::mi::mutual_information;
use crate::error::{Error, Result};
use crate::features::FeatureFrame;
use crate::models::{gbt_fit, GbtParams};

pub const METHODS: [&str; 3] = ["mi", "gbt", "lasso"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenParams {
    pub top_k: usize,
    pub mi_bins: usize,
    /// Leading share of modelable rows used for screening.
    pub train_fraction: f64,
    pub cv_folds: usize,
    pub n_lambdas: usize,
    pub lambda_ratio: f64,
    pub gbt: GbtParams,
}

impl Default for ScreenParams {
    fn default() -> Self {
        Self {
            top_k: super::DEFAULT_TOP_K,
            mi_bins: super::DEFAULT_MI_BINS,
            train_fraction: 0.4,
            cv_folds: 5,
            n_lambdas: 50,
            lambda_ratio: 1e-3,
            gbt: GbtParams::default(),
        }
    }
}

impl ScreenParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if self.mi_bins < 2 {
            return Err(Error::Config("mi_bins must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1]".into()));
        }
        if self.cv_folds < 2 || self.n_lambdas == 0 {
            return Err(Error::Config("cv_folds must be >= 2 and n_lambdas >= 1".into()));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(Error::Config("lambda_ratio must lie in (0, 1)".into()));
        }
        self.gbt.validate()
    }
}

/// Ranked `(feature, score)` lists, best first, each cut to `top_k`.
/// Features scoring exactly zero are left out.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenResult {
    pub symbol: String,
    pub horizon: usize,
    pub mi: Vec<(String, f64)>,
    pub gbt: Vec<(String, f64)>,
    pub lasso: Vec<(String, f64)>,
    /// Penalty chosen by cross-validation.
    pub lambda: f64,
}

impl ScreenResult {
    pub fn lists(&self) -> [(&'static str, &[(String, f64)]); 3] {
        [
            (METHODS[0], &self.mi),
            (METHODS[1], &self.gbt),
            (METHODS[2], &self.lasso),
        ]
    }
}

fn rank(names: &[String], scores: &[f64], top_k: usize) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = names
        .iter()
        .cloned()
        .zip(scores.iter().copied())
        .filter(|(_, s)| *s > 0.0)
        .collect();
    // Stable sort keeps frame column order among ties.
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out.truncate(top_k);
    out
}

/// Penalty minimizing contiguous k-fold validation error.
fn cv_lambda(x: &nalgebra::DMatrix<f64>, y: &[f64], params: &ScreenParams) -> Result<Option<(Vec<f64>, usize)>> {
    let lm = lambda_max(x, y)?;
    if lm <= 0.0 {
        return Ok(None);
    }
    let grid = lambda_grid(lm, params.lambda_ratio, params.n_lambdas);
    let n = y.len();
    let folds = params.cv_folds;
    let errors: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
            let train: Vec<usize> = (0..lo).chain(hi..n).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let path = lasso_path(&xt, &yt, &grid)?;
            let xv = x.rows(lo, hi - lo).into_owned();
            Ok((0..grid.len())
                .map(|i| {
                    let pred = path.predict(i, &xv);
                    pred.iter().zip(&y[lo..hi]).map(|(p, t)| (p - t).powi(2)).sum::<f64>()
                        / (hi - lo) as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut best = (f64::INFINITY, 0);
    for i in 0..grid.len() {
        let m = errors.iter().map(|e| e[i]).sum::<f64>() / folds as f64;
        if m < best.0 {
            best = (m, i);
        }
    }
    Ok(Some((grid, best.1)))
}

/// Screen every frame column against the horizon-`k` target on the leading
/// `train_fraction` of modelable rows.
pub fn screen_features(frame: &FeatureFrame, k: usize, params: &ScreenParams) -> Result<ScreenResult> {
    params.validate()?;
    let target = frame
        .target(k)
        .ok_or_else(|| Error::InvalidInput(format!("frame has no target for horizon {k}")))?;
    let rows = frame.modelable_rows();
    let n_train = (params.train_fraction * rows.len() as f64).floor() as usize;
    let rows = &rows[..n_train];
    if rows.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "screening {} needs at least 100 training rows, got {}",
            frame.symbol,
            rows.len()
        )));
    }
    let names: Vec<String> = frame.column_names().map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::InvalidInput("frame has no feature columns".into()));
    }
    let y = frame.select(target, rows);
    let x = frame.matrix(&names, rows)?;

    let mi_scores: Vec<f64> = (0..names.len())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            mutual_information(&col, &y, params.mi_bins)
        })
        .collect::<Result<_>>()?;

    let gbt = gbt_fit(&x, &y, &names, &params.gbt)?;

    let (lasso_scores, lambda) = match cv_lambda(&x, &y, params)? {
        Some((grid, idx)) => {
            let path = lasso_path(&x, &y, &grid[..=idx])?;
            (path.coefs[idx].iter().map(|b| b.abs()).collect(), grid[idx])
        }
        None => (vec![0.0; names.len()], 0.0),
    };

    Ok(ScreenResult {
        symbol: frame.symbol.clone(),
        horizon: k,
        mi: rank(&names, &mi_scores, params.top_k),
        gbt: rank(&names, &gbt.importance, params.top_k),
        lasso: rank(&names, &lasso_scores, params.top_k),
        lambda,
    })
}

/// Long-format rankings: `symbol,horizon,method,rank,feature,score`.
pub fn write_rankings_csv<W: Write>(writer: W, results: &[ScreenResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["symbol", "horizon", "method", "rank", "feature", "score"])?;
    for r in results {
        for (method, list) in r.lists() {
            for (i, (name, score)) in list.iter().enumerate() {
                w.write_record([
                    r.symbol.as_str(),
                    &r.horizon.to_string(),
                    method,
                    &(i + 1).to_string(),
                    name,
                    &format!("{score:e}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
