//! The LWI target, microstructure features and horizon targets, assembled
//! into a per-symbol [`FeatureFrame`].
//!
//! Feature names follow one convention: an `Ns` suffix is a window or lag of
//! N seconds (4N bins on the 250 ms grid) and a bare `lagN` is N bins.

mod io;
pub mod ops;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use io::{read_frame_csv, read_frame_ffr1, write_frame_csv, write_frame_ffr1, FFR1_MAGIC};
pub use ops::{
    activity_rates, compute_lwi, compute_ofi, compute_qi, horizon_target, lwi_value,
    rolling_stats, RollingKind,
};

use crate::error::{Error, Result};
use crate::grid::{GridBin, DEFAULT_GRID_NS};

/// Name of the always-present target series column.
pub const LWI: &str = "LWI";

/// Every feature [`build_frame`] understands.
pub const VOCABULARY: &[&str] = &[
    "LWI",
    "LWI_lag1",
    "LWI_lag2",
    "LWI_lag3",
    "LWI_lag4",
    "LWI_lag5",
    "LWI_ma1s",
    "LWI_ma2s",
    "LWI_ma10s",
    "LWI_ma60s",
    "LWI_sd1s",
    "LWI_sd2s",
    "dLWI_1s",
    "QI",
    "QI_lag1",
    "QI_lag2",
    "QI_lag3",
    "QI_lag4",
    "QI_lag1s",
    "QI_sd1s",
    "depth_L1",
    "depth_L1_lag1s",
    "depth_L1_lag4",
    "spread",
    "spread_sd1s",
    "adds_rate1s",
    "canc_rate1s",
    "OFI",
    "midret_sd1s",
    "midret_sd10s",
];

/// The cross-symbol consensus set used as the tree-model feature panel.
pub const CONSENSUS_FEATURES: &[&str] = &[
    "LWI_ma1s",
    "LWI_lag1",
    "LWI_sd1s",
    "dLWI_1s",
    "LWI_lag2",
    "adds_rate1s",
    "canc_rate1s",
    "QI_lag1s",
    "depth_L1_lag1s",
    "depth_L1_lag4",
    "QI_sd1s",
    "LWI_ma10s",
    "QI_lag4",
    "LWI_ma2s",
    "LWI_sd2s",
    "spread_sd1s",
];

pub const DEFAULT_HORIZONS: &[usize] = &[1, 4, 8, 20];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Base {
    Lwi,
    Qi,
    Depth,
    Spread,
    MidRet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Def {
    Level(Base),
    Lag(Base, usize),
    Mean(Base, usize),
    Sd(Base, usize),
    Diff(Base, usize),
    AddsRate(usize),
    CancRate(usize),
    Ofi,
}

/// Parse a trailing window token: `Ns` is seconds, a bare integer is bins.
fn window_bins(token: &str, bins_per_second: usize) -> Option<usize> {
    let n = if let Some(secs) = token.strip_suffix('s') {
        secs.parse::<usize>().ok()? * bins_per_second
    } else {
        token.parse::<usize>().ok()?
    };
    (n > 0).then_some(n)
}

fn definition(name: &str, bps: usize) -> Option<Def> {
    if !VOCABULARY.contains(&name) {
        return None;
    }
    let (base, rest) = [
        ("dLWI_", None),
        ("LWI", Some(Base::Lwi)),
        ("QI", Some(Base::Qi)),
        ("depth_L1", Some(Base::Depth)),
        ("spread", Some(Base::Spread)),
        ("midret", Some(Base::MidRet)),
        ("adds_rate", None),
        ("canc_rate", None),
        ("OFI", None),
    ]
    .into_iter()
    .find_map(|(prefix, base)| name.strip_prefix(prefix).map(|rest| ((prefix, base), rest)))?;
    match base {
        ("dLWI_", _) => Some(Def::Diff(Base::Lwi, window_bins(rest, bps)?)),
        ("adds_rate", _) => Some(Def::AddsRate(window_bins(rest, bps)?)),
        ("canc_rate", _) => Some(Def::CancRate(window_bins(rest, bps)?)),
        ("OFI", _) => rest.is_empty().then_some(Def::Ofi),
        (_, Some(b)) => {
            if rest.is_empty() {
                Some(Def::Level(b))
            } else if let Some(w) = rest.strip_prefix("_lag") {
                Some(Def::Lag(b, window_bins(w, bps)?))
            } else if let Some(w) = rest.strip_prefix("_ma") {
                Some(Def::Mean(b, window_bins(w, bps)?))
            } else if let Some(w) = rest.strip_prefix("_sd") {
                Some(Def::Sd(b, window_bins(w, bps)?))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// What to compute for a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub features: Vec<String>,
    pub horizons: Vec<usize>,
    /// Positive floor on the adds term of the LWI denominator (shares).
    pub epsilon: f64,
    /// Bins in the moving average of prior L1 depth.
    pub ma_window: usize,
    pub grid_ns: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            features: VOCABULARY.iter().map(|s| s.to_string()).collect(),
            horizons: DEFAULT_HORIZONS.to_vec(),
            epsilon: 1.0,
            ma_window: 4,
            grid_ns: DEFAULT_GRID_NS,
        }
    }
}

impl FeatureSpec {
    pub fn with_features(names: &[&str], horizons: &[usize]) -> Self {
        Self {
            features: names.iter().map(|s| s.to_string()).collect(),
            horizons: horizons.to_vec(),
            ..Self::default()
        }
    }

    pub fn bins_per_second(&self) -> Result<usize> {
        if self.grid_ns == 0 || 1_000_000_000 % self.grid_ns != 0 {
            return Err(Error::Config(format!(
                "grid of {} ns does not divide one second",
                self.grid_ns
            )));
        }
        Ok((1_000_000_000 / self.grid_ns) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bps = self.bins_per_second()?;
        let unknown: Vec<&str> = self
            .features
            .iter()
            .filter(|f| definition(f, bps).is_none())
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown feature(s) {}; vocabulary: {}",
                unknown.join(", "),
                VOCABULARY.join(", ")
            )));
        }
        if self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be at least 1 bin".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.ma_window == 0 {
            return Err(Error::Config("ma_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Aligned per-symbol matrix of features and horizon targets. Missing values
/// are `NaN`; `modelable_mask[t]` is true only when every column and every
/// target at `t` is present and `t` is past the warm start.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub symbol: String,
    /// Start of bin 0 in ns since the epoch.
    pub origin_ns: u64,
    pub grid_ns: u64,
    pub bin_index: Vec<u64>,
    columns: Vec<(String, Vec<f64>)>,
    targets: BTreeMap<usize, Vec<f64>>,
    pub modelable_mask: Vec<bool>,
    excluded: Vec<bool>,
}

impl FeatureFrame {
    /// Assemble a frame from precomputed columns; the mask is recomputed from
    /// `excluded` (warm start) and missing values.
    pub fn from_parts(
        symbol: impl Into<String>,
        origin_ns: u64,
        grid_ns: u64,
        bin_index: Vec<u64>,
        columns: Vec<(String, Vec<f64>)>,
        targets: BTreeMap<usize, Vec<f64>>,
        excluded: &[bool],
    ) -> Result<Self> {
        let n = bin_index.len();
        if columns.iter().any(|(_, c)| c.len() != n)
            || targets.values().any(|c| c.len() != n)
            || excluded.len() != n
        {
            return Err(Error::InvalidInput("frame columns differ in length".into()));
        }
        let mut frame = Self {
            symbol: symbol.into(),
            origin_ns,
            grid_ns,
            bin_index,
            columns,
            targets,
            modelable_mask: vec![false; n],
            excluded: excluded.to_vec(),
        };
        frame.recompute_mask();
        Ok(frame)
    }

    pub fn n_rows(&self) -> usize {
        self.bin_index.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    pub fn lwi(&self) -> Option<&[f64]> {
        self.column(LWI)
    }

    pub fn target(&self, k: usize) -> Option<&[f64]> {
        self.targets.get(&k).map(Vec::as_slice)
    }

    pub fn targets(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.targets
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.targets.keys().copied().collect()
    }

    pub fn bin_start_ns(&self, row: usize) -> u64 {
        self.origin_ns + self.bin_index[row] * self.grid_ns
    }

    pub fn modelable_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&t| self.modelable_mask[t]).collect()
    }

    /// Replace a target column (used by experiments that plant a target)
    /// and recompute the mask.
    pub fn set_target(&mut self, k: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n_rows() {
            return Err(Error::InvalidInput("target length differs from frame".into()));
        }
        self.targets.insert(k, values);
        self.recompute_mask();
        Ok(())
    }

    /// Replace or append a feature column and recompute the mask.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n_rows() {
            return Err(Error::InvalidInput("column length differs from frame".into()));
        }
        match self.columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, c)) => *c = values,
            None => self.columns.push((name.to_string(), values)),
        }
        self.recompute_mask();
        Ok(())
    }

    fn recompute_mask(&mut self) {
        for t in 0..self.n_rows() {
            self.modelable_mask[t] = !self.excluded[t]
                && self.columns.iter().all(|(_, c)| !c[t].is_nan())
                && self.targets.values().all(|c| !c[t].is_nan());
        }
    }

    /// Dense `rows x names` matrix.
    pub fn matrix(&self, names: &[String], rows: &[usize]) -> Result<DMatrix<f64>> {
        let cols: Vec<&[f64]> = names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| Error::InvalidInput(format!("frame has no column {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), names.len(), |i, j| cols[j][rows[i]]))
    }

    pub fn select(&self, col: &[f64], rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| col[r]).collect()
    }
}

struct BaseSeries {
    lwi: Vec<f64>,
    qi: Vec<f64>,
    depth: Vec<f64>,
    spread: Vec<f64>,
    midret: Vec<f64>,
}

impl BaseSeries {
    fn get(&self, b: Base) -> &[f64] {
        match b {
            Base::Lwi => &self.lwi,
            Base::Qi => &self.qi,
            Base::Depth => &self.depth,
            Base::Spread => &self.spread,
            Base::MidRet => &self.midret,
        }
    }
}

/// Compute the requested features and targets over `bins`.
///
/// The LWI column is always included. Every feature at row `t` depends on
/// bins `<= t` only; targets look forward by construction.
pub fn build_frame(symbol: &str, bins: &[GridBin], spec: &FeatureSpec) -> Result<FeatureFrame> {
    spec.validate()?;
    let bps = spec.bins_per_second()?;
    let base = BaseSeries {
        lwi: compute_lwi(bins, spec.epsilon, spec.ma_window)?,
        qi: compute_qi(bins),
        depth: bins.iter().map(|b| b.depth_l1() as f64).collect(),
        spread: ops::spread_series(bins),
        midret: ops::mid_log_returns(bins),
    };

    let mut names: Vec<&str> = vec![LWI];
    for f in &spec.features {
        if !names.contains(&f.as_str()) {
            names.push(f);
        }
    }
    let mut columns = Vec::with_capacity(names.len());
    for name in names {
        let def = definition(name, bps).expect("validated feature");
        let col = match def {
            Def::Level(b) => base.get(b).to_vec(),
            Def::Lag(b, n) => ops::lag(base.get(b), n),
            Def::Mean(b, w) => rolling_stats(base.get(b), w, RollingKind::Mean)?,
            Def::Sd(b, w) => rolling_stats(base.get(b), w, RollingKind::Sd)?,
            Def::Diff(b, n) => ops::diff(base.get(b), n),
            Def::AddsRate(w) => activity_rates(bins, w, spec.grid_ns)?.0,
            Def::CancRate(w) => activity_rates(bins, w, spec.grid_ns)?.1,
            Def::Ofi => compute_ofi(bins),
        };
        columns.push((name.to_string(), col));
    }

    let mut targets = BTreeMap::new();
    for &k in &spec.horizons {
        targets.insert(k, horizon_target(&base.lwi, k));
    }
    let origin = bins.first().map_or(0, |b| b.bin_start);
    let excluded: Vec<bool> = bins.iter().map(|b| !b.modelable).collect();
    FeatureFrame::from_parts(
        symbol,
        origin,
        spec.grid_ns,
        (0..bins.len() as u64).collect(),
        columns,
        targets,
        &excluded,
    )
}
