//! Seeded synthetic inputs with known structure: reference time series,
//! grid bins whose LWI has planted persistence, threshold jumps and spikes,
//! and feature frames with planted linear targets.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::book::BookL1;
use crate::error::{Error, Result};
use crate::features::{FeatureFrame, VOCABULARY};
use crate::grid::{GridBin, DEFAULT_GRID_NS};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn gaussian_noise(seed: u64, n: usize) -> Vec<f64> {
    normals(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Zero-mean AR(1) with unit innovations, started from its stationary law.
pub fn ar1_series(seed: u64, phi: f64, n: usize) -> Vec<f64> {
    let e = gaussian_noise(seed, n);
    let mut out = Vec::with_capacity(n);
    let mut x = if phi.abs() < 1.0 { e[0] / (1.0 - phi * phi).sqrt() } else { e[0] };
    out.push(x);
    for v in &e[1..] {
        x = phi * x + v;
        out.push(x);
    }
    out
}

pub fn random_walk(seed: u64, n: usize) -> Vec<f64> {
    ar1_series(seed, 1.0, n)
}

/// Bin-level LWI process:
///
/// `LWI_t = base + slow_sd * s_t + jump * 1{z_(t - lead) > threshold} + spike * (E_t - 1)`
///
/// with `s` and `z` unit-variance AR(1) processes and `E_t` standard
/// exponential. Queue imbalance is `tanh(qi_gain * z_t)`, so it leads the
/// jump component by `lead` bins. L1 depth and adds are constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikyParams {
    pub base: f64,
    pub slow_rho: f64,
    pub slow_sd: f64,
    pub driver_rho: f64,
    pub threshold: f64,
    pub jump: f64,
    pub lead: usize,
    pub spike: f64,
    pub qi_gain: f64,
    pub depth: u64,
    pub adds: u64,
    pub start_ns: u64,
    pub grid_ns: u64,
}

impl Default for SpikyParams {
    fn default() -> Self {
        Self {
            base: 0.2,
            slow_rho: 0.997,
            slow_sd: 0.04,
            driver_rho: 0.99,
            threshold: 1.0,
            jump: 0.06,
            lead: 8,
            spike: 0.07,
            qi_gain: 0.7,
            depth: 4_000,
            adds: 200,
            start_ns: 0,
            grid_ns: DEFAULT_GRID_NS,
        }
    }
}

impl SpikyParams {
    pub fn validate(&self) -> Result<()> {
        let rho_ok = |r: f64| (0.0..1.0).contains(&r);
        if !rho_ok(self.slow_rho) || !rho_ok(self.driver_rho) {
            return Err(Error::Config("AR coefficients must lie in [0, 1)".into()));
        }
        if [self.base, self.slow_sd, self.jump, self.spike, self.qi_gain]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Config("scenario scales must be finite and non-negative".into()));
        }
        if self.depth < 2 || self.grid_ns == 0 {
            return Err(Error::Config("depth must be at least 2 and grid_ns positive".into()));
        }
        Ok(())
    }
}

/// Latent LWI path (before rounding to counts) and the driver.
fn spiky_paths(seed: u64, n: usize, p: &SpikyParams) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ar = |rng: &mut ChaCha8Rng, rho: f64| {
        let sd = (1.0 - rho * rho).sqrt();
        let mut x: f64 = StandardNormal.sample(rng);
        (0..n + p.lead)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                x = rho * x + sd * e;
                x
            })
            .collect::<Vec<f64>>()
    };
    let slow = ar(&mut rng, p.slow_rho);
    let driver = ar(&mut rng, p.driver_rho);
    let lwi = (0..n)
        .map(|t| {
            let e: f64 = Exp1.sample(&mut rng);
            let jump = if driver[t] > p.threshold { p.jump } else { 0.0 };
            (p.base + p.slow_sd * slow[t + p.lead] + jump + p.spike * (e - 1.0)).max(0.0)
        })
        .collect();
    (lwi, driver[p.lead..].to_vec())
}

/// Grid bins realizing the process in [`SpikyParams`]. Cancels are the
/// rounded latent LWI times `depth + adds`, so the LWI computed from the
/// bins matches the latent path to within one count.
pub fn spiky_bins(seed: u64, n_bins: usize, p: &SpikyParams) -> Result<Vec<GridBin>> {
    p.validate()?;
    let (lwi, driver) = spiky_paths(seed, n_bins, p);
    let denom = (p.depth + p.adds) as f64;
    let mid = 50_000_000_000i64;
    let tick = 10_000_000i64;
    Ok((0..n_bins)
        .map(|t| {
            let qi = (p.qi_gain * driver[t]).tanh();
            let bid = ((p.depth as f64 * (1.0 + qi) / 2.0).round() as u64).clamp(1, p.depth - 1);
            let book = BookL1 {
                best_bid_px: Some(mid - tick),
                best_ask_px: Some(mid + tick),
                bid_depth_l1: bid,
                ask_depth_l1: p.depth - bid,
            };
            let mut b = GridBin::empty(p.start_ns + t as u64 * p.grid_ns, book);
            b.adds_l1 = p.adds;
            b.cancels_l1 = (lwi[t] * denom).round() as u64;
            b.event_count = (b.adds_l1 + b.cancels_l1) as u32;
            b.modelable = true;
            b
        })
        .collect())
}

/// Frame whose feature columns are independent standard normals (one per
/// vocabulary name) and whose horizon-`k` target is
/// `sum(weight * column) + noise_sd * N(0, 1)`.
pub fn planted_feature_frame(
    symbol: &str,
    seed: u64,
    n_rows: usize,
    k: usize,
    signals: &[(&str, f64)],
    noise_sd: f64,
) -> Result<FeatureFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<(String, Vec<f64>)> = VOCABULARY
        .iter()
        .map(|n| (n.to_string(), normals(&mut rng, n_rows)))
        .collect();
    let noise = normals(&mut rng, n_rows);
    let mut target: Vec<f64> = noise.iter().map(|e| noise_sd * e).collect();
    for (name, w) in signals {
        let col = columns
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown planted feature {name}")))?;
        for (t, v) in target.iter_mut().zip(&col.1) {
            *t += w * v;
        }
    }
    let mut targets = BTreeMap::new();
    targets.insert(k, target);
    FeatureFrame::from_parts(
        symbol,
        0,
        DEFAULT_GRID_NS,
        (0..n_rows as u64).collect(),
        columns,
        targets,
        &vec![false; n_rows],
    )
}
