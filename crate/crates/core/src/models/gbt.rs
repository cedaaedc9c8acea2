//! Gradient-boosted regression trees with histogram split search.
//!
//! Each round fits one tree to the loss gradients of a seeded row
//! subsample. Features are pre-binned on quantile edges that are actual
//! training values, and a split sends `x <= threshold` left. Leaf values are
//! then set on every training row routed to the leaf: the mean residual for
//! squared error, a one-step Huber location for Huber, and the residual
//! quantile for quantile loss.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HESSIAN_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    Huber { delta: f64 },
    Quantile { tau: f64 },
}

impl Loss {
    fn validate(&self) -> Result<()> {
        match *self {
            Loss::SquaredError => Ok(()),
            Loss::Huber { delta } if delta.is_finite() && delta > 0.0 => Ok(()),
            Loss::Quantile { tau } if tau > 0.0 && tau < 1.0 => Ok(()),
            other => Err(Error::Config(format!("invalid loss {other:?}"))),
        }
    }

    /// Loss of one residual `r = y - prediction`.
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Loss::SquaredError => r * r,
            Loss::Huber { delta } => {
                let a = r.abs();
                if a <= delta {
                    0.5 * r * r
                } else {
                    delta * (a - 0.5 * delta)
                }
            }
            Loss::Quantile { tau } => {
                if r >= 0.0 {
                    tau * r
                } else {
                    (tau - 1.0) * r
                }
            }
        }
    }

    /// Gradient with respect to the prediction, and the (Gauss-Newton)
    /// hessian.
    fn grad_hess(&self, r: f64) -> (f64, f64) {
        match *self {
            Loss::SquaredError => (-r, 1.0),
            Loss::Huber { delta } => (-r.clamp(-delta, delta), 1.0),
            Loss::Quantile { tau } => {
                let g = if r > 0.0 {
                    -tau
                } else if r < 0.0 {
                    1.0 - tau
                } else {
                    0.0
                };
                (g, 1.0)
            }
        }
    }

    /// Best constant for a set of residuals (or targets).
    fn location(&self, values: &mut [f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        match *self {
            Loss::SquaredError => mean(values),
            Loss::Huber { delta } => {
                let med = quantile_in_place(values, 0.5);
                med + values
                    .iter()
                    .map(|v| (v - med).clamp(-delta, delta))
                    .sum::<f64>()
                    / values.len() as f64
            }
            Loss::Quantile { tau } => quantile_in_place(values, tau),
        }
    }

    fn base_score(&self, y: &[f64]) -> f64 {
        let mut v = y.to_vec();
        match *self {
            Loss::Huber { delta } => {
                // Iterate the Huber location to convergence.
                let mut m = quantile_in_place(&mut v, 0.5);
                for _ in 0..100 {
                    let step = y.iter().map(|t| (t - m).clamp(-delta, delta)).sum::<f64>()
                        / y.len() as f64;
                    m += step;
                    if step.abs() <= 1e-15 * m.abs().max(1.0) {
                        break;
                    }
                }
                m
            }
            _ => self.location(&mut v),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Lower empirical quantile (an order statistic).
fn quantile_in_place(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub min_leaf: usize,
    /// Maximum histogram bins per feature (at most 256).
    pub n_bins: usize,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.05,
            subsample: 0.8,
            min_leaf: 20,
            n_bins: 64,
            seed: 0,
            loss: Loss::SquaredError,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::Config("max_depth and min_leaf must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must lie in (0, 1]".into()));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::Config("n_bins must lie in [2, 256]".into()));
        }
        Ok(())
    }
}

/// Regression tree stored as parallel node arrays; node 0 is the root and a
/// node is a leaf when `feature[i] < 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    fn push_leaf(&mut self) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(0.0);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            if t.feature[i] < 0 {
                0
            } else {
                1 + walk(t, t.left[i] as usize).max(walk(t, t.right[i] as usize))
            }
        }
        if self.feature.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    /// Leaf reached by a row read through `get(feature)`.
    pub fn leaf_of(&self, get: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        while self.feature[i] >= 0 {
            i = if get(self.feature[i] as usize) <= self.threshold[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        i
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub loss: Loss,
    pub max_depth: usize,
    /// Mean training loss before the first tree and after each tree.
    pub train_loss: Vec<f64>,
    /// Total split gain per feature.
    pub importance: Vec<f64>,
}

impl GbtModel {
    fn check_width(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok((0..x.nrows())
            .map(|i| {
                let mut acc = self.base_score;
                for tree in &self.trees {
                    let leaf = tree.leaf_of(|j| x[(i, j)]);
                    acc += self.learning_rate * tree.value[leaf];
                }
                acc
            })
            .collect())
    }

    /// Leaf index per (row, tree).
    pub fn leaf_indices(&self, x: &DMatrix<f64>) -> Result<Vec<Vec<usize>>> {
        self.check_width(x)?;
        Ok((0..x.nrows())
            .map(|i| self.trees.iter().map(|t| t.leaf_of(|j| x[(i, j)])).collect())
            .collect())
    }

    /// Features ranked by total gain, descending; zero-gain features omitted.
    pub fn ranked_importance(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(self.importance.iter().copied())
            .filter(|(_, g)| *g > 0.0)
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// Quantile bin edges for one feature: distinct training values, each the
/// inclusive upper bound of its bin.
fn bin_edges(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().expect("non-empty column");
    let mut distinct = sorted.clone();
    distinct.dedup();
    let mut edges: Vec<f64> = if distinct.len() <= n_bins {
        distinct
    } else {
        let n = sorted.len();
        let mut e: Vec<f64> = (1..n_bins).map(|q| sorted[q * n / n_bins - 1]).collect();
        e.dedup();
        e
    };
    edges.retain(|&e| e < max);
    edges
}

struct Binned {
    n: usize,
    codes: Vec<u8>,
    n_codes: Vec<usize>,
    edges: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &DMatrix<f64>, n_bins: usize) -> Self {
        let (n, p) = x.shape();
        let mut codes = Vec::with_capacity(n * p);
        let mut edges = Vec::with_capacity(p);
        let mut n_codes = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let e = bin_edges(&col, n_bins);
            codes.extend(col.iter().map(|v| e.partition_point(|edge| edge < v) as u8));
            n_codes.push(e.len() + 1);
            edges.push(e);
        }
        Self {
            n,
            codes,
            n_codes,
            edges,
        }
    }

    #[inline]
    fn code(&self, j: usize, i: usize) -> u8 {
        self.codes[j * self.n + i]
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Grower<'a> {
    data: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    importance: &'a mut [f64],
}

impl Grower<'_> {
    fn best_split(&self, rows: &[u32]) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf;
        let (g_tot, h_tot) = rows.iter().fold((0.0, 0.0), |(g, h), &i| {
            (g + self.grad[i as usize], h + self.hess[i as usize])
        });
        let parent = g_tot * g_tot / h_tot;
        let per_feature: Vec<Option<Candidate>> = (0..self.data.n_codes.len())
            .into_par_iter()
            .map(|j| {
                let nb = self.data.n_codes[j];
                if nb < 2 {
                    return None;
                }
                let mut g = vec![0.0f64; nb];
                let mut h = vec![0.0f64; nb];
                let mut c = vec![0usize; nb];
                for &i in rows {
                    let b = self.data.code(j, i as usize) as usize;
                    g[b] += self.grad[i as usize];
                    h[b] += self.hess[i as usize];
                    c[b] += 1;
                }
                let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
                let mut best: Option<Candidate> = None;
                for b in 0..nb - 1 {
                    gl += g[b];
                    hl += h[b];
                    cl += c[b];
                    let cr = rows.len() - cl;
                    if cl < min_leaf {
                        continue;
                    }
                    if cr < min_leaf {
                        break;
                    }
                    let gr = g_tot - gl;
                    let hr = h_tot - hl;
                    let gain = gl * gl / hl + gr * gr / hr - parent;
                    if gain > 0.0 && best.is_none_or(|b0| gain > b0.gain) {
                        best = Some(Candidate {
                            feature: j,
                            bin: b,
                            gain,
                        });
                    }
                }
                best
            })
            .collect();
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
    }

    fn grow(&mut self, tree: &mut Tree, rows: Vec<u32>, depth: usize) -> usize {
        let node = tree.push_leaf();
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return node;
        }
        let Some(split) = self.best_split(&rows) else {
            return node;
        };
        self.importance[split.feature] += split.gain;
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&i| self.data.code(split.feature, i as usize) as usize <= split.bin);
        drop(rows);
        let l = self.grow(tree, left_rows, depth + 1);
        let r = self.grow(tree, right_rows, depth + 1);
        tree.feature[node] = split.feature as i32;
        tree.threshold[node] = self.data.edges[split.feature][split.bin];
        tree.left[node] = l as u32;
        tree.right[node] = r as u32;
        node
    }
}

fn leaf_of_binned(tree: &Tree, data: &Binned, edges_bin: &[Vec<f64>], i: usize) -> usize {
    let mut node = 0;
    while tree.feature[node] >= 0 {
        let j = tree.feature[node] as usize;
        let code = data.code(j, i) as usize;
        // Thresholds are bin edges, so comparing codes is exact.
        let split_bin = edges_bin[j].partition_point(|e| *e < tree.threshold[node]);
        node = if code <= split_bin {
            tree.left[node] as usize
        } else {
            tree.right[node] as usize
        };
    }
    node
}

fn mean_loss(loss: &Loss, y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(t, p)| loss.value(t - p)).sum::<f64>() / y.len() as f64
}

/// Fit a boosted ensemble. Deterministic for a fixed `params.seed`.
pub fn gbt_fit(x: &DMatrix<f64>, y: &[f64], names: &[String], params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    let (n, p) = x.shape();
    if y.len() != n || names.len() != p {
        return Err(Error::InvalidInput("design, response and names disagree in shape".into()));
    }
    if n < 2 * params.min_leaf || n == 0 {
        return Err(Error::InvalidInput(format!(
            "boosting needs at least {} rows (2 x min_leaf), got {n}",
            2 * params.min_leaf
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("boosting inputs must be finite".into()));
    }

    let data = Binned::new(x, params.n_bins);
    let base = params.loss.base_score(y);
    let mut pred = vec![base; n];
    let mut history = Vec::with_capacity(params.n_trees + 1);
    history.push(mean_loss(&params.loss, y, &pred));
    let mut importance = vec![0.0; p];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let sample_size = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<u32> = (0..n as u32).collect();

    for _ in 0..params.n_trees {
        for i in 0..n {
            let (g, h) = params.loss.grad_hess(y[i] - pred[i]);
            grad[i] = g;
            hess[i] = h.max(HESSIAN_FLOOR);
        }
        let rows: Vec<u32> = if sample_size < n {
            for k in 0..sample_size {
                let swap = rng.random_range(k..n);
                order.swap(k, swap);
            }
            let mut s = order[..sample_size].to_vec();
            s.sort_unstable();
            s
        } else {
            (0..n as u32).collect()
        };

        let mut tree = Tree::default();
        Grower {
            data: &data,
            grad: &grad,
            hess: &hess,
            params,
            importance: &mut importance,
        }
        .grow(&mut tree, rows, 0);

        let mut members: Vec<Vec<f64>> = vec![Vec::new(); tree.n_nodes()];
        let leaf_of_row: Vec<usize> = (0..n)
            .map(|i| leaf_of_binned(&tree, &data, &data.edges, i))
            .collect();
        for (i, &leaf) in leaf_of_row.iter().enumerate() {
            members[leaf].push(y[i] - pred[i]);
        }
        for (node, resid) in members.iter_mut().enumerate() {
            if tree.feature[node] < 0 {
                tree.value[node] = params.loss.location(resid);
            }
        }
        for (i, &leaf) in leaf_of_row.iter().enumerate() {
            pred[i] += params.learning_rate * tree.value[leaf];
        }
        history.push(mean_loss(&params.loss, y, &pred));
        trees.push(tree);
    }

    Ok(GbtModel {
        feature_names: names.to_vec(),
        trees,
        learning_rate: params.learning_rate,
        base_score: base,
        loss: params.loss,
        max_depth: params.max_depth,
        train_loss: history,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    fn noisy(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = (0..n)
            .map(|i| {
                let s = if x[(i, 0)] > 0.2 { 1.0 } else { -0.5 } + 0.5 * x[(i, 1)];
                s + 0.3 * normal.sample(&mut rng)
            })
            .collect();
        (x, y)
    }

    #[test]
    fn empty_ensemble_predicts_mean() {
        let (x, y) = noisy(200, 1);
        let params = GbtParams {
            n_trees: 0,
            ..GbtParams::default()
        };
        let m = gbt_fit(&x, &y, &names(3), &params).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(m.predict(&x).unwrap().iter().all(|p| *p == mean));
    }

    #[test]
    fn step_target_is_learned() {
        let n = 1000;
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / n as f64 - 0.5);
        let y: Vec<f64> = (0..n).map(|i| if x[(i, 0)] > 0.0 { 1.0 } else { 0.0 }).collect();
        let params = GbtParams {
            n_trees: 50,
            max_depth: 2,
            learning_rate: 0.3,
            ..GbtParams::default()
        };
        let m = gbt_fit(&x, &y, &names(1), &params).unwrap();
        let pred = m.predict(&x).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(&pred).map(|(t, p)| (t - p).powi(2)).sum();
        assert!(1.0 - ss_res / ss_tot > 0.99);
    }

    #[test]
    fn single_stump_has_two_outputs() {
        let (x, y) = noisy(300, 2);
        let params = GbtParams {
            n_trees: 1,
            max_depth: 1,
            ..GbtParams::default()
        };
        let m = gbt_fit(&x, &y, &names(3), &params).unwrap();
        let mut outs = m.predict(&x).unwrap();
        outs.sort_by(f64::total_cmp);
        outs.dedup();
        assert_eq!(outs.len(), 2);
        assert!(m.trees[0].depth() <= 1);
    }

    #[test]
    fn structure_invariants_and_determinism() {
        let (x, y) = noisy(800, 3);
        let params = GbtParams {
            n_trees: 30,
            seed: 9,
            ..GbtParams::default()
        };
        let a = gbt_fit(&x, &y, &names(3), &params).unwrap();
        let b = gbt_fit(&x, &y, &names(3), &params).unwrap();
        assert_eq!(a, b);
        for t in &a.trees {
            assert!(t.depth() <= params.max_depth);
            assert!(t.threshold.iter().all(|v| v.is_finite()));
        }
        let c = gbt_fit(&x, &y, &names(3), &GbtParams { seed: 10, ..params }).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn training_loss_non_increasing() {
        let (x, y) = noisy(600, 4);
        let m = gbt_fit(&x, &y, &names(3), &GbtParams::default()).unwrap();
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn too_few_rows() {
        let (x, y) = noisy(39, 5);
        assert!(gbt_fit(&x, &y, &names(3), &GbtParams::default()).is_err());
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let (x, y) = noisy(100, 6);
        let m = gbt_fit(&x, &y, &names(3), &GbtParams { n_trees: 2, ..GbtParams::default() }).unwrap();
        assert!(m.predict(&DMatrix::zeros(2, 2)).is_err());
    }
}
