//! Histogram mutual information on equal-frequency bins.

use crate::error::{Error, Result};

/// Equal-frequency bin of every value. Ties share the bin of their first
/// sorted position, so the assignment depends only on ranks.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0; n];
    let mut first = 0;
    for pos in 0..n {
        if pos > 0 && x[order[pos]] != x[order[pos - 1]] {
            first = pos;
        }
        out[order[pos]] = first * bins / n;
    }
    out
}

/// Mutual information in nats between `x` and `y`, each cut into `bins`
/// equal-frequency bins.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("MI inputs differ in length".into()));
    }
    if x.len() < 100 {
        return Err(Error::InvalidInput(format!("MI needs at least 100 points, got {}", x.len())));
    }
    if bins < 2 {
        return Err(Error::InvalidInput("MI needs at least 2 bins".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("MI inputs must be finite".into()));
    }
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Ok(0.0);
    }
    let n = x.len();
    let bx = equal_frequency_bins(x, bins);
    let by = equal_frequency_bins(y, bins);
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (a, b) in bx.iter().zip(&by) {
        joint[a * bins + b] += 1;
        px[*a] += 1;
        py[*b] += 1;
    }
    let nf = n as f64;
    let mut terms: Vec<f64> = Vec::new();
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c > 0 {
                let pxy = c as f64 / nf;
                let denom = (px[a] as f64 / nf) * (py[b] as f64 / nf);
                terms.push(pxy * (pxy / denom).ln());
            }
        }
    }
    // Summing in sorted order makes the result exactly symmetric.
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().max(0.0))
}
