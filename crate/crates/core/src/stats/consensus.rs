//! Cross-symbol agreement of per-method feature rankings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::screen::ScreenResult;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsensusRow {
    pub feature: String,
    pub n_symbols: usize,
    pub mean_best_rank: f64,
    pub method_hits: usize,
    pub consensus: bool,
}

/// Consensus over ranked name lists, indexed `[symbol][method][rank - 1]`.
///
/// A feature's best rank in a symbol is its smallest rank over the methods
/// that list it; `mean_best_rank` averages that over the symbols where it
/// appears.
pub fn consensus_from_lists(lists: &[Vec<Vec<String>>], threshold: f64) -> Result<Vec<ConsensusRow>> {
    if lists.is_empty() {
        return Err(Error::InvalidInput("consensus needs at least one symbol".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("consensus threshold {threshold} outside (0, 1]")));
    }
    // feature -> (symbols, best-rank sum, hits)
    let mut acc: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for symbol in lists {
        let mut best: BTreeMap<&str, usize> = BTreeMap::new();
        for method in symbol {
            for (i, name) in method.iter().enumerate() {
                let e = best.entry(name.as_str()).or_insert(i + 1);
                *e = (*e).min(i + 1);
                acc.entry(name.as_str()).or_default().2 += 1;
            }
        }
        for (name, r) in best {
            let e = acc.entry(name).or_default();
            e.0 += 1;
            e.1 += r;
        }
    }
    let total = lists.len() as f64;
    let mut rows: Vec<ConsensusRow> = acc
        .into_iter()
        .map(|(name, (n, rank_sum, hits))| ConsensusRow {
            feature: name.to_string(),
            n_symbols: n,
            mean_best_rank: rank_sum as f64 / n as f64,
            method_hits: hits,
            consensus: n as f64 / total >= threshold - 1e-12,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mean_best_rank
            .total_cmp(&b.mean_best_rank)
            .then(b.method_hits.cmp(&a.method_hits))
            .then(b.n_symbols.cmp(&a.n_symbols))
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(rows)
}

/// Consensus over screening results, one per symbol.
pub fn consensus(results: &[ScreenResult], threshold: f64) -> Result<Vec<ConsensusRow>> {
    let lists: Vec<Vec<Vec<String>>> = results
        .iter()
        .map(|r| {
            r.lists()
                .iter()
                .map(|(_, l)| l.iter().map(|(n, _)| n.clone()).collect())
                .collect()
        })
        .collect();
    consensus_from_lists(&lists, threshold)
}

/// `feature,n_symbols,mean_best_rank,method_hits,consensus`.
pub fn write_consensus_csv<W: Write>(writer: W, rows: &[ConsensusRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "n_symbols", "mean_best_rank", "method_hits", "consensus"])?;
    for r in rows {
        w.write_record([
            r.feature.as_str(),
            &r.n_symbols.to_string(),
            &format!("{:.2}", r.mean_best_rank),
            &r.method_hits.to_string(),
            if r.consensus { "Yes" } else { "No" },
        ])?;
    }
    w.flush()?;
    Ok(())
}
