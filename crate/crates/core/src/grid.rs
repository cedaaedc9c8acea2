//! Uniform-grid resampling of one symbol's event stream.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::book::{BookEngine, BookErrorCounts, BookL1};
use crate::error::{Error, Result};
use crate::mbo::MboEvent;

/// 250 ms in nanoseconds.
pub const DEFAULT_GRID_NS: u64 = 250_000_000;

/// Half-open session window `[start_ns, end_ns)` on a grid of `grid_ns`.
/// `start_ns` is the session open already expressed in UTC nanoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub start_ns: u64,
    pub end_ns: u64,
    pub grid_ns: u64,
}

impl Session {
    pub fn new(start_ns: u64, end_ns: u64, grid_ns: u64) -> Result<Self> {
        if grid_ns == 0 {
            return Err(Error::Config("grid width must be positive".into()));
        }
        if end_ns < start_ns || !(end_ns - start_ns).is_multiple_of(grid_ns) {
            return Err(Error::Config(format!(
                "session [{start_ns}, {end_ns}) is not a whole number of {grid_ns} ns bins"
            )));
        }
        Ok(Self {
            start_ns,
            end_ns,
            grid_ns,
        })
    }

    pub fn n_bins(&self) -> usize {
        ((self.end_ns - self.start_ns) / self.grid_ns) as usize
    }

    pub fn bins_per_second(&self) -> f64 {
        1e9 / self.grid_ns as f64
    }
}

/// One grid bin: the book at bin end plus flow accumulated inside the bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBin {
    pub bin_start: u64,
    pub book: BookL1,
    pub adds_l1: u64,
    pub cancels_l1: u64,
    pub exec_l1: u64,
    /// Signed best-quote order flow summed over the bin.
    pub ofi: i64,
    pub event_count: u32,
    /// Cleared for warm-start bins.
    pub modelable: bool,
}

impl GridBin {
    pub fn empty(bin_start: u64, book: BookL1) -> Self {
        Self {
            bin_start,
            book,
            adds_l1: 0,
            cancels_l1: 0,
            exec_l1: 0,
            ofi: 0,
            event_count: 0,
            modelable: true,
        }
    }

    pub fn depth_l1(&self) -> u64 {
        self.book.depth_l1()
    }

    pub fn mid_px(&self) -> Option<f64> {
        self.book.mid_px()
    }

    pub fn spread(&self) -> Option<i64> {
        self.book.spread()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ResampleOutcome {
    pub bins: Vec<GridBin>,
    /// Events outside the session window.
    pub dropped_outside: u64,
    /// Events whose timestamp precedes an already-closed bin.
    pub dropped_unsorted: u64,
    pub book_errors: BookErrorCounts,
}

/// Replay `events` (one symbol, time-sorted) through a fresh book and
/// sample it on the session grid. Event `e` lands in bin
/// `floor((ts - start) / grid)`; bins without events carry the previous
/// book forward with zero flow.
pub fn resample(events: &[MboEvent], session: &Session) -> ResampleOutcome {
    let n = session.n_bins();
    let mut book = BookEngine::new();
    let mut bins = Vec::with_capacity(n);
    let mut current = GridBin::empty(session.start_ns, BookL1::default());
    let mut out = ResampleOutcome::default();

    for ev in events {
        if ev.ts_event < session.start_ns || ev.ts_event >= session.end_ns {
            out.dropped_outside += 1;
            continue;
        }
        let idx = ((ev.ts_event - session.start_ns) / session.grid_ns) as usize;
        if idx < bins.len() {
            out.dropped_unsorted += 1;
            continue;
        }
        while bins.len() < idx {
            current.book = book.snapshot();
            bins.push(current);
            current = GridBin::empty(
                session.start_ns + bins.len() as u64 * session.grid_ns,
                BookL1::default(),
            );
        }
        if let Ok(delta) = book.apply(ev) {
            current.adds_l1 += delta.adds_l1;
            current.cancels_l1 += delta.cancels_l1;
            current.exec_l1 += delta.exec_l1;
            current.ofi += delta.ofi();
            current.event_count += 1;
        }
    }
    while bins.len() < n {
        current.book = book.snapshot();
        bins.push(current);
        current = GridBin::empty(
            session.start_ns + bins.len() as u64 * session.grid_ns,
            BookL1::default(),
        );
    }
    out.book_errors = book.error_counts();
    out.bins = bins;
    out
}

/// Flag the first `warm` bins as excluded from modeling.
pub fn warm_start(mut bins: Vec<GridBin>, warm: usize) -> Vec<GridBin> {
    if warm >= bins.len() && !bins.is_empty() {
        warn!(
            "warm start of {warm} bins covers all {} bins; nothing is modelable",
            bins.len()
        );
    }
    for bin in bins.iter_mut().take(warm) {
        bin.modelable = false;
    }
    bins
}

/// CSV dump of the grid: one row per bin, empty fields for absent prices.
pub fn write_bin_dump<W: Write>(writer: W, bins: &[GridBin]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "bin_start_ns",
        "best_bid_px",
        "best_ask_px",
        "bid_depth",
        "ask_depth",
        "adds_L1",
        "cancels_L1",
        "exec_L1",
        "event_count",
    ])?;
    let opt = |p: Option<i64>| p.map_or_else(String::new, |v| v.to_string());
    for b in bins {
        wtr.write_record([
            b.bin_start.to_string(),
            opt(b.book.best_bid_px),
            opt(b.book.best_ask_px),
            b.book.bid_depth_l1.to_string(),
            b.book.ask_depth_l1.to_string(),
            b.adds_l1.to_string(),
            b.cancels_l1.to_string(),
            b.exec_l1.to_string(),
            b.event_count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
