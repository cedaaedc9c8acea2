//! Market-by-order events: the normalized record, its file formats and a
//! seeded synthetic generator.

mod binary;
mod csv_io;
mod synth;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use binary::{read_binary, write_binary, BINARY_MAGIC, BINARY_RECORD_LEN};
pub use csv_io::{parse_csv, write_csv};
pub use synth::{synth_stream, SynthParams};

/// Prices are integers in units of 1e-9 currency.
pub const PRICE_SCALE: i64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
    None,
}

impl Side {
    pub fn code(self) -> u8 {
        match self {
            Side::None => 0,
            Side::Bid => 1,
            Side::Ask => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Side::None),
            1 => Some(Side::Bid),
            2 => Some(Side::Ask),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::Bid => 'B',
            Side::Ask => 'A',
            Side::None => 'N',
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "B" | "b" | "Bid" | "bid" | "BID" => Some(Side::Bid),
            "A" | "a" | "Ask" | "ask" | "ASK" => Some(Side::Ask),
            "N" | "n" | "None" | "none" | "NONE" | "" => Some(Side::None),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Add,
    Cancel,
    Modify,
    ClearBook,
    Trade,
    Fill,
    None,
}

impl Action {
    pub fn code(self) -> u8 {
        match self {
            Action::None => 0,
            Action::Add => 1,
            Action::Cancel => 2,
            Action::Modify => 3,
            Action::ClearBook => 4,
            Action::Trade => 5,
            Action::Fill => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Action::None),
            1 => Some(Action::Add),
            2 => Some(Action::Cancel),
            3 => Some(Action::Modify),
            4 => Some(Action::ClearBook),
            5 => Some(Action::Trade),
            6 => Some(Action::Fill),
            _ => None,
        }
    }

    /// Single-letter vendor code (`R` is clear book).
    pub fn letter(self) -> char {
        match self {
            Action::Add => 'A',
            Action::Cancel => 'C',
            Action::Modify => 'M',
            Action::ClearBook => 'R',
            Action::Trade => 'T',
            Action::Fill => 'F',
            Action::None => 'N',
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        let action = match t {
            "A" => Action::Add,
            "C" => Action::Cancel,
            "M" => Action::Modify,
            "R" => Action::ClearBook,
            "T" => Action::Trade,
            "F" => Action::Fill,
            "N" | "" => Action::None,
            _ => match t.to_ascii_lowercase().as_str() {
                "add" => Action::Add,
                "cancel" => Action::Cancel,
                "modify" => Action::Modify,
                "clear" | "clearbook" | "clear_book" => Action::ClearBook,
                "trade" => Action::Trade,
                "fill" => Action::Fill,
                "none" => Action::None,
                _ => return None,
            },
        };
        Some(action)
    }
}

/// Ticker symbol stored inline (at most 15 bytes) so events stay `Copy`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Symbol {
    len: u8,
    bytes: [u8; Symbol::MAX_LEN],
}

impl Symbol {
    pub const MAX_LEN: usize = 15;

    pub fn new(text: &str) -> Option<Self> {
        let raw = text.as_bytes();
        if raw.len() > Self::MAX_LEN {
            return None;
        }
        let mut bytes = [0u8; Self::MAX_LEN];
        bytes[..raw.len()].copy_from_slice(raw);
        Some(Self {
            len: raw.len() as u8,
            bytes,
        })
    }

    pub fn as_str(&self) -> &str {
        // Only constructed from &str, so the prefix is valid UTF-8.
        std::str::from_utf8(&self.bytes[..self.len as usize]).unwrap_or("")
    }
}

impl FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Symbol::new(s).ok_or_else(|| format!("symbol '{s}' longer than {} bytes", Self::MAX_LEN))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({})", self.as_str())
    }
}

/// One normalized order message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MboEvent {
    /// Matching-engine timestamp, nanoseconds since the UNIX epoch.
    pub ts_event: u64,
    pub order_id: u64,
    pub symbol: Symbol,
    /// Integer price in 1e-9 currency units.
    pub price: i64,
    pub size: u32,
    pub side: Side,
    pub action: Action,
    pub sequence: u64,
}

impl MboEvent {
    /// Field-level invariants that do not depend on stream context.
    pub fn check(&self) -> Result<(), RowErrorKind> {
        if self.action == Action::Add {
            if self.size == 0 {
                return Err(RowErrorKind::Invariant("add with zero size"));
            }
            if self.price <= 0 {
                return Err(RowErrorKind::Invariant("add with non-positive price"));
            }
            if self.side == Side::None {
                return Err(RowErrorKind::Invariant("add without side"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowErrorKind {
    Malformed(String),
    Invariant(&'static str),
    OutOfSequence { last: u64, got: u64 },
    TimeReversal { last: u64, got: u64 },
}

impl fmt::Display for RowErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowErrorKind::Malformed(msg) => write!(f, "malformed row: {msg}"),
            RowErrorKind::Invariant(msg) => write!(f, "invariant violated: {msg}"),
            RowErrorKind::OutOfSequence { last, got } => {
                write!(f, "sequence {got} not after {last}")
            }
            RowErrorKind::TimeReversal { last, got } => {
                write!(f, "ts_event {got} before {last}")
            }
        }
    }
}

/// A recoverable per-row error. `row` is 1-based over data rows (or records).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    pub row: u64,
    pub kind: RowErrorKind,
}

/// Result of parsing a file: accepted events in file order plus the rows
/// that were rejected.
#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub events: Vec<MboEvent>,
    pub errors: Vec<RowError>,
    /// Rows skipped by the symbol filter (not errors).
    pub filtered: u64,
}

impl ParseOutcome {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }
}

/// Per-symbol ordering checks applied after field parsing: sequence must be
/// strictly increasing and `ts_event` non-decreasing.
#[derive(Default)]
pub(crate) struct StreamValidator {
    last: HashMap<Symbol, (u64, u64)>,
}

impl StreamValidator {
    pub(crate) fn admit(&mut self, ev: &MboEvent) -> Result<(), RowErrorKind> {
        ev.check()?;
        if let Some(&(seq, ts)) = self.last.get(&ev.symbol) {
            if ev.sequence <= seq {
                return Err(RowErrorKind::OutOfSequence {
                    last: seq,
                    got: ev.sequence,
                });
            }
            if ev.ts_event < ts {
                return Err(RowErrorKind::TimeReversal {
                    last: ts,
                    got: ev.ts_event,
                });
            }
        }
        self.last.insert(ev.symbol, (ev.sequence, ev.ts_event));
        Ok(())
    }
}

/// Keep only the events of one symbol, preserving order.
pub fn events_for(events: &[MboEvent], symbol: Symbol) -> Vec<MboEvent> {
    events.iter().filter(|e| e.symbol == symbol).copied().collect()
}
