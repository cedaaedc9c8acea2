use std::io::{Read, Write};

use super::{
    Action, MboEvent, ParseOutcome, RowError, RowErrorKind, Side, StreamValidator, Symbol,
};
use crate::error::{Error, Result};

const REQUIRED: [&str; 8] = [
    "ts_event", "order_id", "symbol", "price", "size", "side", "action", "sequence",
];

/// Column layout written by [`write_csv`]. Passthrough vendor fields are
/// emitted with neutral values; the parser ignores them.
const WRITE_HEADER: [&str; 15] = [
    "ts_recv",
    "ts_event",
    "ts_in_delta",
    "channel_id",
    "publisher_id",
    "instrument_id",
    "symbol",
    "sequence",
    "order_id",
    "price",
    "size",
    "side",
    "action",
    "rtype",
    "flags",
];

struct Columns {
    ts_event: usize,
    order_id: usize,
    symbol: usize,
    price: usize,
    size: usize,
    side: usize,
    action: usize,
    sequence: usize,
}

impl Columns {
    fn locate(header: &csv::ByteRecord) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| trim_bytes(h) == name.as_bytes())
        };
        let mut idx = [0usize; 8];
        let mut missing = Vec::new();
        for (slot, name) in idx.iter_mut().zip(REQUIRED) {
            match find(name) {
                Some(i) => *slot = i,
                None => missing.push(name),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Schema(format!(
                "missing required column(s): {}",
                missing.join(", ")
            )));
        }
        Ok(Self {
            ts_event: idx[0],
            order_id: idx[1],
            symbol: idx[2],
            price: idx[3],
            size: idx[4],
            side: idx[5],
            action: idx[6],
            sequence: idx[7],
        })
    }
}

fn trim_bytes(b: &[u8]) -> &[u8] {
    let start = b.iter().position(|c| !c.is_ascii_whitespace()).unwrap_or(b.len());
    let end = b
        .iter()
        .rposition(|c| !c.is_ascii_whitespace())
        .map_or(start, |p| p + 1);
    &b[start..end]
}

fn field<'a>(rec: &'a csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<&'a str, String> {
    let raw = rec.get(idx).ok_or_else(|| format!("missing field {name}"))?;
    std::str::from_utf8(trim_bytes(raw)).map_err(|_| format!("{name} is not UTF-8"))
}

fn number<T: std::str::FromStr>(rec: &csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<T, String> {
    let text = field(rec, idx, name)?;
    text.parse::<T>()
        .map_err(|_| format!("{name}: cannot parse '{text}' as integer"))
}

fn decode(rec: &csv::ByteRecord, cols: &Columns) -> std::result::Result<MboEvent, String> {
    let symbol_text = field(rec, cols.symbol, "symbol")?;
    let symbol = Symbol::new(symbol_text).ok_or_else(|| format!("symbol '{symbol_text}' too long"))?;
    let side_text = field(rec, cols.side, "side")?;
    let side = Side::parse(side_text).ok_or_else(|| format!("unknown side '{side_text}'"))?;
    let action_text = field(rec, cols.action, "action")?;
    let action =
        Action::parse(action_text).ok_or_else(|| format!("unknown action '{action_text}'"))?;
    Ok(MboEvent {
        ts_event: number(rec, cols.ts_event, "ts_event")?,
        order_id: number(rec, cols.order_id, "order_id")?,
        symbol,
        price: number(rec, cols.price, "price")?,
        size: number(rec, cols.size, "size")?,
        side,
        action,
        sequence: number(rec, cols.sequence, "sequence")?,
    })
}

/// Parse MBO rows from CSV. A stream with no header at all yields an empty
/// outcome; a header lacking a required column is a fatal schema error.
/// Rows that fail to decode or violate event invariants are reported in
/// [`ParseOutcome::errors`] and skipped.
pub fn parse_csv<R: Read>(reader: R, symbol_filter: Option<&[Symbol]>) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.byte_headers()?.clone();
    let mut out = ParseOutcome::default();
    if header.is_empty() {
        return Ok(out);
    }
    let cols = Columns::locate(&header)?;
    let mut validator = StreamValidator::default();
    let mut rec = csv::ByteRecord::new();
    let mut row = 0u64;
    loop {
        match rdr.read_byte_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(err) => {
                row += 1;
                out.errors.push(RowError {
                    row,
                    kind: RowErrorKind::Malformed(err.to_string()),
                });
                // csv cannot resynchronize after an I/O error.
                if matches!(err.kind(), csv::ErrorKind::Io(_)) {
                    break;
                }
                continue;
            }
        }
        row += 1;
        let ev = match decode(&rec, &cols) {
            Ok(ev) => ev,
            Err(msg) => {
                out.errors.push(RowError {
                    row,
                    kind: RowErrorKind::Malformed(msg),
                });
                continue;
            }
        };
        if let Some(filter) = symbol_filter {
            if !filter.contains(&ev.symbol) {
                out.filtered += 1;
                continue;
            }
        }
        match validator.admit(&ev) {
            Ok(()) => out.events.push(ev),
            Err(kind) => out.errors.push(RowError { row, kind }),
        }
    }
    Ok(out)
}

/// Write events as CSV with the vendor column names.
pub fn write_csv<W: Write>(writer: W, events: &[MboEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(WRITE_HEADER)?;
    for ev in events {
        wtr.write_record([
            ev.ts_event.to_string(),
            ev.ts_event.to_string(),
            "0".to_string(),
            "0".to_string(),
            "0".to_string(),
            "0".to_string(),
            ev.symbol.to_string(),
            ev.sequence.to_string(),
            ev.order_id.to_string(),
            ev.price.to_string(),
            ev.size.to_string(),
            ev.side.letter().to_string(),
            ev.action.letter().to_string(),
            "160".to_string(),
            "0".to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
