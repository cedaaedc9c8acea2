//! `MBO1` fixed-layout binary records.
//!
//! Layout: the 4-byte magic `MBO1`, then back-to-back 38-byte records:
//!
//! | offset | width | field                                   |
//! |--------|-------|-----------------------------------------|
//! | 0      | 8     | ts_event, u64 LE                        |
//! | 8      | 8     | order_id, u64 LE                        |
//! | 16     | 8     | price, i64 LE                           |
//! | 24     | 4     | size, u32 LE                            |
//! | 28     | 1     | side (0=None, 1=Bid, 2=Ask)             |
//! | 29     | 1     | action (0=None, 1=Add, 2=Cancel, 3=Modify, 4=Clear, 5=Trade, 6=Fill) |
//! | 30     | 8     | sequence, u64 LE                        |
//!
//! Records carry no symbol; a file holds one symbol supplied by the caller.

use std::io::{Read, Write};

use super::{Action, MboEvent, ParseOutcome, RowError, RowErrorKind, Side, StreamValidator, Symbol};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"MBO1";
pub const BINARY_RECORD_LEN: usize = 38;

fn encode(ev: &MboEvent, buf: &mut [u8; BINARY_RECORD_LEN]) {
    buf[0..8].copy_from_slice(&ev.ts_event.to_le_bytes());
    buf[8..16].copy_from_slice(&ev.order_id.to_le_bytes());
    buf[16..24].copy_from_slice(&ev.price.to_le_bytes());
    buf[24..28].copy_from_slice(&ev.size.to_le_bytes());
    buf[28] = ev.side.code();
    buf[29] = ev.action.code();
    buf[30..38].copy_from_slice(&ev.sequence.to_le_bytes());
}

fn decode(rec: &[u8], symbol: Symbol) -> std::result::Result<MboEvent, String> {
    let u64_at = |o: usize| u64::from_le_bytes(rec[o..o + 8].try_into().expect("8-byte slice"));
    let side = Side::from_code(rec[28]).ok_or_else(|| format!("invalid side code {}", rec[28]))?;
    let action =
        Action::from_code(rec[29]).ok_or_else(|| format!("invalid action code {}", rec[29]))?;
    Ok(MboEvent {
        ts_event: u64_at(0),
        order_id: u64_at(8),
        symbol,
        price: i64::from_le_bytes(rec[16..24].try_into().expect("8-byte slice")),
        size: u32::from_le_bytes(rec[24..28].try_into().expect("4-byte slice")),
        side,
        action,
        sequence: u64_at(30),
    })
}

pub fn write_binary<W: Write>(mut writer: W, events: &[MboEvent]) -> Result<()> {
    writer.write_all(&BINARY_MAGIC)?;
    let mut buf = [0u8; BINARY_RECORD_LEN];
    for ev in events {
        encode(ev, &mut buf);
        writer.write_all(&buf)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read an `MBO1` stream. A wrong magic is fatal; undecodable records and
/// invariant violations are per-record errors, and a truncated trailing
/// record is reported as the final error.
pub fn read_binary<R: Read>(mut reader: R, symbol: Symbol) -> Result<ParseOutcome> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut out = ParseOutcome::default();
    if bytes.is_empty() {
        return Ok(out);
    }
    if bytes.len() < BINARY_MAGIC.len() || bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing MBO1 magic".into()));
    }
    let body = &bytes[4..];
    let mut validator = StreamValidator::default();
    let mut chunks = body.chunks_exact(BINARY_RECORD_LEN);
    let mut row = 0u64;
    for rec in &mut chunks {
        row += 1;
        match decode(rec, symbol) {
            Ok(ev) => match validator.admit(&ev) {
                Ok(()) => out.events.push(ev),
                Err(kind) => out.errors.push(RowError { row, kind }),
            },
            Err(msg) => out.errors.push(RowError {
                row,
                kind: RowErrorKind::Malformed(msg),
            }),
        }
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        out.errors.push(RowError {
            row: row + 1,
            kind: RowErrorKind::Malformed(format!("truncated record of {} bytes", rest.len())),
        });
    }
    Ok(out)
}
