//! Frame interchange: CSV and the `FFR1` binary layout.
//!
//! `FFR1` layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "FFR1"
//! symbol_len   u16, then symbol bytes (UTF-8)
//! origin_ns    u64
//! grid_ns      u64
//! n_rows       u64
//! n_columns    u32
//! directory    n_columns entries of:
//!                kind u8 (0 = feature, 1 = target, 2 = modelable mask, 3 = bin index)
//!                horizon u32 (bins; 0 unless kind = 1)
//!                name_len u16, then name bytes (UTF-8)
//! data         n_columns arrays of n_rows f64, in directory order;
//!              NaN = missing, mask stored as 1.0 / 0.0
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::FeatureFrame;
use crate::error::{Error, Result};

pub const FFR1_MAGIC: [u8; 4] = *b"FFR1";

const KIND_FEATURE: u8 = 0;
const KIND_TARGET: u8 = 1;
const KIND_MASK: u8 = 2;
const KIND_INDEX: u8 = 3;

fn target_name(k: usize) -> String {
    format!("target_k{k}")
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_frame_csv<W: Write>(writer: W, frame: &FeatureFrame) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        "symbol".to_string(),
        "bin_index".to_string(),
        "bin_start_ns".to_string(),
        "modelable".to_string(),
    ];
    header.extend(frame.column_names().map(str::to_string));
    header.extend(frame.targets().keys().map(|k| target_name(*k)));
    wtr.write_record(&header)?;
    for t in 0..frame.n_rows() {
        let mut row = vec![
            frame.symbol.clone(),
            frame.bin_index[t].to_string(),
            frame.bin_start_ns(t).to_string(),
            u8::from(frame.modelable_mask[t]).to_string(),
        ];
        row.extend(frame.columns().iter().map(|(_, c)| fmt_value(c[t])));
        row.extend(frame.targets().values().map(|c| fmt_value(c[t])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_frame_csv<R: Read>(reader: R) -> Result<FeatureFrame> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let fixed = ["symbol", "bin_index", "bin_start_ns", "modelable"];
    if header.len() < fixed.len() || header[..4] != fixed {
        return Err(Error::Schema(format!(
            "frame CSV must start with {}",
            fixed.join(",")
        )));
    }
    let mut symbol = String::new();
    let mut index = Vec::new();
    let mut starts = Vec::new();
    let mut excluded = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 4];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Format(format!("frame CSV row {}: bad {what}", row + 1));
        symbol = rec.get(0).unwrap_or_default().to_string();
        index.push(rec.get(1).and_then(|v| v.parse::<u64>().ok()).ok_or_else(|| bad("bin_index"))?);
        starts.push(rec.get(2).and_then(|v| v.parse::<u64>().ok()).ok_or_else(|| bad("bin_start_ns"))?);
        excluded.push(rec.get(3) != Some("1"));
        for (j, col) in data.iter_mut().enumerate() {
            let field = rec.get(j + 4).ok_or_else(|| bad("field count"))?;
            col.push(if field.is_empty() {
                f64::NAN
            } else {
                field.parse::<f64>().map_err(|_| bad(&header[j + 4]))?
            });
        }
    }
    let grid_ns = match (index.len(), starts.len()) {
        (n, _) if n >= 2 && index[1] > index[0] => (starts[1] - starts[0]) / (index[1] - index[0]),
        _ => crate::grid::DEFAULT_GRID_NS,
    };
    let origin_ns = match index.first() {
        Some(&i0) => starts[0] - i0 * grid_ns,
        None => 0,
    };
    let mut columns = Vec::new();
    let mut targets = BTreeMap::new();
    for (name, col) in header[4..].iter().zip(data) {
        match name.strip_prefix("target_k").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) => {
                targets.insert(k, col);
            }
            None => columns.push((name.clone(), col)),
        }
    }
    FeatureFrame::from_parts(symbol, origin_ns, grid_ns, index, columns, targets, &excluded)
}

pub fn write_frame_ffr1<W: Write>(mut w: W, frame: &FeatureFrame) -> Result<()> {
    let n = frame.n_rows();
    let mut buf = Vec::with_capacity(64 + 8 * n * (frame.columns().len() + 4));
    buf.extend_from_slice(&FFR1_MAGIC);
    let sym = frame.symbol.as_bytes();
    let sym_len = u16::try_from(sym.len()).map_err(|_| Error::Format("symbol too long".into()))?;
    buf.extend_from_slice(&sym_len.to_le_bytes());
    buf.extend_from_slice(sym);
    buf.extend_from_slice(&frame.origin_ns.to_le_bytes());
    buf.extend_from_slice(&frame.grid_ns.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());

    let index: Vec<f64> = frame.bin_index.iter().map(|&i| i as f64).collect();
    let mask: Vec<f64> = frame.modelable_mask.iter().map(|&m| f64::from(u8::from(m))).collect();
    let mut entries: Vec<(u8, u32, String, &[f64])> = vec![
        (KIND_INDEX, 0, "bin_index".into(), &index),
        (KIND_MASK, 0, "modelable".into(), &mask),
    ];
    for (name, col) in frame.columns() {
        entries.push((KIND_FEATURE, 0, name.clone(), col));
    }
    for (k, col) in frame.targets() {
        let k32 = u32::try_from(*k).map_err(|_| Error::Format("horizon too large".into()))?;
        entries.push((KIND_TARGET, k32, target_name(*k), col));
    }
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (kind, horizon, name, _) in &entries {
        buf.push(*kind);
        buf.extend_from_slice(&horizon.to_le_bytes());
        let len = u16::try_from(name.len()).map_err(|_| Error::Format("name too long".into()))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for (_, _, _, col) in &entries {
        for v in col.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("FFR1 stream truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("FFR1 name is not UTF-8".into()))
    }
}

pub fn read_frame_ffr1<R: Read>(mut reader: R) -> Result<FeatureFrame> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4)? != FFR1_MAGIC {
        return Err(Error::Format("missing FFR1 magic".into()));
    }
    let symbol = cur.string()?;
    let origin_ns = cur.u64()?;
    let grid_ns = cur.u64()?;
    let n = usize::try_from(cur.u64()?).map_err(|_| Error::Format("row count overflow".into()))?;
    let n_cols = cur.u32()? as usize;
    let mut dir = Vec::with_capacity(n_cols.min(4096));
    for _ in 0..n_cols {
        let kind = cur.take(1)?[0];
        let horizon = cur.u32()? as usize;
        let name = cur.string()?;
        dir.push((kind, horizon, name));
    }
    let mut index = None;
    let mut mask = None;
    let mut columns = Vec::new();
    let mut targets = BTreeMap::new();
    let width = n
        .checked_mul(8)
        .ok_or_else(|| Error::Format("row count overflow".into()))?;
    for (kind, horizon, name) in dir {
        let raw = cur.take(width)?;
        let col: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        match kind {
            KIND_FEATURE => columns.push((name, col)),
            KIND_TARGET => {
                targets.insert(horizon, col);
            }
            KIND_MASK => mask = Some(col),
            KIND_INDEX => index = Some(col),
            other => return Err(Error::Format(format!("unknown FFR1 column kind {other}"))),
        }
    }
    let index: Vec<u64> = index
        .ok_or_else(|| Error::Format("FFR1 lacks bin_index".into()))?
        .into_iter()
        .map(|v| v as u64)
        .collect();
    let excluded: Vec<bool> = match mask {
        Some(m) => m.into_iter().map(|v| v != 1.0).collect(),
        None => vec![false; n],
    };
    FeatureFrame::from_parts(symbol, origin_ns, grid_ns, index, columns, targets, &excluded)
}
