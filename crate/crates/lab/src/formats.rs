//! On-disk formats: MFAM family files, h-map JSON and label side-files.
//!
//! MFAM:
//!
//! ```text
//! MFAM v1 n=<domain_bits> m=<codomain_bits> k=<count>
//! <hex value or ~>      (2^n lines per member, index order)
//! ```
//!
//! Values are zero-padded to `ceil(m/4)` hex digits; `~` marks an undefined cell.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use muchnik_core::bits::{BitString, Family, FunctionTable, UniverseError};
use muchnik_core::rejection::HMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

pub fn hex_width(bits: u32) -> usize {
    bits.div_ceil(4) as usize
}

pub fn write_family<W: Write>(mut w: W, family: &Family) -> Result<(), FormatError> {
    let (n, m) = family.signature();
    writeln!(w, "MFAM v1 n={n} m={m} k={}", family.len())?;
    let width = hex_width(m);
    for table in family.iter() {
        for cell in table.cells() {
            match cell {
                Some(v) => writeln!(w, "{v:0width$x}")?,
                None => writeln!(w, "~")?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn header_field(tok: Option<&str>, key: &str) -> Result<u64, FormatError> {
    let tok = tok.ok_or_else(|| parse_err(1, format!("missing {key}=")))?;
    let v = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(1, format!("expected {key}=<int>, found {tok:?}")))?;
    v.parse().map_err(|_| parse_err(1, format!("bad integer in {tok:?}")))
}

pub fn read_family<R: BufRead>(r: R) -> Result<Family, FormatError> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("MFAM") || toks.next() != Some("v1") {
        return Err(parse_err(1, "header must start with `MFAM v1`"));
    }
    let n = header_field(toks.next(), "n")?;
    let m = header_field(toks.next(), "m")?;
    let k = header_field(toks.next(), "k")?;
    if toks.next().is_some() {
        return Err(parse_err(1, "trailing tokens in header"));
    }
    if n > FunctionTable::MAX_DOMAIN_BITS as u64 || m == 0 || m > FunctionTable::MAX_CODOMAIN_BITS as u64 {
        return Err(parse_err(1, format!("unsupported signature n={n} m={m}")));
    }
    let (n, m) = (n as u32, m as u32);
    let rows = 1usize << n;
    let width = hex_width(m);
    let mut family = Family::new(n, m)?;
    let mut line_no = 1;
    for member in 0..k {
        let mut cells = Vec::with_capacity(rows);
        for _ in 0..rows {
            line_no += 1;
            let line = match lines.next() {
                Some(l) => l?,
                None => {
                    return Err(parse_err(
                        line_no,
                        format!("file ends inside member {member}: expected {rows} rows per member"),
                    ))
                }
            };
            let t = line.trim();
            if t == "~" {
                cells.push(None);
                continue;
            }
            if t.len() != width || !t.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(parse_err(
                    line_no,
                    format!("expected {width} hex digits or `~`, found {t:?}"),
                ));
            }
            let v = u32::from_str_radix(t, 16).map_err(|e| parse_err(line_no, e.to_string()))?;
            if m < 32 && v >> m != 0 {
                return Err(parse_err(line_no, format!("value {t} exceeds {m} bits")));
            }
            cells.push(Some(v));
        }
        family.push(FunctionTable::partial(n, m, cells)?)?;
    }
    for rest in lines {
        line_no += 1;
        if !rest?.trim().is_empty() {
            return Err(parse_err(line_no, format!("extra row after {k} members")));
        }
    }
    Ok(family)
}

pub fn save_family(path: &Path, family: &Family) -> Result<(), FormatError> {
    write_family(BufWriter::new(File::create(path)?), family)
}

pub fn load_family(path: &Path) -> Result<Family, FormatError> {
    read_family(BufReader::new(File::open(path)?))
}

/// `{b_hex: [indices]}` with `b_hex` padded to `ceil(m/4)` digits.
pub fn hmap_to_json(h: &HMap, codomain_bits: u32) -> BTreeMap<String, Vec<usize>> {
    let width = hex_width(codomain_bits);
    h.lines()
        .iter()
        .enumerate()
        .map(|(b, line)| (format!("{b:0width$x}"), line.clone()))
        .collect()
}

/// Missing keys are empty lines.
pub fn hmap_from_json(map: &BTreeMap<String, Vec<usize>>, codomain_bits: u32) -> Result<HMap, FormatError> {
    let b_count = 1usize << codomain_bits;
    let mut lines = vec![Vec::new(); b_count];
    for (key, idx) in map {
        let b = usize::from_str_radix(key, 16)
            .ok()
            .filter(|&b| b < b_count)
            .ok_or_else(|| FormatError::Invalid(format!("h-map key {key:?} is not a {codomain_bits}-bit hex value")))?;
        lines[b] = idx.clone();
    }
    Ok(HMap::from_lines(lines))
}

pub fn save_hmap(path: &Path, h: &HMap, codomain_bits: u32) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &hmap_to_json(h, codomain_bits))?;
    writeln!(w)?;
    Ok(())
}

pub fn load_hmap(path: &Path, codomain_bits: u32) -> Result<HMap, FormatError> {
    let map: BTreeMap<String, Vec<usize>> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    hmap_from_json(&map, codomain_bits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub index: usize,
    pub label_hex: Option<String>,
}

pub fn labels_to_entries(labels: &[Option<BitString>]) -> Vec<LabelEntry> {
    labels
        .iter()
        .enumerate()
        .map(|(index, l)| LabelEntry {
            index,
            label_hex: l.map(|l| l.to_hex()),
        })
        .collect()
}

/// Labels of `label_bits` bits, indexed by position; every index must appear once.
pub fn labels_from_entries(entries: &[LabelEntry], label_bits: usize) -> Result<Vec<Option<BitString>>, FormatError> {
    let mut out = vec![None; entries.len()];
    let mut seen = vec![false; entries.len()];
    for e in entries {
        if e.index >= entries.len() || seen[e.index] {
            return Err(FormatError::Invalid(format!(
                "label index {} repeated or out of range",
                e.index
            )));
        }
        seen[e.index] = true;
        out[e.index] = e
            .label_hex
            .as_deref()
            .map(|h| BitString::from_hex(h, label_bits))
            .transpose()?;
    }
    Ok(out)
}

pub fn save_labels(path: &Path, labels: &[Option<BitString>]) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &labels_to_entries(labels))?;
    writeln!(w)?;
    Ok(())
}

pub fn load_labels(path: &Path, label_bits: usize) -> Result<Vec<Option<BitString>>, FormatError> {
    let entries: Vec<LabelEntry> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    labels_from_entries(&entries, label_bits)
}
