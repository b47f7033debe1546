//! Oracle dump records and the on-disk memo cache.
//!
//! Dump lines are JSON objects `{x, y?, k, witness_hex, witness_bits, T, machine_id}`.
//! Strings are written as `0`/`1` text; `y` is absent for plain complexity, in
//! which case `x` is the described string.
//!
//! The cache directory comes from `MUCHNIK_LAB_CACHE`. One JSONL file per
//! oracle configuration holds one memo table per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use muchnik_core::bits::BitString;
use muchnik_core::oracle::{Oracle, OracleConfig, TableSnapshot, Witnessed, MACHINE_ID};
use serde::{Deserialize, Serialize};

use crate::formats::FormatError;

pub const CACHE_ENV: &str = "MUCHNIK_LAB_CACHE";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub x: BitString,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<BitString>,
    pub k: usize,
    pub witness_hex: String,
    pub witness_bits: usize,
    #[serde(rename = "T")]
    pub steps: u64,
    pub machine_id: String,
}

impl DumpRecord {
    /// `K(y | x)`, or `K(x)` when `y` is `None`.
    pub fn new(x: BitString, y: Option<BitString>, w: &Witnessed, steps: u64) -> Self {
        DumpRecord {
            x,
            y,
            k: w.k,
            witness_hex: w.witness.to_hex(),
            witness_bits: w.witness.len(),
            steps,
            machine_id: MACHINE_ID.to_string(),
        }
    }

    /// Condition and output as stored in the memo.
    pub fn query(&self) -> (BitString, BitString) {
        match self.y {
            Some(y) => (self.x, y),
            None => (BitString::empty(), self.x),
        }
    }

    pub fn witness(&self) -> Result<BitString, FormatError> {
        Ok(BitString::from_hex(&self.witness_hex, self.witness_bits)?)
    }
}

/// Every memo entry as a dump record, in `(condition, output)` order.
pub fn dump_records(oracle: &Oracle) -> Vec<DumpRecord> {
    let steps = oracle.config().steps;
    oracle
        .memo_entries()
        .map(|(cond, y, w)| {
            if cond.is_empty() {
                DumpRecord::new(y, None, &w, steps)
            } else {
                DumpRecord::new(cond, Some(y), &w, steps)
            }
        })
        .collect()
}

pub fn write_dump<W: Write>(mut w: W, records: &[DumpRecord]) -> Result<(), FormatError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump<R: BufRead>(r: R) -> Result<Vec<DumpRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn cache_file(dir: &Path, config: &OracleConfig) -> PathBuf {
    dir.join(format!(
        "{MACHINE_ID}-L{}-T{}-o{}.jsonl",
        config.l_max, config.steps, config.max_output_len
    ))
}

/// A fresh oracle, preloaded from `dir` when a matching cache file exists.
pub fn load_oracle(config: OracleConfig, dir: Option<&Path>) -> Result<Oracle, FormatError> {
    let mut oracle = Oracle::new(config).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let Some(dir) = dir else {
        return Ok(oracle);
    };
    let path = cache_file(dir, &config);
    if !path.exists() {
        return Ok(oracle);
    }
    for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snap: TableSnapshot = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        oracle.import(snap);
    }
    Ok(oracle)
}

/// Writes every memo table of `oracle` into `dir`, replacing the previous file.
pub fn save_oracle(oracle: &Oracle, dir: &Path) -> Result<PathBuf, FormatError> {
    fs::create_dir_all(dir)?;
    let path = cache_file(dir, oracle.config());
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for snap in oracle.snapshots() {
            serde_json::to_writer(&mut w, snap)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use muchnik_core::oracle::run;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn record_shape() {
        let w = Witnessed {
            k: 5,
            witness: bs("00101"),
        };
        let r = DumpRecord::new(bs("101"), None, &w, 65536);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(
            j,
            r#"{"x":"101","k":5,"witness_hex":"05","witness_bits":5,"T":65536,"machine_id":"mlab-prefix-v1"}"#
        );
        let back: DumpRecord = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.witness().unwrap(), w.witness);
    }

    #[test]
    fn dump_replays() {
        let mut o = Oracle::new(OracleConfig::default()).unwrap();
        o.cond_complexity(&bs("0110"), &bs("1001")).unwrap();
        o.plain_complexity(&bs("11")).unwrap();
        let recs = dump_records(&o);
        assert!(!recs.is_empty());
        let mut buf = Vec::new();
        write_dump(&mut buf, &recs).unwrap();
        let back = read_dump(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        for r in &back {
            let (x, y) = r.query();
            assert_eq!(run(&r.witness().unwrap(), &x, r.steps).output(), Some(y));
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = OracleConfig::default();
        let mut o = load_oracle(config, Some(dir.path())).unwrap();
        let k = o.cond_complexity(&bs("1101"), &bs("0010")).unwrap();
        save_oracle(&o, dir.path()).unwrap();
        let mut warm = load_oracle(config, Some(dir.path())).unwrap();
        assert_eq!(warm.memo_entries().count(), o.memo_entries().count());
        assert_eq!(warm.cond_complexity(&bs("1101"), &bs("0010")).unwrap(), k);
        // a different configuration does not pick up the file
        let other = OracleConfig { l_max: 12, ..config };
        assert_eq!(load_oracle(other, Some(dir.path())).unwrap().memo_entries().count(), 0);
    }
}
