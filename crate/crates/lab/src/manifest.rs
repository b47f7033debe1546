//! Run manifests and report envelopes.
//!
//! Every report is written as `{"manifest": ..., "report": ...}`. The only
//! field that varies between identical runs is `manifest.timestamp`; set
//! `SOURCE_DATE_EPOCH` to pin it.

use std::time::{SystemTime, UNIX_EPOCH};

use muchnik_core::oracle::MACHINE_ID;
use serde::Serialize;
use serde_json::Value;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// The library operation that produced the report.
    pub operation: &'static str,
    pub params: Value,
    pub seed: u64,
    pub machine_id: &'static str,
    pub version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, operation: &'static str, params: Value, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            operation,
            params,
            seed,
            machine_id: MACHINE_ID,
            version: VERSION,
            timestamp: timestamp(),
        }
    }
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Serialize)]
pub struct Envelope<'a, R: Serialize> {
    pub manifest: &'a RunManifest,
    pub report: &'a R,
}

pub fn to_json<R: Serialize>(manifest: &RunManifest, report: &R) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { manifest, report })?;
    s.push('\n');
    Ok(s)
}

/// A report with a tabular view for `--format csv`.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

/// CSV with the manifest as leading `#` comment lines.
pub fn to_csv<T: Tabular>(manifest: &RunManifest, table: &T) -> Result<String, csv::Error> {
    let mut out = String::new();
    out.push_str(&format!(
        "# subcommand={} operation={} seed={} machine_id={} version={} timestamp={}\n",
        manifest.subcommand,
        manifest.operation,
        manifest.seed,
        manifest.machine_id,
        manifest.version,
        manifest.timestamp
    ));
    out.push_str(&format!("# params={}\n", manifest.params));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.header())?;
    for row in table.rows() {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    struct T;
    impl Tabular for T {
        fn header(&self) -> Vec<&'static str> {
            vec!["t", "log2"]
        }
        fn rows(&self) -> Vec<Vec<String>> {
            vec![vec!["1".into(), "3".into()], vec!["2".into(), "-1.5".into()]]
        }
    }

    fn manifest() -> RunManifest {
        let mut m = RunManifest::new("bounds", "bounds::scan_family_exponent", json!({"m": 3}), 7);
        m.timestamp = 0;
        m
    }

    #[test]
    fn json_envelope() {
        let s = to_json(&manifest(), &json!({"x": 1})).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["manifest"]["seed"], 7);
        assert_eq!(v["manifest"]["machine_id"], MACHINE_ID);
        assert_eq!(v["report"]["x"], 1);
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&manifest(), &T).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# subcommand=bounds operation=bounds::scan_family_exponent seed=7"));
        assert_eq!(lines[1], r#"# params={"m":3}"#);
        assert_eq!(&lines[2..], &["t,log2", "1,3", "2,-1.5"]);
    }
}
