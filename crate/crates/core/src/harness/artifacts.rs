//! On-disk layout of a run directory:
//!
//! * `rounds.jsonl`: one [`RoundRecord`] per line
//! * `report.json`: the [`ExperimentReport`], manifest embedded
//! * `manifest.json`: config, seeds and hashes sufficient to regenerate
//!   the other two files

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::report::ExperimentReport;
use super::{HarnessError, RoundRecord};

pub const MANIFEST_VERSION: u32 = 1;
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub run_id: String,
    pub seed: u64,
    pub config: RunConfig,
    pub config_hash: String,
    pub dataset_hash: String,
    pub code_version: String,
}

impl Manifest {
    pub fn new(config: &RunConfig, dataset_hash: &str, run_id: Option<&str>) -> Self {
        let config_hash = config.hash();
        Self {
            version: MANIFEST_VERSION,
            run_id: run_id
                .map(str::to_string)
                .unwrap_or_else(|| config_hash[..12].to_string()),
            seed: config.seed,
            config: config.clone(),
            config_hash,
            dataset_hash: dataset_hash.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Write the three run files into `dir`, creating it as needed.
pub fn write_run(
    dir: &Path,
    manifest: &Manifest,
    records: &[RoundRecord],
    report: &ExperimentReport,
) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let rounds = dir.join(ROUNDS_FILE);
    let file = fs::File::create(&rounds).map_err(|e| io_err(&rounds, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(&rounds, e))?;
        w.write_all(b"\n").map_err(|e| io_err(&rounds, e))?;
    }
    w.flush().map_err(|e| io_err(&rounds, e))?;
    let mut report = report.clone();
    report.manifest = Some(manifest.clone());
    write_json(&dir.join(REPORT_FILE), &report)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    Ok(dir.to_path_buf())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    read_json(&dir.join(MANIFEST_FILE))
}

pub fn read_report(dir: &Path) -> Result<ExperimentReport, HarnessError> {
    read_json(&dir.join(REPORT_FILE))
}

pub fn read_records(dir: &Path) -> Result<Vec<RoundRecord>, HarnessError> {
    let path = dir.join(ROUNDS_FILE);
    let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RoundRecord = serde_json::from_str(&line).map_err(|e| io_err(&path, format!("line {}: {e}", i + 1)))?;
        if let Some(prev) = out.last().map(|p: &RoundRecord| p.t) {
            if r.t <= prev {
                return Err(io_err(
                    &path,
                    format!("line {}: round {} does not follow {prev}", i + 1, r.t),
                ));
            }
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(io_err(&path, "no rounds"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::EnvKind;
    use crate::harness::{execute, report, GammaMode};

    #[test]
    fn round_trip_through_a_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::synthetic(EnvKind::Inventory, 0.3, 200, 5);
        cfg.gamma = GammaMode::Fixed { value: 20.0 };
        cfg.oracle.rff_dim = 16;
        let out = execute(&cfg).unwrap();
        let rep = report(out.kind, &out.records, &[0.2, 0.5], 0.95, 50, cfg.seed).unwrap();
        let m = Manifest::new(&cfg, &out.dataset_hash, None);
        assert_eq!(m.run_id.len(), 12);
        let run = dir.path().join(&m.run_id);
        write_run(&run, &m, &out.records, &rep).unwrap();

        assert_eq!(read_records(&run).unwrap(), out.records);
        assert_eq!(read_manifest(&run).unwrap(), m);
        let back = read_report(&run).unwrap();
        assert_eq!(back.manifest.as_ref(), Some(&m));
        assert_eq!(back.metrics, rep.metrics);

        // the manifest alone regenerates the records
        let again = execute(&read_manifest(&run).unwrap().config).unwrap();
        assert_eq!(again.records, out.records);
        assert_eq!(again.dataset_hash, m.dataset_hash);
    }

    #[test]
    fn missing_or_broken_logs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_records(dir.path()).is_err());
        fs::write(dir.path().join(ROUNDS_FILE), "{\"t\": 1}\n").unwrap();
        let e = read_records(dir.path()).unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        fs::write(dir.path().join(ROUNDS_FILE), "").unwrap();
        assert!(read_records(dir.path()).is_err());
    }
}
