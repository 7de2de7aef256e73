//! Experiment reports: a CSV of per-point records and a JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::HarnessError;

pub const REPORT_HEADER: &str =
    "point,x,y,z,param,azimuth_deg,on_dbm,off_dbm,absent_dbm,gain_db,gain_vs_absent_db,queries";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub point: usize,
    pub position: [f64; 3],
    pub param: f64,
    /// RX azimuth seen from the surface centre.
    pub azimuth_deg: f64,
    /// Optimized configuration.
    pub on_dbm: f64,
    /// Uniform all-state-0 configuration.
    pub off_dbm: f64,
    /// Surface removed.
    pub absent_dbm: f64,
    pub gain_db: f64,
    pub gain_vs_absent_db: f64,
    pub queries: u64,
}

impl Record {
    pub fn new(point: usize, position: [f64; 3], param: f64, azimuth_deg: f64, powers: (f64, f64, f64), queries: u64) -> Self {
        let (on, off, absent) = powers;
        Self {
            point,
            position,
            param,
            azimuth_deg,
            on_dbm: on,
            off_dbm: off,
            absent_dbm: absent,
            gain_db: on - off,
            gain_vs_absent_db: on - absent,
            queries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean_gain_db: f64,
    pub min_gain_db: f64,
    pub max_gain_db: f64,
    pub mean_gain_vs_absent_db: f64,
    pub total_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub algorithm: String,
    pub sweep: String,
    pub seed: u64,
    pub version: String,
    pub records: Vec<Record>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl ExperimentReport {
    pub fn summary(&self) -> Summary {
        let g = || self.records.iter().map(|r| r.gain_db);
        Summary {
            mean_gain_db: mean(g()),
            min_gain_db: g().fold(f64::INFINITY, f64::min),
            max_gain_db: g().fold(f64::NEG_INFINITY, f64::max),
            mean_gain_vs_absent_db: mean(self.records.iter().map(|r| r.gain_vs_absent_db)),
            total_queries: self.records.iter().map(|r| r.queries).sum(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{REPORT_HEADER}\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                r.point,
                r.position[0],
                r.position[1],
                r.position[2],
                r.param,
                r.azimuth_deg,
                r.on_dbm,
                r.off_dbm,
                r.absent_dbm,
                r.gain_db,
                r.gain_vs_absent_db,
                r.queries
            )
            .expect("write to string");
        }
        s
    }

    /// Metadata sidecar; records live in the CSV.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            scenario: &'a str,
            algorithm: &'a str,
            sweep: &'a str,
            seed: u64,
            version: &'a str,
            records: usize,
            summary: Summary,
        }
        let mut s = serde_json::to_string_pretty(&Sidecar {
            scenario: &self.scenario,
            algorithm: &self.algorithm,
            sweep: &self.sweep,
            seed: self.seed,
            version: &self.version,
            records: self.records.len(),
            summary: self.summary(),
        })
        .expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        write_file(&dir.join("report.csv"), &self.to_csv())?;
        write_file(&dir.join("report.json"), &self.to_json())
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| HarnessError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
