//! Experiment runners behind the command-line tool.

pub mod config;
pub mod report;
pub mod sweep;

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{optimal_phase_profile, Scenario, SimulatedOracle};
use crate::codebook::{build_angle_codebook, build_dft_codebook, AngleGrid};
use crate::geometry::{dispatch_profile, profile_from_vector, steering_vector, PhaseProfile, RisGeometry};
use crate::oracle::PowerOracle;
use crate::pattern::{compute_cut, scan_point, summarize_scan, Cut, FarField, RadiationPattern, ScanSummary, Span};
use crate::scalar::RisFloat;
use crate::search::{exhaustive_search, greedy_search, two_step_search, AveragingOracle, Group, SearchError, SearchResult, TraceEntry};

pub use report::{ExperimentReport, Record};
pub use sweep::{SweepPoint, SweepSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code: 2 for configuration and file problems, 3 for oracle failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Oracle(_) => 3,
        }
    }
}

impl<T> From<SearchError<T>> for HarnessError {
    fn from(e: SearchError<T>) -> Self {
        HarnessError::Oracle(e.to_string())
    }
}

/// Configuration strategy applied at each sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    TwoStep,
    /// Angle-based 2-D codebook scanned exhaustively.
    Exhaustive,
    Dft { oversampling_z: usize, oversampling_y: usize },
    Greedy { sweeps: usize, group: Group },
    /// Per-element conjugate phasing through the state set; one query.
    Optimal,
    /// Runs `inner` at sweep point `point` and holds that profile everywhere.
    Fixed { point: usize, inner: Box<AlgorithmSpec> },
}

fn algo_err(s: &str, why: &str) -> HarnessError {
    HarnessError::Config(format!("algorithm '{s}': {why}"))
}

impl AlgorithmSpec {
    /// `two-step | exhaustive | dft[:OZ,OY] | greedy[:SWEEPS[:element|column]] | optimal | fixed:K[:ALGO]`.
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let (head, rest) = s.split_once(':').map_or((s, None), |(h, r)| (h, Some(r)));
        let count = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0);
        match (head, rest) {
            ("two-step", None) => Ok(Self::TwoStep),
            ("exhaustive", None) => Ok(Self::Exhaustive),
            ("optimal", None) => Ok(Self::Optimal),
            ("dft", None) => Ok(Self::Dft {
                oversampling_z: 1,
                oversampling_y: 1,
            }),
            ("dft", Some(r)) => {
                let (a, b) = r.split_once(',').ok_or_else(|| algo_err(s, "expected dft:OZ,OY"))?;
                match (count(a), count(b)) {
                    (Some(oz), Some(oy)) => Ok(Self::Dft {
                        oversampling_z: oz,
                        oversampling_y: oy,
                    }),
                    _ => Err(algo_err(s, "oversampling factors must be positive integers")),
                }
            }
            ("greedy", r) => {
                let mut parts = r.map(|r| r.split(':').collect::<Vec<_>>()).unwrap_or_default().into_iter();
                let sweeps = match parts.next() {
                    None => 2,
                    Some(v) => count(v).ok_or_else(|| algo_err(s, "sweeps must be a positive integer"))?,
                };
                let group = match parts.next() {
                    None => Group::Column,
                    Some(v) => Group::parse(v).ok_or_else(|| algo_err(s, "group must be element or column"))?,
                };
                if parts.next().is_some() {
                    return Err(algo_err(s, "too many fields"));
                }
                Ok(Self::Greedy { sweeps, group })
            }
            ("fixed", Some(r)) => {
                let (k, inner) = r.split_once(':').map_or((r, None), |(k, i)| (k, Some(i)));
                let point = count(k).ok_or_else(|| algo_err(s, "point must be a positive integer"))?;
                let inner = match inner {
                    None => Self::TwoStep,
                    Some(i) => Self::parse(i)?,
                };
                if matches!(inner, Self::Fixed { .. }) {
                    return Err(algo_err(s, "fixed cannot nest"));
                }
                Ok(Self::Fixed {
                    point,
                    inner: Box::new(inner),
                })
            }
            _ => Err(algo_err(s, "unknown algorithm")),
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TwoStep => write!(f, "two-step"),
            Self::Exhaustive => write!(f, "exhaustive"),
            Self::Optimal => write!(f, "optimal"),
            Self::Dft {
                oversampling_z,
                oversampling_y,
            } => write!(f, "dft:{oversampling_z},{oversampling_y}"),
            Self::Greedy { sweeps, group } => {
                let g = match group {
                    Group::Element => "element",
                    Group::Column => "column",
                };
                write!(f, "greedy:{sweeps}:{g}")
            }
            Self::Fixed { point, inner } => write!(f, "fixed:{point}:{inner}"),
        }
    }
}

/// Runs one search for `scenario` against `oracle`.
pub fn run_search<T: RisFloat, O: PowerOracle<T> + ?Sized>(
    oracle: &mut O,
    scenario: &Scenario<T>,
    algo: &AlgorithmSpec,
    grid: &AngleGrid<T>,
) -> Result<SearchResult<T>, SearchError<T>> {
    let geom = scenario.geometry();
    let states = scenario.phase_states();
    let early = |e: crate::Error| SearchError {
        source: e.into(),
        trace: Vec::new(),
    };
    match algo {
        AlgorithmSpec::TwoStep => two_step_search(oracle, geom, grid, states),
        AlgorithmSpec::Exhaustive => {
            let cb = build_angle_codebook(geom, grid, None).map_err(early)?;
            exhaustive_search(oracle, &cb, states)
        }
        AlgorithmSpec::Dft {
            oversampling_z,
            oversampling_y,
        } => {
            let cb = build_dft_codebook(geom, *oversampling_z, *oversampling_y).map_err(early)?;
            exhaustive_search(oracle, &cb, states)
        }
        AlgorithmSpec::Greedy { sweeps, group } => greedy_search(oracle, geom, states, *sweeps, *group),
        AlgorithmSpec::Optimal => {
            let profile = optimal_phase_profile(scenario)
                .and_then(|p| dispatch_profile(p, states))
                .map_err(early)?;
            let p = oracle.query(&profile).map_err(|source| SearchError {
                source,
                trace: Vec::new(),
            })?;
            Ok(SearchResult {
                best_profile: profile,
                best_power_dbm: p,
                best_index: 0,
                query_count: 1,
                trace: vec![TraceEntry {
                    query_index: 0,
                    power_dbm: p,
                    label: "optimal".into(),
                }],
                selected_angles: None,
                accepted_powers: Vec::new(),
            })
        }
        AlgorithmSpec::Fixed { inner, .. } => run_search(oracle, scenario, inner, grid),
    }
}

/// Deterministic per-point seed (SplitMix64 of `base + index`).
pub fn derive_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions<T> {
    pub grid: AngleGrid<T>,
    pub seed: u64,
    /// Readings averaged per query (dB domain); 1 disables averaging.
    pub repeats: usize,
}

impl<T: RisFloat> RunOptions<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            grid: AngleGrid::default_grid(),
            seed,
            repeats: 1,
        }
    }
}

fn oracle_err(e: impl fmt::Display) -> HarnessError {
    HarnessError::Oracle(e.to_string())
}

fn point_scenario<T: RisFloat>(scenario: &Scenario<T>, p: &SweepPoint<T>, seed: u64) -> Scenario<T> {
    let mut s = scenario.with_rx_position(p.position);
    s.rng_seed = derive_seed(seed, p.index);
    s
}

fn reading<T: RisFloat>(
    oracle: &mut SimulatedOracle<T>,
    profile: Option<&PhaseProfile<T>>,
    repeats: usize,
) -> Result<f64, HarnessError> {
    let mut sum = 0.0;
    for _ in 0..repeats {
        sum += match profile {
            Some(p) => oracle.query(p).map_err(oracle_err)?.as_f64(),
            None => oracle.measure_without_surface().map_err(oracle_err)?.as_f64(),
        };
    }
    Ok(sum / repeats as f64)
}

fn evaluate<T: RisFloat>(
    scenario: &Scenario<T>,
    p: &SweepPoint<T>,
    seed: u64,
    on: &PhaseProfile<T>,
    repeats: usize,
    queries: u64,
) -> Result<Record, HarnessError> {
    let s = point_scenario(scenario, p, seed);
    let mut oracle = SimulatedOracle::new(&s).map_err(oracle_err)?;
    evaluate_with(&s, &mut oracle, p, on, repeats, queries)
}

fn evaluate_with<T: RisFloat>(
    s: &Scenario<T>,
    oracle: &mut SimulatedOracle<T>,
    p: &SweepPoint<T>,
    on: &PhaseProfile<T>,
    repeats: usize,
    queries: u64,
) -> Result<Record, HarnessError> {
    let off = PhaseProfile::ground(*s.geometry(), s.phase_states());
    let powers = (
        reading(oracle, Some(on), repeats)?,
        reading(oracle, Some(&off), repeats)?,
        reading(oracle, None, repeats)?,
    );
    let pos = p.position;
    let (_, az) = s.angles_of(pos);
    Ok(Record::new(
        p.index,
        [pos.x.as_f64(), pos.y.as_f64(), pos.z.as_f64()],
        p.param.as_f64(),
        az.deg().as_f64(),
        powers,
        queries,
    ))
}

/// Point scenario, its oracle after the search, and the search outcome.
type PointSearch<T> = (Scenario<T>, SimulatedOracle<T>, SearchResult<T>);

fn search_at<T: RisFloat>(
    scenario: &Scenario<T>,
    p: &SweepPoint<T>,
    algo: &AlgorithmSpec,
    opts: &RunOptions<T>,
) -> Result<PointSearch<T>, HarnessError> {
    let s = point_scenario(scenario, p, opts.seed);
    let mut oracle = SimulatedOracle::new(&s).map_err(oracle_err)?;
    let result = if opts.repeats > 1 {
        let mut avg = AveragingOracle::new(&mut oracle, opts.repeats);
        run_search(&mut avg, &s, algo, &opts.grid)?
    } else {
        run_search(&mut oracle, &s, algo, &opts.grid)?
    };
    Ok((s, oracle, result))
}

/// Configures and measures every sweep point.
///
/// Each point gets its own oracle seeded from `opts.seed` and the point number,
/// so records do not depend on evaluation order.
pub fn run_scenario<T: RisFloat>(
    scenario: &Scenario<T>,
    algo: &AlgorithmSpec,
    sweep: &SweepSpec,
    opts: &RunOptions<T>,
) -> Result<ExperimentReport, HarnessError> {
    if opts.repeats == 0 {
        return Err(HarnessError::Config("repeats must be >= 1".into()));
    }
    let points = sweep.points(scenario)?;
    let records = match algo {
        AlgorithmSpec::Fixed { point, inner } => {
            let at = points.get(point - 1).ok_or_else(|| {
                HarnessError::Config(format!("algorithm: fixed point {point} outside sweep of {} points", points.len()))
            })?;
            let (_, _, result) = search_at(scenario, at, inner, opts)?;
            points
                .par_iter()
                .map(|p| {
                    let q = if p.index == at.index { result.query_count } else { 0 };
                    evaluate(scenario, p, opts.seed, &result.best_profile, opts.repeats, q)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => points
            .iter()
            .map(|p| {
                let (s, mut oracle, result) = search_at(scenario, p, algo, opts)?;
                evaluate_with(&s, &mut oracle, p, &result.best_profile, opts.repeats, result.query_count)
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(ExperimentReport {
        scenario: scenario.id.clone(),
        algorithm: algo.to_string(),
        sweep: sweep.to_string(),
        seed: opts.seed,
        version: VERSION.to_string(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub mean_gain_db: f64,
    pub mean_gain_vs_absent_db: f64,
    pub queries_per_point: u64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub sweep: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, algorithm: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("algorithm,mean_gain_db,mean_gain_vs_absent_db,queries_per_point,points\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.4},{:.4},{},{}",
                r.algorithm, r.mean_gain_db, r.mean_gain_vs_absent_db, r.queries_per_point, r.points
            )
            .expect("write to string");
        }
        s
    }
}

/// DFT codebook, angle-based 2-D codebook and two-step search over the same sweep.
pub fn compare_algorithms<T: RisFloat>(
    scenario: &Scenario<T>,
    grid: &AngleGrid<T>,
    sweep: &SweepSpec,
    seeds: &[u64],
    dft_oversampling: (usize, usize),
) -> Result<Comparison, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("compare needs at least one seed".into()));
    }
    let algos = [
        (
            "dft",
            AlgorithmSpec::Dft {
                oversampling_z: dft_oversampling.0,
                oversampling_y: dft_oversampling.1,
            },
        ),
        ("angle2d", AlgorithmSpec::Exhaustive),
        ("two-step", AlgorithmSpec::TwoStep),
    ];
    let mut rows = Vec::new();
    for (name, algo) in algos {
        let mut records = Vec::new();
        for &seed in seeds {
            let opts = RunOptions {
                grid: grid.clone(),
                seed,
                repeats: 1,
            };
            records.extend(run_scenario(scenario, &algo, sweep, &opts)?.records);
        }
        let n = records.len() as f64;
        rows.push(ComparisonRow {
            algorithm: name.to_string(),
            mean_gain_db: records.iter().map(|r| r.gain_db).sum::<f64>() / n,
            mean_gain_vs_absent_db: records.iter().map(|r| r.gain_vs_absent_db).sum::<f64>() / n,
            queries_per_point: records.first().map_or(0, |r| r.queries),
            points: records.len(),
        });
    }
    Ok(Comparison {
        scenario: scenario.id.clone(),
        sweep: sweep.to_string(),
        seeds: seeds.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternOptions {
    pub span: Span,
    /// Allowed distance between commanded and measured peak.
    pub tolerance_deg: f64,
}

impl Default for PatternOptions {
    fn default() -> Self {
        Self {
            span: Span::new(-90.0, 90.0, 0.05),
            tolerance_deg: 0.5,
        }
    }
}

/// Azimuth cuts at θ = 90° for a set of commanded steering angles.
///
/// Cuts and metrics use the bare array factor; peak gains in the summary
/// include the element factor.
#[derive(Debug, Clone)]
pub struct PatternRun<T> {
    pub commands_deg: Vec<f64>,
    pub cuts: Vec<RadiationPattern<T>>,
    pub summary: ScanSummary<T>,
}

pub fn run_pattern<T: RisFloat>(
    geom: &RisGeometry<T>,
    commands_deg: &[f64],
    opts: &PatternOptions,
) -> Result<PatternRun<T>, HarnessError> {
    if commands_deg.is_empty() {
        return Err(HarnessError::Config("angles: at least one command needed".into()));
    }
    let cfg = |e: crate::Error| HarnessError::Config(e.to_string());
    let theta = T::FRAC_PI_2();
    let cut = Cut::Azimuth { theta };
    let mut cuts = Vec::new();
    let mut points = Vec::new();
    for &cmd in commands_deg {
        let profile = steering_vector(geom, theta, T::of(cmd).rad())
            .and_then(|v| profile_from_vector(&v))
            .map_err(cfg)?;
        let bare = compute_cut(geom, &profile, cut, opts.span, &FarField::normal_incidence(false)).map_err(cfg)?;
        let with_element = compute_cut(geom, &profile, cut, opts.span, &FarField::normal_incidence(true)).map_err(cfg)?;
        let mut point = scan_point(&bare, T::of(cmd), T::of(opts.tolerance_deg));
        point.peak_magnitude_db = with_element.peak_magnitude_db();
        points.push(point);
        cuts.push(bare);
    }
    Ok(PatternRun {
        commands_deg: commands_deg.to_vec(),
        cuts,
        summary: summarize_scan(points),
    })
}

/// File-name fragment for a command angle, e.g. `-10` or `12.5`.
pub fn angle_tag(deg: f64) -> String {
    format!("{deg}")
}

impl<T: RisFloat> PatternRun<T> {
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("command_deg,peak_deg,beamwidth_3db_deg,sidelobe_db,peak_gain_db,resolvable\n");
        let opt = |v: Option<T>| v.map_or(String::from("nan"), |x| format!("{:.4}", x.as_f64()));
        for p in &self.summary.points {
            writeln!(
                s,
                "{:.4},{:.4},{},{},{:.4},{}",
                p.command_deg.as_f64(),
                p.peak_angle_deg.as_f64(),
                opt(p.metrics.map(|m| m.beamwidth_3db_deg)),
                opt(p.metrics.and_then(|m| m.sidelobe_level_db)),
                p.peak_magnitude_db.as_f64(),
                p.resolvable
            )
            .expect("write to string");
        }
        s
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Out {
            commands: usize,
            scan_range_deg: f64,
            peak_fluctuation_db: f64,
            mean_sidelobe_level_db: Option<f64>,
            version: &'static str,
        }
        let mut s = serde_json::to_string_pretty(&Out {
            commands: self.commands_deg.len(),
            scan_range_deg: self.summary.scan_range_deg.as_f64(),
            peak_fluctuation_db: self.summary.peak_fluctuation_db.as_f64(),
            mean_sidelobe_level_db: self.summary.mean_sidelobe_level_db.map(|v| v.as_f64()),
            version: VERSION,
        })
        .expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes `pattern_az<cmd>.csv` per command plus `metrics.csv` and `summary.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        for (cmd, cut) in self.commands_deg.iter().zip(&self.cuts) {
            report::write_file(&dir.join(format!("pattern_az{}.csv", angle_tag(*cmd))), &cut.to_csv())?;
        }
        report::write_file(&dir.join("metrics.csv"), &self.metrics_csv())?;
        report::write_file(&dir.join("summary.json"), &self.summary_json())
    }
}
