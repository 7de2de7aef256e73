//! `risbeam`: command-line front end for the beamforming toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use risbeam_core::channel::Scenario;
use risbeam_core::codebook::AngleGrid;
use risbeam_core::harness::config::{load_geometry, load_grid, load_scenario};
use risbeam_core::harness::report::write_file;
use risbeam_core::harness::{
    compare_algorithms, run_pattern, run_scenario, run_search, AlgorithmSpec, HarnessError, PatternOptions,
    RunOptions, SweepSpec, VERSION,
};
use risbeam_core::packing::{pack_hex, to_row_major};
use risbeam_core::pattern::Span;
use risbeam_core::protocol::{serve, RemoteOracle};
use risbeam_core::search::{trace_csv, SearchResult};
use serde_json::json;

/// Exit code for a failed `--check`.
const CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "risbeam", version, about = "RIS beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Azimuth radiation cuts for a set of commanded steering angles.
    Pattern(PatternArgs),
    /// One beam search at the scenario's receiver position.
    Search(SearchArgs),
    /// Sweep the receiver and record optimized, RIS-off and no-RIS powers.
    Scenario(ScenarioArgs),
    /// DFT, angle-based 2-D and two-step codebooks over one sweep.
    Compare(CompareArgs),
    /// Serve a scenario as a remote power oracle.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Noise seed; defaults to the scenario's rng_seed.
    #[arg(long, env = "RISBEAM_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long)]
    geom: PathBuf,
    /// Commanded azimuths in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    angles: Vec<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Cut sample spacing in degrees.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Peak-to-command tolerance in degrees.
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    /// Exit 4 unless every command is resolvable and peak gains vary by at most --max-fluctuation.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 3.0)]
    max_fluctuation: f64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "two-step")]
    algo: String,
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Query a `risbeam serve` instance instead of simulating locally.
    #[arg(long)]
    remote: Option<String>,
    #[command(flatten)]
    seed: SeedArg,
    /// Write trace.csv and result.json here instead of printing the trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value = "here")]
    sweep: String,
    #[arg(long, default_value = "two-step")]
    algo: String,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
    /// Readings averaged per query.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Exit 4 if any record's gain falls below --min-gain.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    min_gain: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "arc:2:30:60:5")]
    sweep: String,
    /// Seeds to average over; defaults to the single resolved seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[command(flatten)]
    seed: SeedArg,
    /// DFT oversampling as OZ,OY.
    #[arg(long, default_value = "1,1")]
    dft: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 4 unless angle2d >= dft and two-step is within --tolerance of angle2d.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[command(flatten)]
    seed: SeedArg,
}

enum Failure {
    Harness(HarnessError),
    Check(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Harness(e)
    }
}

type CmdResult = Result<(), Failure>;

fn config(msg: impl Into<String>) -> Failure {
    Failure::Harness(HarnessError::Config(msg.into()))
}

fn scenario_with_seed(path: &Path, seed: &SeedArg) -> Result<Scenario<f64>, HarnessError> {
    let mut s: Scenario<f64> = load_scenario(path)?;
    if let Some(seed) = seed.seed {
        s.rng_seed = seed;
    }
    Ok(s)
}

fn grid_or_default(path: &Option<PathBuf>) -> Result<AngleGrid<f64>, HarnessError> {
    match path {
        Some(p) => load_grid(p),
        None => Ok(AngleGrid::default_grid()),
    }
}

fn cmd_pattern(a: PatternArgs) -> CmdResult {
    let geom = load_geometry::<f64>(&a.geom)?;
    if !(a.step > 0.0 && a.step <= 0.1) {
        return Err(config("step: must lie in (0, 0.1] degrees"));
    }
    let opts = PatternOptions {
        span: Span::new(-90.0, 90.0, a.step),
        tolerance_deg: a.tolerance,
    };
    let run = run_pattern(&geom, &a.angles, &opts)?;
    run.write_to(&a.out)?;
    print!("{}", run.metrics_csv());
    let s = &run.summary;
    println!(
        "scan_range_deg={:.4} peak_fluctuation_db={:.4} mean_sidelobe_db={}",
        s.scan_range_deg,
        s.peak_fluctuation_db,
        s.mean_sidelobe_level_db.map_or("nan".into(), |v| format!("{v:.4}"))
    );
    if a.check {
        let unresolved: Vec<String> = s
            .points
            .iter()
            .filter(|p| !p.resolvable)
            .map(|p| p.command_deg.to_string())
            .collect();
        if !unresolved.is_empty() {
            return Err(Failure::Check(format!("unresolved commands: {}", unresolved.join(","))));
        }
        if s.peak_fluctuation_db > a.max_fluctuation {
            return Err(Failure::Check(format!(
                "peak fluctuation {:.4} dB exceeds {} dB",
                s.peak_fluctuation_db, a.max_fluctuation
            )));
        }
    }
    Ok(())
}

fn result_json(s: &Scenario<f64>, algo: &AlgorithmSpec, r: &SearchResult<f64>, seed: u64) -> String {
    let g = s.geometry();
    let states = s.phase_states();
    let profile = match (states.bits(), r.best_profile.state_indices(states)) {
        (Some(bits), Ok(idx)) => json!({ "encoding": "hex", "bits": bits, "payload": pack_hex(&to_row_major(&idx, g.rows_z, g.cols_y), bits) }),
        _ => json!({ "encoding": "phase", "payload": to_row_major(&r.best_profile.phases(), g.rows_z, g.cols_y) }),
    };
    let mut out = serde_json::to_string_pretty(&json!({
        "scenario": s.id,
        "algorithm": algo.to_string(),
        "seed": seed,
        "version": VERSION,
        "best_power_dbm": format!("{:.4}", r.best_power_dbm),
        "best_index": r.best_index,
        "best_label": r.trace.get(r.best_index).map(|t| t.label.clone()),
        "query_count": r.query_count,
        "selected_angles_deg": r.selected_angles.map(|(t, p)| [format!("{:.4}", t.to_degrees()), format!("{:.4}", p.to_degrees())]),
        "best_profile": profile,
    }))
    .expect("result serializes");
    out.push('\n');
    out
}

fn cmd_search(a: SearchArgs) -> CmdResult {
    let s = scenario_with_seed(&a.scenario, &a.seed)?;
    let algo = AlgorithmSpec::parse(&a.algo)?;
    if matches!(algo, AlgorithmSpec::Fixed { .. }) {
        return Err(config("algo: fixed applies to sweeps only"));
    }
    let grid = grid_or_default(&a.grid)?;
    let oracle_err = |e: &dyn std::fmt::Display| Failure::Harness(HarnessError::Oracle(e.to_string()));
    let result = match &a.remote {
        Some(addr) => {
            let mut remote = RemoteOracle::connect(addr.as_str())
                .map_err(|e| oracle_err(&e))?
                .with_states(s.phase_states().clone());
            if a.seed.seed.is_some() {
                remote.reset(s.rng_seed).map_err(|e| oracle_err(&e))?;
            }
            run_search(&mut remote, &s, &algo, &grid)
        }
        None => {
            let mut oracle = risbeam_core::channel::SimulatedOracle::new(&s).map_err(|e| oracle_err(&e))?;
            run_search(&mut oracle, &s, &algo, &grid)
        }
    };
    let result = result.map_err(|e| {
        if !e.trace.is_empty() {
            eprint!("{}", trace_csv(&e.trace));
        }
        oracle_err(&e)
    })?;
    let trace = trace_csv(&result.trace);
    match &a.out {
        Some(dir) => {
            write_file(&dir.join("trace.csv"), &trace)?;
            write_file(&dir.join("result.json"), &result_json(&s, &algo, &result, s.rng_seed))?;
            println!(
                "best {:.4} dBm at query {} after {} queries",
                result.best_power_dbm, result.best_index, result.query_count
            );
        }
        None => print!("{trace}"),
    }
    Ok(())
}

fn cmd_scenario(a: ScenarioArgs) -> CmdResult {
    let s = scenario_with_seed(&a.file, &a.seed)?;
    let algo = AlgorithmSpec::parse(&a.algo)?;
    let sweep = SweepSpec::parse(&a.sweep)?;
    let opts = RunOptions {
        grid: grid_or_default(&a.grid)?,
        seed: s.rng_seed,
        repeats: a.repeats,
    };
    let report = run_scenario(&s, &algo, &sweep, &opts)?;
    report.write_to(&a.out)?;
    let sum = report.summary();
    println!(
        "{} records: gain mean {:.4} dB, min {:.4} dB, max {:.4} dB; vs no RIS mean {:.4} dB; {} queries",
        report.records.len(),
        sum.mean_gain_db,
        sum.min_gain_db,
        sum.max_gain_db,
        sum.mean_gain_vs_absent_db,
        sum.total_queries
    );
    if a.check {
        let low: Vec<String> = report
            .records
            .iter()
            .filter(|r| !(r.gain_db >= a.min_gain))
            .map(|r| r.point.to_string())
            .collect();
        if !low.is_empty() {
            return Err(Failure::Check(format!(
                "gain below {} dB at points {}",
                a.min_gain,
                low.join(",")
            )));
        }
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CmdResult {
    let s = scenario_with_seed(&a.scenario, &a.seed)?;
    let grid = grid_or_default(&a.grid)?;
    let sweep = SweepSpec::parse(&a.sweep)?;
    let dft = a
        .dft
        .split_once(',')
        .and_then(|(z, y)| Some((z.parse::<usize>().ok()?, y.parse::<usize>().ok()?)))
        .filter(|&(z, y)| z > 0 && y > 0)
        .ok_or_else(|| config("dft: expected two positive integers OZ,OY"))?;
    let seeds = if a.seeds.is_empty() { vec![s.rng_seed] } else { a.seeds };
    let cmp = compare_algorithms(&s, &grid, &sweep, &seeds, dft)?;
    let csv = cmp.to_csv();
    if let Some(dir) = &a.out {
        write_file(&dir.join("compare.csv"), &csv)?;
    }
    print!("{csv}");
    if a.check {
        let g = |n: &str| cmp.row(n).map_or(f64::NAN, |r| r.mean_gain_db);
        let (dft, angle, two) = (g("dft"), g("angle2d"), g("two-step"));
        if !(angle >= dft) {
            return Err(Failure::Check(format!("angle2d {angle:.4} dB below dft {dft:.4} dB")));
        }
        if !((two - angle).abs() <= a.tolerance) {
            return Err(Failure::Check(format!(
                "two-step {two:.4} dB not within {} dB of angle2d {angle:.4} dB",
                a.tolerance
            )));
        }
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> CmdResult {
    let s = scenario_with_seed(&a.scenario, &a.seed)?;
    let handle = serve(&s, a.listen.as_str()).map_err(|e| Failure::Harness(HarnessError::Io(format!("{}: {e}", a.listen))))?;
    println!("listening on {}", handle.local_addr());
    handle.wait();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pattern(a) => cmd_pattern(a),
        Command::Search(a) => cmd_search(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Harness(e)) => {
            eprintln!("risbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("risbeam: check failed: {msg}");
            ExitCode::from(CHECK_FAILED)
        }
    }
}
