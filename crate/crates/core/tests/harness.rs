use std::path::PathBuf;

use risbeam_core::channel::Scenario;
use risbeam_core::harness::config::{load_geometry, load_grid, load_scenario};
use risbeam_core::harness::{
    compare_algorithms, run_pattern, run_scenario, AlgorithmSpec, HarnessError, PatternOptions, RunOptions, SweepSpec,
};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> Scenario<f64> {
    load_scenario(&root().join("scenarios").join(name)).unwrap()
}

fn run(name: &str, algo: &str, sweep: &str) -> risbeam_core::harness::ExperimentReport {
    let s = scenario(name);
    run_scenario(&s, &AlgorithmSpec::parse(algo).unwrap(), &SweepSpec::parse(sweep).unwrap(), &RunOptions::new(1)).unwrap()
}

#[test]
fn canonical_sweeps_have_expected_point_counts() {
    assert_eq!(run("corridor.json", "optimal", "line:0.05,0,1:0.5,0.866025403784,0:0:20:1").records.len(), 21);
    assert_eq!(run("office.json", "optimal", "grid:0.6,-4.2,1.2:4x7:1.2").records.len(), 28);
    assert_eq!(run("outdoor.json", "optimal", "polar:1:5:0.5@30,45,60").records.len(), 27);
}

#[test]
fn configured_beats_off_beats_absent_on_blocked_links() {
    let grid = load_grid(&root().join("grids/corridor.json")).unwrap();
    for (name, sweep) in [
        ("corridor.json", "line:0.05,0,1:0.5,0.866025403784,0:0:20:1"),
        ("outdoor.json", "polar:1:5:0.5@30,45,60"),
    ] {
        let s = scenario(name);
        let opts = RunOptions {
            grid: grid.clone(),
            seed: 1,
            repeats: 1,
        };
        let rep = run_scenario(&s, &AlgorithmSpec::TwoStep, &SweepSpec::parse(sweep).unwrap(), &opts).unwrap();
        for r in &rep.records {
            assert!(r.on_dbm > r.off_dbm && r.off_dbm > r.absent_dbm, "{name} point {}", r.point);
        }
    }
}

#[test]
fn fixed_mode_is_deterministic_and_searches_once() {
    let a = run("office.json", "fixed:4", "grid:0.6,-4.2,1.2:4x7:1.2");
    let b = run("office.json", "fixed:4", "grid:0.6,-4.2,1.2:4x7:1.2");
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 28);
    assert_eq!(a.to_csv(), b.to_csv());
    let searched: Vec<usize> = a.records.iter().filter(|r| r.queries > 0).map(|r| r.point).collect();
    assert_eq!(searched, vec![4]);
}

#[test]
fn compare_reports_three_rows_with_expected_query_ratio() {
    let s = scenario("nearfield26.json");
    let grid = load_grid(&root().join("grids/nearfield26.json")).unwrap();
    let sweep = SweepSpec::parse("arc:2:30:60:5").unwrap();
    let c = compare_algorithms(&s, &grid, &sweep, &[1], (1, 1)).unwrap();
    assert_eq!(c.rows.len(), 3);
    let (q, p) = (grid.zenith_count() as u64, grid.azimuth_count() as u64);
    assert_eq!(c.row("angle2d").unwrap().queries_per_point, q * p);
    assert_eq!(c.row("two-step").unwrap().queries_per_point, 1 + q + p);
    assert_eq!(c.row("dft").unwrap().queries_per_point, 16 * 16);
    assert!(c.rows.iter().all(|r| r.points == 7));
    assert_eq!(c.to_csv().lines().count(), 4);
}

#[test]
fn pattern_run_writes_cuts_metrics_and_summary() {
    let g = load_geometry::<f64>(&root().join("geometries/ris58.json")).unwrap();
    let cmds = [-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0];
    let run = run_pattern(&g, &cmds, &PatternOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write_to(dir.path()).unwrap();
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("pattern_az"))
        .count();
    assert_eq!(csvs, 7);
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 8);
    let broadside = &run.summary.points[3];
    assert!(broadside.peak_angle_deg.abs() <= 0.2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["mean_sidelobe_level_db"].as_f64().unwrap() < -10.0);
}

#[test]
fn unknown_scenario_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("scenarios/office.json")).unwrap()).unwrap();
    v["colour"] = serde_json::json!("blue");
    std::fs::write(&path, v.to_string()).unwrap();
    let err = load_scenario::<f64>(&path).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert!(err.to_string().contains("colour"), "{err}");
    assert_eq!(err.exit_code(), 2);
}
