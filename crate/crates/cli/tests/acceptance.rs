//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout:
//! `cargo test -p risbeam --test acceptance`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risbeam_core::channel::{
    los_scenario, optimal_phase_profile, received_power, Scenario, SimulatedOracle, SPEED_OF_LIGHT,
};
use risbeam_core::codebook::{build_angle_codebook, build_y_codebook, compose_second_stage, AngleGrid};
use risbeam_core::geometry::{
    kronecker_compose, steering_vector, steering_vector_y, steering_vector_z, PhaseProfile, PhaseStateSet,
    RisGeometry,
};
use risbeam_core::harness::config::{load_geometry, load_grid, load_scenario};
use risbeam_core::harness::{compare_algorithms, run_pattern, run_scenario, AlgorithmSpec, PatternOptions, RunOptions, SweepSpec};
use risbeam_core::oracle::PowerOracle;
use risbeam_core::pattern::{compute_cut, extract_metrics, Cut, FarField, Span};
use risbeam_core::protocol::{serve, RemoteOracle};
use risbeam_core::search::{exhaustive_search, greedy_search, two_step_search, Group, SearchResult};

/// Criteria that fail under the model as specified; each is explained in its detail line.
const KNOWN_FAILURES: &[u32] = &[5];

const CORRIDOR_SWEEP: &str = "line:0.05,0,1:0.5,0.866025403784,0:0:20:1";
const OUTDOOR_SWEEP: &str = "polar:1:5:0.5@30,45,60";
const NEARFIELD_SWEEP: &str = "arc:2:30:60:5";
const COMMERCIAL_SWEEP: &str = "arc:3:20:60:5";

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> Scenario<f64> {
    load_scenario(&root().join("scenarios").join(format!("{name}.json"))).unwrap()
}

fn grid(name: &str) -> AngleGrid<f64> {
    load_grid(&root().join("grids").join(format!("{name}.json"))).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn lambda58() -> f64 {
    SPEED_OF_LIGHT / 5.8e9
}

fn criterion_1() -> Outcome {
    let g = RisGeometry::half_wavelength(4, 6, lambda58()).unwrap();
    let s = los_scenario(g, PhaseStateSet::continuous(), 5.8e9, 50.0, (1.4, 0.3), 40.0).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (q, p) in [(1usize, 1usize), (7, 9), (41, 81)] {
        let grid = AngleGrid::from_degrees((50.0, 50.0 + 2.0 * (q as f64 - 1.0), 2.0), (-80.0, -80.0 + 2.0 * (p as f64 - 1.0), 2.0)).unwrap();
        assert_eq!((grid.zenith_count(), grid.azimuth_count()), (q, p));
        let mut o = SimulatedOracle::new(&s).unwrap();
        let ts = two_step_search(&mut o, &g, &grid, s.phase_states()).unwrap();
        let ts_ok = ts.query_count == (1 + q + p) as u64 && o.query_count() == ts.query_count;
        let cb = build_angle_codebook(&g, &grid, None).unwrap();
        let mut o = SimulatedOracle::new(&s).unwrap();
        let ex = exhaustive_search(&mut o, &cb, s.phase_states()).unwrap();
        let ex_ok = ex.query_count == (p * q) as u64 && o.query_count() == ex.query_count;
        pass &= ts_ok && ex_ok;
        lines.push(format!("(q={q},p={p}) two-step {} exhaustive {}", ts.query_count, ex.query_count));
    }
    outcome(pass, lines.join("; "))
}

fn criterion_2() -> Outcome {
    let g = RisGeometry::half_wavelength(20, 55, lambda58()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = rng.random_range(0.05..std::f64::consts::PI - 0.05);
        let phi = rng.random_range(-1.5..1.5);
        let full = steering_vector(&g, theta, phi).unwrap();
        let kron = kronecker_compose(&g, &steering_vector_y(&g, theta, phi).unwrap(), &steering_vector_z(&g, theta).unwrap()).unwrap();
        for (a, b) in full.entries().iter().zip(kron.entries()) {
            worst = worst.max((a - b).norm());
        }
    }
    let grid = AngleGrid::<f64>::default_grid();
    let angle2d = build_angle_codebook(&g, &grid, None).unwrap();
    let p = grid.azimuth_count();
    let mut worst_cb: f64 = 0.0;
    for (qi, &theta) in grid.zeniths().iter().enumerate().step_by(8) {
        let fy = build_y_codebook(&g, theta, grid.azimuths()).unwrap();
        let composed = compose_second_stage(&fy, &steering_vector_z(&g, theta).unwrap()).unwrap();
        for (j, cw) in composed.codewords().iter().enumerate() {
            let reference = &angle2d.codewords()[qi * p + j];
            for (a, b) in cw.entries.iter().zip(&reference.entries) {
                worst_cb = worst_cb.max((a - b).norm());
            }
        }
    }
    outcome(
        worst <= 1e-12 && worst_cb <= 1e-12,
        format!("max |a - a_y kron a_z| = {worst:.2e} over 100 angles; max composed vs angle2d = {worst_cb:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let g = RisGeometry::half_wavelength(8, 8, lambda58()).unwrap();
    let grid = AngleGrid::<f64>::default_grid();
    let cb = build_angle_codebook(&g, &grid, None).unwrap();
    let states = PhaseStateSet::continuous();
    let mut gaps = Vec::new();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = grid.zeniths()[rng.random_range(0..grid.zenith_count())];
        let phi = grid.azimuths()[rng.random_range(0..grid.azimuth_count())];
        let tx = rng.random_range(20.0..200.0);
        let rx = rng.random_range(20.0..200.0);
        let s = los_scenario(g, states.clone(), 5.8e9, tx, (theta, phi), rx).unwrap();
        let mut o = SimulatedOracle::new(&s).unwrap();
        let ts = two_step_search(&mut o, &g, &grid, &states).unwrap();
        let mut o = SimulatedOracle::new(&s).unwrap();
        let ex = exhaustive_search(&mut o, &cb, &states).unwrap();
        gaps.push(ex.best_power_dbm - ts.best_power_dbm);
    }
    let within = gaps.iter().filter(|&&d| d <= 1.5).count() as f64 / gaps.len() as f64;
    let mean_gap = mean(gaps.iter().copied());
    let secs = start.elapsed().as_secs_f64();
    outcome(
        within >= 0.95 && mean_gap <= 0.5 && secs < 30.0,
        format!(
            "{:.1}% within 1.5 dB, mean gap {mean_gap:.4} dB, max gap {:.4} dB, {secs:.1} s (reference: 11.5 vs 11.7 dB measured)",
            100.0 * within,
            gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        ),
    )
}

fn criterion_4() -> Outcome {
    let s = scenario("nearfield26");
    let sweep = SweepSpec::parse(NEARFIELD_SWEEP).unwrap();
    let cmp = compare_algorithms(&s, &grid("nearfield26"), &sweep, &[s.rng_seed], (1, 1)).unwrap();
    let g = |n: &str| cmp.row(n).unwrap().mean_gain_db;
    let (dft, angle, two) = (g("dft"), g("angle2d"), g("two-step"));
    let wide = compare_algorithms(&s, &AngleGrid::default_grid(), &sweep, &[s.rng_seed], (1, 1)).unwrap();
    outcome(
        angle >= dft && (two - angle).abs() <= 0.5,
        format!(
            "dft {dft:.2} dB, angle2d {angle:.2} dB, two-step {two:.2} dB (reference 10.5/11.7/11.5); with the default 41x81 grid: angle2d {:.2}, two-step {:.2}",
            wide.row("angle2d").unwrap().mean_gain_db,
            wide.row("two-step").unwrap().mean_gain_db
        ),
    )
}

fn criterion_5() -> Outcome {
    let g: RisGeometry<f64> = load_geometry(&root().join("geometries/ris58.json")).unwrap();
    let opts = PatternOptions::default();
    let commands: Vec<f64> = (0..=6).map(|i| 10.0 * i as f64).collect();
    let run = run_pattern(&g, &commands, &opts).unwrap();
    let worst_peak = run
        .summary
        .points
        .iter()
        .map(|p| (p.peak_angle_deg - p.command_deg).abs())
        .fold(0.0, f64::max);
    let fluctuation = run.summary.peak_fluctuation_db;
    let extremes = run_pattern(&g, &[-80.0, 80.0], &opts).unwrap();
    let resolvable = extremes.summary.points.iter().all(|p| p.resolvable);
    let range = extremes.summary.scan_range_deg;
    outcome(
        worst_peak <= 0.5 && fluctuation <= 3.0 && resolvable && range >= 160.0,
        format!(
            "max peak error {worst_peak:.3} deg; peak fluctuation {fluctuation:.4} dB (band 3 dB, reference 2 dB; the sqrt(cos) element factor alone costs 3.01 dB at 60 deg); scan range {range:.0} deg, extremes resolvable: {resolvable}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let g: RisGeometry<f64> = load_geometry(&root().join("geometries/ris58.json")).unwrap();
    let cut = Cut::Azimuth {
        theta: std::f64::consts::FRAC_PI_2,
    };
    let span = Span::new(-90.0, 90.0, 0.01);
    let far = FarField::normal_incidence(false);
    let ones = |g: RisGeometry<f64>| PhaseProfile::uniform(g, num_complex::Complex::new(1.0, 0.0)).unwrap();
    let bw = extract_metrics(&compute_cut(&g, &ones(g), cut, span, &far).unwrap()).unwrap().beamwidth_3db_deg;
    let ula = RisGeometry::half_wavelength(1, 55, lambda58()).unwrap();
    let m = extract_metrics(&compute_cut(&ula, &ones(ula), cut, span, &far).unwrap()).unwrap();
    let classical = (0.886 * ula.wavelength / (55.0 * ula.spacing_y)).to_degrees();
    let rel = (m.beamwidth_3db_deg - classical).abs() / classical;
    let sll = m.sidelobe_level_db.unwrap_or(0.0);
    outcome(
        (1.5..=7.0).contains(&bw) && rel <= 0.05 && (sll + 13.2).abs() <= 0.5,
        format!(
            "20x55 broadside beamwidth {bw:.3} deg (measured hardware 5.2 deg); ULA-55 {:.3} deg vs 0.886 lambda/(N d) = {classical:.3} deg ({:.2}%), first sidelobe {sll:.2} dB",
            m.beamwidth_3db_deg,
            100.0 * rel
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (rows, cols) in [(2usize, 2usize), (8, 8), (20, 55)] {
        let g = RisGeometry::half_wavelength(rows, cols, lambda58()).unwrap();
        let mut s = los_scenario(g, PhaseStateSet::continuous(), 5.8e9, 1e6, (std::f64::consts::FRAC_PI_2, 0.0), 1e6).unwrap();
        s.tx_power_dbm = 300.0;
        let all = received_power(&s, &optimal_phase_profile(&s).unwrap()).unwrap();
        let mut single = PhaseProfile::uniform(g, num_complex::Complex::new(0.0, 0.0)).unwrap();
        single.set(0, 0, optimal_phase_profile(&s).unwrap().get(0, 0)).unwrap();
        let one = received_power(&s, &single).unwrap();
        let l = (rows * cols) as f64;
        let err = (all - one - 20.0 * l.log10()).abs();
        pass &= err <= 1e-9;
        lines.push(format!("L={}: {:.6} dB (error {err:.1e})", rows * cols, all - one));
    }
    outcome(pass, lines.join("; "))
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn criterion_8() -> Outcome {
    let s = scenario("corridor");
    assert_eq!(s.noise_sigma_db, 0.0);
    let g = *s.geometry();
    let states = s.phase_states().clone();
    let mut o = SimulatedOracle::new(&s).unwrap();
    let ts = two_step_search(&mut o, &g, &grid("corridor"), &states).unwrap();
    let run = |group| -> SearchResult<f64> {
        let mut o = SimulatedOracle::new(&s).unwrap();
        greedy_search(&mut o, &g, &states, 2, group).unwrap()
    };
    let (el, col) = (run(Group::Element), run(Group::Column));
    let d_el = el.best_power_dbm - ts.best_power_dbm;
    let d_col = col.best_power_dbm - ts.best_power_dbm;
    let first_sweep_el = el.accepted_powers.get(g.len() - 1).copied().unwrap_or(f64::NAN);
    outcome(
        d_el.abs() <= 1.0 && d_col.abs() <= 1.0 && nondecreasing(&el.accepted_powers) && nondecreasing(&col.accepted_powers),
        format!(
            "two-step {:.3} dBm ({} queries); greedy element {:.3} dBm ({:+.3} dB, {} queries, {:.3} dBm after sweep 1); greedy column {:.3} dBm ({:+.3} dB, {} queries); accepted traces non-decreasing",
            ts.best_power_dbm, ts.query_count, el.best_power_dbm, d_el, el.query_count, first_sweep_el, col.best_power_dbm, d_col, col.query_count
        ),
    )
}

fn criterion_9() -> Outcome {
    let corridor = scenario("corridor");
    let opts = RunOptions {
        grid: grid("corridor"),
        seed: corridor.rng_seed,
        repeats: 1,
    };
    let rep = run_scenario(&corridor, &AlgorithmSpec::TwoStep, &SweepSpec::parse(CORRIDOR_SWEEP).unwrap(), &opts).unwrap();
    let checked: Vec<f64> = rep.records.iter().filter(|r| r.param >= 1.0).map(|r| r.gain_db).collect();
    let (lo, hi) = checked.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let corridor_ok = rep.records.len() == 21 && checked.len() == 20 && lo >= 6.0;

    let outdoor = scenario("outdoor");
    let rep = run_scenario(&outdoor, &AlgorithmSpec::TwoStep, &SweepSpec::parse(OUTDOOR_SWEEP).unwrap(), &RunOptions::new(outdoor.rng_seed)).unwrap();
    let by_angle: Vec<Vec<f64>> = rep.records.chunks(9).map(|c| c.iter().map(|r| r.gain_vs_absent_db).collect()).collect();
    let means: Vec<f64> = by_angle.iter().map(|v| mean(v.iter().copied())).collect();
    let wins = (0..9).filter(|&i| by_angle[1][i] > by_angle[0][i] && by_angle[1][i] > by_angle[2][i]).count();
    let outdoor_ok = rep.records.len() == 27 && means[1] > means[0] && means[1] > means[2];
    outcome(
        corridor_ok && outdoor_ok,
        format!(
            "corridor gain over RIS-off {lo:.1}..{hi:.1} dB at 1-20 m (reference 6-20 dB); outdoor mean gain over no RIS 30/45/60 deg = {:.1}/{:.1}/{:.1} dB (reference 37.3/41.2/37.3), 45 deg highest at {wins}/9 distances",
            means[0], means[1], means[2]
        ),
    )
}

fn criterion_10() -> Outcome {
    let s = scenario("commercial26");
    let sweep = SweepSpec::parse(COMMERCIAL_SWEEP).unwrap();
    let opts = RunOptions::new(s.rng_seed);
    let gain = |s: &Scenario<f64>| mean(run_scenario(s, &AlgorithmSpec::TwoStep, &sweep, &opts).unwrap().records.iter().map(|r| r.gain_db));
    let directional = gain(&s);
    let omni = gain(&s.with_isotropic_antennas());
    outcome(
        directional > omni,
        format!(
            "mean RIS gain directional {directional:.2} dB vs isotropic {omni:.2} dB, margin {:.2} dB (reference about 15 vs 4 dB)",
            directional - omni
        ),
    )
}

fn criterion_11() -> Outcome {
    let s = scenario("nearfield26");
    assert_eq!(s.noise_sigma_db, 0.0);
    let grid = AngleGrid::default_grid();
    let server = serve(&s, "127.0.0.1:0").unwrap();
    let addr = server.local_addr();

    let mut local = SimulatedOracle::new(&s).unwrap().with_readout_decimals(4);
    let expected = two_step_search(&mut local, s.geometry(), &grid, s.phase_states()).unwrap();
    let start = Instant::now();
    let mut remote = RemoteOracle::<f64>::connect(addr).unwrap().with_states(s.phase_states().clone());
    let got = two_step_search(&mut remote, s.geometry(), &grid, s.phase_states()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let identical = expected.trace.len() == got.trace.len()
        && expected
            .trace
            .iter()
            .zip(&got.trace)
            .all(|(a, b)| a.label == b.label && a.power_dbm.to_bits() == b.power_dbm.to_bits());
    let remote_count = remote.remote_count().unwrap();
    drop(remote);

    let stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lines: Vec<Vec<u8>> = (0..1000)
        .map(|_| {
            let n = rng.random_range(0..300);
            (0..n).map(|_| loop {
                let b: u8 = rng.random();
                if b != b'\n' {
                    break b;
                }
            })
            .collect()
        })
        .collect();
    for fixed in ["", "SET", "SET 1bit", "SET 1bit XYZ", "SET 1bit FF", "SET phase 1,,2", "SET phase nan", "SET qbit 00", "RESET", "RESET -1", "RESET 18446744073709551616", "GET-COUNT 1", "get-count", " GET-COUNT"] {
        lines.push(fixed.as_bytes().to_vec());
    }
    lines.push(vec![b'A'; 70_000]);
    let mut errs = 0;
    let mut silent = 0;
    for line in &lines {
        writer.write_all(line).unwrap();
        writer.write_all(b"\n").unwrap();
        let mut resp = String::new();
        match reader.read_line(&mut resp) {
            Ok(n) if n > 0 => {
                if resp.starts_with("ERR ") {
                    errs += 1;
                }
            }
            _ => silent += 1,
        }
    }
    drop(writer);
    drop(reader);
    server.shutdown();
    outcome(
        identical && errs == lines.len() && silent == 0 && remote_count == got.query_count,
        format!(
            "{} queries over loopback in {secs:.3} s, trace bit-identical: {identical}; {errs}/{} malformed lines answered with ERR, {silent} silent",
            got.query_count,
            lines.len()
        ),
    )
}

fn cli(args: &[&str], seed_env: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_risbeam"));
    cmd.args(args).current_dir(root()).env_remove("RISBEAM_SEED");
    if let Some(s) = seed_env {
        cmd.env("RISBEAM_SEED", s);
    }
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn same_files(a: &Path, b: &Path) -> bool {
    let names = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    let (na, nb) = (names(a), names(b));
    !na.is_empty() && na == nb && na.iter().all(|n| std::fs::read(a.join(n)).unwrap() == std::fs::read(b.join(n)).unwrap())
}

fn criterion_12() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [(&str, Vec<&str>, Option<&str>); 5] = [
        ("scenario", vec!["scenario", "--file", "scenarios/commercial26.json", "--sweep", COMMERCIAL_SWEEP, "--seed", "7"], None),
        ("scenario-env", vec!["scenario", "--file", "scenarios/commercial26.json", "--sweep", COMMERCIAL_SWEEP], Some("7")),
        ("search", vec!["search", "--scenario", "scenarios/commercial26.json", "--algo", "greedy:1:column", "--seed", "9"], None),
        ("compare", vec!["compare", "--scenario", "scenarios/nearfield26.json", "--grid", "grids/nearfield26.json", "--seeds", "1,2"], None),
        ("pattern", vec!["pattern", "--geom", "geometries/ris58.json", "--angles", "0,30,60"], None),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, args, env) in &runs {
        let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("{name}-{i}"))).collect();
        let ok = dirs.iter().all(|d| {
            let out = d.to_str().unwrap();
            let mut a = args.clone();
            a.extend(["--out", out]);
            cli(&a, *env)
        });
        let same = ok && same_files(&dirs[0], &dirs[1]);
        pass &= same;
        detail.push(format!("{name}: {}", if same { "identical" } else { "differs" }));
    }
    let env_matches_flag = same_files(&tmp.path().join("scenario-0"), &tmp.path().join("scenario-env-0"));
    pass &= env_matches_flag;
    detail.push(format!("RISBEAM_SEED matches --seed: {env_matches_flag}"));
    outcome(pass, detail.join("; "))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "query-count theorem", criterion_1),
        (2, "Kronecker/steering coherence", criterion_2),
        (3, "two-step optimality gap", criterion_3),
        (4, "algorithm ordering", criterion_4),
        (5, "pattern steering", criterion_5),
        (6, "beamwidth band", criterion_6),
        (7, "coherent-gain law", criterion_7),
        (8, "greedy convergence", criterion_8),
        (9, "blocked-path enhancement", criterion_9),
        (10, "directional vs omni ordering", criterion_10),
        (11, "protocol transparency", criterion_11),
        (12, "determinism", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (n, title, f) in criteria {
        let o = f();
        let known = KNOWN_FAILURES.contains(&n);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} [{tag}] {title}: {}", o.detail);
        if o.pass == known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
    println!("acceptance: {} criteria, outcomes as expected", criteria.len());
}
