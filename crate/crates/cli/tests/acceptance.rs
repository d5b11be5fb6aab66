//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use plumeseek::active::{run_online, OnlineConfig};
use plumeseek::baselines::{dmvw_map, gp_fit, gp_peak, Acquisition, DmvwParams, GpHyper};
use plumeseek::fluid::{diffuse, divergence, project, BoundaryMode, SimParams, Simulation};
use plumeseek::grid::{ScalarGrid, VelocityGrid};
use plumeseek::harness::{
    benchmark_speed, diffusion_from_metric, localization_error, make_synthetic_env, median, sensitivity_sweep, Dataset, EnvSpec,
    Scenario, SweepParam, WindMode, WindProtocol,
};
use plumeseek::measurement::{Measurement, MeasurementLog};
use plumeseek::ogs::{build_matrix, localize, naive_matrix, ogs_localize, CandidateGrid};
use plumeseek::wind::WindMeasurement;
use plumeseek::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_log(rng: &mut ChaCha8Rng, side: f64, probes: usize) -> MeasurementLog {
    let records = (0..probes)
        .map(|i| {
            let t = 4.0 * (i + 1) as f64;
            Measurement {
                position: Point2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)),
                time: t,
                gas: rng.gen_range(0.0..5.0),
                wind: WindMeasurement::new(t, rng.gen_range(0.0..1.5), rng.gen_range(0.0..2.0 * PI)).unwrap(),
            }
        })
        .collect();
    MeasurementLog::from_records(side, records).unwrap()
}

/// Largest per-entry relative difference and whether the argmin agrees.
fn compare(log: &MeasurementLog, params: &SimParams, grid: &CandidateGrid) -> (f64, f64, bool) {
    let fast = build_matrix(log, params, grid).unwrap();
    let slow = naive_matrix(log, params, grid).unwrap();
    let scale = slow.max();
    let (mut entry, mut norm) = (0.0f64, 0.0f64);
    for i in 0..fast.k() {
        for j in 0..fast.mn() {
            let (a, b) = (fast.get(i, j), slow.get(i, j));
            let d = (a - b).abs();
            if d > 0.0 {
                entry = entry.max(d / b.abs());
            }
            norm = norm.max(d / scale);
        }
    }
    let g = log.readings();
    let same = localize(&fast, &g, grid, None).unwrap().0.index == localize(&slow, &g, grid, None).unwrap().0.index;
    (entry, norm, same)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let grid = CandidateGrid::new(8, 8, 32.0).unwrap();
    let transport = SimParams {
        grid_cells_per_side: 32,
        domain_side: 32.0,
        ..SimParams::default()
    };
    let diffusive = SimParams {
        diffusion: diffusion_from_metric(1e-4, 32.0),
        ..transport.clone()
    };
    let (mut worst_entry, mut same) = (0.0f64, 0);
    let (mut worst_norm, mut same_diffusive) = (0.0f64, 0);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = random_log(&mut rng, 32.0, 5);
        let (e, _, s) = compare(&log, &transport, &grid);
        worst_entry = worst_entry.max(e);
        same += s as usize;
        let (_, n, s) = compare(&log, &diffusive, &grid);
        worst_norm = worst_norm.max(n);
        same_diffusive += s as usize;
    }
    let elapsed = start.elapsed();
    verdict(
        worst_entry <= 1e-6 && same == 20 && worst_norm <= 1e-6 && same_diffusive == 20 && elapsed < Duration::from_secs(60),
        format!(
            "transport: max entry rel err {worst_entry:.1e}, argmin {same}/20; diffusive: max err/max|M| {worst_norm:.1e}, argmin {same_diffusive}/20; {elapsed:.1?}"
        ),
    )
}

fn criterion_2(data: &[Dataset], sc: &Scenario) -> Verdict {
    let start = Instant::now();
    let grid = sc.grid().unwrap();
    let exact = data
        .iter()
        .filter(|d| {
            let (est, _) = ogs_localize(&d.log, &sc.params, &grid, None).unwrap();
            est.index == grid.nearest(&d.truth)
        })
        .count();
    let elapsed = start.elapsed();
    verdict(
        exact >= 19 && elapsed < Duration::from_secs(120),
        format!("0-cell error in {exact}/20; {elapsed:.1?} (plus data generation)"),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let side = 80.0;
    let params = SimParams {
        grid_cells_per_side: 80,
        domain_side: side,
        diffusion: diffusion_from_metric(6e-4, side),
        emission_rate: 20.0,
        ..SimParams::default()
    };
    let grid = CandidateGrid::new(16, 16, side).unwrap();
    let source = grid.center(grid.nearest(&Point2::new(58.0, 42.0)));
    let spec = EnvSpec {
        params: params.clone(),
        source,
        wind: WindProtocol {
            mode: WindMode::Variable,
            speed: 1.0,
            direction: PI,
            jitter: PI / 2.0,
            period: 30.0,
            seed: 1,
        },
        noise: 0.1,
        seed: 1,
    };
    // Starts on the plume (downwind, west of the source) and off it.
    let starts = [
        (10.0, 40.0),
        (20.0, 30.0),
        (30.0, 50.0),
        (40.0, 40.0),
        (70.0, 70.0),
        (70.0, 10.0),
        (10.0, 75.0),
        (75.0, 40.0),
    ];
    let mut good = Vec::new();
    for (x, y) in starts {
        let mut env = make_synthetic_env(&spec).unwrap();
        let cfg = OnlineConfig {
            init_waypoints: [Point2::new(x, y), Point2::new(x + 5.0, y)],
            max_iters: 19,
            sample_period: 20.0,
            tau: None,
        };
        let (state, _) = run_online(&mut env, &cfg, &params, &grid).unwrap();
        let cells = grid.cell_distance(grid.nearest(&state.estimate.unwrap()), grid.nearest(&source));
        if state.converged && cells <= 2 && state.log.len() <= 20 {
            good.push(state.log.len() as f64);
        }
    }
    let med = median(&good);
    let elapsed = start.elapsed();
    verdict(
        good.len() >= 6 && med <= 10.0 && elapsed < Duration::from_secs(600),
        format!("{}/8 starts converged within 2 cells, median samples {med}; {elapsed:.1?}", good.len()),
    )
}

fn criterion_4() -> Verdict {
    let sc = Scenario {
        noise: 0.1,
        wind: WindProtocol {
            mode: WindMode::Variable,
            ..WindProtocol::default()
        },
        ..Scenario::default()
    };
    let grid = sc.grid().unwrap();
    let (mut same, mut worst) = (0, 0.0f64);
    let seeds = 20;
    for seed in 0..seeds {
        let base = sc.env_spec(seed).unwrap();
        let results: Vec<_> = [1.0, 0.1, 10.0]
            .iter()
            .map(|c| {
                let mut spec = base.clone();
                spec.params.emission_rate *= c;
                let mut env = make_synthetic_env(&spec).unwrap();
                let plan = plumeseek::harness::lawnmower(64.0, 4, 4);
                let log = plumeseek::harness::collect_log(&mut env, &plan, sc.sample_period).unwrap();
                ogs_localize(&log, &sc.params, &grid, None).unwrap()
            })
            .collect();
        let (e0, m0) = &results[0];
        let mut ok = true;
        for (e, m) in &results[1..] {
            ok &= e.index == e0.index;
            for (p, q) in m.probabilities().iter().zip(m0.probabilities()) {
                worst = worst.max((p - q).abs());
            }
        }
        same += ok as usize;
    }
    verdict(
        same == seeds as usize && worst <= 1e-9,
        format!("argmin identical in {same}/{seeds} seeds, max likelihood difference {worst:.1e}"),
    )
}

fn criterion_5(data: &[Dataset], sc: &Scenario) -> Verdict {
    let grid = sc.grid().unwrap();
    let pitch = grid.pitch_x();
    let sweep = |p, v: &[f64]| sensitivity_sweep(&sc.params, p, v, data, &grid).unwrap();
    let gas = sweep(SweepParam::GasRelease, &[1.0, 10.0, 50.0, 100.0, 500.0]);
    let spread = |f: &dyn Fn(&plumeseek::harness::SweepRow) -> f64| {
        let v: Vec<f64> = gas.iter().map(f).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    let flat = spread(&|r| r.mean_error).max(spread(&|r| r.median_error));
    let dir = sweep(SweepParam::WindDirectionOffset, &[0.0, PI / 12.0, PI / 2.0]);
    let speed = sweep(SweepParam::WindSpeedScale, &[1.0, 2.0, 4.0]);
    let d: Vec<f64> = dir.iter().map(|r| r.median_error).collect();
    let s: Vec<f64> = speed.iter().map(|r| r.median_error).collect();
    let a = flat <= pitch;
    let b = d[2] >= d[1] && d[1] >= d[0];
    let c = s[2] >= s[1] && s[1] >= s[0];
    verdict(
        a && b && c,
        format!(
            "(a) gas-release spread {flat:.2} m vs pitch {pitch} m; (b) median error at 0, pi/12, pi/2: {:.2}, {:.2}, {:.2} m; (c) at 1x, 2x, 4x: {:.2}, {:.2}, {:.2} m",
            d[0], d[1], d[2], s[0], s[1], s[2]
        ),
    )
}

fn criterion_6() -> Verdict {
    let sc = Scenario {
        sample_period: 10.0,
        ..Scenario::default()
    };
    let acqs: Vec<Acquisition> = ["lcb:3", "ei"].iter().map(|s| s.parse().unwrap()).collect();
    let mut ogs_total = 0.0;
    let mut bo_total = vec![0.0; acqs.len()];
    let mut per_seed = Vec::new();
    let mut not_worse = 0;
    for seed in 0..20 {
        let row = benchmark_speed(&sc, &[64], 50, &acqs, seed).unwrap().remove(0);
        ogs_total += row.ogs_time;
        for (t, b) in bo_total.iter_mut().zip(&row.bo) {
            *t += b.total_time;
        }
        per_seed.push(row.speedup());
        not_worse += (row.ogs_error <= row.best_bo_error()) as usize;
    }
    let speedup = bo_total.iter().cloned().fold(f64::INFINITY, f64::min) / ogs_total;
    verdict(
        speedup >= 10.0 && not_worse >= 14,
        format!(
            "speedup {speedup:.1}x over 20 scenes (max over acquisitions {:.1}x, per-scene median {:.1}x); OGS error <= best BO error in {not_worse}/20",
            bo_total.iter().cloned().fold(0.0, f64::max) / ogs_total,
            median(&per_seed)
        ),
    )
}

fn criterion_7(data: &[Dataset], sc: &Scenario) -> Verdict {
    let grid = sc.grid().unwrap();
    let (mut gp_down, mut dm_down, mut vs_gp, mut vs_dm) = (0, 0, 0, 0);
    for d in data {
        let wind = sc.wind.mean_direction(d.log.last_time(), sc.params.dt);
        let (est, _) = ogs_localize(&d.log, &sc.params, &grid, None).unwrap();
        let e_ogs = localization_error(&est.location, &d.truth);
        let gp = gp_peak(&gp_fit(&d.log, GpHyper::default()).unwrap(), &grid);
        let dm = dmvw_map(&d.log, &DmvwParams::default()).unwrap().peak();
        gp_down += ((gp - d.truth).dot(&wind) > 0.0) as usize;
        dm_down += ((dm - d.truth).dot(&wind) > 0.0) as usize;
        vs_gp += (e_ogs <= localization_error(&gp, &d.truth)) as usize;
        vs_dm += (e_ogs <= localization_error(&dm, &d.truth)) as usize;
    }
    verdict(
        gp_down >= 16 && dm_down >= 16 && vs_gp >= 14 && vs_dm >= 14,
        format!("downwind peaks: GP {gp_down}/20, DM+V/W {dm_down}/20; OGS <= GP in {vs_gp}/20, <= DM+V/W in {vs_dm}/20"),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 64;
    let mut worst_ratio = f64::INFINITY;
    for mode in [BoundaryMode::Open, BoundaryMode::Closed] {
        for _ in 0..3 {
            let u = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vel = VelocityGrid::from_components(n, n, 1.0, u, v).unwrap();
            let max_abs = |d: Vec<f64>| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let before = max_abs(divergence(&vel, mode));
            let after = max_abs(divergence(&project(&vel, mode), mode));
            worst_ratio = worst_ratio.min(before / after.max(f64::MIN_POSITIVE));
        }
    }
    let values = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut g = ScalarGrid::from_values(n, n, 1.0, values).unwrap();
    let total = g.total();
    for _ in 0..50 {
        g = diffuse(&g, 0.8, 1.0, 20).unwrap();
    }
    let mass = ((g.total() - total) / total).abs();
    let params = SimParams {
        grid_cells_per_side: n,
        domain_side: n as f64,
        diffusion: 0.4,
        boundary_mode: BoundaryMode::Closed,
        ..SimParams::default()
    };
    let mut sim = Simulation::new(&params, Point2::new(32.0, 32.0)).unwrap();
    for _ in 0..60 {
        sim.step(Vector2::zeros(), true).unwrap();
    }
    let d = sim.density();
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let c = d.get(i, j);
            for o in [d.get(n - 1 - i, j), d.get(i, n - 1 - j), d.get(j, i)] {
                asym = asym.max((c - o).abs() / d.max());
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst_ratio >= 1e3 && mass <= 1e-9 && asym <= 1e-6 && elapsed < Duration::from_secs(60),
        format!(
            "divergence reduced {worst_ratio:.1e}x (min); mass drift {mass:.1e}; symmetry error {asym:.1e}; {elapsed:.1?}"
        ),
    )
}

/// Numeric content of an output file with timing columns removed.
fn numeric_content(path: &Path) -> Vec<u8> {
    let bytes = fs::read(path).unwrap();
    if path.extension().is_some_and(|e| e == "csv") {
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let keep: Vec<bool> = header.iter().map(|h| !(h.contains("time") || *h == "speedup")).collect();
        let mut out = String::new();
        for line in std::iter::once(header.join(",").as_str()).chain(lines) {
            let fields: Vec<&str> = line.split(',').collect();
            let kept: Vec<&str> = fields
                .iter()
                .enumerate()
                .filter(|(i, _)| fields.len() != keep.len() || keep[*i])
                .map(|(_, f)| *f)
                .collect();
            out.push_str(&kept.join(","));
            out.push('\n');
        }
        out.into_bytes()
    } else {
        bytes
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), numeric_content(&p));
    }
    files
}

fn criterion_9() -> Verdict {
    let tmp = std::env::temp_dir().join(format!("plumeseek-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("c.toml");
    fs::write(
        &cfg,
        "seed = 4\nseeds = [0, 1]\nnoise = 0.1\nwind_mode = \"variable\"\nbo_budget = 4\nbo_acquisitions = [\"ei\"]\n\
         speed_resolutions = [32]\nsweep_fidelity = [0.25]\nsweep_diffusion = [0.2, 0.4]\nbench_curves = true\n\
         curve_wind_modes = [\"variable\"]\ncurve_max_samples = 4\nmax_iters = 6\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    let probes = tmp.join("sim-a/probes.csv").to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("sim", vec!["simulate".into()]),
        ("loc-ogs", vec!["localize".into(), "--log".into(), probes.clone(), "--algo".into(), "ogs".into(), "--truth".into(), "30,30".into()]),
        ("loc-gp", vec!["localize".into(), "--log".into(), probes.clone(), "--algo".into(), "gp".into()]),
        ("loc-dmvw", vec!["localize".into(), "--log".into(), probes.clone(), "--algo".into(), "dmvw".into()]),
        ("loc-bo", vec!["localize".into(), "--log".into(), probes.clone(), "--algo".into(), "bo".into()]),
        ("active", vec!["active".into()]),
        ("bench", vec!["bench".into()]),
    ];
    let mut mismatches = Vec::new();
    for (name, args) in &commands {
        for run in ["a", "b"] {
            let out = tmp.join(format!("{name}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_plumeseek"))
                .env("RUST_LOG", "warn")
                .args(args)
                .args(["--config", &cfg, "--out", out.to_str().unwrap()])
                .status()
                .unwrap();
            if !matches!(status.code(), Some(0) | Some(2)) {
                mismatches.push(format!("{name} exited with {status}"));
            }
        }
        let (a, b) = (snapshot(&tmp.join(format!("{name}-a"))), snapshot(&tmp.join(format!("{name}-b"))));
        if a.is_empty() || a != b {
            mismatches.push(name.to_string());
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} commands byte-identical across two runs", commands.len())
        } else {
            format!("differences in {mismatches:?}")
        },
    )
}

fn main() {
    // `cargo test -- --list` and filters should not trigger the full suite.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let suite = Instant::now();
    let sc = Scenario::default();
    let data: Vec<Dataset> = (0..20).map(|s| sc.offline(s).unwrap()).collect();

    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 OGS-oracle equivalence", Box::new(criterion_1)),
        ("2 noise-free self-consistency", Box::new(|| criterion_2(&data, &sc))),
        ("3 noisy online convergence", Box::new(criterion_3)),
        ("4 release-rate invariance", Box::new(criterion_4)),
        ("5 sensitivity trends", Box::new(|| criterion_5(&data, &sc))),
        ("6 OGS vs BO cost", Box::new(criterion_6)),
        ("7 baseline displacement", Box::new(|| criterion_7(&data, &sc))),
        ("8 solver unit properties", Box::new(criterion_8)),
        ("9 determinism", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let v = check();
        failed += !v.pass as usize;
        println!(
            "criterion {name}: {} | {} [{:.1?}]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1?}",
        criteria.len() - failed,
        criteria.len(),
        suite.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
