use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use plumeseek::active::{run_online, Environment, OnlineConfig, ReplayEnv};
use plumeseek::baselines::{bo_localize, dmvw_map, gp_fit, gp_peak};
use plumeseek::harness::{
    benchmark_speed, collect_log, convergence_curves, lawnmower, localization_error, make_synthetic_env,
    sensitivity_sweep, CurveSettings, Dataset, SyntheticEnv,
};
use plumeseek::io::{read_flight_log, read_grid_csv, write_flight_log, write_grid_csv, write_pgm, write_scalar_grid_csv, write_scalar_grid_pgm};
use plumeseek::ogs::{ogs_localize, CandidateGrid};
use plumeseek::wind::PolarWind;
use plumeseek::Point2;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EnvKind, ExperimentConfig};
use crate::output::OutDir;

pub fn parse_point(s: &str) -> Result<Point2<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        bail!("expected \"x,y\", got {s:?}");
    }
    let x: f64 = parts[0].parse().with_context(|| format!("bad x in {s:?}"))?;
    let y: f64 = parts[1].parse().with_context(|| format!("bad y in {s:?}"))?;
    Ok(Point2::new(x, y))
}

fn synthetic_env(cfg: &ExperimentConfig) -> Result<SyntheticEnv> {
    let mut spec = cfg.scenario().env_spec(cfg.seed)?;
    if let Some(e) = cfg.env_emission_rate {
        spec.params.emission_rate = e;
    }
    Ok(make_synthetic_env(&spec)?)
}

fn write_candidate_map(out: &mut OutDir, stem: &str, grid: &CandidateGrid, values: &[f64]) -> Result<()> {
    // Candidate grids are square lattices, so one pitch describes them.
    out.write_with(&format!("{stem}.csv"), |w| Ok(write_grid_csv(w, grid.m(), grid.n(), grid.pitch_x(), values)?))?;
    out.write_with(&format!("{stem}.pgm"), |w| Ok(write_pgm(w, grid.m(), grid.n(), values)?))
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    source: [f64; 2],
    samples: usize,
    steps: usize,
    time_s: f64,
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<()> {
    let mut env = synthetic_env(cfg)?;
    let plan = lawnmower(cfg.domain_side, cfg.waypoint_rows, cfg.waypoint_cols);
    let log = collect_log(&mut env, &plan, cfg.sample_period)?;
    out.write_with("probes.csv", |w| Ok(write_flight_log(w, &log)?))?;
    let field = env.field();
    out.write_with("field.csv", |w| Ok(write_scalar_grid_csv(w, &field)?))?;
    out.write_with("field.pgm", |w| Ok(write_scalar_grid_pgm(w, &field)?))?;
    let s = env.spec().source;
    out.json(
        "summary.json",
        &SimulateSummary {
            seed: cfg.seed,
            source: [s.x, s.y],
            samples: log.len(),
            steps: env.steps(),
            time_s: log.last_time(),
        },
    )?;
    log::info!("simulated {} probes, source at ({}, {})", log.len(), s.x, s.y);
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport {
    algorithm: String,
    estimate: [f64; 2],
    candidate: usize,
    samples: usize,
    truth: Option<[f64; 2]>,
    error_m: Option<f64>,
}

#[derive(Serialize)]
struct BoRow {
    evaluation: usize,
    candidate: usize,
    x: f64,
    y: f64,
    objective: f64,
    wall_time_s: f64,
}

pub fn localize(
    cfg: &ExperimentConfig,
    log_path: &Path,
    algo: &str,
    truth: Option<Point2<f64>>,
    out: &mut OutDir,
) -> Result<()> {
    let file = File::open(log_path).with_context(|| format!("opening {}", log_path.display()))?;
    let log = read_flight_log(BufReader::new(file), cfg.domain_side)
        .with_context(|| format!("reading flight log {}", log_path.display()))?;
    let params = cfg.params();
    let grid = cfg.grid()?;
    let location = match algo {
        "ogs" => {
            let (est, map) = ogs_localize(&log, &params, &grid, cfg.tau)?;
            write_candidate_map(out, "likelihood", &grid, map.probabilities())?;
            out.write_with("distances.csv", |w| {
                writeln!(w, "candidate,x,y,distance")?;
                for (j, q) in est.q.iter().enumerate() {
                    let c = grid.center(j);
                    writeln!(w, "{j},{},{},{q}", c.x, c.y)?;
                }
                Ok(())
            })?;
            est.location
        }
        "gp" => {
            let gp = gp_fit(&log, cfg.gp())?;
            let mean: Vec<f64> = grid.centers().iter().map(|c| gp.mean(c)).collect();
            write_candidate_map(out, "posterior_mean", &grid, &mean)?;
            gp_peak(&gp, &grid)
        }
        "dmvw" => {
            let maps = dmvw_map(&log, &cfg.dmvw())?;
            out.write_with("mean.csv", |w| Ok(write_scalar_grid_csv(w, &maps.mean)?))?;
            out.write_with("mean.pgm", |w| Ok(write_scalar_grid_pgm(w, &maps.mean)?))?;
            out.write_with("variance.csv", |w| Ok(write_scalar_grid_csv(w, &maps.variance)?))?;
            maps.peak()
        }
        "bo" => {
            let acq = *cfg.acquisitions()?.first().context("bo_acquisitions is empty")?;
            let r = bo_localize(&log, &params, &grid, acq, cfg.bo_budget, cfg.seed)?;
            let rows: Vec<BoRow> = r
                .evaluations
                .iter()
                .enumerate()
                .map(|(k, e)| BoRow {
                    evaluation: k + 1,
                    candidate: e.index,
                    x: e.location.x,
                    y: e.location.y,
                    objective: e.objective,
                    wall_time_s: e.wall_time,
                })
                .collect();
            out.csv("evaluations.csv", &rows)?;
            r.location
        }
        other => bail!("unknown algorithm `{other}` (expected ogs|gp|dmvw|bo)"),
    };
    let report = EstimateReport {
        algorithm: algo.to_string(),
        estimate: [location.x, location.y],
        candidate: grid.nearest(&location),
        samples: log.len(),
        truth: truth.map(|t| [t.x, t.y]),
        error_m: truth.map(|t| localization_error(&location, &t)),
    };
    out.json("estimate.json", &report)?;
    match report.error_m {
        Some(e) => log::info!("{algo}: estimate ({}, {}), error {e} m", location.x, location.y),
        None => log::info!("{algo}: estimate ({}, {})", location.x, location.y),
    }
    Ok(())
}

#[derive(Serialize)]
struct WindRecord {
    speed: f64,
    direction: f64,
}

#[derive(Serialize)]
struct TranscriptRecord {
    iteration: usize,
    timestamp: f64,
    waypoint: [f64; 2],
    reading: f64,
    wind: WindRecord,
    estimate: [f64; 2],
    candidate: usize,
    converged: bool,
    samples: usize,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_m: Option<f64>,
}

#[derive(Serialize)]
struct MissionSummary {
    converged: bool,
    iterations: usize,
    samples: usize,
    estimate: Option<[f64; 2]>,
    truth: Option<[f64; 2]>,
    error_m: Option<f64>,
}

/// Runs the online loop; returns whether it converged.
pub fn active(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<bool> {
    let mut env: Box<dyn Environment> = match cfg.env {
        EnvKind::Synthetic => Box::new(synthetic_env(cfg)?),
        EnvKind::Replay => {
            let path = cfg.replay_field.as_ref().expect("validated");
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let field = read_grid_csv(BufReader::new(file))?.into_scalar_grid()?;
            Box::new(ReplayEnv::new(field, PolarWind::new(cfg.wind_speed, cfg.wind_direction)?)?)
        }
    };
    if (env.domain_side() - cfg.domain_side).abs() > 1e-9 * cfg.domain_side {
        bail!("environment side {} m does not match domain_side {} m", env.domain_side(), cfg.domain_side);
    }
    let truth = env.true_source();
    let online = OnlineConfig {
        init_waypoints: cfg.init_waypoints(),
        max_iters: cfg.max_iters,
        sample_period: cfg.sample_period,
        tau: cfg.tau,
    };
    let grid = cfg.grid()?;
    let mut env: &mut dyn Environment = env.as_mut();
    let (state, trajectory) = run_online(&mut env, &online, &cfg.params(), &grid)?;

    let mut lines = Vec::with_capacity(trajectory.len());
    for it in &trajectory {
        let rec = TranscriptRecord {
            iteration: it.iteration,
            timestamp: it.latest.time,
            waypoint: [it.latest.position.x, it.latest.position.y],
            reading: it.latest.gas,
            wind: WindRecord {
                speed: it.latest.wind.speed,
                direction: it.latest.wind.direction,
            },
            estimate: [it.estimate.x, it.estimate.y],
            candidate: it.index,
            converged: it.converged,
            samples: it.samples,
            steps: it.steps,
            error_m: truth.map(|t| localization_error(&it.estimate, &t)),
        };
        lines.push(serde_json::to_string(&rec)?);
        write_candidate_map(out, &format!("likelihood_{:03}", it.iteration), &grid, it.likelihood.probabilities())?;
    }
    out.write_with("transcript.jsonl", |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    out.write_with("log.csv", |w| Ok(write_flight_log(w, &state.log)?))?;
    let estimate = state.estimate;
    out.json(
        "summary.json",
        &MissionSummary {
            converged: state.converged,
            iterations: state.iterations,
            samples: state.log.len(),
            estimate: estimate.map(|e| [e.x, e.y]),
            truth: truth.map(|t| [t.x, t.y]),
            error_m: estimate.zip(truth).map(|(e, t)| localization_error(&e, &t)),
        },
    )?;
    log::info!(
        "mission {} after {} iterations, {} samples",
        if state.converged { "converged" } else { "did not converge" },
        state.iterations,
        state.log.len()
    );
    Ok(state.converged)
}

#[derive(Serialize)]
struct SweepCsvRow {
    param: &'static str,
    value: f64,
    runs: usize,
    mean_error_m: f64,
    variance_error_m2: f64,
    median_error_m: f64,
}

#[derive(Serialize)]
struct SpeedCsvRow {
    cells: usize,
    seed: u64,
    ogs_steps: usize,
    ogs_error_m: f64,
    acquisition: String,
    bo_error_m: f64,
    ogs_time_s: f64,
    bo_time_s: f64,
    bo_iteration_time_s: f64,
    speedup: f64,
}

#[derive(Serialize)]
struct CurveCsvRow {
    wind_mode: String,
    algorithm: &'static str,
    samples: usize,
    runs: usize,
    mean_error_m: f64,
    sd_error_m: f64,
}

pub fn bench(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<()> {
    let seeds = cfg.seeds();
    let scenario = cfg.scenario();
    let grid = cfg.grid()?;

    if cfg.bench_sweeps {
        let sweeps = cfg.sweeps()?;
        if !sweeps.is_empty() {
            let data = seeds
                .par_iter()
                .map(|s| scenario.offline(*s))
                .collect::<plumeseek::Result<Vec<Dataset>>>()?;
            let mut rows = Vec::new();
            for (param, values) in sweeps {
                let start = Instant::now();
                for r in sensitivity_sweep(&scenario.params, param, &values, &data, &grid)? {
                    rows.push(SweepCsvRow {
                        param: param.name(),
                        value: r.value,
                        runs: r.errors.len(),
                        mean_error_m: r.mean_error,
                        variance_error_m2: r.variance_error,
                        median_error_m: r.median_error,
                    });
                }
                log::info!("sweep {} done in {:.1?}", param.name(), start.elapsed());
            }
            out.csv("sensitivity.csv", &rows)?;
        }
    }

    if cfg.bench_speed {
        let acqs = cfg.acquisitions()?;
        let mut rows = Vec::new();
        // Sequential on purpose: concurrent runs would distort the timings.
        for &seed in &seeds {
            for r in benchmark_speed(&scenario, &cfg.speed_resolutions, cfg.bo_budget, &acqs, seed)? {
                for b in &r.bo {
                    rows.push(SpeedCsvRow {
                        cells: r.cells,
                        seed,
                        ogs_steps: r.ogs_steps,
                        ogs_error_m: r.ogs_error,
                        acquisition: b.acquisition.to_string(),
                        bo_error_m: b.error,
                        ogs_time_s: r.ogs_time,
                        bo_time_s: b.total_time,
                        bo_iteration_time_s: b.mean_iteration_time,
                        speedup: b.total_time / r.ogs_time,
                    });
                }
                log::info!("speed: {} cells, seed {seed}: {:.1}x", r.cells, r.speedup());
            }
        }
        out.csv("speed.csv", &rows)?;
    }

    if cfg.bench_curves {
        let algos = cfg.algorithms()?;
        let settings = CurveSettings {
            init_waypoints: cfg.init_waypoints(),
            max_samples: cfg.curve_max_samples,
            gp: cfg.gp(),
            dmvw: cfg.dmvw(),
        };
        let mut rows = Vec::new();
        for mode in &cfg.curve_wind_modes {
            let (_, curve) = convergence_curves(&scenario, &algos, *mode, &seeds, &settings)?;
            rows.extend(curve.into_iter().map(|r| CurveCsvRow {
                wind_mode: mode.to_string(),
                algorithm: r.algorithm.name(),
                samples: r.samples,
                runs: r.runs,
                mean_error_m: r.mean,
                sd_error_m: r.sd,
            }));
        }
        out.csv("curves.csv", &rows)?;
    }
    Ok(())
}
