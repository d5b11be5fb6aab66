//! Synthetic environments, error metrics, sweeps and benchmarks.
//!
//! The hidden world runs the same solver as the model. It is twice as wide
//! as the measurement domain with the measurement domain in the middle, so
//! plumes leave the measured area the same way they leave the model's
//! enlarged domain.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active::Environment;
use crate::baselines::{bo_localize, dmvw_map, gp_fit, gp_peak, Acquisition, DmvwParams, GpHyper};
use crate::error::{Error, Result};
use crate::fluid::{SimParams, Simulation};
use crate::grid::ScalarGrid;
use crate::measurement::{Measurement, MeasurementLog};
use crate::ogs::{build_matrix, build_matrix_with_wind, embedding_offset, localize, CandidateGrid};
use crate::wind::{WindField, WindMeasurement, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindMode {
    None,
    #[default]
    Constant,
    Variable,
}

impl std::str::FromStr for WindMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(WindMode::None),
            "constant" => Ok(WindMode::Constant),
            "variable" => Ok(WindMode::Variable),
            other => Err(Error::invalid("wind_mode", format!("`{other}` is not none|constant|variable"))),
        }
    }
}

impl fmt::Display for WindMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindMode::None => "none",
            WindMode::Constant => "constant",
            WindMode::Variable => "variable",
        })
    }
}

/// Spatially constant wind. In variable mode the direction is redrawn
/// uniformly in `direction ± jitter` at the start of every period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindProtocol {
    pub mode: WindMode,
    /// m/s.
    pub speed: f64,
    /// Radians, direction the wind blows toward.
    pub direction: f64,
    pub jitter: f64,
    /// Seconds between redraws.
    pub period: f64,
    pub seed: u64,
}

impl Default for WindProtocol {
    fn default() -> Self {
        WindProtocol {
            mode: WindMode::Constant,
            speed: 1.0,
            direction: PI,
            jitter: PI / 2.0,
            period: 30.0,
            seed: 0,
        }
    }
}

impl WindProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid("wind_speed", format!("{}", self.speed)));
        }
        if !self.direction.is_finite() || !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid("wind_direction", "not finite"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::invalid("wind_period", format!("{}", self.period)));
        }
        Ok(())
    }

    pub fn direction_at(&self, t: f64) -> f64 {
        match self.mode {
            WindMode::Variable => {
                let k = (t.max(0.0) / self.period + TIME_EPS).floor() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k);
                self.direction + rng.gen_range(-1.0..=1.0) * self.jitter
            }
            _ => self.direction,
        }
    }

    /// Direction of the average wind vector over `[0, horizon]`.
    pub fn mean_direction(&self, horizon: f64, dt: f64) -> Vector2<f64> {
        let n = ((horizon / dt) as usize).max(1);
        let sum: Vector2<f64> = (0..n).map(|k| self.wind_at(k as f64 * dt)).sum();
        if sum.norm() > 0.0 {
            sum.normalize()
        } else {
            Vector2::zeros()
        }
    }
}

impl WindField for WindProtocol {
    fn wind_at(&self, t: f64) -> Vector2<f64> {
        match self.mode {
            WindMode::None => Vector2::zeros(),
            _ => {
                let d = self.direction_at(t);
                Vector2::new(self.speed * d.cos(), self.speed * d.sin())
            }
        }
    }
}

/// Converts a diffusion rate given for a unit-square domain into m²/s for a
/// square domain of `side` meters.
pub fn diffusion_from_metric(value: f64, side: f64) -> f64 {
    value * side * side
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    /// Physics of the hidden world, expressed for the measurement domain.
    pub params: SimParams,
    /// In measurement-domain coordinates.
    pub source: Point2<f64>,
    pub wind: WindProtocol,
    /// Multiplicative noise bound.
    pub noise: f64,
    pub seed: u64,
}

/// Hidden simulator with noisy point readings.
#[derive(Debug)]
pub struct SyntheticEnv {
    spec: EnvSpec,
    sim: Simulation,
    offset: Vector2<f64>,
    rng: ChaCha8Rng,
    last_time: f64,
}

pub fn make_synthetic_env(spec: &EnvSpec) -> Result<SyntheticEnv> {
    spec.params.validate()?;
    spec.wind.validate()?;
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::invalid("noise", format!("{} is outside [0, 1]", spec.noise)));
    }
    let side = spec.params.domain_side;
    let s = spec.source;
    if !(s.x >= 0.0 && s.y >= 0.0 && s.x <= side && s.y <= side) {
        return Err(Error::OutOfDomain { x: s.x, y: s.y, side });
    }
    let offset = embedding_offset(&spec.params);
    let sim = Simulation::new(&spec.params.enlarged(), s + offset)?;
    Ok(SyntheticEnv {
        spec: spec.clone(),
        sim,
        offset,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        last_time: 0.0,
    })
}

impl SyntheticEnv {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Where the measurement domain sits inside the hidden world.
    pub fn offset(&self) -> Vector2<f64> {
        self.offset
    }

    /// Noise-free concentration at a point at the current time.
    pub fn true_reading(&self, p: &Point2<f64>) -> Result<f64> {
        self.sim.sample(&(p + self.offset))
    }

    /// The hidden field restricted to the measurement domain.
    pub fn field(&self) -> ScalarGrid {
        let n = self.spec.params.grid_cells_per_side;
        let o = (self.offset.x / self.spec.params.cell_size()).round() as usize;
        let big = self.sim.density();
        let values = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| big.get(i + o, j + o))
            .collect();
        ScalarGrid::from_raw(n, n, self.spec.params.cell_size(), values)
    }

    pub fn steps(&self) -> usize {
        self.sim.steps()
    }
}

impl Environment for SyntheticEnv {
    fn sample(&mut self, location: &Point2<f64>, time: f64) -> Result<(f64, WindMeasurement)> {
        let side = self.spec.params.domain_side;
        if !(location.x >= 0.0 && location.y >= 0.0 && location.x <= side && location.y <= side) {
            return Err(Error::OutOfDomain {
                x: location.x,
                y: location.y,
                side,
            });
        }
        if time < self.last_time {
            return Err(Error::TimeReversal {
                requested: time,
                current: self.last_time,
            });
        }
        self.last_time = time;
        self.sim.advance_to(time, &self.spec.wind)?;
        let mut value = self.true_reading(location)?;
        if self.spec.noise > 0.0 {
            let u: f64 = self.rng.gen_range(-self.spec.noise..=self.spec.noise);
            value *= 1.0 + u;
        }
        let wind = WindMeasurement::from_vector(time, self.spec.wind.wind_at(time));
        Ok((value, wind))
    }

    fn domain_side(&self) -> f64 {
        self.spec.params.domain_side
    }

    fn true_source(&self) -> Option<Point2<f64>> {
        Some(self.spec.source)
    }
}

pub fn localization_error(estimate: &Point2<f64>, truth: &Point2<f64>) -> f64 {
    (estimate - truth).norm()
}

/// Boustrophedon sweep over a `rows x cols` lattice of cell centers.
pub fn lawnmower(side: f64, rows: usize, cols: usize) -> Vec<Point2<f64>> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = (r as f64 + 0.5) * side / rows as f64;
        for c in 0..cols {
            let c = if r % 2 == 0 { c } else { cols - 1 - c };
            out.push(Point2::new((c as f64 + 0.5) * side / cols as f64, y));
        }
    }
    out
}

/// Visits `waypoints` in order, sampling at `period`, `2 * period`, ...
pub fn collect_log(env: &mut impl Environment, waypoints: &[Point2<f64>], period: f64) -> Result<MeasurementLog> {
    let mut log = MeasurementLog::new(env.domain_side())?;
    for (i, p) in waypoints.iter().enumerate() {
        let t = (i + 1) as f64 * period;
        let (gas, wind) = env.sample(p, t)?;
        log.push(Measurement {
            position: *p,
            time: t,
            gas,
            wind,
        })?;
    }
    Ok(log)
}

/// A synthetic world plus how it is observed. The model shares `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SimParams,
    pub wind: WindProtocol,
    pub noise: f64,
    /// Candidate lattice is `candidates x candidates`.
    pub candidates: usize,
    /// Fixed source; `None` draws one per seed from the upwind half.
    pub source: Option<Point2<f64>>,
    pub sample_period: f64,
    pub waypoint_rows: usize,
    pub waypoint_cols: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: SimParams {
                diffusion: diffusion_from_metric(1e-4, 64.0),
                ..SimParams::default()
            },
            wind: WindProtocol::default(),
            noise: 0.0,
            candidates: 16,
            source: None,
            sample_period: 20.0,
            waypoint_rows: 4,
            waypoint_cols: 4,
        }
    }
}

/// One offline log with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub log: MeasurementLog,
    pub truth: Point2<f64>,
}

impl Scenario {
    pub fn grid(&self) -> Result<CandidateGrid> {
        CandidateGrid::new(self.candidates, self.candidates, self.params.domain_side)
    }

    pub fn with_resolution(&self, cells: usize) -> Scenario {
        Scenario {
            params: SimParams {
                grid_cells_per_side: cells,
                ..self.params.clone()
            },
            ..self.clone()
        }
    }

    /// Candidates one lattice step away from the edges, restricted to the
    /// upwind half when there is wind.
    pub fn source_pool(&self) -> Result<Vec<usize>> {
        let grid = self.grid()?;
        let m = grid.m();
        let center = Point2::new(grid.domain_side() / 2.0, grid.domain_side() / 2.0);
        let dir = Vector2::new(self.wind.direction.cos(), self.wind.direction.sin());
        let pool: Vec<usize> = (0..grid.len())
            .filter(|&j| {
                let (a, b) = grid.cell_of(j);
                let interior = m < 3 || (a >= 1 && b >= 1 && a + 1 < m && b + 1 < grid.n());
                let upwind = self.wind.mode == WindMode::None || (grid.center(j) - center).dot(&dir) < 0.0;
                interior && upwind
            })
            .collect();
        if pool.is_empty() {
            return Err(Error::Empty("source pool"));
        }
        Ok(pool)
    }

    pub fn env_spec(&self, seed: u64) -> Result<EnvSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = match self.source {
            Some(s) => s,
            None => {
                let pool = self.source_pool()?;
                self.grid()?.center(pool[rng.gen_range(0..pool.len())])
            }
        };
        Ok(EnvSpec {
            params: self.params.clone(),
            source,
            wind: WindProtocol {
                seed: rng.gen(),
                ..self.wind
            },
            noise: self.noise,
            seed: rng.gen(),
        })
    }

    pub fn env(&self, seed: u64) -> Result<SyntheticEnv> {
        make_synthetic_env(&self.env_spec(seed)?)
    }

    /// Lawnmower flight over the scene.
    pub fn offline(&self, seed: u64) -> Result<Dataset> {
        let mut env = self.env(seed)?;
        let plan = lawnmower(self.params.domain_side, self.waypoint_rows, self.waypoint_cols);
        let log = collect_log(&mut env, &plan, self.sample_period)?;
        Ok(Dataset {
            seed,
            log,
            truth: env.spec().source,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GasRelease,
    Diffusion,
    WindSpeedScale,
    WindDirectionOffset,
    /// Model cells per square meter.
    Fidelity,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::GasRelease,
        SweepParam::Diffusion,
        SweepParam::WindSpeedScale,
        SweepParam::WindDirectionOffset,
        SweepParam::Fidelity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::GasRelease => "gas_release",
            SweepParam::Diffusion => "diffusion",
            SweepParam::WindSpeedScale => "wind_speed_scale",
            SweepParam::WindDirectionOffset => "wind_direction_offset",
            SweepParam::Fidelity => "fidelity",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub mean_error: f64,
    pub variance_error: f64,
    pub median_error: f64,
    /// One per dataset entry, in dataset order.
    pub errors: Vec<f64>,
}

/// Localizes every dataset entry with the model perturbed in one parameter.
pub fn sensitivity_sweep(
    base: &SimParams,
    param: SweepParam,
    values: &[f64],
    dataset: &[Dataset],
    grid: &CandidateGrid,
) -> Result<Vec<SweepRow>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    values
        .iter()
        .map(|&value| {
            let mut model = base.clone();
            let (mut scale, mut rotation) = (1.0, 0.0);
            match param {
                SweepParam::GasRelease => model.emission_rate = value,
                SweepParam::Diffusion => model.diffusion = value,
                SweepParam::WindSpeedScale => scale = value,
                SweepParam::WindDirectionOffset => rotation = value,
                SweepParam::Fidelity => {
                    if !(value > 0.0) {
                        return Err(Error::invalid("fidelity", format!("{value} is not positive")));
                    }
                    model.grid_cells_per_side = (base.domain_side * value.sqrt()).round() as usize;
                }
            }
            model.validate()?;
            let errors = dataset
                .par_iter()
                .map(|d| {
                    let wind = d.log.wind_series(&model)?.transformed(scale, rotation);
                    let m = build_matrix_with_wind(&d.log, &model, grid, &wind)?;
                    let (est, _) = localize(&m, &d.log.readings(), grid, None)?;
                    Ok(localization_error(&est.location, &d.truth))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_error, variance_error) = mean_var(&errors);
            Ok(SweepRow {
                param,
                value,
                mean_error,
                variance_error,
                median_error: median(&errors),
                errors,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTiming {
    pub acquisition: Acquisition,
    pub total_time: f64,
    pub mean_iteration_time: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub cells: usize,
    pub seed: u64,
    pub ogs_time: f64,
    pub ogs_steps: usize,
    pub ogs_error: f64,
    pub bo: Vec<BoTiming>,
}

impl SpeedRow {
    /// Fastest BO run over OGS.
    pub fn speedup(&self) -> f64 {
        let bo = self.bo.iter().map(|b| b.total_time).fold(f64::INFINITY, f64::min);
        bo / self.ogs_time
    }

    pub fn best_bo_error(&self) -> f64 {
        self.bo.iter().map(|b| b.error).fold(f64::INFINITY, f64::min)
    }
}

/// Times OGS against BO on the same offline log at each resolution. Runs
/// sequentially so timings do not compete for cores.
pub fn benchmark_speed(
    scenario: &Scenario,
    resolutions: &[usize],
    bo_budget: usize,
    acquisitions: &[Acquisition],
    seed: u64,
) -> Result<Vec<SpeedRow>> {
    if acquisitions.is_empty() {
        return Err(Error::Empty("acquisitions"));
    }
    resolutions
        .iter()
        .map(|&cells| {
            let sc = scenario.with_resolution(cells);
            let data = sc.offline(seed)?;
            let grid = sc.grid()?;
            let start = Instant::now();
            let m = build_matrix(&data.log, &sc.params, &grid)?;
            let (est, _) = localize(&m, &data.log.readings(), &grid, None)?;
            let ogs_time = start.elapsed().as_secs_f64();
            let bo = acquisitions
                .iter()
                .map(|&acq| {
                    let start = Instant::now();
                    let r = bo_localize(&data.log, &sc.params, &grid, acq, bo_budget, seed)?;
                    let total_time = start.elapsed().as_secs_f64();
                    Ok(BoTiming {
                        acquisition: acq,
                        total_time,
                        mean_iteration_time: total_time / r.evaluations.len() as f64,
                        error: localization_error(&r.location, &data.truth),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SpeedRow {
                cells,
                seed,
                ogs_time,
                ogs_steps: m.steps(),
                ogs_error: localization_error(&est.location, &data.truth),
                bo,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ogs")]
    Ogs,
    #[serde(rename = "gp-lcb3")]
    GpLcb3,
    #[serde(rename = "dmvw-lcb3")]
    DmvwLcb3,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ogs => "ogs",
            Algorithm::GpLcb3 => "gp-lcb3",
            Algorithm::DmvwLcb3 => "dmvw-lcb3",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Algorithm::Ogs, Algorithm::GpLcb3, Algorithm::DmvwLcb3]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid("algorithm", format!("`{s}` is not ogs|gp-lcb3|dmvw-lcb3")))
    }
}

/// Exploration weight of the baselines' upper-confidence waypoint choice.
const BASELINE_ALPHA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSettings {
    pub init_waypoints: [Point2<f64>; 2],
    pub max_samples: usize,
    pub gp: GpHyper,
    pub dmvw: DmvwParams,
}

/// Errors of one run after each sample count from 2 to `max_samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub errors: Vec<f64>,
    /// Samples taken when the suggestion first repeated.
    pub converged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algorithm: Algorithm,
    pub samples: usize,
    pub mean: f64,
    pub sd: f64,
    pub runs: usize,
}

fn run_curve(
    scenario: &Scenario,
    algorithm: Algorithm,
    seed: u64,
    settings: &CurveSettings,
) -> Result<CurveRun> {
    let mut env = scenario.env(seed)?;
    let truth = env.spec().source;
    let grid = scenario.grid()?;
    let mut log = MeasurementLog::new(scenario.params.domain_side)?;
    let mut errors = Vec::new();
    let mut converged_at = None;
    let mut previous: Option<usize> = None;
    let mut next = settings.init_waypoints[0];
    for n in 1..=settings.max_samples {
        let t = n as f64 * scenario.sample_period;
        let (gas, wind) = env.sample(&next, t)?;
        log.push(Measurement {
            position: next,
            time: t,
            gas,
            wind,
        })?;
        if n < 2 {
            next = settings.init_waypoints[1];
            continue;
        }
        let (estimate, waypoint) = match algorithm {
            Algorithm::Ogs => {
                let m = build_matrix(&log, &scenario.params, &grid)?;
                let (_, map) = localize(&m, &log.readings(), &grid, None)?;
                let p = grid.center(map.argmax());
                (p, p)
            }
            Algorithm::GpLcb3 => {
                let gp = gp_fit(&log, settings.gp)?;
                let peak = gp_peak(&gp, &grid);
                let w = best_candidate(&grid, |p| {
                    let (m, v) = gp.predict(p);
                    m + BASELINE_ALPHA * v.sqrt()
                });
                (peak, w)
            }
            Algorithm::DmvwLcb3 => {
                let maps = dmvw_map(&log, &settings.dmvw)?;
                let w = best_candidate(&grid, |p| {
                    let (m, sd) = maps.at(p);
                    m + BASELINE_ALPHA * sd
                });
                (maps.peak(), w)
            }
        };
        errors.push(localization_error(&estimate, &truth));
        let cell = grid.nearest(&estimate);
        if converged_at.is_none() && previous == Some(cell) {
            converged_at = Some(n);
        }
        previous = Some(cell);
        next = waypoint;
    }
    Ok(CurveRun {
        algorithm,
        seed,
        errors,
        converged_at,
    })
}

fn best_candidate(grid: &CandidateGrid, score: impl Fn(&Point2<f64>) -> f64) -> Point2<f64> {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..grid.len() {
        let s = score(&grid.center(j));
        if s > best.1 {
            best = (j, s);
        }
    }
    grid.center(best.0)
}

/// Runs each algorithm's sampling loop on the same seeded worlds with the
/// wind protocol switched to `wind_mode`. Returns the raw runs and the
/// per-sample-count mean and standard deviation of the error.
pub fn convergence_curves(
    scenario: &Scenario,
    algorithms: &[Algorithm],
    wind_mode: WindMode,
    seeds: &[u64],
    settings: &CurveSettings,
) -> Result<(Vec<CurveRun>, Vec<CurveRow>)> {
    if settings.max_samples < 2 {
        return Err(Error::invalid("max_samples", "must be at least 2"));
    }
    let scenario = Scenario {
        wind: WindProtocol {
            mode: wind_mode,
            ..scenario.wind
        },
        ..scenario.clone()
    };
    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|a| seeds.iter().map(move |s| (*a, *s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(a, s)| run_curve(&scenario, *a, *s, settings))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for a in algorithms {
        let mine: Vec<&CurveRun> = runs.iter().filter(|r| r.algorithm == *a).collect();
        for (k, samples) in (2..=settings.max_samples).enumerate() {
            let errs: Vec<f64> = mine.iter().map(|r| r.errors[k]).collect();
            let (mean, var) = mean_var(&errs);
            rows.push(CurveRow {
                algorithm: *a,
                samples,
                mean,
                sd: var.sqrt(),
                runs: errs.len(),
            });
        }
    }
    Ok((runs, rows))
}

/// One line of an error report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub error_m: f64,
    pub iterations: usize,
    pub converged: bool,
    pub samples: usize,
    pub steps: usize,
    pub wall_time_s: f64,
}

/// Per-run results; rows are kept in insertion order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<RunRecord>,
}

impl ErrorReport {
    pub fn push(&mut self, r: RunRecord) {
        self.rows.push(r);
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_m).collect()
    }
}
