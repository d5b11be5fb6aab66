//! Online source seeking: measure, relocalize on the full history, fly to
//! the most likely source, repeat until the suggestion repeats.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::SimParams;
use crate::measurement::{Measurement, MeasurementLog};
use crate::ogs::{build_matrix, localize, CandidateGrid, LikelihoodMap};
use crate::grid::ScalarGrid;
use crate::wind::{PolarWind, WindMeasurement};

/// Something that can be sampled for gas and wind, e.g. a hidden simulator
/// or a replayed flight.
pub trait Environment {
    /// Reading and wind at `location` at `time`. Times must not decrease.
    fn sample(&mut self, location: &Point2<f64>, time: f64) -> Result<(f64, WindMeasurement)>;

    fn domain_side(&self) -> f64;

    /// Ground truth, when known.
    fn true_source(&self) -> Option<Point2<f64>> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn sample(&mut self, location: &Point2<f64>, time: f64) -> Result<(f64, WindMeasurement)> {
        (**self).sample(location, time)
    }

    fn domain_side(&self) -> f64 {
        (**self).domain_side()
    }

    fn true_source(&self) -> Option<Point2<f64>> {
        (**self).true_source()
    }
}

/// Replays a recorded concentration field under a fixed wind. The field does
/// not evolve, so any sampling order is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEnv {
    field: ScalarGrid,
    wind: PolarWind,
}

impl ReplayEnv {
    pub fn new(field: ScalarGrid, wind: PolarWind) -> Result<Self> {
        if field.width() != field.height() {
            return Err(Error::invalid(
                "replay field",
                format!("{}x{} is not square", field.width(), field.height()),
            ));
        }
        Ok(ReplayEnv { field, wind })
    }
}

impl Environment for ReplayEnv {
    fn sample(&mut self, location: &Point2<f64>, time: f64) -> Result<(f64, WindMeasurement)> {
        Ok((self.field.sample(location)?, WindMeasurement::from_polar(time, self.wind)))
    }

    fn domain_side(&self) -> f64 {
        self.field.extent().x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub init_waypoints: [Point2<f64>; 2],
    /// Localization rounds before giving up.
    pub max_iters: usize,
    /// Seconds between samples; also the travel time between waypoints.
    pub sample_period: f64,
    /// Likelihood temperature; `None` uses the default.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionState {
    pub log: MeasurementLog,
    pub waypoints: Vec<Point2<f64>>,
    pub likelihood: Option<LikelihoodMap>,
    pub suggestion: Option<usize>,
    pub estimate: Option<Point2<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl MissionState {
    pub fn new(domain_side: f64) -> Result<Self> {
        Ok(MissionState {
            log: MeasurementLog::new(domain_side)?,
            waypoints: Vec::new(),
            likelihood: None,
            suggestion: None,
            estimate: None,
            iterations: 0,
            converged: false,
        })
    }

    fn record(&mut self, env: &mut impl Environment, p: Point2<f64>, t: f64) -> Result<Measurement> {
        let (gas, wind) = env.sample(&p, t)?;
        let m = Measurement {
            position: p,
            time: t,
            gas,
            wind,
        };
        self.log.push(m)?;
        self.waypoints.push(p);
        Ok(m)
    }
}

/// One localization round.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub iteration: usize,
    /// Measurements used.
    pub samples: usize,
    /// The most recent measurement.
    pub latest: Measurement,
    pub estimate: Point2<f64>,
    pub index: usize,
    pub converged: bool,
    /// Solver steps of this round's one-shot simulation.
    pub steps: usize,
    pub likelihood: LikelihoodMap,
}

/// Center of the most likely candidate.
pub fn next_waypoint(state: &MissionState) -> Result<Point2<f64>> {
    let map = state.likelihood.as_ref().ok_or(Error::Empty("likelihood"))?;
    Ok(map.grid().center(map.argmax()))
}

fn check_waypoint(p: &Point2<f64>, side: f64) -> Result<()> {
    if p.x >= 0.0 && p.y >= 0.0 && p.x <= side && p.y <= side {
        Ok(())
    } else {
        Err(Error::OutOfDomain { x: p.x, y: p.y, side })
    }
}

/// Runs the loop until the suggested candidate repeats or `max_iters`
/// rounds have passed. Samples are taken at `sample_period`, `2 *
/// sample_period`, ...; the first two at the initial waypoints.
pub fn run_online(
    env: &mut impl Environment,
    config: &OnlineConfig,
    params: &SimParams,
    grid: &CandidateGrid,
) -> Result<(MissionState, Vec<Iteration>)> {
    params.validate()?;
    if config.max_iters < 1 {
        return Err(Error::invalid("max_iters", "must be at least 1"));
    }
    if !(config.sample_period > 0.0 && config.sample_period.is_finite()) {
        return Err(Error::invalid("sample_period", format!("{} is not positive", config.sample_period)));
    }
    let side = env.domain_side();
    for p in &config.init_waypoints {
        check_waypoint(p, side)?;
    }
    let mut state = MissionState::new(side)?;
    let mut trajectory = Vec::new();
    let mut tick = 1;
    let mut latest = None;
    for p in config.init_waypoints {
        latest = Some(state.record(env, p, tick as f64 * config.sample_period)?);
        tick += 1;
    }
    let mut latest = latest.expect("two initial samples");

    for iteration in 1..=config.max_iters {
        let m = build_matrix(&state.log, params, grid)?;
        let (_, map) = localize(&m, &state.log.readings(), grid, config.tau)?;
        let index = map.argmax();
        let converged = state.suggestion == Some(index);
        state.suggestion = Some(index);
        state.estimate = Some(grid.center(index));
        state.likelihood = Some(map.clone());
        state.iterations = iteration;
        state.converged = converged;
        trajectory.push(Iteration {
            iteration,
            samples: state.log.len(),
            latest,
            estimate: grid.center(index),
            index,
            converged,
            steps: m.steps(),
            likelihood: map,
        });
        if converged || iteration == config.max_iters {
            break;
        }
        let target = next_waypoint(&state)?;
        latest = state.record(env, target, tick as f64 * config.sample_period)?;
        tick += 1;
    }
    Ok((state, trajectory))
}
