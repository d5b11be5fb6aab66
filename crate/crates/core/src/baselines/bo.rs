use std::fmt;
use std::time::Instant;

use nalgebra::Point2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::gp::{GpHyper, GpModel, Kernel};
use crate::error::{Error, Result};
use crate::fluid::{simulate, SimParams};
use crate::measurement::MeasurementLog;
use crate::ogs::{distance, CandidateGrid};

/// Acquisition function, minimized over the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Acquisition {
    Lcb { alpha: f64 },
    Ei,
    Mpi,
}

/// Improvement margin for MPI in standardized objective units.
const MPI_XI: f64 = 0.01;

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        match self {
            Acquisition::Lcb { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::invalid("alpha", format!("{alpha} is not positive")))
            }
            _ => Ok(()),
        }
    }

    /// Score to minimize given the posterior at a point and the incumbent.
    pub fn score(&self, mean: f64, sd: f64, best: f64) -> f64 {
        let normal = Normal::standard();
        match *self {
            Acquisition::Lcb { alpha } => mean - alpha * sd,
            Acquisition::Ei => {
                let gain = best - mean;
                if sd <= 0.0 {
                    return -gain.max(0.0);
                }
                let z = gain / sd;
                -(gain * normal.cdf(z) + sd * normal.pdf(z))
            }
            Acquisition::Mpi => {
                let gain = best - mean - MPI_XI;
                if sd <= 0.0 {
                    return if gain > 0.0 { -1.0 } else { 0.0 };
                }
                -normal.cdf(gain / sd)
            }
        }
    }
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Acquisition::Lcb { alpha } => write!(f, "lcb:{alpha}"),
            Acquisition::Ei => write!(f, "ei"),
            Acquisition::Mpi => write!(f, "mpi"),
        }
    }
}

impl std::str::FromStr for Acquisition {
    type Err = Error;

    /// `lcb:ALPHA`, `lcbALPHA`, `ei` or `mpi`.
    fn from_str(s: &str) -> Result<Self> {
        let acq = match s {
            "ei" => Acquisition::Ei,
            "mpi" => Acquisition::Mpi,
            _ => {
                let alpha = s
                    .strip_prefix("lcb")
                    .map(|r| r.trim_start_matches(':'))
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid("acquisition", format!("`{s}` is not lcb:ALPHA|ei|mpi")))?;
                Acquisition::Lcb { alpha }
            }
        };
        acq.validate()?;
        Ok(acq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoEvaluation {
    pub index: usize,
    pub location: Point2<f64>,
    pub objective: f64,
    /// Wall time of this evaluation's simulation, seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub location: Point2<f64>,
    pub index: usize,
    pub objective: f64,
    pub evaluations: Vec<BoEvaluation>,
}

impl BoResult {
    /// Best objective seen after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.evaluations
            .iter()
            .map(|e| {
                best = best.min(e.objective);
                best
            })
            .collect()
    }

    pub fn total_time(&self) -> f64 {
        self.evaluations.iter().map(|e| e.wall_time).sum()
    }
}

/// Surrogate hyperparameters for a domain of the given side; the objective
/// is standardized before fitting.
pub fn surrogate_hyper(domain_side: f64) -> GpHyper {
    GpHyper {
        kernel: Kernel::Matern52,
        variance: 1.0,
        lengthscale: 0.2 * domain_side,
        noise: 1e-6,
    }
}

/// Minimizes `l -> d(g, g̃(l))` over the candidates, running one full
/// simulation on the measurement domain per evaluation. Starts from two
/// seeded random candidates; a budget below two stops after the seeds.
/// Candidates already evaluated are skipped until all have been.
pub fn bo_localize(
    log: &MeasurementLog,
    params: &SimParams,
    grid: &CandidateGrid,
    acq: Acquisition,
    budget: usize,
    seed: u64,
) -> Result<BoResult> {
    acq.validate()?;
    params.validate()?;
    log.require_len(2)?;
    if budget < 1 {
        return Err(Error::invalid("budget", "must be at least 1"));
    }
    let wind = log.wind_series(params)?;
    let probes: Vec<(Point2<f64>, f64)> = log.records().iter().map(|r| (r.position, r.time)).collect();
    let readings = log.readings();
    let objective = |j: usize| -> Result<(f64, f64)> {
        let l = grid.center(j);
        let start = Instant::now();
        let pred = simulate(params, &wind, log.last_time(), &l, &probes)
            .and_then(|pred| distance(&readings, &pred))
            .map_err(|e| Error::Evaluation {
                x: l.x,
                y: l.y,
                source: Box::new(e),
            })?;
        Ok((pred, start.elapsed().as_secs_f64()))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = index::sample(&mut rng, grid.len(), 2.min(grid.len()).min(budget)).into_vec();
    let mut evaluations = Vec::with_capacity(budget);
    let mut visited = vec![false; grid.len()];
    for j in seeds {
        let (f, wall_time) = objective(j)?;
        visited[j] = true;
        evaluations.push(BoEvaluation {
            index: j,
            location: grid.center(j),
            objective: f,
            wall_time,
        });
    }

    let hyper = surrogate_hyper(grid.domain_side());
    while evaluations.len() < budget {
        let ys: Vec<f64> = evaluations.iter().map(|e| e.objective).collect();
        let n = ys.len() as f64;
        let mu = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let z: Vec<f64> = ys.iter().map(|y| (y - mu) / sd).collect();
        let best = z.iter().copied().fold(f64::INFINITY, f64::min);
        let model = GpModel::fit(evaluations.iter().map(|e| e.location).collect(), &z, hyper)?;
        let all_visited = visited.iter().all(|v| *v);
        let mut choice: Option<(usize, f64)> = None;
        for j in 0..grid.len() {
            if visited[j] && !all_visited {
                continue;
            }
            let (m, var) = model.predict(&grid.center(j));
            let s = acq.score(m, var.sqrt(), best);
            if choice.is_none_or(|(_, c)| s < c) {
                choice = Some((j, s));
            }
        }
        let j = choice.expect("candidate grid is not empty").0;
        let (f, wall_time) = objective(j)?;
        visited[j] = true;
        evaluations.push(BoEvaluation {
            index: j,
            location: grid.center(j),
            objective: f,
            wall_time,
        });
    }

    let mut best = 0;
    for (i, e) in evaluations.iter().enumerate() {
        if e.objective < evaluations[best].objective {
            best = i;
        }
    }
    Ok(BoResult {
        location: evaluations[best].location,
        index: evaluations[best].index,
        objective: evaluations[best].objective,
        evaluations,
    })
}
