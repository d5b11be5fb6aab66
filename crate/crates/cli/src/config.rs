//! Flat TOML experiment configuration. Every key is optional; units are SI
//! (meters, seconds, m/s, radians, m²/s).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plumeseek::baselines::{Acquisition, DmvwParams, GpHyper, Kernel};
use plumeseek::fluid::{BoundaryMode, SimParams};
use plumeseek::harness::{Algorithm, Scenario, SweepParam, WindMode, WindProtocol};
use plumeseek::ogs::CandidateGrid;
use plumeseek::Point2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    #[default]
    Synthetic,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    /// Seeds for `bench`; empty means `[seed]`.
    pub seeds: Vec<u64>,

    // Simulator, shared by the world and the model.
    pub cells: usize,
    pub domain_side: f64,
    pub diffusion: f64,
    pub dt: f64,
    pub solver_iterations: usize,
    pub emission_rate: f64,
    pub wind_coupling: f64,
    pub boundary_mode: BoundaryMode,

    // World.
    pub env: EnvKind,
    /// Emission of the hidden source; defaults to `emission_rate`.
    pub env_emission_rate: Option<f64>,
    pub source: Option<[f64; 2]>,
    pub wind_mode: WindMode,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub wind_jitter: f64,
    pub wind_period: f64,
    pub noise: f64,
    /// Grid CSV replayed when `env = "replay"`.
    pub replay_field: Option<PathBuf>,

    // Sampling.
    pub candidates: usize,
    pub sample_period: f64,
    pub waypoint_rows: usize,
    pub waypoint_cols: usize,
    pub init_waypoints: [[f64; 2]; 2],
    pub max_iters: usize,
    pub tau: Option<f64>,

    // Baselines.
    pub gp_kernel: Kernel,
    pub gp_variance: f64,
    pub gp_lengthscale: f64,
    pub gp_noise: f64,
    pub dmvw_cell_size: f64,
    pub dmvw_kernel_size: f64,
    pub dmvw_radius: f64,
    pub dmvw_time_scale: f64,
    pub dmvw_wind_scale: f64,
    pub bo_acquisitions: Vec<String>,
    pub bo_budget: usize,

    // Bench.
    pub bench_speed: bool,
    pub bench_sweeps: bool,
    pub bench_curves: bool,
    pub speed_resolutions: Vec<usize>,
    pub sweep_params: Vec<String>,
    pub sweep_gas_release: Vec<f64>,
    pub sweep_diffusion: Vec<f64>,
    pub sweep_wind_speed_scale: Vec<f64>,
    pub sweep_wind_direction_offset: Vec<f64>,
    pub sweep_fidelity: Vec<f64>,
    pub curve_algorithms: Vec<String>,
    pub curve_wind_modes: Vec<WindMode>,
    pub curve_max_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sc = Scenario::default();
        let p = &sc.params;
        let gp = GpHyper::default();
        let dm = DmvwParams::default();
        let side = p.domain_side;
        ExperimentConfig {
            scenario: "default".into(),
            seed: 0,
            seeds: Vec::new(),
            cells: p.grid_cells_per_side,
            domain_side: side,
            diffusion: p.diffusion,
            dt: p.dt,
            solver_iterations: p.solver_iterations,
            emission_rate: p.emission_rate,
            wind_coupling: p.wind_coupling,
            boundary_mode: p.boundary_mode,
            env: EnvKind::Synthetic,
            env_emission_rate: None,
            source: None,
            wind_mode: sc.wind.mode,
            wind_speed: sc.wind.speed,
            wind_direction: sc.wind.direction,
            wind_jitter: sc.wind.jitter,
            wind_period: sc.wind.period,
            noise: sc.noise,
            replay_field: None,
            candidates: sc.candidates,
            sample_period: sc.sample_period,
            waypoint_rows: sc.waypoint_rows,
            waypoint_cols: sc.waypoint_cols,
            init_waypoints: [[0.25 * side, 0.5 * side], [0.25 * side + 5.0, 0.5 * side]],
            max_iters: 20,
            tau: None,
            gp_kernel: gp.kernel,
            gp_variance: gp.variance,
            gp_lengthscale: gp.lengthscale,
            gp_noise: gp.noise,
            dmvw_cell_size: dm.cell_size,
            dmvw_kernel_size: dm.kernel_size,
            dmvw_radius: dm.evaluation_radius,
            dmvw_time_scale: dm.time_scale,
            dmvw_wind_scale: dm.wind_scale,
            bo_acquisitions: vec!["lcb:3".into(), "ei".into(), "mpi".into()],
            bo_budget: 50,
            bench_speed: true,
            bench_sweeps: true,
            bench_curves: false,
            speed_resolutions: vec![32, 64],
            sweep_params: SweepParam::ALL.iter().map(|p| p.name().to_string()).collect(),
            sweep_gas_release: vec![1.0, 10.0, 50.0, 100.0, 500.0],
            sweep_diffusion: [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * p.diffusion).collect(),
            sweep_wind_speed_scale: vec![0.5, 1.0, 2.0, 4.0],
            sweep_wind_direction_offset: vec![0.0, std::f64::consts::PI / 12.0, std::f64::consts::PI / 4.0, std::f64::consts::PI / 2.0],
            sweep_fidelity: vec![0.25, 1.0],
            curve_algorithms: vec!["ogs".into(), "gp-lcb3".into(), "dmvw-lcb3".into()],
            curve_wind_modes: vec![WindMode::None, WindMode::Constant, WindMode::Variable],
            curve_max_samples: 15,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: ExperimentConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        self.wind().validate()?;
        if !(0.0..=1.0).contains(&self.noise) {
            bail!("noise must lie in [0, 1], got {}", self.noise);
        }
        if let Some(e) = self.env_emission_rate {
            if !(e >= 0.0 && e.is_finite()) {
                bail!("env_emission_rate must be non-negative, got {e}");
            }
        }
        if self.env == EnvKind::Replay && self.replay_field.is_none() {
            bail!("env = \"replay\" needs replay_field");
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            bail!("sample_period must be positive, got {}", self.sample_period);
        }
        self.grid()?;
        self.gp().validate()?;
        self.dmvw().validate()?;
        self.acquisitions()?;
        self.sweeps()?;
        self.algorithms()?;
        Ok(())
    }

    /// Stable digest of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn params(&self) -> SimParams {
        SimParams {
            grid_cells_per_side: self.cells,
            domain_side: self.domain_side,
            diffusion: self.diffusion,
            dt: self.dt,
            solver_iterations: self.solver_iterations,
            emission_rate: self.emission_rate,
            wind_coupling: self.wind_coupling,
            boundary_mode: self.boundary_mode,
        }
    }

    pub fn wind(&self) -> WindProtocol {
        WindProtocol {
            mode: self.wind_mode,
            speed: self.wind_speed,
            direction: self.wind_direction,
            jitter: self.wind_jitter,
            period: self.wind_period,
            seed: 0,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            params: self.params(),
            wind: self.wind(),
            noise: self.noise,
            candidates: self.candidates,
            source: self.source.map(|[x, y]| Point2::new(x, y)),
            sample_period: self.sample_period,
            waypoint_rows: self.waypoint_rows,
            waypoint_cols: self.waypoint_cols,
        }
    }

    pub fn grid(&self) -> Result<CandidateGrid> {
        Ok(CandidateGrid::new(self.candidates, self.candidates, self.domain_side)?)
    }

    pub fn init_waypoints(&self) -> [Point2<f64>; 2] {
        self.init_waypoints.map(|[x, y]| Point2::new(x, y))
    }

    pub fn gp(&self) -> GpHyper {
        GpHyper {
            kernel: self.gp_kernel,
            variance: self.gp_variance,
            lengthscale: self.gp_lengthscale,
            noise: self.gp_noise,
        }
    }

    pub fn dmvw(&self) -> DmvwParams {
        DmvwParams {
            cell_size: self.dmvw_cell_size,
            kernel_size: self.dmvw_kernel_size,
            evaluation_radius: self.dmvw_radius,
            time_scale: self.dmvw_time_scale,
            wind_scale: self.dmvw_wind_scale,
        }
    }

    pub fn acquisitions(&self) -> Result<Vec<Acquisition>> {
        self.bo_acquisitions
            .iter()
            .map(|s| {
                let a: Acquisition = s.parse()?;
                a.validate()?;
                Ok(a)
            })
            .collect()
    }

    /// Requested sweeps with their values, in the order given.
    pub fn sweeps(&self) -> Result<Vec<(SweepParam, Vec<f64>)>> {
        self.sweep_params
            .iter()
            .map(|name| {
                let p: SweepParam = name.parse()?;
                let values = match p {
                    SweepParam::GasRelease => &self.sweep_gas_release,
                    SweepParam::Diffusion => &self.sweep_diffusion,
                    SweepParam::WindSpeedScale => &self.sweep_wind_speed_scale,
                    SweepParam::WindDirectionOffset => &self.sweep_wind_direction_offset,
                    SweepParam::Fidelity => &self.sweep_fidelity,
                };
                Ok((p, values.clone()))
            })
            .collect()
    }

    pub fn algorithms(&self) -> Result<Vec<Algorithm>> {
        Ok(self
            .curve_algorithms
            .iter()
            .map(|s| s.parse())
            .collect::<plumeseek::Result<Vec<_>>>()?)
    }
}
