use plumeseek::active::{next_waypoint, run_online, Environment, MissionState, OnlineConfig};
use plumeseek::fluid::SimParams;
use plumeseek::harness::{
    benchmark_speed, convergence_curves, localization_error, make_synthetic_env, sensitivity_sweep, Algorithm, CurveSettings,
    EnvSpec, Scenario, SweepParam, WindMode, WindProtocol,
};
use plumeseek::ogs::{CandidateGrid, LikelihoodMap};
use plumeseek::wind::WindMeasurement;
use plumeseek::{Point2, Result};

struct Empty;

impl Environment for Empty {
    fn sample(&mut self, _: &Point2<f64>, time: f64) -> Result<(f64, WindMeasurement)> {
        Ok((0.0, WindMeasurement::new(time, 1.0, 0.0)?))
    }

    fn domain_side(&self) -> f64 {
        32.0
    }
}

fn small() -> Scenario {
    Scenario {
        params: SimParams {
            grid_cells_per_side: 32,
            domain_side: 32.0,
            diffusion: 0.1,
            ..SimParams::default()
        },
        candidates: 8,
        sample_period: 10.0,
        ..Scenario::default()
    }
}

fn config(a: Point2<f64>) -> OnlineConfig {
    OnlineConfig {
        init_waypoints: [a, a + plumeseek::Vector2::new(4.0, 0.0)],
        max_iters: 10,
        sample_period: 10.0,
        tau: None,
    }
}

#[test]
fn empty_world_converges_on_the_first_cell() {
    let sc = small();
    let grid = sc.grid().unwrap();
    let (state, traj) = run_online(&mut Empty, &config(Point2::new(5.0, 5.0)), &sc.params, &grid).unwrap();
    assert!(state.converged);
    assert_eq!(state.iterations, 2);
    assert!(traj.iter().all(|t| t.index == 0));
    assert!(traj[0].likelihood.probabilities().iter().all(|p| (p - 1.0 / 64.0).abs() < 1e-15));
}

#[test]
fn next_waypoint_breaks_ties_on_the_first_cell() {
    let grid = CandidateGrid::new(4, 4, 16.0).unwrap();
    let mut state = MissionState::new(16.0).unwrap();
    assert!(next_waypoint(&state).is_err());
    state.likelihood = Some(LikelihoodMap::uniform(grid.clone()));
    assert_eq!(next_waypoint(&state).unwrap(), grid.center(0));
}

#[test]
fn on_plume_start_finds_the_source() {
    let sc = Scenario {
        source: Some(Point2::new(24.0 + 2.0, 14.0)),
        ..small()
    };
    let grid = sc.grid().unwrap();
    let mut env = sc.env(0).unwrap();
    let (state, traj) = run_online(&mut env, &config(Point2::new(14.0, 14.0)), &sc.params, &grid).unwrap();
    let truth = env.true_source().unwrap();
    assert!(grid.cell_distance(grid.nearest(&state.estimate.unwrap()), grid.nearest(&truth)) <= 1);
    assert_eq!(state.waypoints.len(), state.log.len());
    assert!(traj.windows(2).all(|w| w[0].steps <= w[1].steps));
    assert!(state.waypoints.iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= 32.0 && p.y <= 32.0));
}

#[test]
fn online_loop_is_deterministic_and_scale_free() {
    let sc = Scenario {
        noise: 0.1,
        wind: WindProtocol {
            mode: WindMode::Variable,
            ..WindProtocol::default()
        },
        ..small()
    };
    let grid = sc.grid().unwrap();
    let run = |emission: f64| {
        let mut spec = sc.env_spec(3).unwrap();
        spec.params.emission_rate = emission;
        let mut env = make_synthetic_env(&spec).unwrap();
        run_online(&mut env, &config(Point2::new(10.0, 20.0)), &sc.params, &grid).unwrap().1
    };
    let base = run(50.0);
    let again = run(50.0);
    assert_eq!(base, again);
    for c in [0.1, 10.0] {
        let scaled = run(50.0 * c);
        assert_eq!(base.len(), scaled.len());
        for (a, b) in base.iter().zip(&scaled) {
            assert_eq!(a.index, b.index);
            for (p, q) in a.likelihood.probabilities().iter().zip(b.likelihood.probabilities()) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn noise_stays_within_its_bound() {
    let sc = small();
    let spec = EnvSpec {
        noise: 0.1,
        ..sc.env_spec(1).unwrap()
    };
    let mut noisy = make_synthetic_env(&spec).unwrap();
    let mut clean = make_synthetic_env(&EnvSpec { noise: 0.0, ..spec.clone() }).unwrap();
    for k in 1..30 {
        let p = Point2::new((k as f64 * 7.3) % 32.0, (k as f64 * 3.1) % 32.0);
        let t = k as f64 * 5.0;
        let (g, _) = noisy.sample(&p, t).unwrap();
        let (c, _) = clean.sample(&p, t).unwrap();
        assert_eq!(c, clean.true_reading(&p).unwrap());
        if c > 0.0 {
            assert!((g / c - 1.0).abs() <= 0.1 + 1e-12);
        }
    }
    assert!(noisy.sample(&Point2::new(1.0, 1.0), 10.0).is_err());
}

#[test]
fn localization_error_is_euclidean() {
    assert_eq!(localization_error(&Point2::new(0.0, 0.0), &Point2::new(3.0, 4.0)), 5.0);
    assert_eq!(localization_error(&Point2::new(2.0, 2.0), &Point2::new(2.0, 2.0)), 0.0);
}

#[test]
fn sweeps_perturb_only_the_model() {
    let sc = small();
    let grid = sc.grid().unwrap();
    let data: Vec<_> = (0..3).map(|s| sc.offline(s).unwrap()).collect();
    let rows = sensitivity_sweep(&sc.params, SweepParam::GasRelease, &[1.0, 50.0, 500.0], &data, &grid).unwrap();
    assert!(rows.iter().all(|r| r.errors == rows[0].errors));
    let rows = sensitivity_sweep(&sc.params, SweepParam::WindDirectionOffset, &[0.0, std::f64::consts::PI], &data, &grid).unwrap();
    assert!(rows[1].mean_error >= rows[0].mean_error);
    let rows = sensitivity_sweep(&sc.params, SweepParam::Fidelity, &[0.5, 1.0], &data, &grid).unwrap();
    assert_eq!(rows.len(), 2);
    assert!("pressure".parse::<SweepParam>().is_err());
}

#[test]
fn one_shot_counts_one_simulation() {
    let sc = small();
    let rows = benchmark_speed(&sc, &[32], 1, &["ei".parse().unwrap()], 0).unwrap();
    let horizon = sc.sample_period * (sc.waypoint_rows * sc.waypoint_cols) as f64;
    assert_eq!(rows[0].ogs_steps, horizon as usize);
}

#[test]
fn curves_are_reproducible() {
    let sc = small();
    let settings = CurveSettings {
        init_waypoints: [Point2::new(8.0, 16.0), Point2::new(12.0, 16.0)],
        max_samples: 4,
        gp: Default::default(),
        dmvw: Default::default(),
    };
    let algos = [Algorithm::Ogs, Algorithm::GpLcb3, Algorithm::DmvwLcb3];
    let a = convergence_curves(&sc, &algos, WindMode::Constant, &[0, 1], &settings).unwrap();
    let b = convergence_curves(&sc, &algos, WindMode::Constant, &[0, 1], &settings).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.1.len(), 3 * 3);
    assert!(a.0.iter().all(|r| r.errors.len() == 3));
}
