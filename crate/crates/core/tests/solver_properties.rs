use nalgebra::{Point2, Vector2};
use plumeseek::fluid::{diffuse, divergence, project, BoundaryMode, SimParams, Simulation};
use plumeseek::grid::{ScalarGrid, VelocityGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn projection_removes_divergence_on_random_fields() {
    for mode in [BoundaryMode::Open, BoundaryMode::Closed] {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 64;
            let u = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vel = VelocityGrid::from_components(n, n, 1.0, u, v).unwrap();
            let before = max_abs(&divergence(&vel, mode));
            let after = max_abs(&divergence(&project(&vel, mode), mode));
            assert!(after * 1e3 <= before, "{mode:?} seed {seed}: {before} -> {after}");
        }
    }
}

#[test]
fn closed_diffusion_conserves_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values = (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut g = ScalarGrid::from_values(64, 64, 1.0, values).unwrap();
    let total = g.total();
    for _ in 0..50 {
        g = diffuse(&g, 0.8, 1.0, 20).unwrap();
    }
    assert!(((g.total() - total) / total).abs() < 1e-9);
}

#[test]
fn centered_source_without_wind_is_four_fold_symmetric() {
    for mode in [BoundaryMode::Open, BoundaryMode::Closed] {
        let params = SimParams {
            grid_cells_per_side: 32,
            domain_side: 32.0,
            diffusion: 0.4,
            boundary_mode: mode,
            ..SimParams::default()
        };
        let mut sim = Simulation::new(&params, Point2::new(16.0, 16.0)).unwrap();
        for _ in 0..60 {
            sim.step(Vector2::zeros(), true).unwrap();
        }
        let d = sim.density();
        let n = d.width();
        let tol = 1e-6 * d.max();
        for j in 0..n {
            for i in 0..n {
                let c = d.get(i, j);
                for other in [d.get(n - 1 - i, j), d.get(i, n - 1 - j), d.get(j, i)] {
                    assert!((c - other).abs() <= tol, "{mode:?} ({i},{j}): {c} vs {other}");
                }
            }
        }
    }
}

fn translated_pair(diffusion: f64) -> (Simulation, Simulation) {
    let params = SimParams {
        grid_cells_per_side: 48,
        domain_side: 48.0,
        diffusion,
        ..SimParams::default()
    };
    let wind = Vector2::new(0.5, 0.25);
    let mut a = Simulation::new(&params, Point2::new(12.0, 12.0)).unwrap();
    let mut b = Simulation::new(&params, Point2::new(20.0, 16.0)).unwrap();
    for _ in 0..20 {
        a.step(wind, true).unwrap();
        b.step(wind, true).unwrap();
    }
    (a, b)
}

#[test]
fn uniform_wind_translates_the_plume() {
    let (a, b) = translated_pair(0.0);
    for j in 0..30 {
        for i in 0..30 {
            assert_eq!(a.density().get(i, j), b.density().get(i + 8, j + 4));
        }
    }
    // Diffusive tails reach the walls, which are at different distances.
    let (a, b) = translated_pair(0.1);
    let tol = 1e-9 * a.density().max();
    for j in 8..30 {
        for i in 8..30 {
            let d = (a.density().get(i, j) - b.density().get(i + 8, j + 4)).abs();
            assert!(d <= tol, "({i},{j}) {}", d / a.density().max());
        }
    }
}
