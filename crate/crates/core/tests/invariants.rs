use nalgebra::{Point2, Vector2};
use plumeseek::baselines::{GpHyper, GpModel};
use plumeseek::fluid::{advect, diffuse};
use plumeseek::grid::{ScalarGrid, VelocityGrid};
use plumeseek::io::{read_grid_csv, write_grid_csv};
use plumeseek::ogs::{distance, normalize, CandidateGrid, LikelihoodMap, SourceEstimate};
use plumeseek::wind::{normalize_angle, reconstruct, PolarWind, TiltCalibration, WindField, WindMeasurement};
use proptest::prelude::*;

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..100.0, n * n)
}

fn positive_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e3, 2..20)
}

proptest! {
    #[test]
    fn normalized_vectors_are_distributions(v in positive_vec()) {
        let p = normalize(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn distance_is_nonnegative_and_zero_on_self(v in positive_vec()) {
        prop_assert!(distance(&v, &v).unwrap().abs() < 1e-12);
        let mut w = v.clone();
        w.reverse();
        prop_assert!(distance(&v, &w).unwrap() >= -1e-12);
    }

    #[test]
    fn distance_ignores_scale(v in positive_vec(), c in 1e-3f64..1e3) {
        let mut w = v.clone();
        w.rotate_left(1);
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let (a, b) = (distance(&v, &w).unwrap(), distance(&scaled, &w).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-9));
    }

    #[test]
    fn likelihood_is_a_distribution_peaked_at_the_estimate(q in prop::collection::vec(0.0f64..10.0, 12), tau in 1e-3f64..10.0) {
        let grid = CandidateGrid::new(3, 4, 12.0).unwrap();
        let map = LikelihoodMap::from_distances(grid.clone(), &q, tau).unwrap();
        prop_assert!((map.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let est = SourceEstimate::from_distances(&grid, q).unwrap();
        prop_assert_eq!(map.argmax(), est.index);
    }

    #[test]
    fn candidate_indexing_round_trips(m in 1usize..10, n in 1usize..10, side in 1.0f64..200.0) {
        let grid = CandidateGrid::new(m, n, side).unwrap();
        for j in 0..grid.len() {
            let (a, b) = grid.cell_of(j);
            prop_assert_eq!(grid.index_of(a, b), j);
            prop_assert_eq!(grid.nearest(&grid.center(j)), j);
            prop_assert_eq!(grid.cell_distance(j, j), 0);
        }
    }

    #[test]
    fn diffusion_keeps_mass_and_sign(v in field(8), d in 0.0f64..2.0) {
        let g = ScalarGrid::from_values(8, 8, 1.0, v).unwrap();
        let out = diffuse(&g, d, 1.0, 20).unwrap();
        prop_assert!(out.values().iter().all(|x| *x >= 0.0));
        prop_assert!((out.total() - g.total()).abs() <= 1e-9 * g.total().max(1.0));
    }

    #[test]
    fn advection_stays_within_input_bounds(v in field(8), ux in -3.0f64..3.0, uy in -3.0f64..3.0) {
        let g = ScalarGrid::from_values(8, 8, 1.0, v).unwrap();
        let vel = VelocityGrid::uniform(8, 8, 1.0, Vector2::new(ux, uy));
        let out = advect(&g, &vel, 1.0).unwrap();
        let lo = g.values().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(out.values().iter().all(|x| *x >= lo - 1e-9 && *x <= g.max() + 1e-9));
    }

    #[test]
    fn zero_velocity_advection_is_identity(v in field(6)) {
        let g = ScalarGrid::from_values(6, 6, 2.0, v).unwrap();
        let out = advect(&g, &VelocityGrid::zeros(6, 6, 2.0), 1.0).unwrap();
        prop_assert_eq!(out.values(), g.values());
    }

    #[test]
    fn angles_normalize_into_one_turn(theta in -100.0f64..100.0) {
        let a = normalize_angle(theta);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&a));
        prop_assert!(((a - theta).rem_euclid(std::f64::consts::TAU)).min(std::f64::consts::TAU - (a - theta).rem_euclid(std::f64::consts::TAU)) < 1e-9);
    }

    #[test]
    fn polar_round_trip(speed in 0.01f64..20.0, dir in 0.0f64..6.28) {
        let p = PolarWind::new(speed, dir).unwrap();
        let back = PolarWind::from_vector(p.to_vector());
        prop_assert!((back.speed - speed).abs() < 1e-9);
        prop_assert!((back.to_vector() - p.to_vector()).norm() < 1e-9);
    }

    #[test]
    fn held_wind_is_always_a_measured_vector(times in prop::collection::vec(0.0f64..30.0, 1..8), t in 0.0f64..30.0) {
        let ms: Vec<WindMeasurement> = times
            .iter()
            .enumerate()
            .map(|(i, t)| WindMeasurement::new(*t, 1.0 + i as f64, 0.3 * i as f64).unwrap())
            .collect();
        let series = reconstruct(&ms, 0.5, 30.0).unwrap();
        let w = series.wind_at(t);
        prop_assert!(ms.iter().any(|m| m.to_vector() == w));
    }

    #[test]
    fn calibration_is_monotone(a in 0.0f64..40.0, b in 0.0f64..40.0) {
        let cal = TiltCalibration::new(vec![(0.0, 0.0), (5.0, 1.0), (20.0, 6.0), (35.0, 9.0)]).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(cal.speed_at(lo) <= cal.speed_at(hi));
    }

    #[test]
    fn gp_variance_is_nonnegative(xs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, -5.0f64..5.0), 1..10), px in 0.0f64..10.0, py in 0.0f64..10.0) {
        let pts = xs.iter().map(|(x, y, _)| Point2::new(*x, *y)).collect();
        let vals: Vec<f64> = xs.iter().map(|(_, _, v)| *v).collect();
        let gp = GpModel::fit(pts, &vals, GpHyper::default()).unwrap();
        let (m, v) = gp.predict(&Point2::new(px, py));
        prop_assert!(m.is_finite());
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn grid_csv_round_trips(v in field(5), cell in 0.01f64..10.0) {
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, 5, 5, cell, &v).unwrap();
        let back = read_grid_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values, v);
        prop_assert_eq!(back.cell_size, cell);
    }
}
