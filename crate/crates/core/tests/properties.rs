use hyperid::forward::TimeGrid;
use hyperid::inversion::{add_noise, discrepancy_stop, history_norm, noise_level, trapezoid_time_integral};
use hyperid::io::{extrema, matrix_csv, matrix_pgm, parse_matrix_csv};
use hyperid::material::SplineGrid;
use hyperid::mesh::PlateMesh;
use hyperid::observation::{edge_nodes, SensorArray};
use hyperid::sparse::dot;
use proptest::prelude::*;

fn series(levels: usize, width: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, width), levels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trapezoid_is_linear(a in series(1, 9), b in series(1, 9), s in -3.0f64..3.0) {
        let tg = TimeGrid::new(2.0, 8, 0.5).unwrap();
        let combo: Vec<f64> = a[0].iter().zip(&b[0]).map(|(x, y)| x + s * y).collect();
        let lhs = trapezoid_time_integral(&combo, &tg).unwrap();
        let rhs = trapezoid_time_integral(&a[0], &tg).unwrap() + s * trapezoid_time_integral(&b[0], &tg).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn noise_hits_requested_level(data in series(5, 4), delta in 0.001f64..2.0, seed in any::<u64>()) {
        let tg = TimeGrid::new(1.0, 4, 0.5).unwrap();
        prop_assume!(history_norm(&data, &tg, None).unwrap() > 1e-6);
        let noisy = add_noise(&data, &tg, delta, seed).unwrap();
        let rel = noise_level(&noisy, &data, &tg, None).unwrap() / history_norm(&data, &tg, None).unwrap();
        prop_assert!((rel - delta).abs() <= 1e-12);
    }

    #[test]
    fn discrepancy_is_monotone_in_residual(r in 0.0f64..10.0, d in 0.0f64..5.0, tau in 2.01f64..5.0) {
        if discrepancy_stop(r, d, tau).unwrap() {
            prop_assert!(discrepancy_stop(r * 0.5, d, tau).unwrap());
        } else {
            prop_assert!(!discrepancy_stop(r * 2.0 + 1e-12, d, tau).unwrap());
        }
    }

    #[test]
    fn csv_round_trip_and_pgm_extrema(m in series(4, 3)) {
        prop_assert_eq!(parse_matrix_csv(&matrix_csv(&m)).unwrap(), m.clone());
        let pgm = matrix_pgm(&m);
        let (lo, hi) = extrema(&m);
        let (min_line, max_line) = (format!("# min {lo:.16e}\n"), format!("# max {hi:.16e}\n"));
        prop_assert!(pgm.contains(&min_line));
        prop_assert!(pgm.contains(&max_line));
    }

    #[test]
    fn spline_hats_partition_unity(x in -15.0f64..15.0, n in 1usize..32) {
        let g = SplineGrid::new(-15.0, 15.0, n).unwrap();
        let s: f64 = (0..=n).map(|i| g.eval(i, x)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn observation_adjoint_identity(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mesh = PlateMesh::plate([1, 4, 4]).unwrap();
        let s = SensorArray::uniform(&mesh, &edge_nodes(&mesh, 3).unwrap(), 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..mesh.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = dot(&s.observe(&u), &a);
        let rhs = dot(&u, &s.observe_adjoint(&a));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}
