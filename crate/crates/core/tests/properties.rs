//! Property tests for the invariants the library promises on every input.

use gylab::conformal;
use gylab::curvature::{self, GauduchonParam};
use gylab::io;
use gylab::metric::{self, MetricField};
use gylab::models::{self, FourierSeries};
use gylab::C64;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn critical_parameter_is_exactly_where_c_t_vanishes(n in 1usize..6, t in -3.0f64..3.0) {
        let p = GauduchonParam::new(t, n).unwrap();
        prop_assert!((p.c_t() - (1.0 + (n as f64 - 1.0) * t)).abs() < 1e-15);
        if n > 1 {
            let crit = GauduchonParam::new(1.0 / (1.0 - n as f64), n).unwrap();
            prop_assert!(crit.is_critical());
        }
        prop_assert_eq!(p.is_critical(), p.c_t().abs() < 1e-12);
    }

    #[test]
    fn hermitian_inverse_is_an_inverse(
        n in 1usize..5,
        entries in proptest::collection::vec(-1.0f64..1.0, 32),
    ) {
        // A = B B* + I is positive Hermitian.
        let b: Vec<C64> = (0..n * n).map(|k| C64::new(entries[2 * k], entries[2 * k + 1])).collect();
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s: C64 = (0..n).map(|k| b[i * n + k] * b[j * n + k].conj()).sum();
                if i == j {
                    s += 1.0;
                }
                a[i * n + j] = s;
            }
        }
        let (inv, eig) = metric::hermitian_inverse(n, &a).unwrap();
        prop_assert!(eig.iter().all(|e| *e >= 1.0 - 1e-12));
        // g^{i jbar} g_{k jbar} = δ_ik
        for i in 0..n {
            for k in 0..n {
                let s: C64 = (0..n).map(|j| inv[i * n + j] * a[k * n + j]).sum();
                let d = if i == k { 1.0 } else { 0.0 };
                prop_assert!((s - d).norm() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn spectral_derivatives_of_trig_series_are_exact(seed in 0u64..10_000) {
        let grid = models::torus_grid(2, &[8; 4]).unwrap();
        let s = FourierSeries::random(vec![1.0; 4], 2, 4, seed);
        let f = s.sample(&grid);
        let num = conformal::ddbar(&f).unwrap();
        for k in (0..grid.len()).step_by(29) {
            let exact = s.ddbar(&grid.real_coords(k));
            for c in 0..4 {
                prop_assert!((num[c][k] - exact[c]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn scalar_curvature_scales_inversely(c in 0.2f64..5.0, t in -2.0f64..2.0) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        let p = GauduchonParam::new(t, 2).unwrap();
        let s = curvature::scalar_curvature(&g, p).unwrap().re();
        let sc = curvature::scalar_curvature(&g.scaled(c).unwrap(), p).unwrap().re();
        let expect: Vec<f64> = s.iter().map(|v| v / c).collect();
        prop_assert!(max_diff(&sc, &expect) < 1e-11);
    }

    #[test]
    fn ricci_form_is_affine_in_t(t in -3.0f64..3.0) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        let r = |t: f64| curvature::ricci_form(&g, GauduchonParam::new(t, 2).unwrap()).unwrap();
        let (a, b, rt) = (r(-1.0), r(1.0), r(t));
        let lerp = a.combine(0.5 * (1.0 - t), &b, 0.5 * (1.0 + t));
        prop_assert!(rt.max_diff(&lerp) < 1e-10);
    }

    #[test]
    fn ricci_form_is_real(t in -2.0f64..2.0, eps in 0.05f64..0.5) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, eps).unwrap();
        let ric = curvature::ricci_form(&g, GauduchonParam::new(t, 2).unwrap()).unwrap();
        prop_assert!(ric.reality_defect() < 1e-11);
        prop_assert!(curvature::scalar_curvature(&g, GauduchonParam::new(t, 2).unwrap()).unwrap().max_imag() < 1e-11);
    }

    #[test]
    fn kahler_metrics_have_parameter_independent_curvature(eps in 0.0f64..0.05, t in -2.0f64..2.0) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let psi = FourierSeries::single_cos(vec![1.0; 4], 0, 1);
        let g = models::kahler_perturbed_torus(&grid, &psi, eps).unwrap();
        let a = curvature::curvature_tensor(&g, GauduchonParam::chern(2)).unwrap();
        let b = curvature::curvature_tensor(&g, GauduchonParam::new(t, 2).unwrap()).unwrap();
        prop_assert!(a.max_diff(&b) < 1e-9);
    }

    #[test]
    fn degree_is_non_decreasing_and_affine(eps in 0.0f64..0.6, t1 in -2.0f64..2.0, dt in 0.01f64..2.0) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let eta = conformal::normalize_volume(&models::pluriclosed_torus(&grid, eps).unwrap()).unwrap();
        let d = |t: f64| conformal::gauduchon_degree(&eta, GauduchonParam::new(t, 2).unwrap()).unwrap();
        let (a, b, m) = (d(t1), d(t1 + dt), d(t1 + 0.5 * dt));
        prop_assert!(b >= a - 1e-12);
        prop_assert!((m - 0.5 * (a + b)).abs() < 1e-10);
    }

    #[test]
    fn degree_is_a_conformal_class_invariant(c in 0.3f64..3.0, t in -2.0f64..2.0) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        let p = GauduchonParam::new(t, 2).unwrap();
        let a = conformal::gauduchon_degree(&conformal::normalize_volume(&g).unwrap(), p).unwrap();
        let b = conformal::gauduchon_degree(&conformal::normalize_volume(&g.scaled(c).unwrap()).unwrap(), p).unwrap();
        prop_assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn normalized_volume_is_one(c in 0.1f64..10.0, seed in 0u64..1000) {
        let grid = models::torus_grid(2, &[8; 4]).unwrap();
        let phi = models::random_band_limited(&grid, 1, 3, 0.4, seed).unwrap();
        let g = models::conformal_torus(&grid, &phi).unwrap().scaled(c).unwrap();
        let v = metric::volume(&conformal::normalize_volume(&g).unwrap()).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chern_laplacian_integrates_to_zero_against_gauduchon_volume(seed in 0u64..1000) {
        let grid = models::torus_grid(2, &[16, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        let f = FourierSeries::random(vec![1.0; 4], 1, 4, seed).sample(&grid);
        let lap = conformal::chern_laplacian(&g, &f).unwrap();
        prop_assert!(metric::integrate(&lap, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn field_files_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 16)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        let grid = models::torus_grid(1, &[4, 4]).unwrap();
        let f = gylab::field::ScalarField::from_real(grid, values.clone()).unwrap();
        io::write_scalar(&path, &f, "f").unwrap();
        prop_assert_eq!(io::read_scalar(&path).unwrap().re(), values);
    }

    #[test]
    fn conformal_scalar_law_holds_for_small_factors(seed in 0u64..1000, t in -1.5f64..1.5) {
        let grid = models::torus_grid(1, &[32, 32]).unwrap();
        let g = MetricField::flat(grid.clone());
        let f = models::random_band_limited(&grid, 1, 3, 0.2, seed).unwrap().sample(&grid);
        let p = GauduchonParam::new(t, 1).unwrap();
        let direct = curvature::scalar_curvature(&g.conformal(&f).unwrap(), p).unwrap().re();
        let predicted = conformal::predict_conformal_scalar(&g, p, &f).unwrap().re();
        prop_assert!(max_diff(&direct, &predicted) < 1e-8);
    }
}
