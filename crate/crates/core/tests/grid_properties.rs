mod common;

use std::f64::consts::PI;

use meanflow_core::grid::{read_snapshot, write_snapshot};
use meanflow_core::{Field64, Grid64};
use proptest::prelude::*;

use common::band_limited;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_integrates_to_zero(seed in any::<u64>(), n in prop::sample::select(vec![16usize, 32, 64])) {
        let g = Grid64::standard(n).unwrap();
        let f = band_limited(&g, seed, 6, 2.0);
        let l1 = f.map(f64::abs).unwrap().integrate();
        prop_assert!(f.laplacian().integrate().abs() <= 1e-10 * l1.max(1.0));
    }

    #[test]
    fn integration_by_parts(seed in any::<u64>()) {
        let g = Grid64::standard(64).unwrap();
        let f = band_limited(&g, seed, 8, 1.0);
        let h = band_limited(&g, seed.wrapping_add(1), 8, 1.0);
        let lhs = f.inner(&h.laplacian()).unwrap();
        let rhs = -f.grad_dot(&h).unwrap().integrate();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn laplacian_eigenmodes(k1 in -15i32..16, k2 in -15i32..16, l in 1.0f64..10.0) {
        let g = Grid64::new(32, l).unwrap();
        let w = 2.0 * PI / l;
        let f = Field64::from_fn(&g, |x, y| (w * (k1 as f64 * x + k2 as f64 * y)).cos()).unwrap();
        let eig = -w * w * ((k1 * k1 + k2 * k2) as f64);
        let expected = f.scale(eig).unwrap();
        prop_assert!(f.laplacian().distance_sup(&expected).unwrap() <= 1e-9 * (1.0 + eig.abs()));
    }

    #[test]
    fn ball_mass_is_monotone_and_additive(seed in any::<u64>(), r in 0.1f64..1.4) {
        let g = Grid64::standard(64).unwrap();
        let f = band_limited(&g, seed, 4, 1.0).map(f64::exp).unwrap();
        let a = g.point(1.0, 1.0);
        let b = g.point(1.0 + PI, 1.0 + PI);
        let small = f.ball_mass(a, r).unwrap();
        let big = f.ball_mass(a, r * 1.1).unwrap();
        prop_assert!(big >= small);
        // Two disjoint balls against the sum of both masks.
        let both = Field64::from_points(&g, |p| {
            let inside = g.periodic_distance(a, p) <= r || g.periodic_distance(b, p) <= r;
            if inside { 1.0 } else { 0.0 }
        }).unwrap().inner(&f).unwrap();
        let sum = small + f.ball_mass(b, r).unwrap();
        prop_assert!((both - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn snapshot_roundtrip(seed in any::<u64>(), t in 0.0f64..100.0, rho in -50.0f64..50.0) {
        let g = Grid64::new(16, 3.5).unwrap();
        let f = band_limited(&g, seed, 3, 5.0);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, t, rho).unwrap();
        prop_assert_eq!(buf.len(), 40 + 8 * 256);
        let snap = read_snapshot(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(snap.time, t);
        prop_assert_eq!(snap.rho, rho);
        let back = snap.to_field::<f64>().unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}
