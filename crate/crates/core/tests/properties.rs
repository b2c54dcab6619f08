use brownreg::brown::{brown_density, log_potential_field, region_mass, GridSpec};
use brownreg::ensembles::{sample_ginibre, SeedSpec};
use brownreg::flow::{drift, repulsion_laplacian};
use brownreg::linalg::{singular_values, ComplexMatrix};
use brownreg::stats::energy_distance;
use brownreg::C64;
use proptest::prelude::*;

fn unitary(n: usize, seed: u64) -> ComplexMatrix {
    let g = sample_ginibre(n, SeedSpec::new(seed, 99));
    ComplexMatrix::new(g.into_inner().qr().q()).unwrap()
}

fn distinct_positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, n).prop_filter("distinct", |v| {
        v.iter()
            .enumerate()
            .all(|(i, a)| v[i + 1..].iter().all(|b| (a - b).abs() > 1e-3))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn singular_values_are_unitarily_invariant(seed in 0u64..1000, n in 1usize..8) {
        let a = sample_ginibre(n, SeedSpec::new(seed, 0));
        let u = unitary(n, seed + 1);
        let v = unitary(n, seed + 2);
        let b = &(&u * &a) * &v;
        let sa = singular_values(&a).unwrap();
        let sb = singular_values(&b).unwrap();
        for (x, y) in sa.singular_values().iter().zip(sb.singular_values()) {
            prop_assert!((x - y).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn drift_commutes_with_relabeling(v in distinct_positive(4), shift in 1usize..4) {
        let d = drift(&v, 4).unwrap();
        let mut rotated = v.clone();
        rotated.rotate_left(shift);
        let mut dr = drift(&rotated, 4).unwrap();
        dr.rotate_right(shift);
        for (a, b) in d.iter().zip(&dr) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn repulsion_laplacian_is_positive(v in distinct_positive(5)) {
        prop_assert!(repulsion_laplacian(&v).unwrap() > 0.0);
    }

    #[test]
    fn field_is_translation_covariant(seed in 0u64..1000, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let a = sample_ginibre(12, SeedSpec::new(seed, 3));
        let c = C64::new(re, im);
        let shifted = &a + &ComplexMatrix::diagonal(&vec![c; 12]);
        let grid = GridSpec::new(C64::new(0.2, -0.1), 1.0, 9).unwrap();
        let moved = GridSpec { center: grid.center + c, ..grid };
        let f = log_potential_field(&a, grid).unwrap();
        let g = log_potential_field(&shifted, moved).unwrap();
        for (x, y) in f.values.iter().zip(&g.values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_distance_is_a_symmetric_nonnegative_score(
        x in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..15),
        y in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..15),
    ) {
        let d = energy_distance(&x, &y);
        prop_assert!(d >= 0.0);
        prop_assert!((d - energy_distance(&y, &x)).abs() < 1e-12);
        prop_assert!(energy_distance(&x, &x) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn density_mass_counts_eigenvalues_of_diagonal_matrices(
        pts in prop::collection::vec((-1.2f64..1.2, -1.2f64..1.2), 1..12),
    ) {
        let values: Vec<C64> = pts.iter().map(|&(x, y)| C64::new(x, y)).collect();
        let grid = GridSpec::new(C64::new(0.0, 0.0), 1.6, 81).unwrap();
        let h = grid.spacing();
        let density = brown_density(&log_potential_field(&ComplexMatrix::diagonal(&values), grid).unwrap());
        // a square region whose edges stay at least 2h from every eigenvalue
        let edge = 0.5;
        prop_assume!(values.iter().all(|z| (z.re.abs() - edge).abs() > 2.0 * h && (z.im.abs() - edge).abs() > 2.0 * h));
        let inside = |z: C64| z.re.abs() < edge && z.im.abs() < edge;
        let exact = values.iter().filter(|z| inside(**z)).count() as f64 / values.len() as f64;
        let mass = region_mass(&density, inside);
        prop_assert!((mass - exact).abs() < 0.02, "mass {} vs {}", mass, exact);
    }
}
