use brownreg::ensembles::SeedSpec;
use brownreg::flow::{drift, simulate_flow, simulate_flow_on, sv_perturbation, FlowOptions, NoisePath};
use brownreg::linalg::{singular_values, ComplexMatrix};
use brownreg::stats::MeanEstimate;
use brownreg::C64;

fn rk4(mut y: Vec<f64>, t: f64, steps: usize) -> Vec<f64> {
    let n = y.len();
    let h = t / steps as f64;
    let f = |v: &[f64]| drift(v, n).unwrap();
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, d)| x + s * d).collect() };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

#[test]
fn noiseless_flow_matches_rk4_and_grows_sum_of_squares_linearly() {
    let init = [2.0, 1.3, 0.6];
    let t = 0.4;
    let mut path = NoisePath::silent(3);
    let traj = simulate_flow_on(&init, t, FlowOptions::new(1e-4), &mut path, None).unwrap();
    let reference = rk4(init.to_vec(), t, 4000);
    for (a, b) in traj.last().values.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
    // d/dt Σλ² = N − 1/2 along the drift ODE
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let slope = (sq(&reference) - sq(&init)) / t;
    assert!((slope - 2.5).abs() < 1e-8, "slope {slope}");
}

/// (1/(4N))·Δλᵢ over the 2N² real coordinates of the entries, by central
/// differences at diag(s).
fn fd_drift(s: &[f64], i: usize, h: f64) -> f64 {
    let n = s.len();
    let base = ComplexMatrix::from_real_diagonal(s);
    let sv = |m: &ComplexMatrix| singular_values(m).unwrap().singular_values()[i];
    let centre = sv(&base);
    let mut lap = 0.0;
    for r in 0..n {
        for c in 0..n {
            for dir in [C64::new(h, 0.0), C64::new(0.0, h)] {
                let mut plus = base.clone();
                plus.set(r, c, base.get(r, c) + dir);
                let mut minus = base.clone();
                minus.set(r, c, base.get(r, c) - dir);
                lap += (sv(&plus) - 2.0 * centre + sv(&minus)) / (h * h);
            }
        }
    }
    lap / (4.0 * n as f64)
}

#[test]
fn drift_is_the_ito_correction_of_the_singular_values() {
    for s in [vec![1.5], vec![2.0, 0.7], vec![3.0, 1.9, 0.4]] {
        let d = drift(&s, s.len()).unwrap();
        for i in 0..s.len() {
            let fd = fd_drift(&s, i, 1e-4);
            assert!((d[i] - fd).abs() < 1e-4 * d[i].abs().max(1.0), "s = {s:?}, i = {i}: {} vs {fd}", d[i]);
        }
    }
}

#[test]
fn second_moment_matches_the_frobenius_identity() {
    // E Σλ²(t) = Σa² + N·t for the singular values of A + √t·G.
    let init = [1.0, 0.5, 0.25];
    let t = 0.3;
    let samples: Vec<f64> = (0..1500)
        .map(|k| {
            let tr = simulate_flow(&init, t, 5e-3, SeedSpec::new(41, k)).unwrap();
            tr.last().values.iter().map(|x| x * x).sum()
        })
        .collect();
    let est = MeanEstimate::from_samples(&samples);
    let expect = 1.0 + 0.25 + 0.0625 + 3.0 * t;
    assert!((est.mean - expect).abs() < 4.0 * est.stderr + 0.01, "{} ± {} vs {expect}", est.mean, est.stderr);
}

#[test]
fn one_dimensional_flow_is_the_modulus_of_complex_brownian_motion() {
    let a = 0.8;
    let t = 0.5;
    let samples: Vec<f64> = (0..3000)
        .map(|k| simulate_flow(&[a], t, 2e-3, SeedSpec::new(17, k)).unwrap().last().values[0].powi(2))
        .collect();
    let est = MeanEstimate::from_samples(&samples);
    assert!((est.mean - (a * a + t)).abs() < 4.0 * est.stderr + 0.01, "{} ± {}", est.mean, est.stderr);
}

#[test]
fn perturbation_error_is_third_order() {
    let s = [2.0, 1.1, 0.4];
    let dir = ComplexMatrix::from_fn(3, |i, j| C64::new(0.3 * (i as f64 + 1.0) - 0.2 * j as f64, 0.1 * (i * j) as f64 - 0.25));
    let err = |eps: f64| -> f64 {
        let delta = dir.scale(eps);
        let pred = sv_perturbation(&s, &delta).unwrap();
        let exact_m = &ComplexMatrix::from_real_diagonal(&s) + &delta;
        let exact = singular_values(&exact_m).unwrap();
        pred.iter().zip(exact.singular_values()).map(|(p, e)| (p - e).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1e-2), err(1e-3));
    let slope = (e1 / e2).log10();
    assert!((2.7..=3.3).contains(&slope), "slope {slope}");
}
