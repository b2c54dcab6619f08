use brownreg::ensembles::{sample_ginibre, SeedSpec};
use brownreg::fk::{fk_determinant, gram_volumes, l_moment_oracle, mc_fk_gaussian};
use brownreg::stats::MeanEstimate;
use statrs::function::gamma::digamma;

/// ∫₀^∞ ln x·e^{−x} dx by the substitution x = e^u and the trapezoid rule.
fn integral_log_exp() -> f64 {
    let (a, b, m) = (-40.0f64, 5.0f64, 200_000);
    let h = (b - a) / m as f64;
    let f = |u: f64| u * (u - u.exp()).exp();
    let mut s = 0.5 * (f(a) + f(b));
    for k in 1..m {
        s += f(a + k as f64 * h);
    }
    s * h
}

#[test]
fn one_dimensional_mean_is_half_the_log_moment() {
    // n = 1: |g|² ~ Exp(1), so E ln|g| = ½∫ ln x e^{−x} dx = −γ/2.
    let oracle = 0.5 * integral_log_exp();
    assert!((oracle + 0.5772156649015329 / 2.0).abs() < 1e-9, "{oracle}");
    let est = mc_fk_gaussian(1, 20_000, SeedSpec::new(1, 0)).unwrap();
    assert!((est.mean - oracle).abs() < 4.0 * est.stderr, "{} ± {}", est.mean, est.stderr);
}

#[test]
fn finite_n_mean_matches_the_digamma_sum() {
    // n·lᵢ² ~ Gamma(n − i + 1, 1), so E tr ln|G| = (1/2n)·Σψ(k) − ½ ln n.
    for (n, trials) in [(5usize, 4000usize), (50, 300)] {
        let exact = (1..=n).map(|k| digamma(k as f64)).sum::<f64>() / (2.0 * n as f64) - 0.5 * (n as f64).ln();
        let est = mc_fk_gaussian(n, trials, SeedSpec::new(2, 0)).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.stderr, "n = {n}: {} ± {} vs {exact}", est.mean, est.stderr);
    }
    // the exact values approach −1/2
    let exact = |n: usize| (1..=n).map(|k| digamma(k as f64)).sum::<f64>() / (2.0 * n as f64) - 0.5 * (n as f64).ln();
    assert!((exact(10_000) + 0.5).abs() < 1e-3);
}

#[test]
fn gram_lengths_match_the_moment_formula() {
    let n = 6;
    let trials = 20_000;
    let mut inv = vec![Vec::with_capacity(trials); n];
    for k in 0..trials as u64 {
        let gv = gram_volumes(&sample_ginibre(n, SeedSpec::new(3, k)));
        for i in 0..n {
            inv[i].push(1.0 / gv.lengths[i]);
        }
    }
    for i in [0, 2, 5] {
        let est = MeanEstimate::from_samples(&inv[i]);
        let oracle = l_moment_oracle(n, i + 1, 1.0).unwrap();
        assert!((est.mean - oracle).abs() < 4.0 * est.stderr, "i = {}: {} ± {} vs {oracle}", i + 1, est.mean, est.stderr);
    }
}

#[test]
fn determinant_is_the_product_of_gram_lengths() {
    let g = sample_ginibre(30, SeedSpec::new(4, 0));
    let gv = gram_volumes(&g);
    let log_from_gram = gv.lengths.iter().map(|l| l.ln()).sum::<f64>() / 30.0;
    let log_fk = fk_determinant(&g).unwrap().ln();
    assert!((log_from_gram - log_fk).abs() < 1e-10);
}
