//! Fuglede–Kadison determinants of matrices and the Gram-volume
//! decomposition of |det G| for Gaussian matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ensembles::{sample_ginibre, SeedSpec};
use crate::error::{Error, Result};
use crate::linalg::{singular_values_vec, ComplexMatrix, C64};
use crate::stats::MeanEstimate;

/// Singular values below this are treated as this value when taking logs.
pub const SINGULAR_FLOOR: f64 = 1e-150;

/// |det a|^{1/n}, computed from singular values. Zero for singular input.
pub fn fk_determinant(a: &ComplexMatrix) -> Result<f64> {
    let s = singular_values_vec(a)?;
    if s.iter().any(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let mean_log = s.iter().map(|x| x.ln()).sum::<f64>() / s.len() as f64;
    Ok(mean_log.exp())
}

/// tr ln|a − λ|, with a flag recording whether any singular value was floored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub value: f64,
    pub clamped: bool,
}

/// (1/n)·Σ ln max(sᵢ, floor) over the singular values of `a − λI`.
pub fn trace_log_abs(a: &ComplexMatrix, lambda: C64) -> Result<TraceLog> {
    let s = singular_values_vec(&a.shifted(lambda))?;
    Ok(mean_floored_log(&s))
}

pub(crate) fn mean_floored_log(values: &[f64]) -> TraceLog {
    let mut clamped = false;
    let mut sum = 0.0;
    for &x in values {
        if x < SINGULAR_FLOOR {
            clamped = true;
            sum += SINGULAR_FLOOR.ln();
        } else {
            sum += x.ln();
        }
    }
    TraceLog {
        value: sum / values.len() as f64,
        clamped,
    }
}

/// Sequential projection lengths l₁…l_N of the columns and the running
/// complex volumes Vᵢ = l₁⋯lᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct GramVolumes {
    pub lengths: Vec<f64>,
    pub volumes: Vec<f64>,
}

/// Modified Gram–Schmidt over the columns of `g`.
///
/// lᵢ is the norm of column i after removing its components along columns
/// 1..i−1. Columns that become numerically zero stay in the basis as zero
/// vectors and contribute lᵢ = 0.
pub fn gram_volumes(g: &ComplexMatrix) -> GramVolumes {
    let n = g.n();
    let m = g.as_inner();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: Vec<C64> = m.column(i).iter().copied().collect();
        for q in &basis {
            // ⟨q, v⟩ with the hermitian form conjugate-linear in the first slot
            let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vk, qk) in v.iter_mut().zip(q) {
                *vk -= proj * qk;
            }
        }
        let len = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        lengths.push(len);
        if len > 0.0 {
            basis.push(v.iter().map(|z| z / len).collect());
        }
    }
    let mut volumes = Vec::with_capacity(n);
    let mut acc = 1.0;
    for &l in &lengths {
        acc *= l;
        volumes.push(acc);
    }
    GramVolumes { lengths, volumes }
}

/// E l_i^{−h} = n^{h/2}·Γ(n−i+1−h/2)/Γ(n−i+1) for a standard Gaussian matrix.
pub fn l_moment_oracle(n: usize, i: usize, h: f64) -> Result<f64> {
    if i == 0 || i > n {
        return Err(Error::Domain(format!("column index {i} outside 1..={n}")));
    }
    let k = (n - i + 1) as f64;
    if h.is_nan() || h >= 2.0 * k {
        return Err(Error::Domain(format!(
            "moment of order -{h} diverges for column {i} of {n} (need h < {})",
            2.0 * k
        )));
    }
    let log = 0.5 * h * (n as f64).ln() + ln_gamma(k - h / 2.0) - ln_gamma(k);
    Ok(log.exp())
}

/// Monte Carlo estimate of E tr ln|G| over Ginibre samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkGaussianEstimate {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
}

/// Trial k uses stream `seed.stream_id + k` under `seed.root_seed`.
pub fn mc_fk_gaussian(n: usize, trials: usize, seed: SeedSpec) -> Result<FkGaussianEstimate> {
    if trials < 2 {
        return Err(Error::Usage("at least two trials are needed for a standard error".into()));
    }
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let g = sample_ginibre(n, SeedSpec::new(seed.root_seed, seed.stream_id + k));
            trace_log_abs(&g, C64::new(0.0, 0.0)).map(|t| t.value)
        })
        .collect::<Result<_>>()?;
    let est = MeanEstimate::from_samples(&samples);
    Ok(FkGaussianEstimate {
        n,
        trials,
        mean: est.mean,
        stderr: est.stderr,
        seed: seed.root_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::nilpotent_shift;

    #[test]
    fn fk_determinant_examples() {
        assert!((fk_determinant(&ComplexMatrix::identity(5)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fk_determinant(&nilpotent_shift(7)).unwrap(), 0.0);
        let d = ComplexMatrix::from_real_diagonal(&[1.0, 4.0]);
        assert!((fk_determinant(&d).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fk_determinant_is_multiplicative() {
        let a = sample_ginibre(6, SeedSpec::new(1, 1));
        let b = sample_ginibre(6, SeedSpec::new(1, 2));
        let lhs = fk_determinant(&(&a * &b)).unwrap();
        let rhs = fk_determinant(&a).unwrap() * fk_determinant(&b).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * rhs);
    }

    #[test]
    fn trace_log_abs_examples() {
        let t = trace_log_abs(&ComplexMatrix::zeros(4), C64::new(2.0, 0.0)).unwrap();
        assert!((t.value - 2f64.ln()).abs() < 1e-15 && !t.clamped);

        let d = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        let t = trace_log_abs(&d, C64::new(0.0, 0.0)).unwrap();
        assert!((t.value - 2f64.ln() / 2.0).abs() < 1e-15);

        let n = 10;
        let t = trace_log_abs(&nilpotent_shift(n), C64::new(0.0, 0.0)).unwrap();
        assert!(t.clamped);
        assert!(t.value <= SINGULAR_FLOOR.ln() / n as f64 + 1e-12);
    }

    #[test]
    fn gram_volumes_examples() {
        let gv = gram_volumes(&ComplexMatrix::identity(4));
        assert!(gv.lengths.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        assert!(gv.volumes.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        for s in 0..20 {
            let g = sample_ginibre(2, SeedSpec::new(4, s));
            let gv = gram_volumes(&g);
            let det = g.as_inner().determinant().norm();
            assert!((gv.lengths[0] * gv.lengths[1] - det).abs() < 1e-12 * det.max(1e-3));
        }
    }

    #[test]
    fn gram_volume_invariants() {
        let g = sample_ginibre(12, SeedSpec::new(6, 0));
        let gv = gram_volumes(&g);
        assert_eq!(gv.volumes[0], gv.lengths[0]);
        for i in 1..12 {
            let expect = gv.volumes[i - 1] * gv.lengths[i];
            assert!((gv.volumes[i] - expect).abs() <= 1e-10 * expect);
        }
        let det = g.as_inner().determinant().norm();
        assert!((gv.volumes[11] - det).abs() <= 1e-8 * 12.0 * det);
    }

    #[test]
    fn l_moment_oracle_examples() {
        for n in 1..6 {
            for i in 1..=n {
                assert!((l_moment_oracle(n, i, 0.0).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        let pi = std::f64::consts::PI;
        assert!((l_moment_oracle(1, 1, 1.0).unwrap() - pi.sqrt()).abs() < 1e-12);
        assert!((l_moment_oracle(10, 10, 1.0).unwrap() - (10.0 * pi).sqrt()).abs() < 1e-11);
        assert!(matches!(l_moment_oracle(10, 10, 2.0), Err(Error::Domain(_))));
        assert!(l_moment_oracle(3, 4, 0.5).is_err());
    }

    #[test]
    fn mc_fk_gaussian_rejects_single_trial() {
        assert!(mc_fk_gaussian(3, 1, SeedSpec::new(0, 0)).is_err());
    }
}
