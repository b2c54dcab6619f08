//! Dense complex linear algebra: the matrix carrier, spectra, and normalized
//! traces of ⋆-words.
//!
//! Eigenvalues (`zgeev`) and singular values (`zgesdd`) come from the system
//! LAPACK; everything else uses `nalgebra`. Eigenvalues are returned in
//! whatever order the Schur form produces them; callers that need an order
//! sort or bin them.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::linalg::Hessenberg;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensembles::SeedSpec;
use crate::error::{Error, Result};

pub type C64 = Complex64;


/// A dense square complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Wraps an `nalgebra` matrix after checking squareness, n ≥ 1 and finiteness.
    pub fn new(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(Error::Usage(format!(
                "matrix must be square, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.nrows() == 0 {
            return Err(Error::Usage("matrix dimension must be at least 1".into()));
        }
        if let Some(pos) = inner.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            let n = inner.nrows();
            return Err(Error::Domain(format!(
                "non-finite entry at ({}, {})",
                pos % n,
                pos / n
            )));
        }
        Ok(ComplexMatrix(inner))
    }

    /// Builds from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Usage("rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds an n×n matrix entry by entry. Panics on `n == 0` or non-finite entries.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::new(DMatrix::from_fn(n, n, f)).expect("invalid matrix from generator")
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| C64::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&v)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        assert!(value.re.is_finite() && value.im.is_finite());
        self.0[(i, j)] = value;
    }

    pub fn as_inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        ComplexMatrix(self.0.map(|z| z * factor))
    }

    /// `a − λ·I`.
    pub fn shifted(&self, lambda: C64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= lambda;
        }
        ComplexMatrix(m)
    }

    /// Row-major copy of the entries.
    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Squared Frobenius norm Σ|aᵢⱼ|².
    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Integer matrix power by repeated multiplication.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::identity(self.n());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn is_hermitian_exact(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| self.0[(i, j)] == self.0[(j, i)].conj()))
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{}) {:?}", self.n(), self.n(), self.rows())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch");
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch");
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

/// One letter of a ⋆-word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    Plain,
    Star,
}

/// A nonempty word s₁⋯sₙ over {plain, star}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StarWord(Vec<Letter>);

impl StarWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Usage("a star word must be nonempty".into()));
        }
        Ok(StarWord(letters))
    }

    /// (plain, star) repeated `k` times: the word whose moment is tr (aa*)ᵏ.
    pub fn alternating(k: usize) -> Result<Self> {
        Self::new([Letter::Plain, Letter::Star].repeat(k))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }
}

impl FromStr for StarWord {
    type Err = Error;

    /// Parses words such as `"a a* a"` or `"aa*"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let mut chars = s.chars().filter(|c| !c.is_whitespace()).peekable();
        while let Some(c) = chars.next() {
            match c {
                'a' | 'x' => {
                    if chars.peek() == Some(&'*') {
                        chars.next();
                        letters.push(Letter::Star);
                    } else {
                        letters.push(Letter::Plain);
                    }
                }
                other => return Err(Error::Usage(format!("unexpected character {other:?} in star word"))),
            }
        }
        StarWord::new(letters)
    }
}

/// Values carried by a [`SpectrumSample`].
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValues {
    Eigenvalues(Vec<C64>),
    /// Sorted descending, all nonnegative.
    SingularValues(Vec<f64>),
}

/// The spectrum of one sampled matrix plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub values: SpectrumValues,
    pub source_n: usize,
    pub trial_id: u64,
    pub seed: Option<SeedSpec>,
}

impl SpectrumSample {
    pub fn with_trial(mut self, trial_id: u64, seed: Option<SeedSpec>) -> Self {
        self.trial_id = trial_id;
        self.seed = seed;
        self
    }

    /// Eigenvalues; empty for a singular-value sample.
    pub fn eigenvalues(&self) -> &[C64] {
        match &self.values {
            SpectrumValues::Eigenvalues(v) => v,
            SpectrumValues::SingularValues(_) => &[],
        }
    }

    /// Singular values; empty for an eigenvalue sample.
    pub fn singular_values(&self) -> &[f64] {
        match &self.values {
            SpectrumValues::SingularValues(v) => v,
            SpectrumValues::Eigenvalues(_) => &[],
        }
    }
}

/// (1/n)·Tr a.
pub fn normalized_trace(a: &ComplexMatrix) -> C64 {
    a.as_inner().trace() / a.n() as f64
}

/// Singular values, sorted descending.
pub fn singular_values(a: &ComplexMatrix) -> Result<SpectrumSample> {
    let values = singular_values_vec(a)?;
    Ok(SpectrumSample {
        values: SpectrumValues::SingularValues(values),
        source_n: a.n(),
        trial_id: 0,
        seed: None,
    })
}

pub(crate) fn singular_values_vec(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let mut values = lapack_ops::singular_values(a)?;
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Eigenvalues counted with multiplicity, in Schur order.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<SpectrumSample> {
    let values = eigenvalues_vec(a)?;
    Ok(SpectrumSample {
        values: SpectrumValues::Eigenvalues(values),
        source_n: a.n(),
        trial_id: 0,
        seed: None,
    })
}

pub(crate) fn eigenvalues_vec(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = a.n();
    if n == 1 {
        return Ok(vec![a.get(0, 0)]);
    }
    lapack_ops::eigenvalues(a)
}

mod lapack_ops {
    //! Thin wrappers over the LAPACK drivers. nalgebra stores matrices
    //! column-major, which is the layout LAPACK expects.

    use super::{ComplexMatrix, C64};
    use crate::error::{Error, Result};

    fn dim(a: &ComplexMatrix) -> Result<i32> {
        i32::try_from(a.n()).map_err(|_| Error::Usage(format!("dimension {} too large for LAPACK", a.n())))
    }

    pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<C64>> {
        let n = dim(a)?;
        let nu = a.n();
        let mut data: Vec<C64> = a.as_inner().as_slice().to_vec();
        let mut w = vec![C64::new(0.0, 0.0); nu];
        let mut dummy = [C64::new(0.0, 0.0); 1];
        let mut dummy_r = [C64::new(0.0, 0.0); 1];
        let mut rwork = vec![0.0; 2 * nu];
        let mut query = [C64::new(0.0, 0.0); 1];
        let mut info = 0;
        // SAFETY: every buffer is sized as zgeev documents for JOBVL = JOBVR = 'N'.
        unsafe {
            lapack::zgeev(b'N', b'N', n, &mut data, n, &mut w, &mut dummy, 1, &mut dummy_r, 1, &mut query, -1, &mut rwork, &mut info);
        }
        let lwork = (query[0].re as usize).max(2 * nu).max(1);
        let mut work = vec![C64::new(0.0, 0.0); lwork];
        unsafe {
            lapack::zgeev(b'N', b'N', n, &mut data, n, &mut w, &mut dummy, 1, &mut dummy_r, 1, &mut work, lwork as i32, &mut rwork, &mut info);
        }
        if info != 0 {
            return Err(Error::Decomposition(format!("zgeev failed with info = {info} (n = {nu})")));
        }
        Ok(w)
    }

    pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
        let n = dim(a)?;
        let nu = a.n();
        let mut data: Vec<C64> = a.as_inner().as_slice().to_vec();
        let mut s = vec![0.0; nu];
        let mut dummy = [C64::new(0.0, 0.0); 1];
        let mut dummy_v = [C64::new(0.0, 0.0); 1];
        let mut rwork = vec![0.0; 7 * nu];
        let mut iwork = vec![0i32; 8 * nu];
        let mut query = [C64::new(0.0, 0.0); 1];
        let mut info = 0;
        // SAFETY: buffers follow the zgesdd sizes for JOBZ = 'N'.
        unsafe {
            lapack::zgesdd(b'N', n, n, &mut data, n, &mut s, &mut dummy, 1, &mut dummy_v, 1, &mut query, -1, &mut rwork, &mut iwork, &mut info);
        }
        let lwork = (query[0].re as usize).max(3 * nu).max(1);
        let mut work = vec![C64::new(0.0, 0.0); lwork];
        unsafe {
            lapack::zgesdd(b'N', n, n, &mut data, n, &mut s, &mut dummy, 1, &mut dummy_v, 1, &mut work, lwork as i32, &mut rwork, &mut iwork, &mut info);
        }
        if info != 0 {
            return Err(Error::Decomposition(format!("zgesdd failed with info = {info} (n = {nu})")));
        }
        Ok(s)
    }
}

/// Normalized trace of the product a^{s₁}⋯a^{sₙ}.
pub fn word_moment(a: &ComplexMatrix, w: &StarWord) -> C64 {
    let adj = a.as_inner().adjoint();
    let pick = |l: &Letter| match l {
        Letter::Plain => a.as_inner(),
        Letter::Star => &adj,
    };
    let mut letters = w.letters().iter();
    let mut acc = pick(letters.next().expect("nonempty word")).clone();
    for l in letters {
        acc = &acc * pick(l);
    }
    acc.trace() / a.n() as f64
}

/// Upper Hessenberg form H = Q*·a·Q. Shares singular values of a − λI for every λ.
pub(crate) fn hessenberg(a: &ComplexMatrix) -> DMatrix<C64> {
    if a.n() < 3 {
        return a.as_inner().clone();
    }
    Hessenberg::new(a.as_inner().clone()).unpack_h()
}

/// Moduli of the LU pivots of `h − λI` for upper Hessenberg `h`, using
/// partial pivoting between adjacent rows. Their product is |det(h − λI)|.
pub(crate) fn hessenberg_pivots(h: &DMatrix<C64>, lambda: C64, out: &mut Vec<f64>) {
    let n = h.nrows();
    out.clear();
    // `row` is the carried row (columns ≥ k) competing for the k-th pivot.
    let mut row: Vec<C64> = (0..n).map(|j| h[(0, j)]).collect();
    row[0] -= lambda;
    let mut next = vec![C64::new(0.0, 0.0); n];
    for k in 0..n - 1 {
        for j in k..n {
            next[j] = h[(k + 1, j)];
        }
        next[k + 1] -= lambda;
        if next[k].norm() > row[k].norm() {
            std::mem::swap(&mut row, &mut next);
        }
        let p = row[k];
        out.push(p.norm());
        let m = if p.norm() > 0.0 { next[k] / p } else { C64::new(0.0, 0.0) };
        for j in k + 1..n {
            next[j] -= m * row[j];
        }
        std::mem::swap(&mut row, &mut next);
    }
    out.push(row[n - 1].norm());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{nilpotent_shift, sample_ginibre, SeedSpec};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn abs_det_by_eigs(a: &ComplexMatrix) -> f64 {
        eigenvalues_vec(a).unwrap().iter().map(|z| z.norm()).product()
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(ComplexMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(ComplexMatrix::new(DMatrix::zeros(0, 0)).is_err());
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(1, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(ComplexMatrix::new(m), Err(Error::Domain(_))));
    }

    #[test]
    fn normalized_trace_examples() {
        assert_eq!(normalized_trace(&ComplexMatrix::identity(7)), c(1.0, 0.0));
        assert_eq!(normalized_trace(&nilpotent_shift(9)), c(0.0, 0.0));
        let d = ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(normalized_trace(&d), c(2.0, 0.0));
    }

    #[test]
    fn singular_values_examples() {
        let d = ComplexMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let s = singular_values(&d).unwrap();
        let sv = s.singular_values();
        for (x, y) in sv.iter().zip([3.0, 2.0, 1.0]) {
            assert!((x - y).abs() < 1e-14);
        }

        let n = 12;
        let sv = singular_values_vec(&nilpotent_shift(n)).unwrap();
        for x in &sv[..n - 1] {
            assert!((x - 1.0).abs() < 1e-13);
        }
        assert!(sv[n - 1].abs() < 1e-13);
    }

    #[test]
    fn unitary_has_unit_singular_values() {
        // QR of a Ginibre sample gives a unitary factor.
        let g = sample_ginibre(6, SeedSpec::new(3, 0));
        let q = g.as_inner().clone().qr().q();
        let u = ComplexMatrix::new(q).unwrap();
        for s in singular_values_vec(&u).unwrap() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_examples() {
        let d = ComplexMatrix::diagonal(&[c(1.0, 1.0), c(2.0, 0.0)]);
        let mut ev = eigenvalues_vec(&d).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(1.0, 1.0)).norm() < 1e-14);
        assert!((ev[1] - c(2.0, 0.0)).norm() < 1e-14);

        for z in eigenvalues_vec(&nilpotent_shift(10)).unwrap() {
            assert!(z.norm() < 1e-6, "{z}");
        }
    }

    #[test]
    fn corner_perturbed_shift_has_roots_of_delta() {
        // Characteristic polynomial λⁿ − δ.
        let n = 8;
        let delta: f64 = 0.5;
        let mut a = nilpotent_shift(n);
        a.set(0, n - 1, c(delta, 0.0));
        let radius = delta.powf(1.0 / n as f64);
        let ev = eigenvalues_vec(&a).unwrap();
        assert_eq!(ev.len(), n);
        for z in &ev {
            assert!((z.norm() - radius).abs() < 1e-10);
            assert!((z.powu(n as u32) - c(delta, 0.0)).norm() < 1e-10);
        }
        // distinct roots: pairwise separated
        for i in 0..n {
            for j in i + 1..n {
                assert!((ev[i] - ev[j]).norm() > 0.1);
            }
        }
    }

    #[test]
    fn word_moment_examples() {
        let w: StarWord = "a a* a a*".parse().unwrap();
        assert_eq!(word_moment(&ComplexMatrix::identity(4), &w), c(1.0, 0.0));

        let n = 11;
        let xi = nilpotent_shift(n);
        let m = word_moment(&xi, &"a a*".parse().unwrap());
        assert!((m - c((n as f64 - 1.0) / n as f64, 0.0)).norm() < 1e-15);
        assert!("".parse::<StarWord>().is_err());
        assert!("ab".parse::<StarWord>().is_err());
    }

    #[test]
    fn word_moment_agrees_with_entry_sum() {
        for stream in 0..5 {
            let g = sample_ginibre(9, SeedSpec::new(11, stream));
            let m = word_moment(&g, &StarWord::alternating(1).unwrap());
            let direct = g.frobenius_sq() / 9.0;
            assert!((m.re - direct).abs() < 1e-12);
            assert!(m.im.abs() < 1e-12);
        }
    }

    #[test]
    fn determinant_pipelines_agree() {
        for stream in 0..6 {
            let n = 3 + stream as usize * 5;
            let a = sample_ginibre(n, SeedSpec::new(5, stream));
            let sv: f64 = singular_values_vec(&a).unwrap().iter().product();
            let ev = abs_det_by_eigs(&a);
            let lu = a.as_inner().determinant().norm();
            let tol = 1e-8 * n as f64;
            assert!((sv - lu).abs() <= tol * lu, "sv {sv} lu {lu}");
            assert!((ev - lu).abs() <= tol * lu, "ev {ev} lu {lu}");
        }
    }

    #[test]
    fn hessenberg_pivots_give_abs_det() {
        let a = sample_ginibre(15, SeedSpec::new(8, 1));
        let h = hessenberg(&a);
        let mut piv = Vec::new();
        for lambda in [c(0.0, 0.0), c(0.3, -0.2), c(2.0, 1.0)] {
            hessenberg_pivots(&h, lambda, &mut piv);
            let log_lu: f64 = piv.iter().map(|p| p.ln()).sum();
            let log_sv: f64 = singular_values_vec(&a.shifted(lambda))
                .unwrap()
                .iter()
                .map(|s| s.ln())
                .sum();
            assert!((log_lu - log_sv).abs() < 1e-10, "{log_lu} {log_sv}");
        }
    }
}
