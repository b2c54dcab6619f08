//! Seeded random-matrix samplers and the text matrix file format.
//!
//! Every sampler is a pure function of its [`SeedSpec`]. A seed names a
//! ChaCha8 key (`root_seed`) and a ChaCha stream (`stream_id`); distinct
//! stream ids under one key are disjoint keystreams, so trials never share
//! random numbers. Sub-streams for the parts of a composite matrix are
//! derived with [`SeedSpec::substream`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_id: u64) -> Self {
        SeedSpec { root_seed, stream_id }
    }

    /// The generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child stream keyed by `tag`. The child keeps the stream id and moves
    /// to the key `splitmix64(root_seed ^ splitmix64(tag))`, so children of
    /// different tags, and children of different parents, never coincide with
    /// each other or with the parent.
    pub fn substream(&self, tag: u64) -> SeedSpec {
        SeedSpec {
            root_seed: splitmix64(self.root_seed ^ splitmix64(tag)),
            stream_id: self.stream_id,
        }
    }
}

/// Stream tags used when one trial needs several independent matrices.
pub mod tags {
    pub const BASE: u64 = 1;
    pub const REGULARIZER: u64 = 2;
    pub const FLOW_NOISE: u64 = 3;
    pub const SUM_TERM: u64 = 0x100;
}

fn gaussian_matrix(n: usize, variance: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let sd = variance.sqrt();
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        entries.push(C64::new(sd * re, sd * im));
    }
    // entries are drawn row-major
    ComplexMatrix::from_fn(n, |i, j| entries[i * n + j])
}

/// Standard Gaussian (Ginibre) matrix: every real and imaginary part is an
/// independent N(0, 1/(2n)).
pub fn sample_ginibre(n: usize, seed: SeedSpec) -> ComplexMatrix {
    assert!(n >= 1);
    gaussian_matrix(n, 1.0 / (2.0 * n as f64), &mut seed.rng())
}

fn gue_from_rng(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let off_sd = (1.0 / (2.0 * n as f64)).sqrt();
    let diag_sd = (1.0 / n as f64).sqrt();
    let mut m = ComplexMatrix::zeros(n);
    for i in 0..n {
        let d: f64 = StandardNormal.sample(rng);
        m.set(i, i, C64::new(diag_sd * d, 0.0));
        for j in i + 1..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let z = C64::new(off_sd * re, off_sd * im);
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    m
}

/// Hermitian GUE matrix normalized so that E tr H² = 1.
pub fn sample_gue(n: usize, seed: SeedSpec) -> ComplexMatrix {
    assert!(n >= 1);
    gue_from_rng(n, &mut seed.rng())
}

/// √((1+τ)/2)·H₁ + i·√((1−τ)/2)·H₂ with independent GUE H₁, H₂.
pub fn sample_elliptic(n: usize, tau: f64, seed: SeedSpec) -> Result<ComplexMatrix> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("elliptic parameter {tau} outside [-1, 1]")));
    }
    let mut rng = seed.rng();
    let h1 = gue_from_rng(n, &mut rng);
    let h2 = gue_from_rng(n, &mut rng);
    let a = ((1.0 + tau) / 2.0).sqrt();
    let b = ((1.0 - tau) / 2.0).sqrt();
    Ok(ComplexMatrix::from_fn(n, |i, j| {
        h1.get(i, j) * a + C64::new(0.0, b) * h2.get(i, j)
    }))
}

/// Increment of the matrix Brownian motion over a step `dt`: each real and
/// imaginary part is N(0, dt/(2n)).
pub fn brownian_increment(n: usize, dt: f64, seed: SeedSpec) -> Result<ComplexMatrix> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    Ok(gaussian_matrix(n, dt / (2.0 * n as f64), &mut seed.rng()))
}

/// Ξ⁽ⁿ⁾: ones on the first subdiagonal.
pub fn nilpotent_shift(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| {
        if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// A random-matrix model, independent of dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Ginibre,
    Gue,
    Elliptic { tau: f64 },
    NilpotentShift,
    Diagonal { values: Vec<C64> },
    File { path: PathBuf },
    Scaled { factor: f64, inner: Box<Model> },
    Sum { terms: Vec<Model> },
}

/// A model together with the matrix dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub model: Model,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn new(model: Model, n: usize) -> Result<Self> {
        let spec = EnsembleSpec { model, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Usage("ensemble dimension must be at least 1".into()));
        }
        fn check(m: &Model, n: usize) -> Result<()> {
            match m {
                Model::Elliptic { tau } if !(-1.0..=1.0).contains(tau) => {
                    Err(Error::Domain(format!("elliptic parameter {tau} outside [-1, 1]")))
                }
                Model::Diagonal { values } if values.len() != n => Err(Error::Usage(format!(
                    "diagonal model has {} values but n = {n}",
                    values.len()
                ))),
                Model::Scaled { factor, inner } => {
                    if !factor.is_finite() {
                        return Err(Error::Domain("scale factor must be finite".into()));
                    }
                    check(inner, n)
                }
                Model::Sum { terms } if terms.is_empty() => {
                    Err(Error::Usage("sum model needs at least one term".into()))
                }
                Model::Sum { terms } => terms.iter().try_for_each(|t| check(t, n)),
                _ => Ok(()),
            }
        }
        check(&self.model, self.n)
    }
}

fn realize_model(model: &Model, n: usize, seed: SeedSpec) -> Result<ComplexMatrix> {
    Ok(match model {
        Model::Ginibre => sample_ginibre(n, seed),
        Model::Gue => sample_gue(n, seed),
        Model::Elliptic { tau } => sample_elliptic(n, *tau, seed)?,
        Model::NilpotentShift => nilpotent_shift(n),
        Model::Diagonal { values } => {
            if values.len() != n {
                return Err(Error::Usage("diagonal length does not match n".into()));
            }
            ComplexMatrix::diagonal(values)
        }
        Model::File { path } => {
            let m = read_matrix(path)?;
            if m.n() != n {
                return Err(Error::Usage(format!(
                    "{} holds a {}x{} matrix but n = {n}",
                    path.display(),
                    m.n(),
                    m.n()
                )));
            }
            m
        }
        Model::Scaled { factor, inner } => realize_model(inner, n, seed)?.scale(*factor),
        Model::Sum { terms } => {
            let mut acc = ComplexMatrix::zeros(n);
            for (k, term) in terms.iter().enumerate() {
                let part = realize_model(term, n, seed.substream(tags::SUM_TERM + k as u64))?;
                acc = &acc + &part;
            }
            acc
        }
    })
}

/// Draws one matrix from `spec`. Pure in `(spec, seed)`.
pub fn realize(spec: &EnsembleSpec, seed: SeedSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    realize_model(&spec.model, spec.n, seed)
}

impl FromStr for Model {
    type Err = Error;

    /// Parses ensemble expressions such as
    /// `nilpotent_shift + 0.1*ginibre`, `elliptic(0.5)`, `diagonal(1, 2+1i)`
    /// or `file(path/to/matrix.txt)`.
    fn from_str(s: &str) -> Result<Self> {
        let terms = split_top_level(s, '+')?;
        let mut parsed: Vec<Model> = terms.iter().map(|t| parse_term(t)).collect::<Result<_>>()?;
        if parsed.len() == 1 {
            Ok(parsed.pop().unwrap())
        } else {
            Ok(Model::Sum { terms: parsed })
        }
    }
}

fn split_top_level(s: &str, sep: char) -> Result<Vec<String>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    let mut prev_exp = false;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Config(format!("unbalanced parentheses in {s:?}")));
                }
            }
            _ => {}
        }
        // `+` after an exponent marker belongs to a number such as 1e+3
        if c == sep && depth == 0 && !prev_exp {
            parts.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
        prev_exp = (c == 'e' || c == 'E') && current.len() > 1 && {
            let before = &current[..current.len() - 1];
            before.chars().last().is_some_and(|p| p.is_ascii_digit() || p == '.')
        };
    }
    if depth != 0 {
        return Err(Error::Config(format!("unbalanced parentheses in {s:?}")));
    }
    parts.push(current);
    let parts: Vec<String> = parts.into_iter().map(|p| p.trim().to_string()).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("empty term in ensemble expression {s:?}")));
    }
    Ok(parts)
}

fn parse_term(term: &str) -> Result<Model> {
    if let Some((factor, rest)) = split_factor(term) {
        let factor: f64 = factor
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad scale factor in {term:?}")))?;
        return Ok(Model::Scaled {
            factor,
            inner: Box::new(parse_term(rest.trim())?),
        });
    }
    let (name, arg) = match term.find('(') {
        Some(open) => {
            if !term.ends_with(')') {
                return Err(Error::Config(format!("expected closing parenthesis in {term:?}")));
            }
            (term[..open].trim(), Some(&term[open + 1..term.len() - 1]))
        }
        None => (term.trim(), None),
    };
    match (name, arg) {
        ("ginibre", None) => Ok(Model::Ginibre),
        ("gue", None) => Ok(Model::Gue),
        ("nilpotent_shift", None) | ("shift", None) => Ok(Model::NilpotentShift),
        ("elliptic", Some(a)) => {
            let tau: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad elliptic parameter {a:?}")))?;
            Ok(Model::Elliptic { tau })
        }
        ("diagonal", Some(a)) => {
            let values = a
                .split(',')
                .map(|v| {
                    let v: String = v.chars().filter(|c| !c.is_whitespace()).collect();
                    C64::from_str(&v).map_err(|_| Error::Config(format!("bad complex value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Model::Diagonal { values })
        }
        ("file", Some(a)) => Ok(Model::File {
            path: PathBuf::from(a.trim()),
        }),
        _ => Err(Error::Config(format!("unknown ensemble term {term:?}"))),
    }
}

/// Splits `2.5*ginibre` into ("2.5", "ginibre") when the `*` is outside parentheses.
fn split_factor(term: &str) -> Option<(&str, &str)> {
    let mut depth = 0;
    for (i, c) in term.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' if depth == 0 => return Some((&term[..i], &term[i + 1..])),
            _ => {}
        }
    }
    None
}

/// Renders a matrix in the text format: first line `n`, then one line per
/// row with `re im` pairs at 17 significant digits.
pub fn format_matrix(m: &ComplexMatrix) -> String {
    let n = m.n();
    let mut out = format!("{n}\n");
    for i in 0..n {
        for j in 0..n {
            let z = m.get(i, j);
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e} {:.16e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

/// Parses the text format. `origin` only labels error messages.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<ComplexMatrix> {
    let err = |line: usize, msg: String| Error::Ingest {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (idx, header) = lines.next().ok_or_else(|| err(1, "empty matrix file".into()))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| err(idx + 1, format!("expected dimension, found {:?}", header.trim())))?;
    if n == 0 {
        return Err(err(idx + 1, "dimension must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| err(idx + 2 + r, format!("missing row {} of {n}", r + 1)))?;
        let nums: Vec<&str> = line.split_whitespace().collect();
        if nums.len() != 2 * n {
            return Err(err(idx + 1, format!("expected {} numbers, found {}", 2 * n, nums.len())));
        }
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let parse = |k: usize| -> Result<f64> {
                let v: f64 = nums[k]
                    .parse()
                    .map_err(|_| err(idx + 1, format!("element {}: cannot parse {:?}", k + 1, nums[k])))?;
                if !v.is_finite() {
                    return Err(err(idx + 1, format!("element {}: non-finite value", k + 1)));
                }
                Ok(v)
            };
            row.push(C64::new(parse(2 * j)?, parse(2 * j + 1)?));
        }
        rows.push(row);
    }
    if let Some((idx, _)) = lines.next() {
        return Err(err(idx + 1, "trailing data after the last row".into()));
    }
    ComplexMatrix::from_rows(&rows)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}
