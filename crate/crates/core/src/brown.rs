//! Log-potential fields, discrete-Laplacian Brown densities, empirical
//! spectral measures, analytic reference measures and distances between
//! them.
//!
//! The log-potential L(λ) = tr ln|a − λ| is evaluated on a uniform square
//! grid. Its 5-point Laplacian divided by 2π is the discrete Brown density;
//! summed over a window it telescopes to the discrete flux of L through the
//! window boundary, which is what makes region masses count eigenvalues.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{mean_floored_log, SINGULAR_FLOOR};
use crate::linalg::{hessenberg, hessenberg_pivots, ComplexMatrix, C64};

/// Uniform square grid over ℂ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: C64,
    pub half_width: f64,
    pub nodes_per_side: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            center: C64::new(0.0, 0.0),
            half_width: 1.6,
            nodes_per_side: 101,
        }
    }
}

impl GridSpec {
    pub fn new(center: C64, half_width: f64, nodes_per_side: usize) -> Result<Self> {
        let g = GridSpec { center, half_width, nodes_per_side };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Usage(format!("grid half-width must be positive, got {}", self.half_width)));
        }
        if self.nodes_per_side < 3 || self.nodes_per_side % 2 == 0 {
            return Err(Error::Usage(format!(
                "nodes per side must be odd and at least 3, got {}",
                self.nodes_per_side
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes_per_side - 1) as f64
    }

    /// Node at column `j` (real direction) and row `k` (imaginary direction).
    pub fn node(&self, j: usize, k: usize) -> C64 {
        let h = self.spacing();
        self.center + C64::new(-self.half_width + j as f64 * h, -self.half_width + k as f64 * h)
    }
}

/// L(λ) = tr ln|a − λ| sampled on a grid, stored row-major with rows along
/// the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPotentialField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl LogPotentialField {
    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[k * self.grid.nodes_per_side + j]
    }

    /// Tabulates a closed-form potential on the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(C64) -> f64) -> Result<Self> {
        grid.validate()?;
        let m = grid.nodes_per_side;
        let mut values = Vec::with_capacity(m * m);
        for k in 0..m {
            for j in 0..m {
                values.push(f(grid.node(j, k)));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("potential is not finite on the grid".into()));
        }
        Ok(LogPotentialField {
            grid,
            clamped: vec![false; m * m],
            values,
        })
    }

    /// CSV with header `re,im,L,clamped`, one row per node, rows of the grid in order.
    pub fn to_csv(&self) -> String {
        let m = self.grid.nodes_per_side;
        let mut out = String::from("re,im,L,clamped\n");
        for k in 0..m {
            for j in 0..m {
                let z = self.grid.node(j, k);
                let idx = k * m + j;
                writeln!(out, "{:.16e},{:.16e},{:.16e},{}", z.re, z.im, self.values[idx], self.clamped[idx] as u8)
                    .unwrap();
            }
        }
        out
    }
}

/// Evaluates tr ln|a − λ| at every grid node.
///
/// `a` is reduced once to upper Hessenberg form H = Q*aQ; each node then
/// costs one O(n²) Hessenberg LU, and ln|det(H − λ)| = Σ ln|pivot|. Pivots
/// below the singular-value floor are floored and the node is marked clamped.
pub fn log_potential_field(a: &ComplexMatrix, grid: GridSpec) -> Result<LogPotentialField> {
    grid.validate()?;
    let h = hessenberg(a);
    let m = grid.nodes_per_side;
    let rows: Vec<Vec<(f64, bool)>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut pivots = Vec::with_capacity(a.n());
            (0..m)
                .map(|j| {
                    hessenberg_pivots(&h, grid.node(j, k), &mut pivots);
                    let t = mean_floored_log(&pivots);
                    (t.value, t.clamped)
                })
                .collect()
        })
        .collect();
    let (values, clamped) = rows.into_iter().flatten().unzip();
    Ok(LogPotentialField { grid, values, clamped })
}

/// Brown density on the interior nodes of a field's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownDensityGrid {
    pub center: C64,
    pub spacing: f64,
    pub nodes_per_side: usize,
    /// Row-major, rows along the imaginary axis. Per unit area.
    pub density: Vec<f64>,
}

impl BrownDensityGrid {
    pub fn node(&self, j: usize, k: usize) -> C64 {
        let mid = (self.nodes_per_side - 1) as f64 / 2.0;
        self.center + C64::new((j as f64 - mid) * self.spacing, (k as f64 - mid) * self.spacing)
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.density[k * self.nodes_per_side + j]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        let m = self.nodes_per_side;
        (0..m * m).map(move |idx| (self.node(idx % m, idx / m), self.density[idx]))
    }

    /// CSV with header `re,im,density`. `clip` replaces negative values by 0.
    pub fn to_csv(&self, clip: bool) -> String {
        let mut out = String::from("re,im,density\n");
        for (z, d) in self.nodes() {
            let d = if clip { d.max(0.0) } else { d };
            writeln!(out, "{:.16e},{:.16e},{:.16e}", z.re, z.im, d).unwrap();
        }
        out
    }
}

/// (1/2π)·(5-point Laplacian of L) on interior nodes. Negative values from
/// discretization are kept.
pub fn brown_density(field: &LogPotentialField) -> BrownDensityGrid {
    let m = field.grid.nodes_per_side;
    let h = field.grid.spacing();
    let inner = m - 2;
    let mut density = Vec::with_capacity(inner * inner);
    for k in 1..m - 1 {
        for j in 1..m - 1 {
            let lap = field.value(j + 1, k) + field.value(j - 1, k) + field.value(j, k + 1) + field.value(j, k - 1)
                - 4.0 * field.value(j, k);
            density.push(lap / (h * h) / (2.0 * PI));
        }
    }
    BrownDensityGrid {
        center: field.grid.center,
        spacing: h,
        nodes_per_side: inner,
        density,
    }
}

/// h²·Σ density over nodes inside `region`.
pub fn region_mass(density: &BrownDensityGrid, region: impl Fn(C64) -> bool) -> f64 {
    let h2 = density.spacing * density.spacing;
    density.nodes().filter(|(z, _)| region(*z)).map(|(_, d)| d).sum::<f64>() * h2
}

/// A weighted sum of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub re: f64,
    pub im: f64,
    pub w: f64,
}

impl Atom {
    pub fn location(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

impl EmpiricalMeasure {
    /// (1/n)·Σ δ_{λᵢ}.
    pub fn from_points(points: &[C64]) -> Self {
        let w = 1.0 / points.len() as f64;
        EmpiricalMeasure {
            atoms: points.iter().map(|z| Atom { re: z.re, im: z.im, w }).collect(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// `{"atoms":[{"re":…,"im":…,"w":…}]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("measure JSON: {e}")))
    }
}

/// Operators whose Brown measure and log-potential are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum BrownOracle {
    /// shift + √t·c with c circular.
    CircularScaled { t: f64, shift: C64 },
    HaarUnitary,
    Atom { at: C64 },
    Elliptic { tau: f64 },
}

impl BrownOracle {
    pub fn circular() -> Self {
        BrownOracle::CircularScaled { t: 1.0, shift: C64::new(0.0, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BrownOracle::CircularScaled { t, .. } if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::Domain(format!("oracle variance t must be nonnegative, got {t}")))
            }
            BrownOracle::Elliptic { tau } if !(-1.0..=1.0).contains(&tau) => {
                Err(Error::Domain(format!("elliptic parameter {tau} outside [-1, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// ln Δ(x − λ) for the oracle's operator x.
pub fn oracle_potential(o: &BrownOracle, lambda: C64) -> Result<f64> {
    o.validate()?;
    Ok(match *o {
        BrownOracle::CircularScaled { t, shift } if t == 0.0 => {
            (lambda - shift).norm().max(SINGULAR_FLOOR).ln()
        }
        BrownOracle::CircularScaled { t, shift } => {
            let r = (lambda - shift).norm() / t.sqrt();
            let base = 0.5 * t.ln();
            if r <= 1.0 {
                base + (r * r - 1.0) / 2.0
            } else {
                base + r.ln()
            }
        }
        BrownOracle::HaarUnitary => lambda.norm().ln().max(0.0),
        BrownOracle::Atom { at } => (lambda - at).norm().max(SINGULAR_FLOOR).ln(),
        BrownOracle::Elliptic { .. } => {
            return Err(Error::Usage("no closed-form log-potential is provided for the elliptic oracle".into()))
        }
    })
}

/// An analytically described reference measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceMeasure {
    /// Uniform on the disk.
    Disk { center: C64, radius: f64 },
    /// Uniform on the circle.
    Circle { center: C64, radius: f64 },
    PointMass { at: C64 },
    /// Uniform on the ellipse with the given semi-axes along the real and imaginary directions.
    Ellipse { center: C64, semi_re: f64, semi_im: f64 },
}

pub fn oracle_brown(o: &BrownOracle) -> Result<ReferenceMeasure> {
    o.validate()?;
    Ok(match *o {
        BrownOracle::CircularScaled { t, shift } if t == 0.0 => ReferenceMeasure::PointMass { at: shift },
        BrownOracle::CircularScaled { t, shift } => ReferenceMeasure::Disk { center: shift, radius: t.sqrt() },
        BrownOracle::HaarUnitary => ReferenceMeasure::Circle { center: C64::new(0.0, 0.0), radius: 1.0 },
        BrownOracle::Atom { at } => ReferenceMeasure::PointMass { at },
        BrownOracle::Elliptic { tau } => ReferenceMeasure::Ellipse {
            center: C64::new(0.0, 0.0),
            semi_re: 1.0 + tau,
            semi_im: 1.0 - tau,
        },
    })
}

/// Number of points in the deterministic reference discretization.
pub const REFERENCE_POINTS: usize = 2048;

impl ReferenceMeasure {
    pub fn center(&self) -> C64 {
        match *self {
            ReferenceMeasure::Disk { center, .. }
            | ReferenceMeasure::Circle { center, .. }
            | ReferenceMeasure::Ellipse { center, .. } => center,
            ReferenceMeasure::PointMass { at } => at,
        }
    }

    pub fn is_rotation_invariant(&self) -> bool {
        match *self {
            ReferenceMeasure::Ellipse { semi_re, semi_im, .. } => semi_re == semi_im,
            _ => true,
        }
    }

    /// P(|Z − center| ≤ r) and P(|Z − center| < r).
    fn radial_cdf(&self, r: f64) -> (f64, f64) {
        match *self {
            ReferenceMeasure::Disk { radius, .. } => {
                let f = (r / radius).powi(2).min(1.0);
                (f, f)
            }
            ReferenceMeasure::Ellipse { semi_re, .. } => {
                let f = (r / semi_re).powi(2).min(1.0);
                (f, f)
            }
            ReferenceMeasure::Circle { radius, .. } => {
                (if r >= radius { 1.0 } else { 0.0 }, if r > radius { 1.0 } else { 0.0 })
            }
            ReferenceMeasure::PointMass { .. } => (1.0, if r > 0.0 { 1.0 } else { 0.0 }),
        }
    }

    fn jump_radii(&self) -> Vec<f64> {
        match *self {
            ReferenceMeasure::Circle { radius, .. } => vec![radius],
            ReferenceMeasure::PointMass { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Deterministic quasi-uniform points: a golden-angle (Vogel) spiral for
    /// disks and ellipses, equally spaced angles for circles.
    pub fn discretize(&self, count: usize) -> Vec<C64> {
        let golden = PI * (3.0 - 5f64.sqrt());
        let spiral = |k: usize| {
            let r = ((k as f64 + 0.5) / count as f64).sqrt();
            let th = k as f64 * golden;
            (r * th.cos(), r * th.sin())
        };
        (0..count)
            .map(|k| match *self {
                ReferenceMeasure::Disk { center, radius } => {
                    let (x, y) = spiral(k);
                    center + C64::new(radius * x, radius * y)
                }
                ReferenceMeasure::Ellipse { center, semi_re, semi_im } => {
                    let (x, y) = spiral(k);
                    center + C64::new(semi_re * x, semi_im * y)
                }
                ReferenceMeasure::Circle { center, radius } => {
                    let th = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                    center + C64::from_polar(radius, th)
                }
                ReferenceMeasure::PointMass { at } => at,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    RadialKs,
    Energy,
}

impl std::str::FromStr for DistanceMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial_ks" | "ks" => Ok(DistanceMethod::RadialKs),
            "energy" => Ok(DistanceMethod::Energy),
            other => Err(Error::Config(format!("unknown distance method {other:?}"))),
        }
    }
}

/// Distance between an empirical measure and a reference measure.
pub fn measure_distance(mu: &EmpiricalMeasure, reference: &ReferenceMeasure, method: DistanceMethod) -> Result<f64> {
    if mu.atoms.is_empty() {
        return Err(Error::Usage("empirical measure has no atoms".into()));
    }
    match method {
        DistanceMethod::RadialKs => radial_ks(mu, reference),
        DistanceMethod::Energy => Ok(energy_to_reference(mu, reference)),
    }
}

fn radial_ks(mu: &EmpiricalMeasure, reference: &ReferenceMeasure) -> Result<f64> {
    if !reference.is_rotation_invariant() {
        return Err(Error::Usage("radial KS needs a rotation-invariant reference".into()));
    }
    let c = reference.center();
    let total = mu.total_weight();
    let mut radial: Vec<(f64, f64)> = mu.atoms.iter().map(|a| ((a.location() - c).norm(), a.w / total)).collect();
    radial.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut candidates: Vec<f64> = radial.iter().map(|p| p.0).collect();
    candidates.extend(reference.jump_radii());
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut sup: f64 = 0.0;
    let mut below = 0.0; // mass with radius < r
    let mut idx = 0;
    for &r in &candidates {
        while idx < radial.len() && radial[idx].0 < r {
            below += radial[idx].1;
            idx += 1;
        }
        let mut at_or_below = below;
        let mut k = idx;
        while k < radial.len() && radial[k].0 == r {
            at_or_below += radial[k].1;
            k += 1;
        }
        let (f, f_left) = reference.radial_cdf(r);
        sup = sup.max((at_or_below - f).abs()).max((below - f_left).abs());
    }
    Ok(sup.min(1.0))
}

fn weighted_energy_terms(a: &[(C64, f64)], b: &[(C64, f64)]) -> f64 {
    let mut s = 0.0;
    for &(x, wx) in a {
        for &(y, wy) in b {
            s += wx * wy * (x - y).norm();
        }
    }
    s
}

fn energy_to_reference(mu: &EmpiricalMeasure, reference: &ReferenceMeasure) -> f64 {
    let total = mu.total_weight();
    let atoms: Vec<(C64, f64)> = mu.atoms.iter().map(|a| (a.location(), a.w / total)).collect();
    let w = 1.0 / REFERENCE_POINTS as f64;
    let refs: Vec<(C64, f64)> = reference.discretize(REFERENCE_POINTS).into_iter().map(|z| (z, w)).collect();
    let cross = weighted_energy_terms(&atoms, &refs);
    let within_mu = weighted_energy_terms(&atoms, &atoms);
    let within_ref = weighted_energy_terms(&refs, &refs);
    (2.0 * cross - within_mu - within_ref).max(0.0)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
