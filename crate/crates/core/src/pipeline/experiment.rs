use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::schedule::schedule_t;
use crate::brown::{
    brown_density, log_potential_field, measure_distance, oracle_brown, oracle_potential, BrownDensityGrid,
    BrownOracle, DistanceMethod, EmpiricalMeasure, LogPotentialField,
};
use crate::ensembles::{realize, sample_ginibre, tags, EnsembleSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::fk::trace_log_abs;
use crate::linalg::{eigenvalues_vec, singular_values_vec, ComplexMatrix, C64};
use crate::stats::MeanEstimate;

/// One (n, trial) job of a regularization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub t: f64,
    pub trial: usize,
    pub distance: Option<f64>,
    /// √t·s₁(G), the operator norm of the Gaussian correction.
    pub correction_norm: Option<f64>,
    /// tr ln|A + √t·G|, the log FK determinant of the regularized matrix.
    pub log_fk: Option<f64>,
    /// Diagnostic when the cell failed; the other numeric fields are then absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Output files keyed by role, relative to the report directory.
    pub files: BTreeMap<String, String>,
    #[serde(skip)]
    pub eigenvalues: Vec<C64>,
    #[serde(skip)]
    pub field: Option<LogPotentialField>,
    #[serde(skip)]
    pub density: Option<BrownDensityGrid>,
}

/// Per-dimension aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub t: f64,
    pub completed: usize,
    pub failed: usize,
    pub mean_distance: Option<f64>,
    pub stderr_distance: Option<f64>,
    pub max_correction_norm: Option<f64>,
    pub mean_log_fk: Option<f64>,
    pub stderr_log_fk: Option<f64>,
    /// ln Δ(x) of the target operator, for comparison with `mean_log_fk`.
    pub target_log_fk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub summary: Vec<NSummary>,
    pub versions: BTreeMap<String, String>,
}

pub(crate) fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("brownreg".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("report_format".to_string(), "1".to_string()),
    ])
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Seed of trial `trial` at dimension `n`; the regularizer and the base
/// matrix draw from disjoint substreams of it.
fn cell_seed(root: u64, n: usize, trial: usize) -> SeedSpec {
    SeedSpec::new(root, trial as u64).substream(n as u64)
}

pub(crate) fn eigen_file(n: usize) -> String {
    format!("eigenvalues_n{n}.csv")
}

fn compute_cell(cfg: &ExperimentConfig, n: usize, t: f64, trial: usize) -> Result<Cell> {
    let spec = EnsembleSpec::new(cfg.ensemble.clone(), n)?;
    let seed = cell_seed(cfg.root_seed, n, trial);
    let a = realize(&spec, seed.substream(tags::BASE))?;
    let g = sample_ginibre(n, seed.substream(tags::REGULARIZER));
    let at = &a + &g.scale(t.sqrt());
    let eig = eigenvalues_vec(&at)?;
    let s1 = singular_values_vec(&g)?[0];
    let log_fk = trace_log_abs(&at, C64::new(0.0, 0.0))?.value;
    let distance = match &cfg.target {
        Some(o) => Some(measure_distance(&EmpiricalMeasure::from_points(&eig), &oracle_brown(o)?, cfg.distance_method)?),
        None => None,
    };
    let mut files = BTreeMap::from([("eigenvalues".to_string(), eigen_file(n))]);
    let (field, density) = match cfg.grid {
        Some(grid) => {
            let f = log_potential_field(&at, grid)?;
            let d = brown_density(&f);
            files.insert("field".into(), format!("field_n{n}_trial{trial}.csv"));
            files.insert("density".into(), format!("density_n{n}_trial{trial}.csv"));
            (Some(f), Some(d))
        }
        None => (None, None),
    };
    Ok(Cell {
        n,
        t,
        trial,
        distance,
        correction_norm: Some(t.sqrt() * s1),
        log_fk: finite(log_fk),
        error: None,
        files,
        eigenvalues: eig,
        field,
        density,
    })
}

fn summarize(n: usize, t: f64, cells: &[Cell], target: Option<&BrownOracle>) -> NSummary {
    let ok: Vec<&Cell> = cells.iter().filter(|c| c.error.is_none()).collect();
    let distances: Vec<f64> = ok.iter().filter_map(|c| c.distance).collect();
    let logs: Vec<f64> = ok.iter().filter_map(|c| c.log_fk).collect();
    let d = MeanEstimate::from_samples(&distances);
    let l = MeanEstimate::from_samples(&logs);
    NSummary {
        n,
        t,
        completed: ok.len(),
        failed: cells.len() - ok.len(),
        mean_distance: finite(d.mean),
        stderr_distance: finite(d.stderr),
        max_correction_norm: ok.iter().filter_map(|c| c.correction_norm).reduce(f64::max),
        mean_log_fk: finite(l.mean),
        stderr_log_fk: finite(l.stderr),
        target_log_fk: target.and_then(|o| oracle_potential(o, C64::new(0.0, 0.0)).ok()),
    }
}

/// Regularizes `config.ensemble` at every n in `n_list` with variance t_N and
/// records spectra, distances to the target and correction sizes.
///
/// A failing cell keeps its place in the report with `error` set; the rest
/// of the run proceeds.
pub fn run_regularization(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut jobs = Vec::new();
    for &n in &config.n_list {
        let t = schedule_t(&config.schedule, n)?;
        for trial in 0..config.trials {
            jobs.push((n, t, trial));
        }
    }
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(n, t, trial)| {
            compute_cell(config, n, t, trial).unwrap_or_else(|e| Cell {
                n,
                t,
                trial,
                distance: None,
                correction_norm: None,
                log_fk: None,
                error: Some(e.to_string()),
                files: BTreeMap::new(),
                eigenvalues: Vec::new(),
                field: None,
                density: None,
            })
        })
        .collect();
    let summary = config
        .n_list
        .iter()
        .map(|&n| {
            let group: Vec<Cell> = cells.iter().filter(|c| c.n == n).cloned().collect();
            let t = group.first().map_or(0.0, |c| c.t);
            summarize(n, t, &group, config.target.as_ref())
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        cells,
        summary,
        versions: versions(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub mean_distance: f64,
    pub stderr: f64,
    /// Median eigenvalue modulus pooled over trials.
    pub median_modulus: f64,
    /// √t is below 1e3·ε·‖A‖, so eigensolver backward error is comparable
    /// to the regularization.
    pub numerically_unfaithful: bool,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub n: usize,
    pub trials: usize,
    pub target: BrownOracle,
    pub method: DistanceMethod,
    pub root_seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_distance,stderr,median_modulus,numerically_unfaithful\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{}\n",
                r.t, r.mean_distance, r.stderr, r.median_modulus, r.numerically_unfaithful
            ));
        }
        out
    }

    /// Index of the row with the smallest mean distance.
    pub fn best(&self) -> Option<usize> {
        (0..self.rows.len()).min_by(|&i, &j| self.rows[i].mean_distance.total_cmp(&self.rows[j].mean_distance))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Distance to `target` as a function of t at fixed n.
///
/// Trial k uses the same base matrix and the same Ginibre matrix G for every
/// t (common random numbers), so differences between rows reflect t alone.
pub fn sweep_t(
    ensemble: &EnsembleSpec,
    t_list: &[f64],
    trials: usize,
    target: &BrownOracle,
    method: DistanceMethod,
    seed: u64,
) -> Result<SweepTable> {
    ensemble.validate()?;
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) || t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("t_list must be nonempty, positive and strictly ascending".into()));
    }
    if trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    let reference = oracle_brown(target)?;
    let n = ensemble.n;

    // per trial: (‖A‖, per-t (distance, moduli))
    type TrialOut = (f64, Vec<(f64, Vec<f64>)>);
    let per_trial: Vec<TrialOut> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialOut> {
            let s = cell_seed(seed, n, trial);
            let a = realize(ensemble, s.substream(tags::BASE))?;
            let g = sample_ginibre(n, s.substream(tags::REGULARIZER));
            let norm_a = singular_values_vec(&a)?[0];
            let rows = t_list
                .iter()
                .map(|&t| {
                    let m: ComplexMatrix = &a + &g.scale(t.sqrt());
                    let eig = eigenvalues_vec(&m)?;
                    let d = measure_distance(&EmpiricalMeasure::from_points(&eig), &reference, method)?;
                    Ok((d, eig.iter().map(|z| z.norm()).collect()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((norm_a, rows))
        })
        .collect::<Result<_>>()?;

    let norm_a = per_trial.iter().map(|p| p.0).fold(0.0, f64::max);
    let rows = t_list
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let distances: Vec<f64> = per_trial.iter().map(|p| p.1[k].0).collect();
            let moduli: Vec<f64> = per_trial.iter().flat_map(|p| p.1[k].1.iter().copied()).collect();
            let est = MeanEstimate::from_samples(&distances);
            SweepRow {
                t,
                mean_distance: est.mean,
                stderr: if trials > 1 { est.stderr } else { 0.0 },
                median_modulus: median(moduli),
                numerically_unfaithful: t.sqrt() < 1e3 * f64::EPSILON * norm_a,
                distances,
            }
        })
        .collect();
    Ok(SweepTable {
        n,
        trials,
        target: *target,
        method,
        root_seed: seed,
        rows,
    })
}
