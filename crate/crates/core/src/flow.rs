//! Stochastic flow of the singular values of A + M(t), where M is a
//! standard matrix Brownian motion.
//!
//! Each ordered singular value follows
//!
//! ```text
//! dλᵢ = Re dBᵢᵢ + dt/(2λᵢ)·(1 − 1/(2N) + Σ_{j≠i} (λᵢ² + λⱼ²)/(N(λᵢ² − λⱼ²)))
//! ```
//!
//! with Re dBᵢᵢ independent N(0, dt/(2N)). The integrator is explicit
//! Euler–Maruyama. A step that would break positivity or strict ordering is
//! rejected and replaced by two half steps whose increments are obtained by
//! Brownian-bridge splitting of the rejected increment, so the driving path
//! is refined rather than redrawn.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensembles::SeedSpec;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Smallest step the integrator will try before giving up.
pub const MIN_DT: f64 = 1e-12;
/// Scale of the tie-breaking jitter applied to degenerate initial data.
pub const TIE_JITTER: f64 = 1e-9;

fn check_distinct_positive(values: &[f64]) -> Result<()> {
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("singular values must be positive and finite".into()));
    }
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if values[i] == values[j] {
                return Err(Error::Domain(format!("coincident values at positions {i} and {j}")));
            }
        }
    }
    Ok(())
}

fn check_descending_positive(values: &[f64]) -> bool {
    values.iter().all(|&v| v > 0.0 && v.is_finite()) && values.windows(2).all(|w| w[0] > w[1])
}

/// Drift coefficient of each λᵢ.
pub fn drift(values: &[f64], n: usize) -> Result<Vec<f64>> {
    if values.len() != n || n == 0 {
        return Err(Error::Usage(format!("expected {n} values, got {}", values.len())));
    }
    check_distinct_positive(values)?;
    Ok(drift_unchecked(values))
}

fn drift_unchecked(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let nf = n as f64;
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    (0..n)
        .map(|i| {
            let mut s = 1.0 - 1.0 / (2.0 * nf);
            for j in 0..n {
                if j != i {
                    s += (sq[i] + sq[j]) / (nf * (sq[i] - sq[j]));
                }
            }
            s / (2.0 * values[i])
        })
        .collect()
}

/// Ordered positive singular values at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Accepted(FlowState),
    /// The step would have left the ordered positive cone.
    Rejected,
}

/// One Euler–Maruyama step: λᵢ ← λᵢ + noiseᵢ + driftᵢ·dt.
pub fn em_step(state: &FlowState, dt: f64, noise: &[f64]) -> Result<StepOutcome> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Domain(format!("step must be positive, got {dt}")));
    }
    let n = state.values.len();
    if noise.len() != n {
        return Err(Error::Usage(format!("noise has {} components, state has {n}", noise.len())));
    }
    let d = drift(&state.values, n)?;
    let next: Vec<f64> = (0..n).map(|i| state.values[i] + noise[i] + d[i] * dt).collect();
    if !check_descending_positive(&next) {
        return Ok(StepOutcome::Rejected);
    }
    Ok(StepOutcome::Accepted(FlowState {
        time: state.time + dt,
        values: next,
    }))
}

/// Increments Re dBᵢᵢ of one accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    pub dt: f64,
    pub values: Vec<f64>,
}

/// The diagonal noise driving a run. Every increment actually used is
/// recorded, so the path can be replayed into another system.
#[derive(Debug, Clone)]
pub struct NoisePath {
    n: usize,
    rng: ChaCha8Rng,
    scale: f64,
    pub increments: Vec<NoiseIncrement>,
}

impl NoisePath {
    pub fn new(n: usize, seed: SeedSpec) -> Self {
        NoisePath {
            n,
            rng: seed.rng(),
            scale: 1.0,
            increments: Vec::new(),
        }
    }

    /// A path whose increments are all zero: the flow reduces to its ODE.
    pub fn silent(n: usize) -> Self {
        NoisePath {
            scale: 0.0,
            ..Self::new(n, SeedSpec::new(0, 0))
        }
    }

    fn variance_rate(&self) -> f64 {
        1.0 / (2.0 * self.n as f64)
    }

    fn draw(&mut self, dt: f64) -> Vec<f64> {
        let sd = self.scale * (dt * self.variance_rate()).sqrt();
        (0..self.n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                sd * z
            })
            .collect()
    }

    /// Splits an increment over `dt` into two increments over `dt/2` with the
    /// correct conditional law of the midpoint.
    fn bridge(&mut self, increment: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let sd = self.scale * (dt * self.variance_rate() / 4.0).sqrt();
        let first: Vec<f64> = increment
            .iter()
            .map(|w| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                w / 2.0 + sd * z
            })
            .collect();
        let second = increment.iter().zip(&first).map(|(w, a)| w - a).collect();
        (first, second)
    }
}

/// A time-ordered sequence of accepted states.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub states: Vec<FlowState>,
    pub dt_history: Vec<f64>,
    pub seed: Option<SeedSpec>,
    /// Whether the initial data had ties or zeros and was jittered.
    pub jittered: bool,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectory has an initial state")
    }

    /// CSV with header `time,lambda_1,…,lambda_N`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let n = self.states.first().map_or(0, |s| s.values.len());
        let mut out = String::from("time");
        for i in 1..=n {
            write!(out, ",lambda_{i}").unwrap();
        }
        out.push('\n');
        for s in &self.states {
            write!(out, "{:.16e}", s.time).unwrap();
            for v in &s.values {
                write!(out, ",{:.16e}", v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Sorts checks and, when the data has ties or zeros, adds
/// `TIE_JITTER·(N − i + 1)` to the i-th value (1-based).
pub fn prepare_initial(values: &[f64]) -> Result<(Vec<f64>, bool)> {
    if values.is_empty() {
        return Err(Error::Usage("initial data is empty".into()));
    }
    if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Usage("initial singular values must be nonnegative and finite".into()));
    }
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Usage("initial singular values must be sorted descending".into()));
    }
    if check_descending_positive(values) {
        return Ok((values.to_vec(), false));
    }
    let n = values.len();
    let jittered: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v + TIE_JITTER * (n - i) as f64)
        .collect();
    if !check_descending_positive(&jittered) {
        return Err(Error::Usage("initial data is too close to degenerate for the jitter to separate".into()));
    }
    Ok((jittered, true))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub dt_init: f64,
    pub min_dt: f64,
    /// A step is also refined when some |driftᵢ|·dt exceeds this fraction of
    /// the room around λᵢ (its distance to 0 and to its neighbours). This
    /// keeps explicit steps stable where the drift is singular.
    pub drift_fraction: f64,
    /// Steps at or below this size skip the drift condition.
    pub drift_min_dt: f64,
}

impl FlowOptions {
    pub fn new(dt_init: f64) -> Self {
        FlowOptions {
            dt_init,
            min_dt: MIN_DT,
            drift_fraction: DRIFT_FRACTION,
            drift_min_dt: DRIFT_MIN_DT,
        }
    }
}

/// Default for [`FlowOptions::drift_fraction`].
pub const DRIFT_FRACTION: f64 = 0.25;
/// Default for [`FlowOptions::drift_min_dt`].
pub const DRIFT_MIN_DT: f64 = 1e-7;

fn drift_step_ok(values: &[f64], dt: f64, fraction: f64) -> Result<bool> {
    let d = drift(values, values.len())?;
    Ok((0..values.len()).all(|i| {
        let mut room = values[i];
        if i > 0 {
            room = room.min(values[i - 1] - values[i]);
        }
        if i + 1 < values.len() {
            room = room.min(values[i] - values[i + 1]);
        }
        d[i].abs() * dt <= fraction * room
    }))
}

/// Advances several systems with one shared noise path. A step is accepted
/// only when every system accepts it.
struct Coupled<'a> {
    trajectories: Vec<FlowTrajectory>,
    path: &'a mut NoisePath,
    min_dt: f64,
    drift_fraction: f64,
    drift_min_dt: f64,
}

impl Coupled<'_> {
    fn current(&self, k: usize) -> &FlowState {
        self.trajectories[k].last()
    }

    fn advance(&mut self, dt: f64, increment: Vec<f64>, end_time: f64) -> Result<()> {
        let mut next = Vec::with_capacity(self.trajectories.len());
        for k in 0..self.trajectories.len() {
            if dt > self.drift_min_dt && !drift_step_ok(&self.current(k).values, dt, self.drift_fraction)? {
                break;
            }
            match em_step(self.current(k), dt, &increment)? {
                StepOutcome::Accepted(s) => next.push(s),
                StepOutcome::Rejected => break,
            }
        }
        if next.len() == self.trajectories.len() {
            for (traj, mut state) in self.trajectories.iter_mut().zip(next) {
                state.time = end_time;
                traj.states.push(state);
                traj.dt_history.push(dt);
            }
            self.path.increments.push(NoiseIncrement { dt, values: increment });
            return Ok(());
        }
        let half = dt / 2.0;
        if half < self.min_dt {
            return Err(Error::Integrator {
                time: self.current(0).time,
                msg: format!(
                    "step size fell below {:e}; states {:?}",
                    self.min_dt,
                    self.trajectories.iter().map(|t| &t.last().values).collect::<Vec<_>>()
                ),
            });
        }
        let (first, second) = self.path.bridge(&increment, dt);
        let mid = self.current(0).time + half;
        self.advance(half, first, mid)?;
        self.advance(half, second, end_time)
    }
}

fn integrate(initials: Vec<Vec<f64>>, jittered: Vec<bool>, t_final: f64, opts: FlowOptions, path: &mut NoisePath, seed: Option<SeedSpec>) -> Result<Vec<FlowTrajectory>> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::Usage(format!("final time must be positive, got {t_final}")));
    }
    if !(opts.dt_init > 0.0) {
        return Err(Error::Usage(format!("initial step must be positive, got {}", opts.dt_init)));
    }
    let trajectories = initials
        .into_iter()
        .zip(jittered)
        .map(|(values, jittered)| FlowTrajectory {
            states: vec![FlowState { time: 0.0, values }],
            dt_history: Vec::new(),
            seed,
            jittered,
        })
        .collect();
    let mut run = Coupled {
        trajectories,
        path,
        min_dt: opts.min_dt,
        drift_fraction: opts.drift_fraction,
        drift_min_dt: opts.drift_min_dt,
    };
    let steps = ((t_final / opts.dt_init) - 1e-9).ceil().max(1.0) as u64;
    for k in 1..=steps {
        let start = run.current(0).time;
        let end = if k == steps { t_final } else { (k as f64 * opts.dt_init).min(t_final) };
        let dt = end - start;
        let increment = run.path.draw(dt);
        run.advance(dt, increment, end)?;
    }
    Ok(run.trajectories)
}

/// Integrates the flow from `initial` (sorted descending) to `t_final`.
pub fn simulate_flow(initial: &[f64], t_final: f64, dt_init: f64, seed: SeedSpec) -> Result<FlowTrajectory> {
    let mut path = NoisePath::new(initial.len(), seed);
    simulate_flow_on(initial, t_final, FlowOptions::new(dt_init), &mut path, Some(seed))
}

/// Integrates the flow against an explicit noise path (use
/// [`NoisePath::silent`] for the deterministic ODE).
pub fn simulate_flow_on(
    initial: &[f64],
    t_final: f64,
    opts: FlowOptions,
    path: &mut NoisePath,
    seed: Option<SeedSpec>,
) -> Result<FlowTrajectory> {
    let (start, jittered) = prepare_initial(initial)?;
    if path.n != start.len() {
        return Err(Error::Usage("noise path dimension differs from the initial data".into()));
    }
    Ok(integrate(vec![start], vec![jittered], t_final, opts, path, seed)?.remove(0))
}

/// Outcome of a coupled comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    /// λ⁽¹⁾ᵢ < λ⁽²⁾ᵢ held at every accepted step for every i.
    pub preserved: bool,
    pub steps: usize,
    /// Smallest λ⁽²⁾ᵢ − λ⁽¹⁾ᵢ seen over all accepted steps.
    pub min_gap: f64,
    pub trajectories: (FlowTrajectory, FlowTrajectory),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledVerdict {
    pub preserved: bool,
    pub steps: usize,
    pub min_gap: f64,
}

impl CoupledRun {
    pub fn verdict(&self) -> CoupledVerdict {
        CoupledVerdict {
            preserved: self.preserved,
            steps: self.steps,
            min_gap: self.min_gap,
        }
    }

    /// Σf(λ⁽¹⁾ᵢ) ≤ Σf(λ⁽²⁾ᵢ) at every accepted step.
    pub fn trace_dominated(&self, f: impl Fn(f64) -> f64) -> bool {
        let (a, b) = &self.trajectories;
        a.states.iter().zip(&b.states).all(|(x, y)| {
            let fx: f64 = x.values.iter().map(|&v| f(v)).sum();
            let fy: f64 = y.values.iter().map(|&v| f(v)).sum();
            fx <= fy
        })
    }
}

/// Integrates two systems driven by the same noise path from strictly
/// dominated initial data `s1ᵢ < s2ᵢ`.
pub fn coupled_compare(s1: &[f64], s2: &[f64], t_final: f64, dt_init: f64, seed: SeedSpec) -> Result<CoupledRun> {
    if s1.len() != s2.len() {
        return Err(Error::Usage("both systems need the same number of values".into()));
    }
    if s1.iter().zip(s2).any(|(a, b)| !(a < b)) {
        return Err(Error::Usage("comparison needs s1[i] < s2[i] for every i".into()));
    }
    let (a, ja) = prepare_initial(s1)?;
    let (b, jb) = prepare_initial(s2)?;
    let mut path = NoisePath::new(s1.len(), seed);
    let mut trajs = integrate(vec![a, b], vec![ja, jb], t_final, FlowOptions::new(dt_init), &mut path, Some(seed))?;
    let second = trajs.pop().unwrap();
    let first = trajs.pop().unwrap();
    let mut min_gap = f64::INFINITY;
    for (x, y) in first.states.iter().zip(&second.states) {
        for (u, v) in x.values.iter().zip(&y.values) {
            min_gap = min_gap.min(v - u);
        }
    }
    Ok(CoupledRun {
        preserved: min_gap > 0.0,
        steps: first.dt_history.len(),
        min_gap,
        trajectories: (first, second),
    })
}

/// Second-order prediction of the singular values of diag(s) + ΔF,
/// returned in the order of `s`.
pub fn sv_perturbation(s: &[f64], delta: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = s.len();
    if delta.n() != n {
        return Err(Error::Usage(format!("perturbation is {}x{}, expected {n}x{n}", delta.n(), delta.n())));
    }
    check_distinct_positive(s)?;
    let d = |i: usize, j: usize| delta.get(i, j);
    Ok((0..n)
        .map(|i| {
            let si = s[i];
            let mut sq = si * si + 2.0 * si * d(i, i).re;
            for j in 0..n {
                sq += d(j, i).norm_sqr();
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let sj = s[j];
                let num = si * si * d(i, j).norm_sqr()
                    + 2.0 * si * sj * (d(i, j) * d(j, i)).re
                    + sj * sj * d(j, i).norm_sqr();
                sq += num / (si * si - sj * sj);
            }
            sq.max(0.0).sqrt()
        })
        .collect())
}

/// 4·Σ_{i<j} (sᵢ² + sⱼ²)/(sᵢ² − sⱼ²)², the Laplacian over matrix space of
/// m ↦ Σ_{i<j} ln|sᵢ(m)² − sⱼ(m)²|.
pub fn repulsion_laplacian(s: &[f64]) -> Result<f64> {
    check_distinct_positive(s)?;
    let mut total = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let (a, b) = (s[i] * s[i], s[j] * s[j]);
            total += (a + b) / ((a - b) * (a - b));
        }
    }
    Ok(4.0 * total)
}
