use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the regularization variance t depends on the dimension N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    /// t_N = t0·N^(−alpha)
    Power { t0: f64, alpha: f64 },
    Fixed { t: f64 },
    /// (N, t_N) pairs with strictly increasing N.
    Explicit { points: Vec<(usize, f64)> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Power { t0: 1.0, alpha: 1.0 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Power { t0, alpha } => {
                if !(*t0 > 0.0 && t0.is_finite() && *alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Config(format!("power schedule needs t0 > 0 and alpha > 0, got {t0}, {alpha}")));
                }
            }
            Schedule::Fixed { t } => {
                if !(*t >= 0.0 && t.is_finite()) {
                    return Err(Error::Config(format!("fixed schedule needs t >= 0, got {t}")));
                }
            }
            Schedule::Explicit { points } => {
                if points.is_empty() {
                    return Err(Error::Config("explicit schedule is empty".into()));
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Config("explicit schedule needs strictly increasing n".into()));
                }
                if points.iter().any(|&(_, t)| !(t >= 0.0 && t.is_finite())) {
                    return Err(Error::Config("explicit schedule values must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }
}

/// t_N for dimension `n`.
pub fn schedule_t(s: &Schedule, n: usize) -> Result<f64> {
    s.validate()?;
    match s {
        Schedule::Power { t0, alpha } => Ok(t0 * (n as f64).powf(-alpha)),
        Schedule::Fixed { t } => Ok(*t),
        Schedule::Explicit { points } => points
            .iter()
            .find(|(m, _)| *m == n)
            .map(|&(_, t)| t)
            .ok_or_else(|| Error::Config(format!("explicit schedule has no entry for n = {n}"))),
    }
}
