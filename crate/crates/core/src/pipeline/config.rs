use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::brown::{BrownOracle, DistanceMethod, GridSpec};
use crate::ensembles::Model;
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Everything that determines a regularization run.
///
/// Read from flat `key = value` files with dot-namespaced keys:
///
/// ```text
/// ensemble.model = nilpotent_shift
/// schedule.kind = fixed
/// schedule.t = 0.01
/// n_list = 100
/// trials = 10
/// target.model = haar_unitary
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base model; the dimension comes from `n_list`.
    pub ensemble: Model,
    pub schedule: Schedule,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub grid: Option<GridSpec>,
    pub target: Option<BrownOracle>,
    pub distance_method: DistanceMethod,
    pub root_seed: u64,
    /// Variances visited by `sweep-t`; unused by regularization runs.
    #[serde(default)]
    pub t_list: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ensemble: Model::NilpotentShift,
            schedule: Schedule::default(),
            n_list: vec![100],
            trials: 10,
            grid: None,
            target: None,
            distance_method: DistanceMethod::RadialKs,
            root_seed: 0,
            t_list: Vec::new(),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn complex(key: &str, value: &str) -> Result<C64> {
    let v: String = value.chars().filter(|c| !c.is_whitespace()).collect();
    C64::from_str(&v).map_err(|_| Error::Config(format!("{key}: cannot parse complex value {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}

/// Partially specified target, assembled from `target.*` keys.
#[derive(Default)]
struct TargetKeys {
    model: Option<String>,
    t: Option<f64>,
    shift: Option<C64>,
    at: Option<C64>,
    tau: Option<f64>,
}

impl TargetKeys {
    fn build(&self) -> Result<Option<BrownOracle>> {
        let zero = C64::new(0.0, 0.0);
        let Some(model) = self.model.as_deref() else {
            if self.t.is_some() || self.shift.is_some() || self.at.is_some() || self.tau.is_some() {
                return Err(Error::Config("target parameters given without target.model".into()));
            }
            return Ok(None);
        };
        let oracle = match model {
            "none" => return Ok(None),
            "circular" => BrownOracle::circular(),
            "circular_scaled" => BrownOracle::CircularScaled {
                t: self.t.unwrap_or(1.0),
                shift: self.shift.unwrap_or(zero),
            },
            "haar_unitary" | "haar" => BrownOracle::HaarUnitary,
            "atom" => BrownOracle::Atom { at: self.at.unwrap_or(zero) },
            "elliptic" => BrownOracle::Elliptic {
                tau: self.tau.ok_or_else(|| Error::Config("target.model = elliptic needs target.tau".into()))?,
            },
            other => return Err(Error::Config(format!("unknown target model {other:?}"))),
        };
        oracle.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Some(oracle))
    }
}

/// Partially specified schedule, assembled from `schedule.*` keys.
#[derive(Default)]
struct ScheduleKeys {
    kind: Option<String>,
    /// Kind implied by the keys seen so far (`t` means fixed, `points` explicit).
    hint: Option<&'static str>,
    base_kind: Option<&'static str>,
    t0: Option<f64>,
    alpha: Option<f64>,
    t: Option<f64>,
    points: Option<Vec<(usize, f64)>>,
}

impl ScheduleKeys {
    fn from_schedule(s: &Schedule) -> Self {
        let mut keys = ScheduleKeys::default();
        match s {
            Schedule::Power { t0, alpha } => {
                keys.base_kind = Some("power");
                keys.t0 = Some(*t0);
                keys.alpha = Some(*alpha);
            }
            Schedule::Fixed { t } => {
                keys.base_kind = Some("fixed");
                keys.t = Some(*t);
            }
            Schedule::Explicit { points } => {
                keys.base_kind = Some("explicit");
                keys.points = Some(points.clone());
            }
        }
        keys
    }

    fn build(&self) -> Result<Schedule> {
        let kind = self
            .kind
            .as_deref()
            .or(self.hint)
            .or(self.base_kind)
            .unwrap_or("power");
        Ok(match kind {
            "power" => Schedule::Power {
                t0: self.t0.unwrap_or(1.0),
                alpha: self.alpha.unwrap_or(1.0),
            },
            "fixed" => Schedule::Fixed {
                t: self.t.ok_or_else(|| Error::Config("fixed schedule needs schedule.t".into()))?,
            },
            "explicit" => Schedule::Explicit {
                points: self
                    .points
                    .clone()
                    .ok_or_else(|| Error::Config("explicit schedule needs schedule.points".into()))?,
            },
            other => return Err(Error::Config(format!("unknown schedule kind {other:?}"))),
        })
    }
}

fn parse_points(key: &str, value: &str) -> Result<Vec<(usize, f64)>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (n, t) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected n:t pairs, got {pair:?}")))?;
            Ok((num(key, n)?, num(key, t)?))
        })
        .collect()
}

/// Accumulates `key = value` assignments before building a config.
#[derive(Default)]
struct Builder {
    base: ExperimentConfig,
    schedule: ScheduleKeys,
    target: TargetKeys,
    grid_center: Option<C64>,
    grid_half_width: Option<f64>,
    grid_nodes: Option<usize>,
    grid_enabled: Option<bool>,
}

impl Builder {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "ensemble.model" | "ensemble" => self.base.ensemble = Model::from_str(value)?,
            "schedule.kind" => self.schedule.kind = Some(value.to_string()),
            "schedule.t0" => self.schedule.t0 = Some(num(key, value)?),
            "schedule.alpha" => self.schedule.alpha = Some(num(key, value)?),
            "schedule.t" | "t" => {
                self.schedule.t = Some(num(key, value)?);
                self.schedule.hint = Some("fixed");
            }
            "schedule.points" => {
                self.schedule.points = Some(parse_points(key, value)?);
                self.schedule.hint = Some("explicit");
            }
            "n_list" | "n" => self.base.n_list = list(key, value)?,
            "trials" => self.base.trials = num(key, value)?,
            "grid" | "grid.enabled" => self.grid_enabled = Some(num(key, value)?),
            "grid.center" => self.grid_center = Some(complex(key, value)?),
            "grid.half_width" => self.grid_half_width = Some(num(key, value)?),
            "grid.nodes" | "grid.nodes_per_side" => self.grid_nodes = Some(num(key, value)?),
            "target.model" | "target" => self.target.model = Some(value.to_string()),
            "target.t" => self.target.t = Some(num(key, value)?),
            "target.shift" => self.target.shift = Some(complex(key, value)?),
            "target.at" => self.target.at = Some(complex(key, value)?),
            "target.tau" => self.target.tau = Some(num(key, value)?),
            "distance.method" | "distance_method" => self.base.distance_method = DistanceMethod::from_str(value)?,
            "seed" | "root_seed" => self.base.root_seed = num(key, value)?,
            "sweep.t_list" | "t_list" => self.base.t_list = list(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    fn build(self) -> Result<ExperimentConfig> {
        let mut cfg = self.base;
        cfg.schedule = self.schedule.build()?;
        if let Some(target) = self.target.build()? {
            cfg.target = Some(target);
        } else if self.target.model.as_deref() == Some("none") {
            cfg.target = None;
        }
        let any_grid_key = self.grid_center.is_some() || self.grid_half_width.is_some() || self.grid_nodes.is_some();
        if self.grid_enabled.unwrap_or(any_grid_key || cfg.grid.is_some()) {
            let d = cfg.grid.unwrap_or_default();
            cfg.grid = Some(GridSpec {
                center: self.grid_center.unwrap_or(d.center),
                half_width: self.grid_half_width.unwrap_or(d.half_width),
                nodes_per_side: self.grid_nodes.unwrap_or(d.nodes_per_side),
            });
        } else {
            cfg.grid = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::default().with_overrides(parse_lines(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies further assignments on top of this config, as CLI flags do.
    pub fn with_overrides<I, K, V>(&self, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut b = Builder {
            base: self.clone(),
            schedule: ScheduleKeys::from_schedule(&self.schedule),
            ..Builder::default()
        };
        for (k, v) in pairs {
            b.set(k.as_ref().trim(), v.as_ref())?;
        }
        b.build()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list is empty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be positive and strictly ascending".into()));
        }
        self.schedule.validate()?;
        if let Schedule::Explicit { points } = &self.schedule {
            if let Some(n) = self.n_list.iter().find(|n| !points.iter().any(|p| p.0 == **n)) {
                return Err(Error::Config(format!("explicit schedule has no entry for n = {n}")));
            }
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(t) = &self.target {
            t.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) || self.t_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("t_list must be positive and strictly ascending".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
