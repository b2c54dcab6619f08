use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brownreg::brown::{brown_density, log_potential_field, oracle_brown, GridSpec};
use brownreg::ensembles::{realize, sample_ginibre, tags, EnsembleSpec, SeedSpec};
use brownreg::fk::trace_log_abs;
use brownreg::flow::{coupled_compare, simulate_flow};
use brownreg::linalg::{eigenvalues, singular_values, ComplexMatrix};
use brownreg::pipeline::{emit_report, emit_sweep, run_regularization, sweep_t, ExperimentConfig};
use brownreg::stats::MeanEstimate;
use brownreg::{Error, C64};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "brownreg", version, about = "Gaussian regularization of non-normal spectra")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; small results go to stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Matrix dimension (a comma-separated list for `run`)
    #[arg(long, global = true)]
    n: Option<String>,
    /// Regularization variance, or final time for the flow commands
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Ensemble expression, e.g. `nilpotent_shift + 0.1*ginibre`
    #[arg(long, global = true)]
    ensemble: Option<String>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid center as a complex number, e.g. 0.5-1i
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues or singular values of A + √t·G
    SampleSpectrum {
        /// Report singular values instead of eigenvalues
        #[arg(long)]
        singular: bool,
    },
    /// Fuglede–Kadison determinant of A + √t·G − λ over trials
    FkDet {
        #[arg(long, default_value = "0")]
        lambda: String,
    },
    /// Log-potential field tr ln|A + √t·G − λ| on a grid
    Field {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Discrete Brown density of A + √t·G on a grid
    Density {
        #[command(flatten)]
        grid: GridArgs,
        /// Keep negative discretization artifacts instead of clipping them to 0
        #[arg(long)]
        no_clip: bool,
    },
    /// Singular-value flow from the given initial values up to time --t
    SvFlow {
        #[arg(long, value_delimiter = ',', required = true)]
        initial: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Two flows driven by one noise path, from s1 < s2 entrywise
    CompareFlow {
        #[arg(long, value_delimiter = ',', required = true)]
        s1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        s2: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Regularization experiment over n_list and trials
    Run,
    /// Distance to the target as a function of t at fixed n
    SweepT {
        #[arg(long, value_delimiter = ',')]
        t_list: Option<Vec<f64>>,
    },
}

enum Failure {
    Lib(Error),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Config(_) => 2,
        Failure::Lib(e) => match e {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Decomposition(_) | Error::Domain(_) | Error::Integrator { .. } => 3,
            Error::Io { .. } | Error::Ingest { .. } => 4,
        },
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(c: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    let base = match &c.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let mut pairs: Vec<(&str, String)> = Vec::new();
    if let Some(s) = c.seed {
        pairs.push(("seed", s.to_string()));
    }
    if let Some(k) = c.trials {
        pairs.push(("trials", k.to_string()));
    }
    if let Some(n) = &c.n {
        pairs.push(("n_list", n.clone()));
    }
    if let Some(t) = c.t {
        pairs.push(("t", format!("{t:e}")));
    }
    if let Some(e) = &c.ensemble {
        pairs.push(("ensemble.model", e.clone()));
    }
    Ok(base.with_overrides(pairs)?)
}

/// The single dimension used by commands other than `run`.
fn single_n(cfg: &ExperimentConfig) -> std::result::Result<usize, Failure> {
    match cfg.n_list.as_slice() {
        [n] => Ok(*n),
        _ => Err(Failure::Config("this command takes a single --n".into())),
    }
}

fn regularization_t(c: &Common, cfg: &ExperimentConfig, n: usize) -> std::result::Result<f64, Failure> {
    match c.t {
        Some(t) => Ok(t),
        None if c.config.is_some() => Ok(brownreg::pipeline::schedule_t(&cfg.schedule, n)?),
        None => Ok(0.0),
    }
}

/// A + √t·G for trial `trial`, drawn from the same substreams as `run`.
fn regularized(cfg: &ExperimentConfig, n: usize, t: f64, trial: usize) -> Result<ComplexMatrix, Error> {
    let spec = EnsembleSpec::new(cfg.ensemble.clone(), n)?;
    let seed = SeedSpec::new(cfg.root_seed, trial as u64).substream(n as u64);
    let a = realize(&spec, seed.substream(tags::BASE))?;
    if t == 0.0 {
        return Ok(a);
    }
    let g = sample_ginibre(n, seed.substream(tags::REGULARIZER));
    Ok(&a + &g.scale(t.sqrt()))
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Outcome {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_complex(s: &str) -> std::result::Result<C64, Failure> {
    let v: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    v.parse().map_err(|_| Failure::Config(format!("cannot parse complex number {s:?}")))
}

fn grid_from(args: &GridArgs, cfg: &ExperimentConfig) -> std::result::Result<GridSpec, Failure> {
    let base = cfg.grid.unwrap_or_default();
    let center = match &args.center {
        Some(c) => parse_complex(c)?,
        None => base.center,
    };
    GridSpec::new(
        center,
        args.half_width.unwrap_or(base.half_width),
        args.nodes.unwrap_or(base.nodes_per_side),
    )
    .map_err(|e| Failure::Config(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    let out = c.out.as_deref();
    match cli.command {
        Command::SampleSpectrum { singular } => {
            let cfg = load_config(c)?;
            let n = single_n(&cfg)?;
            let t = regularization_t(c, &cfg, n)?;
            let mut csv = String::from(if singular { "trial,index,value\n" } else { "trial,index,re,im\n" });
            for trial in 0..cfg.trials {
                let m = regularized(&cfg, n, t, trial)?;
                if singular {
                    for (i, s) in singular_values(&m)?.singular_values().iter().enumerate() {
                        writeln!(csv, "{trial},{i},{s:.16e}").unwrap();
                    }
                } else {
                    for (i, z) in eigenvalues(&m)?.eigenvalues().iter().enumerate() {
                        writeln!(csv, "{trial},{i},{:.16e},{:.16e}", z.re, z.im).unwrap();
                    }
                }
            }
            emit(out, "spectrum.csv", &csv)
        }
        Command::FkDet { lambda } => {
            let cfg = load_config(c)?;
            let n = single_n(&cfg)?;
            let t = regularization_t(c, &cfg, n)?;
            let lambda = parse_complex(&lambda)?;
            let mut logs = Vec::with_capacity(cfg.trials);
            let mut clamped = false;
            for trial in 0..cfg.trials {
                let tl = trace_log_abs(&regularized(&cfg, n, t, trial)?, lambda)?;
                clamped |= tl.clamped;
                logs.push(tl.value);
            }
            let est = MeanEstimate::from_samples(&logs);
            let json = serde_json::json!({
                "n": n,
                "t": t,
                "lambda": [lambda.re, lambda.im],
                "trials": cfg.trials,
                "seed": cfg.root_seed,
                "log_fk": logs,
                "mean_log_fk": est.mean,
                "stderr_log_fk": if est.stderr.is_finite() { Some(est.stderr) } else { None },
                "fk_determinant_of_mean": est.mean.exp(),
                "clamped": clamped,
            });
            emit(out, "fk_det.json", &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))
        }
        Command::Field { grid } => {
            let cfg = load_config(c)?;
            let n = single_n(&cfg)?;
            let t = regularization_t(c, &cfg, n)?;
            let field = log_potential_field(&regularized(&cfg, n, t, 0)?, grid_from(&grid, &cfg)?)?;
            emit(out, "field.csv", &field.to_csv())
        }
        Command::Density { grid, no_clip } => {
            let cfg = load_config(c)?;
            let n = single_n(&cfg)?;
            let t = regularization_t(c, &cfg, n)?;
            let field = log_potential_field(&regularized(&cfg, n, t, 0)?, grid_from(&grid, &cfg)?)?;
            emit(out, "density.csv", &brown_density(&field).to_csv(!no_clip))
        }
        Command::SvFlow { initial, dt } => {
            let cfg = load_config(c)?;
            let t = c.t.ok_or_else(|| Failure::Config("sv-flow needs --t (final time)".into()))?;
            let traj = simulate_flow(&initial, t, dt, SeedSpec::new(cfg.root_seed, 0).substream(tags::FLOW_NOISE))?;
            emit(out, "flow.csv", &traj.to_csv())
        }
        Command::CompareFlow { s1, s2, dt } => {
            let cfg = load_config(c)?;
            let t = c.t.ok_or_else(|| Failure::Config("compare-flow needs --t (final time)".into()))?;
            let run = coupled_compare(&s1, &s2, t, dt, SeedSpec::new(cfg.root_seed, 0).substream(tags::FLOW_NOISE))?;
            let verdict = format!("{}\n", serde_json::to_string_pretty(&run.verdict()).unwrap());
            match out {
                Some(_) => {
                    emit(out, "flow1.csv", &run.trajectories.0.to_csv())?;
                    emit(out, "flow2.csv", &run.trajectories.1.to_csv())?;
                    emit(out, "verdict.json", &verdict)
                }
                None => emit(None, "", &verdict),
            }
        }
        Command::Run => {
            let cfg = load_config(c)?;
            let report = run_regularization(&cfg)?;
            let dir = out.unwrap_or(Path::new("out"));
            emit_report(&report, dir)?;
            for s in &report.summary {
                eprintln!(
                    "n = {:>5}  t = {:.3e}  completed {}/{}  mean distance {}",
                    s.n,
                    s.t,
                    s.completed,
                    s.completed + s.failed,
                    s.mean_distance.map_or("-".into(), |d| format!("{d:.4}"))
                );
            }
            Ok(())
        }
        Command::SweepT { t_list } => {
            let mut cfg = load_config(c)?;
            if let Some(list) = t_list {
                cfg = cfg.with_overrides([(
                    "t_list",
                    list.iter().map(|t| format!("{t:e}")).collect::<Vec<_>>().join(","),
                )])?;
            }
            if cfg.t_list.is_empty() {
                return Err(Failure::Config("sweep-t needs --t-list or sweep.t_list".into()));
            }
            let target = cfg
                .target
                .ok_or_else(|| Failure::Config("sweep-t needs a target (target.model)".into()))?;
            oracle_brown(&target)?;
            let n = single_n(&cfg)?;
            let spec = EnsembleSpec::new(cfg.ensemble.clone(), n)?;
            let table = sweep_t(&spec, &cfg.t_list, cfg.trials, &target, cfg.distance_method, cfg.root_seed)?;
            match out {
                Some(dir) => {
                    emit_sweep(&table, dir)?;
                }
                None => print!("{}", table.to_csv()),
            }
            for r in table.rows.iter().filter(|r| r.numerically_unfaithful) {
                eprintln!("warning: t = {:e} is below the eigensolver's backward error; the row is numerically unfaithful", r.t);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Config(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
