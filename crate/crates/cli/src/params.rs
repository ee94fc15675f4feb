//! Command-line flags, the optional TOML config file and their resolution
//! (flags > config > defaults).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "gafhole", version, about = "Hole probabilities and conditional zeros of power-exponential GAFs")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Weight exponent β > 0.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Scale α of the constrained energy problem.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Level p; a comma-separated list for `table`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Radius r.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Monte Carlo trials (samples for `check density`).
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid size M for `varopt`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file supplying defaults for any of the flags above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `mass_inside_le` or `mass_closed_inside_ge` for `varopt` (default: by p).
    #[arg(long, global = true)]
    pub constraint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// CSV of q(p), Z_p and the regime for a list of p.
    Table,
    /// Explicit minimizer and its energy report.
    Measure,
    /// Discretized constrained minimization.
    Varopt,
    /// Monte Carlo experiments.
    Simulate {
        #[command(subcommand)]
        kind: SimulateKind,
    },
    /// Pass/fail checks of module properties.
    Check {
        #[command(subcommand)]
        kind: CheckKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum SimulateKind {
    Hole,
    Conditional,
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CheckKind {
    Density,
    Intensity,
    Stirling,
    Tail,
    Potential,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Table => "table".into(),
            Command::Measure => "measure".into(),
            Command::Varopt => "varopt".into(),
            Command::Simulate { kind } => format!("simulate {}", format!("{kind:?}").to_lowercase()),
            Command::Check { kind } => format!("check {}", format!("{kind:?}").to_lowercase()),
        }
    }
}

/// Fully resolved parameters; every field is echoed into the run record.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub beta: f64,
    pub alpha: f64,
    pub p: Vec<f64>,
    pub r: f64,
    pub trials: usize,
    pub seed: u64,
    pub grid: usize,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub constraint: Option<String>,
    pub config: Option<PathBuf>,
}

impl Params {
    /// The single p of non-table commands.
    pub fn single_p(&self) -> Result<f64, CliError> {
        match self.p.as_slice() {
            [p] => Ok(*p),
            _ => Err(CliError::Parameter(format!("expected a single --p, got {} values", self.p.len()))),
        }
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        use crate::record::fmt_f64;
        let list = self.p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",");
        vec![
            ("beta".into(), fmt_f64(self.beta)),
            ("alpha".into(), fmt_f64(self.alpha)),
            ("p".into(), list),
            ("r".into(), fmt_f64(self.r)),
            ("trials".into(), self.trials.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("grid".into(), self.grid.to_string()),
            ("threads".into(), self.threads.map_or("auto".into(), |t| t.to_string())),
            ("out".into(), self.out.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("constraint".into(), self.constraint.clone().unwrap_or_else(|| "auto".into())),
            ("config".into(), self.config.as_ref().map_or("-".into(), |p| p.display().to_string())),
        ]
    }
}

/// Values read from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub constraint: Option<String>,
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, CliError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(CliError::Parameter(format!("config key `{key}` must be a number"))),
    }
}

fn as_count(key: &str, v: &toml::Value) -> Result<u64, CliError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(CliError::Parameter(format!("config key `{key}` must be a non-negative integer"))),
    }
}

fn as_string(key: &str, v: &toml::Value) -> Result<String, CliError> {
    v.as_str().map(str::to_string).ok_or_else(|| CliError::Parameter(format!("config key `{key}` must be a string")))
}

pub fn parse_config(text: &str) -> Result<ConfigValues, CliError> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Parameter(format!("config: {e}")))?;
    let mut c = ConfigValues::default();
    for (key, v) in &table {
        match key.as_str() {
            "beta" => c.beta = Some(as_f64(key, v)?),
            "alpha" => c.alpha = Some(as_f64(key, v)?),
            "p" => {
                c.p = Some(match v {
                    toml::Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect::<Result<_, _>>()?,
                    other => vec![as_f64(key, other)?],
                })
            }
            "r" => c.r = Some(as_f64(key, v)?),
            "trials" => c.trials = Some(as_count(key, v)? as usize),
            "seed" => c.seed = Some(as_count(key, v)?),
            "grid" => c.grid = Some(as_count(key, v)? as usize),
            "threads" => c.threads = Some(as_count(key, v)? as usize),
            "out" => c.out = Some(PathBuf::from(as_string(key, v)?)),
            "constraint" => c.constraint = Some(as_string(key, v)?),
            other => return Err(CliError::Parameter(format!("unknown config key `{other}`"))),
        }
    }
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<ConfigValues, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parameter(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_p_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            if t == "e" {
                return Ok(std::f64::consts::E);
            }
            t.parse::<f64>().map_err(|_| CliError::Parameter(format!("cannot parse p value `{t}`")))
        })
        .collect()
}

/// Per-command defaults.
pub fn defaults(command: &Command, beta: f64) -> (f64, Vec<f64>, f64, usize) {
    let e = std::f64::consts::E;
    let alpha = match command {
        Command::Check { kind: CheckKind::Tail } => 4f64.powf(beta) * e,
        _ => 10.0,
    };
    let p = match command {
        Command::Table => vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, e, 3.0],
        _ => vec![0.0],
    };
    let r = match command {
        Command::Check { kind: CheckKind::Tail } => 3.0,
        _ => 1.0,
    };
    let trials = match command {
        Command::Check { kind: CheckKind::Density } => 1_000_000,
        Command::Check { kind: CheckKind::Tail } => 1_000,
        _ => 10_000,
    };
    (alpha, p, r, trials)
}

pub const DEFAULT_BETA: f64 = 2.0;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GRID: usize = 400;
/// Polar mesh size of `check tail`.
pub const DEFAULT_TAIL_GRID: usize = 64;

pub fn default_grid(command: &Command) -> usize {
    match command {
        Command::Check { kind: CheckKind::Tail } => DEFAULT_TAIL_GRID,
        _ => DEFAULT_GRID,
    }
}

pub fn resolve(command: &Command, flags: &Flags) -> Result<Params, CliError> {
    let cfg = match &flags.config {
        Some(path) => load_config(path)?,
        None => ConfigValues::default(),
    };
    let beta = flags.beta.or(cfg.beta).unwrap_or(DEFAULT_BETA);
    let (d_alpha, d_p, d_r, d_trials) = defaults(command, beta);
    let p = match &flags.p {
        Some(s) => parse_p_list(s)?,
        None => cfg.p.unwrap_or(d_p),
    };
    let params = Params {
        beta,
        alpha: flags.alpha.or(cfg.alpha).unwrap_or(d_alpha),
        p,
        r: flags.r.or(cfg.r).unwrap_or(d_r),
        trials: flags.trials.or(cfg.trials).unwrap_or(d_trials),
        seed: flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        grid: flags.grid.or(cfg.grid).unwrap_or(default_grid(command)),
        threads: flags.threads.or(cfg.threads),
        out: flags.out.clone().or(cfg.out),
        constraint: flags.constraint.clone().or(cfg.constraint),
        config: flags.config.clone(),
    };
    if !(params.beta > 0.0 && params.beta.is_finite()) {
        return Err(CliError::Parameter(format!("beta must be positive, got {}", params.beta)));
    }
    if params.threads == Some(0) {
        return Err(CliError::Parameter("threads must be at least 1".into()));
    }
    Ok(params)
}
