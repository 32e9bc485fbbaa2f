use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use radial_core::ode::Tolerances;
use radial_core::{Nonlinearity, SolveConfig};

#[derive(Parser, Debug)]
#[command(name = "radial", version, about = "Radial solutions of fully nonlinear bistable equations")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build one solution and write its profile and summary
    Solve(SolveArgs),
    /// Classify a grid of start values or switch radii
    Sweep(SweepArgs),
    /// Threshold constants and the A/C bracket
    Critical(CriticalArgs),
    /// Amplitude and period of a k = 1 orbit
    Period(PeriodArgs),
    /// Energy and residual audit of one run
    Audit(AuditArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Nonlinearity: cubic:S or scaled-cubic:P:S
    #[arg(long, default_value = "cubic:1")]
    pub g: String,

    #[arg(long, default_value_t = 1)]
    pub k: u32,

    #[arg(long, default_value_t = 1e-10)]
    pub tol_abs: f64,

    #[arg(long, default_value_t = 1e-10)]
    pub tol_rel: f64,

    /// Truncation radius for solutions that never end
    #[arg(long, default_value_t = 200.0)]
    pub truncation: f64,

    /// Blow-up cap on |u|
    #[arg(long, default_value_t = 1e6)]
    pub cap: f64,

    /// Output path (prefix for solve, file otherwise); stdout if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file whose keys are flag names
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.g.parse::<Nonlinearity>().with_context(|| format!("bad --g {:?}", self.g))
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        if self.k == 0 {
            bail!("--k must be at least 1");
        }
        let cfg = SolveConfig {
            tol: Tolerances { abs: self.tol_abs, rel: self.tol_rel },
            cap_u: self.cap,
            truncation: self.truncation,
            ..SolveConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<f64>,

    /// Initial slope; integrates the second-order equation directly (k = 1)
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,

    /// Switch radius; with --from-switch the start value reaching beta there
    #[arg(long)]
    pub r0: Option<f64>,

    #[arg(long)]
    pub from_switch: bool,

    /// Solve the P^- equation instead
    #[arg(long)]
    pub minus: bool,

    /// Also write (r, u, u', energy) columns
    #[arg(long)]
    pub phase_plane: bool,

    /// Compare every segment against a fixed-step RK4 reference
    #[arg(long)]
    pub cross_check: bool,

    /// Tolerance for --cross-check
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,

    /// Grid of start values: min:max:count or a,b,c
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,

    /// Grid of switch radii (k >= 2)
    #[arg(long)]
    pub r0: Option<String>,
}

#[derive(Args, Debug)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub common: Common,

    /// Bisection tolerance on r0
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct PeriodArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, allow_hyphen_values = true)]
    pub xi: f64,

    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta: f64,

    /// Compare with the spacing of maxima of the integrated orbit
    #[arg(long)]
    pub cross_check: bool,

    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, allow_hyphen_values = true)]
    pub xi: f64,

    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta: f64,
}

/// `min:max:count`, a comma list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().context("grid minimum")?;
        let hi: f64 = parts[1].trim().parse().context("grid maximum")?;
        let n: usize = parts[2].trim().parse().context("grid count")?;
        if n == 0 {
            bail!("grid count must be at least 1");
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        return Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect());
    }
    if parts.len() != 1 {
        bail!("grid must be min:max:count or a comma list, got {spec:?}");
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value {v:?}")))
        .collect()
}

/// Splices the entries of a `--config` TOML file in front of the
/// command-line flags, so explicit flags win.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos {
        Some(i) => args.get(i + 1).context("--config needs a path")?.clone(),
        None => match args.iter().find_map(|a| a.to_str().and_then(|s| s.strip_prefix("--config="))) {
            Some(p) => OsString::from(p),
            None => return Ok(args),
        },
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.to_string_lossy()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.to_string_lossy()))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => flags.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => {
                flags.push(flag.into());
                flags.push(s.into());
            }
            toml::Value::Integer(i) => {
                flags.push(flag.into());
                flags.push(i.to_string().into());
            }
            toml::Value::Float(f) => {
                flags.push(flag.into());
                flags.push(f.to_string().into());
            }
            other => bail!("unsupported value for {key}: {other}"),
        }
    }
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
