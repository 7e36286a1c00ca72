//! Flags, config files and their merge.

use std::path::PathBuf;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use cryptoflow::criteria::Check;
use cryptoflow::model::{VariantKind, Zeta2Denominator};
use cryptoflow::sweep::{Axis, Method};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "cryptoflow", version, about = "Stability laboratory for the asset-flow price model")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Verb {
    /// Jacobian, spectrum and closed-form verdicts at one parameter point
    Analyze,
    /// Stability map over two swept parameters
    Sweep,
    /// Perturbed nonlinear trajectory and its empirical verdict
    Simulate,
    /// Closed-form criterion against spectra on random samples
    Verify,
    /// Geometric Brownian motion path and normal tail frequency
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Every option, unresolved. `None` means "not given here".
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// full5x5, sentiment3x3 or liquidity2x2
    #[arg(long, global = true)]
    pub variant: Option<VariantKind>,
    /// Denominator of the value-sentiment term: anchor_pa or price_p
    #[arg(long, global = true)]
    pub zeta2: Option<Zeta2Denominator>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub c3: Option<f64>,
    /// Band on the largest real part inside which a spectrum is marginal
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Band on closed-form margins inside which a verdict is marginal
    #[arg(long, global = true)]
    pub band: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample count (verify) or path length (baseline)
    #[arg(short = 'n', global = true)]
    pub n: Option<usize>,
    /// name:min:max:steps
    #[arg(long, global = true)]
    pub axis1: Option<Axis>,
    /// name:min:max:steps
    #[arg(long, global = true)]
    pub axis2: Option<Axis>,
    /// eigen or closed-form
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// threshold2x2, theorem2, theorem1 or routh-hurwitz
    #[arg(long, global = true)]
    pub criterion: Option<Check>,
    #[arg(long, global = true)]
    pub step: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Initial displacement of P
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Drift per step (baseline)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Volatility per step (baseline)
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Size of the drop whose frequency is reported (baseline)
    #[arg(long, global = true)]
    pub drop: Option<f64>,
    /// Step length of the price path (baseline)
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Initial price (baseline)
    #[arg(long, global = true)]
    pub p0: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also write an SVG heatmap (sweep)
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat JSON object whose keys are flag names
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

macro_rules! merge {
    ($primary:expr, $fallback:expr, $($field:ident),*) => {
        Opts { $($field: $primary.$field.or($fallback.$field),)* }
    };
}

impl Opts {
    /// Fields of `self`, falling back to `other`.
    pub fn or(self, other: Opts) -> Opts {
        merge!(
            self, other, variant, zeta2, q, q1, q2, tau0, c, c1, c2, c3, eps, band, seed, n, axis1,
            axis2, method, criterion, step, horizon, delta, mu, sigma, drop, dt, p0, out, format,
            svg, threads, config
        )
    }
}

/// Wrapper used to parse config entries through the same value parsers as
/// the command line.
#[derive(Debug, Parser)]
#[command(name = "config", no_binary_name = true, disable_help_flag = true, disable_version_flag = true)]
struct ConfigArgs {
    #[command(flatten)]
    opts: Opts,
}

/// Config key and command-line spelling of every flag.
fn flag_names() -> Vec<(String, String)> {
    Cli::command()
        .get_arguments()
        .filter_map(|a| match (a.get_long(), a.get_short()) {
            (Some(long), _) => Some((long.to_string(), format!("--{long}"))),
            (None, Some(short)) => Some((short.to_string(), format!("-{short}"))),
            _ => None,
        })
        .filter(|(name, _)| name != "help" && name != "version")
        .collect()
}

/// Read a flat JSON config. Keys must be flag names; values are numbers or
/// strings.
pub fn read_config(path: &std::path::Path) -> Result<Opts, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::usage(
            "ConfigError",
            format!("cannot read config {}: {e}", path.display()),
            Some(path.display().to_string()),
        )
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::usage("TypeError", format!("config is not valid JSON: {e}"), Some(path.display().to_string()))
    })?;
    let object = value.as_object().ok_or_else(|| {
        CliError::usage("TypeError", "config must be a JSON object".into(), Some(path.display().to_string()))
    })?;

    let known = flag_names();
    let mut tokens = Vec::new();
    for (key, value) in object {
        let flag = match known.iter().find(|(name, _)| name == key) {
            Some((_, flag)) if key != "config" => flag.clone(),
            _ => {
                return Err(CliError::usage(
                    "UnknownFlag",
                    format!("unknown config key `{key}`"),
                    Some(key.clone()),
                ))
            }
        };
        let text = match value {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => {
                return Err(CliError::usage(
                    "TypeError",
                    format!("config key `{key}` must be a number or a string, got {other}"),
                    Some(key.clone()),
                ))
            }
        };
        tokens.push(flag);
        tokens.push(text);
    }
    ConfigArgs::try_parse_from(tokens)
        .map(|c| c.opts)
        .map_err(|e| from_clap(&e, "config"))
}

fn context_string(e: &clap::Error, kind: ContextKind) -> Option<String> {
    match e.get(kind)? {
        ContextValue::String(s) => Some(s.clone()),
        ContextValue::Strings(v) => v.first().cloned(),
        _ => None,
    }
}

/// Classify a clap failure; `origin` is "command line" or "config".
pub fn from_clap(e: &clap::Error, origin: &str) -> CliError {
    let (kind, token) = match e.kind() {
        ErrorKind::UnknownArgument | ErrorKind::InvalidSubcommand => {
            ("UnknownFlag", context_string(e, ContextKind::InvalidArg))
        }
        ErrorKind::InvalidValue | ErrorKind::ValueValidation => (
            "TypeError",
            context_string(e, ContextKind::InvalidValue).or_else(|| context_string(e, ContextKind::InvalidArg)),
        ),
        ErrorKind::ArgumentConflict => ("ConflictingOptions", context_string(e, ContextKind::InvalidArg)),
        _ => ("UsageError", context_string(e, ContextKind::InvalidArg)),
    };
    let message = e
        .render()
        .to_string()
        .lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_string();
    CliError::usage(kind, format!("{origin}: {message}"), token)
}
