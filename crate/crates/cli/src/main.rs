//! `cryptoflow` command-line tool.
//!
//! Exit codes: 0 success, 1 verification found mismatches, 2 usage error,
//! 3 runtime failure. Errors are printed to stderr as one JSON object.

mod commands;
mod opts;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cryptoflow::criteria::{Check, DEFAULT_BAND};
use cryptoflow::model::{ModelParams, ModelVariant, VariantKind};
use cryptoflow::stability::DEFAULT_EPS;
use cryptoflow::sweep::{Axis, Method};
use serde::Serialize;

use opts::{Cli, Format, Opts, Verb};

pub const THREADS_ENV: &str = "CRYPTOFLOW_THREADS";

#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(skip)]
    pub code: u8,
}

impl CliError {
    pub fn usage(kind: &str, message: String, token: Option<String>) -> Self {
        Self {
            error: kind.to_string(),
            message,
            token,
            code: 2,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self {
            error: "IoError".into(),
            message: format!("{}: {e}", path.display()),
            token: Some(path.display().to_string()),
            code: 3,
        }
    }
}

impl From<cryptoflow::Error> for CliError {
    fn from(e: cryptoflow::Error) -> Self {
        Self {
            error: e.kind().to_string(),
            message: e.to_string(),
            token: None,
            code: if e.is_runtime() { 3 } else { 2 },
        }
    }
}

/// Options after applying flags over config over defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub variant: ModelVariant,
    pub params: ModelParams,
    pub eps: f64,
    pub band: f64,
    pub seed: u64,
    pub n: Option<usize>,
    pub axis1: Option<Axis>,
    pub axis2: Option<Axis>,
    pub method: Method,
    pub criterion: Option<Check>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub drop: f64,
    pub dt: f64,
    pub p0: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub svg: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn resolve(flags: Opts) -> Result<Resolved, CliError> {
    let merged = match &flags.config {
        Some(path) => flags.clone().or(opts::read_config(path)?),
        None => flags,
    };
    let d = ModelParams::default();
    let params = ModelParams {
        q: merged.q.unwrap_or(d.q),
        q1: merged.q1.unwrap_or(d.q1),
        q2: merged.q2.unwrap_or(d.q2),
        tau0: merged.tau0.unwrap_or(d.tau0),
        c: merged.c.unwrap_or(d.c),
        c1: merged.c1.unwrap_or(d.c1),
        c2: merged.c2.unwrap_or(d.c2),
        c3: merged.c3.unwrap_or(d.c3),
    };
    let threads = match merged.threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(text) => Some(text.trim().parse::<usize>().map_err(|_| {
                CliError::usage(
                    "TypeError",
                    format!("{THREADS_ENV} must be a non-negative integer"),
                    Some(text.clone()),
                )
            })?),
            Err(_) => None,
        },
    };
    let mut variant = ModelVariant::new(merged.variant.unwrap_or(VariantKind::Full5x5));
    if let Some(z) = merged.zeta2 {
        variant = variant.with_denominator(z);
    }
    Ok(Resolved {
        variant,
        params,
        eps: merged.eps.unwrap_or(DEFAULT_EPS),
        band: merged.band.unwrap_or(DEFAULT_BAND),
        seed: merged.seed.unwrap_or(0),
        n: merged.n,
        axis1: merged.axis1,
        axis2: merged.axis2,
        method: merged.method.unwrap_or(Method::Eigen),
        criterion: merged.criterion,
        step: merged.step,
        horizon: merged.horizon,
        delta: merged.delta,
        mu: merged.mu.unwrap_or(0.0),
        sigma: merged.sigma.unwrap_or(0.0075),
        drop: merged.drop.unwrap_or(0.045),
        dt: merged.dt.unwrap_or(1.0),
        p0: merged.p0.unwrap_or(1.0),
        out: merged.out,
        format: merged.format,
        svg: merged.svg,
        threads,
    })
}

fn run(args: Vec<String>) -> Result<u8, CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(0);
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprint!("{e}");
            return Ok(2);
        }
        Err(e) => return Err(opts::from_clap(&e, "command line")),
    };
    let resolved = resolve(cli.opts)?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = resolved.threads.filter(|&t| t > 0) {
            builder = builder.num_threads(t);
        }
        builder.build().map_err(|e| CliError {
            error: "ThreadPoolError".into(),
            message: e.to_string(),
            token: None,
            code: 3,
        })?
    };
    pool.install(|| match cli.verb {
        Verb::Analyze => commands::analyze(&resolved),
        Verb::Sweep => commands::sweep(&resolved),
        Verb::Simulate => commands::simulate(&resolved),
        Verb::Verify => commands::verify(&resolved),
        Verb::Baseline => commands::baseline(&resolved),
    })
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error serializes"));
            ExitCode::from(e.code)
        }
    }
}
