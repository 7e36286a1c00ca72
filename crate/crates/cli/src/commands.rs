use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cryptoflow::criteria::{
    criterion_2x2, criterion_3x3, criterion_5x5_q2zero, rh_5x5, simpler_condition_5x5, sufficient_5x5, Check,
    ConsistencyReport, CriterionResult,
};
use cryptoflow::gbm::{exceedance_report, gbm_simulate, GbmParams, CITED_EMPIRICAL_FREQUENCY};
use cryptoflow::model::{ModelParams, ModelVariant, VariantKind};
use cryptoflow::simulate::{integrate_partial, perturb_and_classify, EmpiricalOutcome, SimConfig};
use cryptoflow::stability::{char_poly, classify, eigenvalues, jacobian_analytic, reduced_cubic, StabilityVerdict};
use cryptoflow::sweep::{run_sweep, Axis, AxisParam, SweepSpec};
use cryptoflow::{equilibrium, validate_params, Complex64, Polynomial, SquareMatrix, VERSION};
use serde::Serialize;

use crate::opts::Format;
use crate::{CliError, Resolved};

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Write to `--out` if given, otherwise to stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("document serializes") + "\n"
}

fn json_only(r: &Resolved, verb: &str) -> Result<(), CliError> {
    match r.format {
        Some(Format::Csv) => Err(CliError::usage(
            "ConflictingOptions",
            format!("{verb} writes JSON only"),
            Some("--format".into()),
        )),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum ClosedForm {
    Criterion(CriterionResult),
    Flag(bool),
    NotApplicable { not_applicable: String },
}

impl From<cryptoflow::Result<CriterionResult>> for ClosedForm {
    fn from(r: cryptoflow::Result<CriterionResult>) -> Self {
        match r {
            Ok(c) => ClosedForm::Criterion(c),
            Err(e) => ClosedForm::NotApplicable {
                not_applicable: e.to_string(),
            },
        }
    }
}

#[derive(Serialize)]
struct AnalyzeDoc {
    tool_version: &'static str,
    variant: ModelVariant,
    params: ModelParams,
    ignored_fields: &'static [&'static str],
    eps: f64,
    band: f64,
    jacobian: SquareMatrix,
    char_poly: Polynomial,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced_cubic: Option<Polynomial>,
    eigenvalues: Vec<Complex64>,
    verdict: StabilityVerdict,
    closed_form_verdicts: BTreeMap<&'static str, ClosedForm>,
}

pub fn analyze(r: &Resolved) -> Result<u8, CliError> {
    json_only(r, "analyze")?;
    let checked = validate_params(r.params, r.variant)?;
    let p = &r.params;
    let jacobian = jacobian_analytic(r.variant, p)?;
    let spectrum = eigenvalues(&jacobian)?;
    let verdict = classify(&spectrum, r.eps);
    let mut closed = BTreeMap::new();
    let mut cubic = None;
    match r.variant.kind {
        VariantKind::Liquidity2x2 => {
            closed.insert("threshold2x2", ClosedForm::Criterion(criterion_2x2(p, r.band)));
        }
        VariantKind::Sentiment3x3 => {
            closed.insert("theorem2", criterion_3x3(p, r.band).into());
        }
        VariantKind::Full5x5 => {
            closed.insert("routh_hurwitz", rh_5x5(p, r.band).into());
            closed.insert("theorem1", criterion_5x5_q2zero(p, r.band).into());
            closed.insert(
                "sufficient",
                match sufficient_5x5(p) {
                    Ok(b) => ClosedForm::Flag(b),
                    Err(e) => ClosedForm::NotApplicable {
                        not_applicable: e.to_string(),
                    },
                },
            );
            if p.q2 == 0.0 {
                closed.insert("simpler_condition", ClosedForm::Flag(simpler_condition_5x5(p)));
            }
            cubic = reduced_cubic(p).ok();
        }
    }
    let doc = AnalyzeDoc {
        tool_version: VERSION,
        variant: r.variant,
        params: *p,
        ignored_fields: checked.ignored,
        eps: r.eps,
        band: r.band,
        char_poly: char_poly(&jacobian),
        jacobian,
        reduced_cubic: cubic,
        eigenvalues: spectrum.eigenvalues,
        verdict,
        closed_form_verdicts: closed,
    };
    emit(&r.out, &to_json(&doc))?;
    Ok(0)
}

fn default_axes(variant: VariantKind) -> (Axis, Axis) {
    match variant {
        VariantKind::Full5x5 => (
            Axis::new(AxisParam::K, 0.0, 6.0, 121),
            Axis::new(AxisParam::Q2, 0.0, 3.0, 61),
        ),
        VariantKind::Sentiment3x3 | VariantKind::Liquidity2x2 => (
            Axis::new(AxisParam::Q, 0.0, 5.0, 101),
            Axis::new(AxisParam::COverTau0, 0.0, 3.0, 61),
        ),
    }
}

pub fn sweep(r: &Resolved) -> Result<u8, CliError> {
    let (d1, d2) = default_axes(r.variant.kind);
    let spec = SweepSpec {
        variant: r.variant,
        fixed: r.params,
        axis1: r.axis1.unwrap_or(d1),
        axis2: r.axis2.unwrap_or(d2),
        method: r.method,
        eps: r.eps,
        band: r.band,
    };
    let map = run_sweep(&spec)?;
    let text = match r.format.unwrap_or(Format::Json) {
        Format::Json => map.to_json(),
        Format::Csv => map.to_csv(),
    };
    emit(&r.out, &text)?;
    if let Some(svg) = &r.svg {
        write_file(svg, &map.to_svg(8))?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct SimulateDoc<'a> {
    tool_version: &'static str,
    variant: ModelVariant,
    params: ModelParams,
    config: SimConfig,
    outcome: EmpiricalOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_file: Option<&'a Path>,
    recorded_points: usize,
}

pub fn simulate(r: &Resolved) -> Result<u8, CliError> {
    json_only(r, "simulate (the trajectory CSV goes to --out)")?;
    let mut cfg = SimConfig::for_params(r.variant, &r.params);
    if let Some(h) = r.step {
        cfg.step = h;
    }
    if let Some(t) = r.horizon {
        cfg.horizon = t;
    }
    if let Some(d) = r.delta {
        cfg.perturbation = d;
    }
    let outcome = perturb_and_classify(r.variant, &r.params, &cfg)?;
    let mut initial = equilibrium(r.variant);
    initial.p += cfg.perturbation;
    // A run that blows up still reports its verdict and writes everything
    // recorded before the failure; the exit code then says it failed.
    let (trajectory, failure) = integrate_partial(r.variant, &r.params, &initial, &cfg)?;
    if let Some(path) = &r.out {
        write_file(path, &trajectory.to_csv())?;
    }
    let doc = SimulateDoc {
        tool_version: VERSION,
        variant: r.variant,
        params: r.params,
        config: cfg,
        outcome,
        trajectory_file: r.out.as_deref(),
        recorded_points: trajectory.times.len(),
    };
    print!("{}", to_json(&doc));
    match failure {
        None => Ok(0),
        Some(e) => Err(CliError { code: 3, ..e.into() }),
    }
}

#[derive(Serialize)]
struct VerifyDoc {
    tool_version: &'static str,
    #[serde(flatten)]
    report: ConsistencyReport,
}

pub fn verify(r: &Resolved) -> Result<u8, CliError> {
    json_only(r, "verify")?;
    let check = r.criterion.unwrap_or_else(|| Check::default_for(r.variant.kind));
    if check.variant().kind != r.variant.kind {
        return Err(CliError::usage(
            "ConflictingOptions",
            format!("criterion {check} applies to {}, not {}", check.variant().kind, r.variant.kind),
            Some(check.to_string()),
        ));
    }
    let n = r.n.unwrap_or(10_000);
    let report = cryptoflow::verify_consistency(check, n, r.seed, r.band, r.eps)?;
    let mismatches = report.mismatches;
    emit(&r.out, &to_json(&VerifyDoc {
        tool_version: VERSION,
        report,
    }))?;
    Ok(if mismatches == 0 { 0 } else { 1 })
}

#[derive(Serialize)]
struct CitedFrequency {
    probability_order: f64,
    note: &'static str,
}

#[derive(Serialize)]
struct BaselineDoc<'a> {
    tool_version: &'static str,
    k: f64,
    probability: f64,
    recurrence_days: f64,
    sigma_daily: f64,
    drop: f64,
    cited_empirical_frequency: CitedFrequency,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<GbmParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path_file: Option<&'a Path>,
}

pub fn baseline(r: &Resolved) -> Result<u8, CliError> {
    json_only(r, "baseline (the path CSV goes to --out)")?;
    let report = exceedance_report(r.sigma, r.drop)?;
    let gbm = GbmParams {
        mu: r.mu,
        sigma: r.sigma,
        dt: r.dt,
        n: r.n.unwrap_or(1000),
        seed: r.seed,
    };
    if let Some(path) = &r.out {
        write_file(path, &gbm_simulate(&gbm, r.p0)?.to_csv())?;
    }
    let doc = BaselineDoc {
        tool_version: VERSION,
        k: report.k,
        probability: report.probability,
        recurrence_days: report.recurrence_days,
        sigma_daily: r.sigma,
        drop: r.drop,
        cited_empirical_frequency: CitedFrequency {
            probability_order: CITED_EMPIRICAL_FREQUENCY,
            note: "order of magnitude observed in equity index data; cited, not computed",
        },
        path: r.out.as_ref().map(|_| gbm),
        p0: r.out.as_ref().map(|_| r.p0),
        path_file: r.out.as_deref(),
    };
    print!("{}", to_json(&doc));
    Ok(0)
}
