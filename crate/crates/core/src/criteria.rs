//! Closed-form stability criteria and their cross-check against spectra.
//!
//! Every criterion reports a signed `margin` (positive means stable) and the
//! inequality that decided it. With `K = q + 2 q1` and `Q = 1 - K`:
//!
//! | criterion                     | stable iff                                  |
//! |-------------------------------|---------------------------------------------|
//! | liquidity 2x2                 | `1 + c/tau0 - q > 0`                        |
//! | sentiment 3x3 (`c = c1`)      | `Q + c/tau0 > 0`                            |
//! | full 5x5, `q2 = 0`            | `Q + 1/tau0 > 0`                            |
//! | full 5x5, Routh–Hurwitz       | `a2 > 0` and `a2 a1 > a0` for the cubic      |
//!
//! where the cubic left after removing the double root at `-1` has
//! `a2 = 1/tau0 + 1/c3 + Q`, `a1 = Q/c3 + 1/tau0 + 2 q2/tau0 + 1/(tau0 c3)`
//! and `a0 = 1/(c3 tau0)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ModelVariant, VariantKind};
use crate::poly::Polynomial;
use crate::stability::{linear_verdict, require_unit_scaling, StabilityVerdict, Verdict};

/// Default half-width of the marginal band on closed-form margins.
pub const DEFAULT_BAND: f64 = 1e-6;

/// At most this many mismatches are listed in a [`ConsistencyReport`].
pub const MAX_LISTED_MISMATCHES: usize = 100;

/// The inequality that decided a [`CriterionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    LiquidityThreshold,
    SentimentTheorem,
    FullQ2Zero,
    /// `1/tau0 + 1/c3 + Q > 0`
    RouthHurwitzTrace,
    /// The product inequality of the Routh–Hurwitz pair.
    RouthHurwitzProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub verdict: Verdict,
    pub margin: f64,
    pub binding: Inequality,
}

impl CriterionResult {
    fn new(margin: f64, binding: Inequality, band: f64) -> Self {
        Self {
            verdict: Verdict::from_margin(margin, band),
            margin,
            binding,
        }
    }
}

/// Price–liquidity system: unstable iff `q > 1 + c/tau0`.
pub fn criterion_2x2(params: &ModelParams, band: f64) -> CriterionResult {
    let margin = 1.0 + params.c / params.tau0 - params.q;
    CriterionResult::new(margin, Inequality::LiquidityThreshold, band)
}

/// Price–liquidity–trend system with `c = c1`: stable iff `Q + c/tau0 > 0`.
pub fn criterion_3x3(params: &ModelParams, band: f64) -> Result<CriterionResult> {
    if params.c != params.c1 {
        return Err(Error::ScalingOutOfScope {
            c: params.c,
            c1: params.c1,
        });
    }
    let margin = params.Q() + params.c / params.tau0;
    Ok(CriterionResult::new(margin, Inequality::SentimentTheorem, band))
}

/// Full system without value sentiment: stable iff `Q + 1/tau0 > 0`.
pub fn criterion_5x5_q2zero(params: &ModelParams, band: f64) -> Result<CriterionResult> {
    if params.q2 != 0.0 {
        return Err(Error::OutOfScope(format!(
            "requires q2 = 0, got q2 = {}",
            params.q2
        )));
    }
    require_unit_scaling(params)?;
    let margin = params.Q() + 1.0 / params.tau0;
    Ok(CriterionResult::new(margin, Inequality::FullQ2Zero, band))
}

/// Routh–Hurwitz conditions for the full system.
///
/// The margin is the smaller of the two slacks; the product inequality's
/// slack is normalized as `(lhs - rhs) / (1 + |rhs|)`.
pub fn rh_5x5(params: &ModelParams, band: f64) -> Result<CriterionResult> {
    require_unit_scaling(params)?;
    let (tau0, c3, q2) = (params.tau0, params.c3, params.q2);
    let big_q = params.Q();
    let trace = 1.0 / tau0 + 1.0 / c3 + big_q;
    let lhs = (big_q / c3 + 1.0 / tau0 + 2.0 * q2 / tau0 + 1.0 / (tau0 * c3)) * trace;
    let rhs = 1.0 / (c3 * tau0);
    let product = (lhs - rhs) / (1.0 + rhs.abs());
    let (margin, binding) = if trace <= product {
        (trace, Inequality::RouthHurwitzTrace)
    } else {
        (product, Inequality::RouthHurwitzProduct)
    };
    Ok(CriterionResult::new(margin, binding, band))
}

/// The sufficient pair: `1/c3 + 1/tau0 > K` and `1/c3 + 1/tau0 > K/c3 - 2 q2/tau0`.
pub fn sufficient_5x5(params: &ModelParams) -> Result<bool> {
    require_unit_scaling(params)?;
    let rates = 1.0 / params.c3 + 1.0 / params.tau0;
    let k = params.k();
    Ok(rates > k && rates > k / params.c3 - 2.0 * params.q2 / params.tau0)
}

/// `1/c3 + 1/tau0 > K`, the condition stated alongside the `q2 = 0` case.
///
/// Reported as a diagnostic only; [`criterion_5x5_q2zero`] is the verdict source.
pub fn simpler_condition_5x5(params: &ModelParams) -> bool {
    1.0 / params.c3 + 1.0 / params.tau0 > params.k()
}

/// Hurwitz test: every root of `p` has negative real part.
///
/// All leading principal minors of the Hurwitz matrix must be positive.
/// A non-monic `p` is normalized by its leading coefficient.
pub fn hurwitz_stable(p: &Polynomial) -> Result<bool> {
    let n = p.degree();
    if !(1..=5).contains(&n) {
        return Err(Error::DegreeOutOfRange { degree: n });
    }
    let lead = p.leading();
    let a: Vec<f64> = p.coeffs().iter().map(|c| c / lead).collect();
    let coeff = |k: isize| -> f64 {
        if k < 0 || k as usize > n {
            0.0
        } else {
            a[k as usize]
        }
    };
    // H[i][j] = a_{2(j+1) - (i+1)} in 1-based indexing.
    let hurwitz: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| coeff(2 * (j as isize + 1) - (i as isize + 1)))
                .collect()
        })
        .collect();
    for k in 1..=n {
        if !(determinant(&hurwitz, k) > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Determinant of the leading `k x k` block, by elimination with partial pivoting.
fn determinant(m: &[Vec<f64>], k: usize) -> f64 {
    let mut a: Vec<Vec<f64>> = m[..k].iter().map(|row| row[..k].to_vec()).collect();
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for j in col..k {
                a[row][j] -= f * a[col][j];
            }
        }
    }
    det
}

/// Which closed form a consistency run arbitrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `q > 1 + c/tau0` on the price–liquidity system.
    Threshold2x2,
    /// `Q + c/tau0 > 0` on the sentiment system with `c = c1`.
    Theorem2,
    /// `Q + 1/tau0 > 0` on the full system with `q2 = 0`, `c = c1 = c2 = 1`.
    Theorem1,
    /// Routh–Hurwitz pair on the full system with `c = c1 = c2 = 1`.
    RouthHurwitz,
}

impl Check {
    pub fn default_for(variant: VariantKind) -> Self {
        match variant {
            VariantKind::Liquidity2x2 => Check::Threshold2x2,
            VariantKind::Sentiment3x3 => Check::Theorem2,
            VariantKind::Full5x5 => Check::RouthHurwitz,
        }
    }

    pub fn variant(&self) -> ModelVariant {
        match self {
            Check::Threshold2x2 => ModelVariant::liquidity(),
            Check::Theorem2 => ModelVariant::sentiment(),
            Check::Theorem1 | Check::RouthHurwitz => ModelVariant::full(),
        }
    }

    /// Closed-form verdict for `params`.
    pub fn evaluate(&self, params: &ModelParams, band: f64) -> Result<CriterionResult> {
        match self {
            Check::Threshold2x2 => Ok(criterion_2x2(params, band)),
            Check::Theorem2 => criterion_3x3(params, band),
            Check::Theorem1 => criterion_5x5_q2zero(params, band),
            Check::RouthHurwitz => rh_5x5(params, band),
        }
    }

    /// Force `params` into the scope of this check.
    pub fn constrain(&self, mut params: ModelParams) -> ModelParams {
        match self {
            Check::Threshold2x2 => {}
            Check::Theorem2 => params.c1 = params.c,
            Check::Theorem1 => {
                params.c = 1.0;
                params.c1 = 1.0;
                params.c2 = 1.0;
                params.q2 = 0.0;
            }
            Check::RouthHurwitz => {
                params.c = 1.0;
                params.c1 = 1.0;
                params.c2 = 1.0;
            }
        }
        params
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Threshold2x2 => "threshold2x2",
            Check::Theorem2 => "theorem2",
            Check::Theorem1 => "theorem1",
            Check::RouthHurwitz => "routh-hurwitz",
        })
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold2x2" => Ok(Check::Threshold2x2),
            "theorem2" => Ok(Check::Theorem2),
            "theorem1" => Ok(Check::Theorem1),
            "routh-hurwitz" | "rh" => Ok(Check::RouthHurwitz),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Log-uniform parameter sampler: amplitudes in `[1e-3, 10]`, time scales
/// in `[1e-2, 10]`. Draws all eight fields per sample in a fixed order.
#[derive(Debug, Clone)]
pub struct ParamSampler {
    rng: ChaCha8Rng,
    pub amplitude_range: (f64, f64),
    pub time_scale_range: (f64, f64),
}

impl ParamSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude_range: (1e-3, 10.0),
            time_scale_range: (1e-2, 10.0),
        }
    }

    pub fn with_ranges(seed: u64, amplitude: (f64, f64), time_scale: (f64, f64)) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude_range: amplitude,
            time_scale_range: time_scale,
        }
    }

    fn log_uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        let u: f64 = self.rng.gen();
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    }

    pub fn sample(&mut self) -> ModelParams {
        let a = self.amplitude_range;
        let t = self.time_scale_range;
        ModelParams {
            q: self.log_uniform(a),
            q1: self.log_uniform(a),
            q2: self.log_uniform(a),
            tau0: self.log_uniform(t),
            c: self.log_uniform(t),
            c1: self.log_uniform(t),
            c2: self.log_uniform(t),
            c3: self.log_uniform(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub params: ModelParams,
    pub closed_form: CriterionResult,
    pub spectral: StabilityVerdict,
}

/// Agreement of a boolean side condition with the spectral verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAgreement {
    pub condition: String,
    pub compared: usize,
    pub agreements: usize,
    pub rate: f64,
}

/// How the sufficient pair relates to the Routh–Hurwitz verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyTally {
    pub sufficient_true: usize,
    /// Sufficient pair holds but Routh–Hurwitz is not stable.
    pub counterexamples: usize,
    /// Sufficient pair fails while Routh–Hurwitz is stable.
    pub witnesses: usize,
    pub first_witness: Option<ModelParams>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simpler_condition: Option<ConditionAgreement>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sufficient: Option<SufficiencyTally>,
}

/// Outcome of [`verify_consistency`]. `samples = agreements + mismatches + excluded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub check: Check,
    pub variant: VariantKind,
    pub samples: usize,
    pub agreements: usize,
    pub mismatches: usize,
    pub excluded: usize,
    /// First [`MAX_LISTED_MISMATCHES`] mismatching points, in sample order.
    pub mismatch_list: Vec<Mismatch>,
    pub seed: u64,
    pub band: f64,
    pub eps: f64,
    pub diagnostics: Diagnostics,
}

struct SampleOutcome {
    params: ModelParams,
    closed_form: CriterionResult,
    spectral: StabilityVerdict,
    sufficient: Option<bool>,
    simpler: Option<bool>,
}

/// Compare a closed-form criterion with eigenvalue verdicts on `n` sampled
/// parameter points.
///
/// Points inside either marginal band are excluded. The sample set depends
/// only on `seed`; evaluation runs on the current rayon pool and the tally
/// does not depend on scheduling.
pub fn verify_consistency(
    check: Check,
    n: usize,
    seed: u64,
    band: f64,
    eps: f64,
) -> Result<ConsistencyReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(band > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("band and eps must be positive".into()));
    }
    let mut sampler = ParamSampler::new(seed);
    let points: Vec<ModelParams> = (0..n).map(|_| check.constrain(sampler.sample())).collect();
    let variant = check.variant();

    let outcomes: Vec<SampleOutcome> = points
        .par_iter()
        .map(|params| -> Result<SampleOutcome> {
            let closed_form = check.evaluate(params, band)?;
            let spectral = linear_verdict(variant, params, eps)?;
            let sufficient = match check {
                Check::RouthHurwitz => Some(sufficient_5x5(params)?),
                _ => None,
            };
            let simpler = match check {
                Check::Theorem1 => Some(simpler_condition_5x5(params)),
                _ => None,
            };
            Ok(SampleOutcome {
                params: *params,
                closed_form,
                spectral,
                sufficient,
                simpler,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = ConsistencyReport {
        check,
        variant: variant.kind,
        samples: n,
        agreements: 0,
        mismatches: 0,
        excluded: 0,
        mismatch_list: Vec::new(),
        seed,
        band,
        eps,
        diagnostics: Diagnostics::default(),
    };
    let mut simpler = ConditionAgreement {
        condition: "1/c3 + 1/tau0 > K".into(),
        compared: 0,
        agreements: 0,
        rate: 0.0,
    };
    let mut tally = SufficiencyTally {
        sufficient_true: 0,
        counterexamples: 0,
        witnesses: 0,
        first_witness: None,
    };

    for o in &outcomes {
        let decisive = o.closed_form.verdict != Verdict::Marginal && o.spectral.tag != Verdict::Marginal;
        if !decisive {
            report.excluded += 1;
        } else if o.closed_form.verdict == o.spectral.tag {
            report.agreements += 1;
        } else {
            report.mismatches += 1;
            if report.mismatch_list.len() < MAX_LISTED_MISMATCHES {
                report.mismatch_list.push(Mismatch {
                    params: o.params,
                    closed_form: o.closed_form,
                    spectral: o.spectral,
                });
            }
        }
        if let Some(holds) = o.simpler {
            if o.spectral.tag != Verdict::Marginal {
                simpler.compared += 1;
                if holds == (o.spectral.tag == Verdict::Stable) {
                    simpler.agreements += 1;
                }
            }
        }
        if let Some(holds) = o.sufficient {
            let rh_stable = o.closed_form.verdict == Verdict::Stable;
            if holds {
                tally.sufficient_true += 1;
                if !rh_stable {
                    tally.counterexamples += 1;
                }
            } else if rh_stable {
                tally.witnesses += 1;
                tally.first_witness.get_or_insert(o.params);
            }
        }
    }

    if check == Check::Theorem1 {
        simpler.rate = if simpler.compared > 0 {
            simpler.agreements as f64 / simpler.compared as f64
        } else {
            0.0
        };
        report.diagnostics.simpler_condition = Some(simpler);
    }
    if check == Check::RouthHurwitz {
        report.diagnostics.sufficient = Some(tally);
    }
    Ok(report)
}
