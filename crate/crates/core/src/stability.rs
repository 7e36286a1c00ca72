//! Linearization at equilibrium, spectra and stability verdicts.

use std::cmp::Ordering;

use num_complex::Complex64;
use twofloat::TwoFloat;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::model::{equilibrium, rhs, validate_params, ModelParams, ModelVariant, StateVector, VariantKind};
use crate::poly::Polynomial;

/// Default half-width of the marginal band on `Re(lambda)`.
pub const DEFAULT_EPS: f64 = 1e-8;
/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Bound on the remainder coefficients when dividing out `(lambda + 1)^2`.
pub const REDUCED_CUBIC_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }

    /// Three-way split of a signed quantity around a band `[-band, band]`,
    /// where positive means stable.
    pub fn from_margin(margin: f64, band: f64) -> Self {
        if margin > band {
            Verdict::Stable
        } else if margin < -band {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }
}

/// Eigenvalues with multiplicity, sorted by descending real part and then
/// descending imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real: f64,
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| match b.re.total_cmp(&a.re) {
            Ordering::Equal => b.im.total_cmp(&a.im),
            other => other,
        });
        let max_real = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            eigenvalues,
            max_real,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Distance in real part between the dominant eigenvalue (or conjugate
    /// pair) and the next one. `None` when every eigenvalue shares the
    /// dominant real part.
    pub fn dominant_gap(&self) -> Option<f64> {
        let tol = 1e-9 * (1.0 + self.max_real.abs());
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .filter(|&re| re < self.max_real - tol)
            .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |a| a.max(re))))
            .map(|next| self.max_real - next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub tag: Verdict,
    /// The dominant eigenvalue has a non-negligible imaginary part (spiral).
    pub oscillatory: bool,
    pub max_real: f64,
    pub eps: f64,
}

/// Linearization of the variant at its equilibrium, in state order.
///
/// The full system is only supported under the scaling `c = c1 = c2`.
pub fn jacobian_analytic(variant: ModelVariant, params: &ModelParams) -> Result<SquareMatrix> {
    validate_params(*params, variant)?;
    let p = params;
    let (q, q1, q2) = (p.q, p.q1, p.q2);
    let rows: Vec<Vec<f64>> = match variant.kind {
        VariantKind::Full5x5 => {
            if p.c != p.c1 || p.c != p.c2 {
                return Err(Error::UnsupportedScaling(format!(
                    "full 5x5 linearization requires c = c1 = c2 (got c = {}, c1 = {}, c2 = {})",
                    p.c, p.c1, p.c2
                )));
            }
            vec![
                scale(&[-1.0, 0.0, 1.0, 2.0, 2.0], p.tau0),
                scale(&[1.0, -1.0, 0.0, 0.0, 0.0], p.c3),
                scale(&[-q, 0.0, q - 1.0, 2.0 * q, 2.0 * q], p.c),
                scale(&[-q1, 0.0, q1, 2.0 * q1 - 1.0, 2.0 * q1], p.c1),
                scale(&[-q2, q2, 0.0, 0.0, -1.0], p.c2),
            ]
        }
        VariantKind::Sentiment3x3 => vec![
            scale(&[-1.0, 1.0, 2.0], p.tau0),
            scale(&[-q, q - 1.0, 2.0 * q], p.c),
            scale(&[-q1, q1, 2.0 * q1 - 1.0], p.c1),
        ],
        VariantKind::Liquidity2x2 => vec![
            scale(&[-1.0, 1.0], p.tau0),
            scale(&[-q, q - 1.0], p.c),
        ],
    };
    SquareMatrix::from_rows(&rows)
}

fn scale(row: &[f64], time_scale: f64) -> Vec<f64> {
    row.iter().map(|x| x / time_scale).collect()
}

/// Central-difference Jacobian of [`rhs`] at the equilibrium.
pub fn jacobian_numeric(variant: ModelVariant, params: &ModelParams, h: f64) -> Result<SquareMatrix> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} outside [1e-8, 1e-4]"
        )));
    }
    validate_params(*params, variant)?;
    let n = variant.dim();
    let x0 = equilibrium(variant).components(variant);
    let mut m = SquareMatrix::zeros(n);
    for j in 0..n {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus[j] += h;
        minus[j] -= h;
        let f_plus = rhs(variant, params, &StateVector::from_components(variant, &plus))?
            .components(variant);
        let f_minus = rhs(variant, params, &StateVector::from_components(variant, &minus))?
            .components(variant);
        for i in 0..n {
            m[(i, j)] = (f_plus[i] - f_minus[i]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// Monic characteristic polynomial `det(lambda I - m)` by cofactor expansion
/// with polynomial entries, accumulated in double-double precision so that
/// cancellation between large partial products does not reach the result.
pub fn char_poly(m: &SquareMatrix) -> Polynomial {
    let n = m.dim();
    // Entry (i, j) of lambda I - m as [lambda coefficient, constant].
    let entry = |i: usize, j: usize| -> [f64; 2] {
        [if i == j { 1.0 } else { 0.0 }, -m[(i, j)]]
    };
    let columns: Vec<usize> = (0..n).collect();
    let coeffs = cofactor_expansion(&entry, 0, &columns);
    Polynomial::new(coeffs.into_iter().map(f64::from).collect())
}

/// Determinant of the minor on rows `row..` and the given columns, as
/// polynomial coefficients (leading first, length `columns.len() + 1`).
fn cofactor_expansion(entry: &dyn Fn(usize, usize) -> [f64; 2], row: usize, columns: &[usize]) -> Vec<TwoFloat> {
    let k = columns.len();
    if k == 1 {
        return entry(row, columns[0]).iter().map(|&x| TwoFloat::from(x)).collect();
    }
    let mut acc = vec![TwoFloat::from(0.0); k + 1];
    for (pos, &col) in columns.iter().enumerate() {
        let [lin, constant] = entry(row, col);
        if lin == 0.0 && constant == 0.0 {
            continue;
        }
        let rest: Vec<usize> = columns.iter().copied().filter(|&c| c != col).collect();
        let minor = cofactor_expansion(entry, row + 1, &rest);
        let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
        // (lin * x + constant) * minor, aligned to degree k.
        for (i, &m) in minor.iter().enumerate() {
            acc[i] += m * (sign * lin);
            acc[i + 1] += m * (sign * constant);
        }
    }
    acc
}

/// All eigenvalues of `m`.
pub fn eigenvalues(m: &SquareMatrix) -> Result<Spectrum> {
    eigen::real_eigenvalues(m).map(Spectrum::new)
}

/// The factor of the full system's characteristic polynomial left after
/// removing the double root at `-1`.
///
/// Requires the unit scaling `c = c1 = c2 = 1`.
pub fn reduced_cubic(params: &ModelParams) -> Result<Polynomial> {
    require_unit_scaling(params)?;
    let full = char_poly(&jacobian_analytic(ModelVariant::full(), params)?);
    let (cubic, remainder) = full.div_rem_monic(&Polynomial::linear_power(-1.0, 2))?;
    let residual = remainder.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    let tolerance = REDUCED_CUBIC_TOLERANCE;
    if residual > tolerance {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance,
        });
    }
    Ok(cubic)
}

pub(crate) fn require_unit_scaling(params: &ModelParams) -> Result<()> {
    if params.c != 1.0 || params.c1 != 1.0 || params.c2 != 1.0 {
        return Err(Error::UnsupportedScaling(format!(
            "requires c = c1 = c2 = 1 (got c = {}, c1 = {}, c2 = {})",
            params.c, params.c1, params.c2
        )));
    }
    Ok(())
}

/// Stable iff `max_real < -eps`, unstable iff `max_real > eps`.
///
/// # Panics
///
/// If `eps` is not positive.
pub fn classify(spectrum: &Spectrum, eps: f64) -> StabilityVerdict {
    assert!(eps > 0.0, "classification tolerance must be positive");
    let max_real = spectrum.max_real;
    let oscillatory = spectrum
        .eigenvalues
        .iter()
        .any(|z| z.re >= max_real - eps && z.im.abs() > eps);
    StabilityVerdict {
        tag: Verdict::from_margin(-max_real, eps),
        oscillatory,
        max_real,
        eps,
    }
}

/// Eigenvalue verdict of the linearization at equilibrium.
pub fn linear_verdict(variant: ModelVariant, params: &ModelParams, eps: f64) -> Result<StabilityVerdict> {
    let j = jacobian_analytic(variant, params)?;
    Ok(classify(&eigenvalues(&j)?, eps))
}
