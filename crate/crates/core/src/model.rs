//! Asset-flow model variants, parameters, right-hand sides and equilibria.
//!
//! All prices are expressed in units of the base liquidity `L0`, so the
//! equilibrium of every variant sits at `P = Pa = L = 1`, `zeta1 = zeta2 = 0`.
//! The state carries five components; reduced variants simply ignore the
//! components they do not model.
//!
//! The full system, with `S = 1 + 2 zeta1 + 2 zeta2`:
//!
//! ```text
//! tau0 P'     = S L - P
//! c3   Pa'    = P - Pa
//! c    L'     = 1 - L + q (S L - P)
//! c1   zeta1' = q1 (S L / P - 1) - zeta1
//! c2   zeta2' = q2 (Pa - P) / D - zeta2        D = Pa (default) or P
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible price; the right-hand sides divide by `P` and `Pa`.
pub const P_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    /// State `(P, Pa, L, zeta1, zeta2)`.
    Full5x5,
    /// State `(P, L, zeta1)`; no valuation component.
    Sentiment3x3,
    /// State `(P, L)`; liquidity only.
    Liquidity2x2,
}

/// Denominator of the value-sentiment forcing term. The two choices agree at
/// and linearize identically around equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zeta2Denominator {
    #[default]
    AnchorPa,
    PriceP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub kind: VariantKind,
    #[serde(default)]
    pub zeta2_denominator: Zeta2Denominator,
}

impl ModelVariant {
    pub const fn new(kind: VariantKind) -> Self {
        Self {
            kind,
            zeta2_denominator: Zeta2Denominator::AnchorPa,
        }
    }

    pub const fn full() -> Self {
        Self::new(VariantKind::Full5x5)
    }

    pub const fn sentiment() -> Self {
        Self::new(VariantKind::Sentiment3x3)
    }

    pub const fn liquidity() -> Self {
        Self::new(VariantKind::Liquidity2x2)
    }

    pub const fn with_denominator(mut self, denominator: Zeta2Denominator) -> Self {
        self.zeta2_denominator = denominator;
        self
    }

    /// Number of state components the variant evolves.
    pub const fn dim(&self) -> usize {
        match self.kind {
            VariantKind::Full5x5 => 5,
            VariantKind::Sentiment3x3 => 3,
            VariantKind::Liquidity2x2 => 2,
        }
    }

    /// Names of the evolved components, in state order.
    pub fn state_names(&self) -> &'static [&'static str] {
        match self.kind {
            VariantKind::Full5x5 => &["P", "Pa", "L", "zeta1", "zeta2"],
            VariantKind::Sentiment3x3 => &["P", "L", "zeta1"],
            VariantKind::Liquidity2x2 => &["P", "L"],
        }
    }

    /// Parameter fields that have no effect on this variant.
    pub fn ignored_fields(&self) -> &'static [&'static str] {
        match self.kind {
            VariantKind::Full5x5 => &[],
            VariantKind::Sentiment3x3 => &["q2", "c2", "c3"],
            VariantKind::Liquidity2x2 => &["q1", "q2", "c1", "c2", "c3"],
        }
    }
}

impl FromStr for Zeta2Denominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "anchor_pa" | "pa" => Ok(Zeta2Denominator::AnchorPa),
            "price_p" | "p" => Ok(Zeta2Denominator::PriceP),
            other => Err(Error::InvalidArgument(format!(
                "unknown zeta2 denominator `{other}`; expected anchor_pa or price_p"
            ))),
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantKind::Full5x5 => "full5x5",
            VariantKind::Sentiment3x3 => "sentiment3x3",
            VariantKind::Liquidity2x2 => "liquidity2x2",
        })
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full5x5" | "full" => Ok(VariantKind::Full5x5),
            "sentiment3x3" | "sentiment" => Ok(VariantKind::Sentiment3x3),
            "liquidity2x2" | "liquidity" => Ok(VariantKind::Liquidity2x2),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

/// Model coefficients. Amplitudes are dimensionless, time scales share one
/// abstract time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Trend-driven liquidity amplitude.
    pub q: f64,
    /// Trend-sentiment amplitude.
    pub q1: f64,
    /// Value-sentiment amplitude.
    pub q2: f64,
    /// Price adjustment time scale.
    pub tau0: f64,
    /// Liquidity time scale.
    pub c: f64,
    /// Trend time scale.
    pub c1: f64,
    /// Value-sentiment time scale.
    pub c2: f64,
    /// Anchoring time scale.
    pub c3: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            q1: 0.5,
            q2: 0.5,
            tau0: 0.1,
            c: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 10.0,
        }
    }
}

impl ModelParams {
    /// Combined trend amplitude `q + 2 q1`.
    pub fn k(&self) -> f64 {
        self.q + 2.0 * self.q1
    }

    /// `1 - K`.
    #[allow(non_snake_case)]
    pub fn Q(&self) -> f64 {
        1.0 - self.k()
    }

    pub fn time_scales(&self) -> [(&'static str, f64); 5] {
        [
            ("tau0", self.tau0),
            ("c", self.c),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ]
    }

    pub fn amplitudes(&self) -> [(&'static str, f64); 3] {
        [("q", self.q), ("q1", self.q1), ("q2", self.q2)]
    }

    /// Smallest time scale the variant actually uses.
    pub fn fastest_time_scale(&self, variant: ModelVariant) -> f64 {
        let ignored = variant.ignored_fields();
        self.time_scales()
            .iter()
            .filter(|(name, _)| !ignored.contains(name))
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min)
    }

    /// Set a named field. Returns an error for unknown names.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "q" => self.q = value,
            "q1" => self.q1 = value,
            "q2" => self.q2 = value,
            "tau0" => self.tau0 = value,
            "c" => self.c = value,
            "c1" => self.c1 = value,
            "c2" => self.c2 = value,
            "c3" => self.c3 = value,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown parameter `{other}`"
                )))
            }
        }
        Ok(())
    }
}

/// Parameters that passed [`validate_params`], with the fields the variant ignores.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedParams {
    pub params: ModelParams,
    pub ignored: &'static [&'static str],
}

/// Check positivity of all time scales and non-negativity of all amplitudes.
///
/// Every field is checked regardless of variant; the returned
/// [`CheckedParams::ignored`] lists the fields the variant will not read.
pub fn validate_params(params: ModelParams, variant: ModelVariant) -> Result<CheckedParams> {
    for (name, value) in params.time_scales() {
        // NaN fails this comparison too.
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveTimeScale { name, value });
        }
    }
    for (name, value) in params.amplitudes() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeAmplitude { name, value });
        }
    }
    Ok(CheckedParams {
        params,
        ignored: variant.ignored_fields(),
    })
}

/// A point of the state space in units of `L0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub p: f64,
    pub pa: f64,
    pub l: f64,
    pub zeta1: f64,
    pub zeta2: f64,
}

impl StateVector {
    pub const EQUILIBRIUM: StateVector = StateVector {
        p: 1.0,
        pa: 1.0,
        l: 1.0,
        zeta1: 0.0,
        zeta2: 0.0,
    };

    pub const ZERO: StateVector = StateVector {
        p: 0.0,
        pa: 0.0,
        l: 0.0,
        zeta1: 0.0,
        zeta2: 0.0,
    };

    /// Components evolved by `variant`, in state order.
    pub fn components(&self, variant: ModelVariant) -> Vec<f64> {
        match variant.kind {
            VariantKind::Full5x5 => vec![self.p, self.pa, self.l, self.zeta1, self.zeta2],
            VariantKind::Sentiment3x3 => vec![self.p, self.l, self.zeta1],
            VariantKind::Liquidity2x2 => vec![self.p, self.l],
        }
    }

    /// Inverse of [`components`](Self::components). Absent components take
    /// their equilibrium value.
    pub fn from_components(variant: ModelVariant, values: &[f64]) -> Self {
        assert_eq!(values.len(), variant.dim(), "component count mismatch");
        let mut s = StateVector::EQUILIBRIUM;
        match variant.kind {
            VariantKind::Full5x5 => {
                s.p = values[0];
                s.pa = values[1];
                s.l = values[2];
                s.zeta1 = values[3];
                s.zeta2 = values[4];
            }
            VariantKind::Sentiment3x3 => {
                s.p = values[0];
                s.l = values[1];
                s.zeta1 = values[2];
            }
            VariantKind::Liquidity2x2 => {
                s.p = values[0];
                s.l = values[1];
            }
        }
        s
    }

    /// Restrict to a variant: components it does not evolve are reset.
    pub fn restricted(&self, variant: ModelVariant) -> Self {
        Self::from_components(variant, &self.components(variant))
    }

    pub(crate) fn check_domain(&self, variant: ModelVariant) -> Result<()> {
        if !(self.p >= P_FLOOR) {
            return Err(Error::StateOutOfDomain {
                field: "P",
                value: self.p,
                floor: P_FLOOR,
            });
        }
        if variant.kind == VariantKind::Full5x5 && !(self.pa >= P_FLOOR) {
            return Err(Error::StateOutOfDomain {
                field: "Pa",
                value: self.pa,
                floor: P_FLOOR,
            });
        }
        Ok(())
    }
}

/// Time derivative of `state` under `variant`.
///
/// Components the variant does not evolve are returned as zero.
pub fn rhs(variant: ModelVariant, params: &ModelParams, state: &StateVector) -> Result<StateVector> {
    state.check_domain(variant)?;
    let p = params;
    let s = state;
    let mut d = StateVector::ZERO;
    match variant.kind {
        VariantKind::Full5x5 => {
            let sentiment = 1.0 + 2.0 * s.zeta1 + 2.0 * s.zeta2;
            let flow = sentiment * s.l - s.p;
            let denom = match variant.zeta2_denominator {
                Zeta2Denominator::AnchorPa => s.pa,
                Zeta2Denominator::PriceP => s.p,
            };
            d.p = flow / p.tau0;
            d.pa = (s.p - s.pa) / p.c3;
            d.l = (1.0 - s.l + p.q * flow) / p.c;
            d.zeta1 = (p.q1 * (sentiment * s.l / s.p - 1.0) - s.zeta1) / p.c1;
            d.zeta2 = (p.q2 * (s.pa - s.p) / denom - s.zeta2) / p.c2;
        }
        VariantKind::Sentiment3x3 => {
            let sentiment = 1.0 + 2.0 * s.zeta1;
            let flow = sentiment * s.l - s.p;
            d.p = flow / p.tau0;
            d.l = (1.0 - s.l + p.q * flow) / p.c;
            d.zeta1 = (p.q1 * (sentiment * s.l / s.p - 1.0) - s.zeta1) / p.c1;
        }
        VariantKind::Liquidity2x2 => {
            let flow = s.l - s.p;
            d.p = flow / p.tau0;
            d.l = (1.0 - s.l + p.q * flow) / p.c;
        }
    }
    Ok(d)
}

/// [`rhs`] written in deviation coordinates `state - equilibrium`.
///
/// Algebraically identical to `rhs(variant, params, &(equilibrium + deviation))`,
/// but keeps full relative precision for deviations far below the unit
/// round-off of the equilibrium values.
pub fn rhs_deviation(
    variant: ModelVariant,
    params: &ModelParams,
    deviation: &StateVector,
) -> Result<StateVector> {
    let y = deviation;
    StateVector {
        p: 1.0 + y.p,
        pa: 1.0 + y.pa,
        ..StateVector::EQUILIBRIUM
    }
    .check_domain(variant)?;
    let p = params;
    let mut d = StateVector::ZERO;
    let sentiment = match variant.kind {
        VariantKind::Full5x5 => 2.0 * y.zeta1 + 2.0 * y.zeta2,
        VariantKind::Sentiment3x3 => 2.0 * y.zeta1,
        VariantKind::Liquidity2x2 => 0.0,
    };
    // S L - P with S = 1 + sentiment, L = 1 + l, P = 1 + p.
    let flow = sentiment + y.l + sentiment * y.l - y.p;
    d.p = flow / p.tau0;
    d.l = (-y.l + p.q * flow) / p.c;
    if variant.kind == VariantKind::Liquidity2x2 {
        return Ok(d);
    }
    d.zeta1 = (p.q1 * flow / (1.0 + y.p) - y.zeta1) / p.c1;
    if variant.kind == VariantKind::Full5x5 {
        let denom = match variant.zeta2_denominator {
            Zeta2Denominator::AnchorPa => 1.0 + y.pa,
            Zeta2Denominator::PriceP => 1.0 + y.p,
        };
        d.pa = (y.p - y.pa) / p.c3;
        d.zeta2 = (p.q2 * (y.pa - y.p) / denom - y.zeta2) / p.c2;
    }
    Ok(d)
}

/// The unique equilibrium, restricted to the variant's state.
pub fn equilibrium(variant: ModelVariant) -> StateVector {
    StateVector::EQUILIBRIUM.restricted(variant)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ModelParams {
        ModelParams {
            q: 1.0,
            q1: 0.5,
            q2: 0.2,
            tau0: 0.1,
            c: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 10.0,
        }
    }

    #[test]
    fn accepts_valid_params() {
        let checked = validate_params(example(), ModelVariant::full()).unwrap();
        assert_eq!(checked.params, example());
        assert!(checked.ignored.is_empty());
    }

    #[test]
    fn rejects_zero_tau0() {
        let p = ModelParams {
            tau0: 0.0,
            ..example()
        };
        assert!(matches!(
            validate_params(p, ModelVariant::full()),
            Err(Error::NonPositiveTimeScale { name: "tau0", .. })
        ));
    }

    #[test]
    fn rejects_negative_amplitude_and_nan() {
        let p = ModelParams {
            q1: -0.1,
            ..example()
        };
        assert!(matches!(
            validate_params(p, ModelVariant::full()),
            Err(Error::NegativeAmplitude { name: "q1", .. })
        ));
        let p = ModelParams {
            c3: f64::NAN,
            ..example()
        };
        assert!(validate_params(p, ModelVariant::full()).is_err());
    }

    #[test]
    fn liquidity_reports_ignored_fields() {
        let p = ModelParams {
            q2: 0.5,
            ..example()
        };
        let checked = validate_params(p, ModelVariant::liquidity()).unwrap();
        assert_eq!(checked.ignored, &["q1", "q2", "c1", "c2", "c3"]);
        let checked = validate_params(p, ModelVariant::sentiment()).unwrap();
        assert_eq!(checked.ignored, &["q2", "c2", "c3"]);
    }

    #[test]
    fn equilibrium_is_a_rest_point() {
        for v in [
            ModelVariant::full(),
            ModelVariant::full().with_denominator(Zeta2Denominator::PriceP),
            ModelVariant::sentiment(),
            ModelVariant::liquidity(),
        ] {
            let d = rhs(v, &example(), &equilibrium(v)).unwrap();
            assert_eq!(d, StateVector::ZERO);
        }
    }

    #[test]
    fn liquidity_direct_substitution() {
        let p = ModelParams {
            q: 0.0,
            tau0: 1.0,
            c: 1.0,
            ..example()
        };
        let s = StateVector {
            p: 2.0,
            ..StateVector::EQUILIBRIUM
        };
        let d = rhs(ModelVariant::liquidity(), &p, &s).unwrap();
        assert_eq!((d.p, d.l), (-1.0, 0.0));
    }

    #[test]
    fn zeta2_forcing_uses_anchor() {
        let p = ModelParams {
            q2: 1.0,
            c2: 1.0,
            ..example()
        };
        let s = StateVector {
            p: 1.1,
            ..StateVector::EQUILIBRIUM
        };
        let d = rhs(ModelVariant::full(), &p, &s).unwrap();
        assert!((d.zeta2 + 0.1).abs() < 1e-15);
        let d = rhs(
            ModelVariant::full().with_denominator(Zeta2Denominator::PriceP),
            &p,
            &s,
        )
        .unwrap();
        assert!((d.zeta2 + 0.1 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn price_floor_is_enforced() {
        let s = StateVector {
            p: 1e-10,
            ..StateVector::EQUILIBRIUM
        };
        assert!(matches!(
            rhs(ModelVariant::liquidity(), &example(), &s),
            Err(Error::StateOutOfDomain { field: "P", .. })
        ));
        let s = StateVector {
            pa: 0.0,
            ..StateVector::EQUILIBRIUM
        };
        assert!(rhs(ModelVariant::full(), &example(), &s).is_err());
        // Pa is not part of the sentiment state.
        assert!(rhs(ModelVariant::sentiment(), &example(), &s).is_ok());
    }

    #[test]
    fn deviation_form_agrees_with_rhs() {
        let p = example();
        let dev = StateVector {
            p: 0.03,
            pa: -0.02,
            l: 0.01,
            zeta1: -0.004,
            zeta2: 0.002,
        };
        let state = StateVector {
            p: 1.03,
            pa: 0.98,
            l: 1.01,
            zeta1: -0.004,
            zeta2: 0.002,
        };
        for v in [ModelVariant::full(), ModelVariant::sentiment(), ModelVariant::liquidity()] {
            let a = rhs(v, &p, &state).unwrap().components(v);
            let b = rhs_deviation(v, &p, &dev).unwrap().components(v);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13, "{v:?}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn equilibrium_restrictions() {
        assert_eq!(equilibrium(ModelVariant::full()), StateVector::EQUILIBRIUM);
        assert_eq!(
            equilibrium(ModelVariant::liquidity()).components(ModelVariant::liquidity()),
            vec![1.0, 1.0]
        );
    }
}
