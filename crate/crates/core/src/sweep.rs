//! Two-parameter stability maps.
//!
//! A [`SweepSpec`] names two axes over an inclusive linear lattice and a
//! baseline parameter set; [`run_sweep`] evaluates every grid point in
//! parallel and assembles a [`StabilityMap`] whose content does not depend
//! on the thread schedule.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{criterion_2x2, criterion_3x3, rh_5x5};
use crate::error::{Error, Result};
use crate::model::{validate_params, ModelParams, ModelVariant, VariantKind};
use crate::stability::{linear_verdict, Verdict, DEFAULT_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisParam {
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "q1")]
    Q1,
    #[serde(rename = "q2")]
    Q2,
    /// `q + 2 q1`, realized by holding `q1` and setting `q = K - 2 q1`.
    #[serde(rename = "K")]
    K,
    #[serde(rename = "tau0")]
    Tau0,
    #[serde(rename = "c3")]
    C3,
    /// `c / tau0`, realized by holding `tau0` and setting `c`.
    #[serde(rename = "c_over_tau0")]
    COverTau0,
}

impl AxisParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisParam::Q => "q",
            AxisParam::Q1 => "q1",
            AxisParam::Q2 => "q2",
            AxisParam::K => "K",
            AxisParam::Tau0 => "tau0",
            AxisParam::C3 => "c3",
            AxisParam::COverTau0 => "c_over_tau0",
        }
    }

    fn is_derived(&self) -> bool {
        matches!(self, AxisParam::K | AxisParam::COverTau0)
    }
}

impl fmt::Display for AxisParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "q" => AxisParam::Q,
            "q1" => AxisParam::Q1,
            "q2" => AxisParam::Q2,
            "K" | "k" => AxisParam::K,
            "tau0" => AxisParam::Tau0,
            "c3" => AxisParam::C3,
            "c_over_tau0" => AxisParam::COverTau0,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown axis parameter `{other}`; expected one of q, q1, q2, K, tau0, c3, c_over_tau0"
                )))
            }
        })
    }
}

/// One swept parameter over `steps` equally spaced values, endpoints
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(name: AxisParam, min: f64, max: f64, steps: usize) -> Self {
        Self {
            name,
            min,
            max,
            steps,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "axis {} bounds must be finite",
                self.name
            )));
        }
        if !(self.min < self.max) {
            return Err(Error::InvalidArgument(format!(
                "axis {}: min {} must be below max {}",
                self.name, self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "axis {}: need at least 2 steps, got {}",
                self.name, self.steps
            )));
        }
        Ok(())
    }

    /// Lattice value `i`; exact at both endpoints.
    pub fn value(&self, i: usize) -> f64 {
        let t = i as f64 / (self.steps - 1) as f64;
        self.min * (1.0 - t) + self.max * t
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }
}

/// Parses `name:min:max:steps`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "axis `{s}` is not of the form name:min:max:steps"
            )));
        }
        let number = |text: &str| {
            text.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("axis `{s}`: `{text}` is not a number")))
        };
        let steps = parts[3]
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("axis `{s}`: `{}` is not a count", parts[3])))?;
        Ok(Axis::new(parts[0].parse()?, number(parts[1])?, number(parts[2])?, steps))
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.name, self.min, self.max, self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Sign of the largest real part of the Jacobian spectrum.
    Eigen,
    /// The variant's closed-form criterion.
    ClosedForm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Eigen => "eigen",
            Method::ClosedForm => "closed-form",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(Method::Eigen),
            "closed-form" | "closed_form" | "closedform" => Ok(Method::ClosedForm),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}`; expected eigen or closed-form"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variant: ModelVariant,
    /// Baseline for every field the axes do not set.
    pub fixed: ModelParams,
    pub axis1: Axis,
    pub axis2: Axis,
    pub method: Method,
    pub eps: f64,
    pub band: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        let (a, b) = (self.axis1.name, self.axis2.name);
        if a == b {
            return Err(Error::InvalidArgument(format!("axis {a} is swept twice")));
        }
        let conflicts_with_k = |x: AxisParam| matches!(x, AxisParam::Q | AxisParam::Q1);
        if (a == AxisParam::K && conflicts_with_k(b)) || (b == AxisParam::K && conflicts_with_k(a)) {
            return Err(Error::InvalidArgument(format!(
                "axes {a} and {b} conflict: K is realized through q with q1 held fixed"
            )));
        }
        if !(self.eps > 0.0) || !(self.band >= 0.0) {
            return Err(Error::InvalidArgument("eps must be positive and band non-negative".into()));
        }
        Ok(())
    }

    /// Parameters at lattice point `(i, j)`; `Err` if the point is not a
    /// valid parameter set.
    pub fn params_at(&self, i: usize, j: usize) -> Result<ModelParams> {
        let mut p = self.fixed;
        let mut axes = [(self.axis1.name, self.axis1.value(i)), (self.axis2.name, self.axis2.value(j))];
        // Plain fields first, so derived axes see the swept tau0 or q1.
        axes.sort_by_key(|(name, _)| name.is_derived());
        for (name, v) in axes {
            match name {
                AxisParam::Q => p.q = v,
                AxisParam::Q1 => p.q1 = v,
                AxisParam::Q2 => p.q2 = v,
                AxisParam::Tau0 => p.tau0 = v,
                AxisParam::C3 => p.c3 = v,
                AxisParam::K => p.q = v - 2.0 * p.q1,
                AxisParam::COverTau0 => {
                    p.c = v * p.tau0;
                    match self.variant.kind {
                        VariantKind::Liquidity2x2 => {}
                        VariantKind::Sentiment3x3 => p.c1 = p.c,
                        VariantKind::Full5x5 => {
                            p.c1 = p.c;
                            p.c2 = p.c;
                        }
                    }
                }
            }
        }
        validate_params(p, self.variant)?;
        Ok(p)
    }

    fn k_split(&self) -> Option<f64> {
        [self.axis1.name, self.axis2.name]
            .contains(&AxisParam::K)
            .then_some(self.fixed.q1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellVerdict {
    Stable,
    Marginal,
    Unstable,
    Invalid,
}

impl CellVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellVerdict::Stable => "stable",
            CellVerdict::Marginal => "marginal",
            CellVerdict::Unstable => "unstable",
            CellVerdict::Invalid => "invalid",
        }
    }
}

impl From<Verdict> for CellVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Stable => CellVerdict::Stable,
            Verdict::Marginal => CellVerdict::Marginal,
            Verdict::Unstable => CellVerdict::Unstable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub verdict: CellVerdict,
    /// Largest real part (eigen) or criterion margin (closed form).
    pub value: Option<f64>,
    /// Whether the dominant eigenvalue is complex; eigen method only.
    pub oscillatory: Option<bool>,
    /// Why the cell is invalid.
    pub note: Option<String>,
}

impl Cell {
    fn invalid(e: Error) -> Self {
        Self {
            verdict: CellVerdict::Invalid,
            value: None,
            oscillatory: None,
            note: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    /// `SOURCE_DATE_EPOCH` in seconds if set; otherwise absent so that
    /// repeated runs stay byte-identical.
    pub timestamp: Option<u64>,
    pub tool_version: String,
    pub eps: f64,
    pub band: f64,
    /// `q1` held fixed while sweeping `K`.
    pub k_split_q1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub spec: SweepSpec,
    pub metadata: MapMetadata,
    /// `cells[i][j]` sits at `(axis1[i], axis2[j])`.
    pub cells: Vec<Vec<Cell>>,
}

fn evaluate(spec: &SweepSpec, params: &ModelParams) -> Result<Cell> {
    match spec.method {
        Method::Eigen => {
            let v = linear_verdict(spec.variant, params, spec.eps)?;
            Ok(Cell {
                verdict: v.tag.into(),
                value: Some(v.max_real),
                oscillatory: Some(v.oscillatory),
                note: None,
            })
        }
        Method::ClosedForm => {
            let r = match spec.variant.kind {
                VariantKind::Liquidity2x2 => criterion_2x2(params, spec.band),
                VariantKind::Sentiment3x3 => criterion_3x3(params, spec.band)?,
                VariantKind::Full5x5 => rh_5x5(params, spec.band)?,
            };
            Ok(Cell {
                verdict: r.verdict.into(),
                value: Some(r.margin),
                oscillatory: None,
                note: None,
            })
        }
    }
}

/// Evaluate every lattice point. Cells that fail validation or lie outside
/// the method's scope become [`CellVerdict::Invalid`]; only an invalid spec
/// is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<StabilityMap> {
    spec.validate()?;
    let (n1, n2) = (spec.axis1.steps, spec.axis2.steps);
    let flat: Vec<Cell> = (0..n1 * n2)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            spec.params_at(i, j)
                .and_then(|p| evaluate(spec, &p))
                .unwrap_or_else(Cell::invalid)
        })
        .collect();
    let cells = flat.chunks(n2).map(|row| row.to_vec()).collect();
    Ok(StabilityMap {
        spec: *spec,
        metadata: MapMetadata {
            timestamp: source_date_epoch(),
            tool_version: crate::VERSION.to_string(),
            eps: spec.eps,
            band: spec.band,
            k_split_q1: spec.k_split(),
        },
        cells,
    })
}

fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

impl StabilityMap {
    pub fn verdict(&self, i: usize, j: usize) -> CellVerdict {
        self.cells[i][j].verdict
    }

    pub fn count(&self, verdict: CellVerdict) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|c| c.verdict == verdict)
            .count()
    }

    /// Stable cells as a fraction of all cells.
    pub fn stable_fraction(&self) -> f64 {
        let total = self.spec.axis1.steps * self.spec.axis2.steps;
        self.count(CellVerdict::Stable) as f64 / total as f64
    }

    /// CSV with header `axis1,axis2,max_real_or_margin,verdict`, row-major
    /// (axis2 varies fastest). Invalid cells leave the value empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis1,axis2,max_real_or_margin,verdict\n");
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let value = cell.value.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{}",
                    self.spec.axis1.value(i),
                    self.spec.axis2.value(j),
                    value,
                    cell.verdict.as_str()
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad map JSON: {e}")))
    }

    /// Rectangle-per-cell heatmap; axis1 runs left to right, axis2 bottom
    /// to top.
    pub fn to_svg(&self, cell_px: u32) -> String {
        let (n1, n2) = (self.spec.axis1.steps as u32, self.spec.axis2.steps as u32);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" shape-rendering=\"crispEdges\">\n",
            n1 * cell_px,
            n2 * cell_px
        );
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let fill = match cell.verdict {
                    CellVerdict::Stable => "#4c9a6a",
                    CellVerdict::Unstable => "#d9d9d9",
                    CellVerdict::Marginal => "#e0a030",
                    CellVerdict::Invalid => "#ffffff",
                };
                writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell_px}\" height=\"{cell_px}\" fill=\"{fill}\"/>",
                    i as u32 * cell_px,
                    (n2 - 1 - j as u32) * cell_px
                )
                .unwrap();
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Cells whose right or upper neighbour (`i + 1` or `j + 1`) carries a
/// different verdict, Invalid cells excluded on both sides. Each frontier
/// between two regions is reported once, one cell wide.
pub fn boundary_cells(map: &StabilityMap) -> Vec<(usize, usize)> {
    let (n1, n2) = (map.spec.axis1.steps, map.spec.axis2.steps);
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let here = map.verdict(i, j);
            if here == CellVerdict::Invalid {
                continue;
            }
            let differs = |a: usize, b: usize| {
                let there = map.verdict(a, b);
                there != CellVerdict::Invalid && there != here
            };
            if (i + 1 < n1 && differs(i + 1, j)) || (j + 1 < n2 && differs(i, j + 1)) {
                out.push((i, j));
            }
        }
    }
    out
}

impl Default for SweepSpec {
    /// Full system over `K in [0, 6] x q2 in [0, 3]`, eigen method.
    fn default() -> Self {
        Self {
            variant: ModelVariant::full(),
            fixed: ModelParams::default(),
            axis1: Axis::new(AxisParam::K, 0.0, 6.0, 121),
            axis2: Axis::new(AxisParam::Q2, 0.0, 3.0, 61),
            method: Method::Eigen,
            eps: DEFAULT_EPS,
            band: crate::criteria::DEFAULT_BAND,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn liquidity_spec(steps: usize) -> SweepSpec {
        SweepSpec {
            variant: ModelVariant::liquidity(),
            fixed: ModelParams {
                tau0: 1.0,
                ..ModelParams::default()
            },
            axis1: Axis::new(AxisParam::Q, 0.0, 5.0, steps),
            axis2: Axis::new(AxisParam::COverTau0, 0.0, 3.0, steps),
            method: Method::ClosedForm,
            eps: DEFAULT_EPS,
            band: 1e-6,
        }
    }

    #[test]
    fn axis_parses_and_hits_endpoints() {
        let a: Axis = "K:0:6:121".parse().unwrap();
        assert_eq!(a.name, AxisParam::K);
        assert_eq!(a.value(0), 0.0);
        assert_eq!(a.value(120), 6.0);
        assert!((a.spacing() - 0.05).abs() < 1e-15);
        assert!("K:0:6".parse::<Axis>().is_err());
        assert!("z:0:1:3".parse::<Axis>().is_err());
        assert!("q:0:1:x".parse::<Axis>().is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = liquidity_spec(3);
        s.axis1.min = 5.0;
        assert!(run_sweep(&s).is_err());
        let mut s = liquidity_spec(3);
        s.axis2.steps = 1;
        assert!(run_sweep(&s).is_err());
        let mut s = liquidity_spec(3);
        s.axis2.name = AxisParam::Q;
        assert!(run_sweep(&s).is_err());
        let mut s = liquidity_spec(3);
        s.axis1.name = AxisParam::K;
        s.axis2.name = AxisParam::Q1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_time_scale_cells_are_invalid() {
        let map = run_sweep(&liquidity_spec(3)).unwrap();
        for i in 0..3 {
            assert_eq!(map.verdict(i, 0), CellVerdict::Invalid);
            assert!(map.cells[i][0].note.is_some());
        }
        assert_ne!(map.verdict(0, 1), CellVerdict::Invalid);
    }

    #[test]
    fn negative_q_from_k_split_is_invalid() {
        let spec = SweepSpec {
            fixed: ModelParams {
                q1: 0.5,
                ..ModelParams::default()
            },
            axis1: Axis::new(AxisParam::K, 0.0, 2.0, 3),
            axis2: Axis::new(AxisParam::Q2, 0.0, 1.0, 2),
            ..SweepSpec::default()
        };
        let map = run_sweep(&spec).unwrap();
        assert_eq!(map.verdict(0, 0), CellVerdict::Invalid);
        assert_ne!(map.verdict(1, 0), CellVerdict::Invalid);
        assert_eq!(map.metadata.k_split_q1, Some(0.5));
        let p = spec.params_at(2, 1).unwrap();
        assert_eq!((p.q, p.q1, p.q2), (1.0, 0.5, 1.0));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let map = run_sweep(&liquidity_spec(2)).unwrap();
        let csv = map.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "axis1,axis2,max_real_or_margin,verdict");
        assert_eq!(lines[1], "0,0,,invalid");
        assert_eq!(lines[2], "0,3,4,stable");
    }

    #[test]
    fn boundary_of_uniform_and_split_maps() {
        let mut map = run_sweep(&liquidity_spec(4)).unwrap();
        for row in map.cells.iter_mut() {
            for c in row.iter_mut() {
                c.verdict = CellVerdict::Stable;
            }
        }
        assert!(boundary_cells(&map).is_empty());
        for (i, row) in map.cells.iter_mut().enumerate() {
            for c in row.iter_mut() {
                if i >= 2 {
                    c.verdict = CellVerdict::Unstable;
                }
            }
        }
        assert_eq!(boundary_cells(&map), vec![(1, 0), (1, 1), (1, 2), (1, 3)]);
    }
}
