//! Fixed-step RK4 integration of the nonlinear systems and empirical
//! classification of the equilibrium from perturbed trajectories.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{equilibrium, rhs_deviation, validate_params, ModelParams, ModelVariant, StateVector};

/// Any component beyond this magnitude aborts the integration.
pub const BLOW_UP_LIMIT: f64 = 1e9;
/// Ratio `d(T)/d(0)` below which a perturbation is considered to have decayed.
pub const DECAY_RATIO: f64 = 0.5;
/// Ratio `d(T)/d(0)` above which a perturbation is considered to have grown.
pub const GROWTH_RATIO: f64 = 10.0;
/// Deviations larger than this are outside the linear regime and are not
/// used for the growth-rate fit.
pub const LINEAR_REGIME_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Requested time step; the effective step divides the horizon evenly.
    pub step: f64,
    pub horizon: f64,
    /// Initial displacement of `P` used by [`perturb_and_classify`].
    pub perturbation: f64,
    /// Record every n-th step.
    pub record_every: usize,
}

impl SimConfig {
    /// Step of one twentieth of the fastest time scale the variant uses,
    /// horizon 50, perturbation 1e-4.
    pub fn for_params(variant: ModelVariant, params: &ModelParams) -> Self {
        Self {
            step: params.fastest_time_scale(variant) / 20.0,
            horizon: 50.0,
            perturbation: 1e-4,
            record_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= self.step) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon {} must be finite and at least the step {}",
                self.horizon, self.step
            )));
        }
        if !(self.perturbation >= 0.0) {
            return Err(Error::InvalidArgument("perturbation must be non-negative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the effective step size.
    pub fn discretization(&self) -> (usize, f64) {
        let n = (self.horizon / self.step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub variant: ModelVariant,
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    /// CSV with header `t,<state names>` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for name in self.variant.state_names() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.16e}").unwrap();
            for x in s.components(self.variant) {
                write!(out, ",{x:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

fn axpy(x: &StateVector, h: f64, d: &StateVector) -> StateVector {
    StateVector {
        p: x.p + h * d.p,
        pa: x.pa + h * d.pa,
        l: x.l + h * d.l,
        zeta1: x.zeta1 + h * d.zeta1,
        zeta2: x.zeta2 + h * d.zeta2,
    }
}

fn guard(x: &StateVector, t: f64) -> Result<()> {
    let parts = [x.p, x.pa, x.l, x.zeta1, x.zeta2];
    if parts.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_LIMIT) {
        return Err(Error::BlowUp { time: t });
    }
    Ok(())
}

fn offset(a: &StateVector, sign: f64, b: &StateVector) -> StateVector {
    axpy(a, sign, b)
}

/// A run in deviation coordinates: the recorded trajectory, the deviation
/// from equilibrium at each record, and the error that stopped the run.
struct Run {
    trajectory: Trajectory,
    deviations: Vec<StateVector>,
    failure: Option<Error>,
}

fn run(variant: ModelVariant, params: &ModelParams, initial: &StateVector, cfg: &SimConfig) -> Run {
    let (n, h) = cfg.discretization();
    let eq = StateVector::EQUILIBRIUM;
    let f = |y: &StateVector, t: f64| -> Result<StateVector> {
        guard(&offset(&eq, 1.0, y), t)?;
        rhs_deviation(variant, params, y)
    };
    let mut y = offset(&initial.restricted(variant), -1.0, &eq);
    let mut out = Run {
        trajectory: Trajectory {
            variant,
            params: *params,
            times: vec![0.0],
            states: vec![initial.restricted(variant)],
        },
        deviations: vec![y],
        failure: None,
    };
    for step in 0..n {
        let t = step as f64 * h;
        let advanced = (|| -> Result<StateVector> {
            let k1 = f(&y, t)?;
            let k2 = f(&axpy(&y, 0.5 * h, &k1), t)?;
            let k3 = f(&axpy(&y, 0.5 * h, &k2), t)?;
            let k4 = f(&axpy(&y, h, &k3), t)?;
            let mut incr = k1;
            incr = axpy(&incr, 2.0, &k2);
            incr = axpy(&incr, 2.0, &k3);
            incr = axpy(&incr, 1.0, &k4);
            let next = axpy(&y, h / 6.0, &incr);
            guard(&offset(&eq, 1.0, &next), t + h)?;
            Ok(next)
        })();
        match advanced {
            Ok(next) => y = next,
            Err(e) => {
                out.failure = Some(e);
                return out;
            }
        }
        if (step + 1) % cfg.record_every == 0 {
            out.trajectory.times.push((step + 1) as f64 * h);
            out.trajectory.states.push(offset(&eq, 1.0, &y).restricted(variant));
            out.deviations.push(y);
        }
    }
    out
}

fn norm(variant: ModelVariant, y: &StateVector) -> f64 {
    y.components(variant).iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Classical fourth-order Runge–Kutta with a fixed step.
///
/// Fails with [`Error::BlowUp`] if any component leaves `[-1e9, 1e9]` and
/// with [`Error::StateOutOfDomain`] if `P` (or `Pa`) drops below the floor
/// at any stage.
pub fn integrate(
    variant: ModelVariant,
    params: &ModelParams,
    initial: &StateVector,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    match integrate_partial(variant, params, initial, cfg)? {
        (trajectory, None) => Ok(trajectory),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`integrate`], but a run that blows up or leaves the domain returns
/// the records made before the failure together with the error.
pub fn integrate_partial(
    variant: ModelVariant,
    params: &ModelParams,
    initial: &StateVector,
    cfg: &SimConfig,
) -> Result<(Trajectory, Option<Error>)> {
    validate_params(*params, variant)?;
    cfg.validate()?;
    initial.check_domain(variant)?;
    let Run {
        trajectory,
        failure,
        ..
    } = run(variant, params, initial, cfg);
    Ok((trajectory, failure))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmpiricalVerdict {
    Stable,
    Unstable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOutcome {
    pub verdict: EmpiricalVerdict,
    /// Growth rate of the one-step propagator fitted to the deviation
    /// snapshots in the linear regime. Falls back to `log_slope` when the
    /// linear regime holds too few snapshots.
    pub growth_rate: Option<f64>,
    /// Least-squares slope of `ln d(t)` over the final half of the linear
    /// regime.
    pub log_slope: Option<f64>,
    /// `d` at the end of the run divided by `d(0)`.
    pub final_ratio: f64,
    /// Time at which the run left the domain or blew up.
    pub blow_up_time: Option<f64>,
    pub step: f64,
    pub steps: usize,
}

/// Euclidean distance from equilibrium over the variant's components.
pub fn deviation(variant: ModelVariant, state: &StateVector) -> f64 {
    let eq = equilibrium(variant).components(variant);
    state
        .components(variant)
        .iter()
        .zip(eq)
        .map(|(x, e)| (x - e) * (x - e))
        .sum::<f64>()
        .sqrt()
}

/// Displace `P` by `cfg.perturbation` from equilibrium and watch the
/// deviation `d(t)`.
///
/// Stable if `d(T)/d(0) < 0.5`, unstable if it exceeds 10 or the run blows up
/// or leaves the domain, indeterminate otherwise. Rates are estimated only
/// from the part of the run where `d` stays below [`LINEAR_REGIME_LIMIT`].
pub fn perturb_and_classify(
    variant: ModelVariant,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<EmpiricalOutcome> {
    if !(cfg.perturbation > 0.0 && cfg.perturbation <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "perturbation {} outside (0, 1e-2]",
            cfg.perturbation
        )));
    }
    validate_params(*params, variant)?;
    cfg.validate()?;
    let mut initial = equilibrium(variant);
    initial.p += cfg.perturbation;

    let Run {
        trajectory: traj,
        deviations: ys,
        failure,
    } = run(variant, params, &initial, cfg);
    let blow_up_time = match failure {
        None => None,
        Some(Error::BlowUp { time }) => Some(time),
        Some(Error::StateOutOfDomain { .. }) => Some(traj.times.last().copied().unwrap_or(0.0)),
        Some(other) => return Err(other),
    };

    let d: Vec<f64> = ys.iter().map(|y| norm(variant, y)).collect();
    let final_ratio = d[d.len() - 1] / d[0];
    let verdict = if blow_up_time.is_some() || final_ratio > GROWTH_RATIO {
        EmpiricalVerdict::Unstable
    } else if final_ratio < DECAY_RATIO {
        EmpiricalVerdict::Stable
    } else {
        EmpiricalVerdict::Indeterminate
    };

    let cut = linear_cut(&d);
    let t_cut = traj.times[cut];
    let window: Vec<(f64, f64)> = traj.times[..=cut]
        .iter()
        .zip(&d[..=cut])
        .filter(|&(&t, &x)| t >= 0.5 * t_cut && x > TINY)
        .map(|(&t, &x)| (t, x.ln()))
        .collect();

    // Mirror run from P = 1 - delta; half the difference of the two
    // deviations has no even-order nonlinear terms.
    let mut mirrored = equilibrium(variant);
    mirrored.p -= cfg.perturbation;
    let ys_minus = run(variant, params, &mirrored, cfg).deviations;
    let odd: Vec<StateVector> = ys
        .iter()
        .zip(&ys_minus)
        .map(|(a, b)| StateVector {
            p: 0.5 * (a.p - b.p),
            pa: 0.5 * (a.pa - b.pa),
            l: 0.5 * (a.l - b.l),
            zeta1: 0.5 * (a.zeta1 - b.zeta1),
            zeta2: 0.5 * (a.zeta2 - b.zeta2),
        })
        .collect();
    let d_minus: Vec<f64> = ys_minus.iter().map(|y| norm(variant, y)).collect();
    let odd_cut = linear_cut(&d[..odd.len()]).min(linear_cut(&d_minus));

    let (steps, step) = cfg.discretization();
    let spacing = step * cfg.record_every as f64;
    let log_slope = slope(&window);
    Ok(EmpiricalOutcome {
        verdict,
        growth_rate: propagator_rate(variant, &odd[..=odd_cut], spacing).or(log_slope),
        log_slope,
        final_ratio,
        blow_up_time,
        step,
        steps,
    })
}

const TINY: f64 = 1e-250;

/// Index of the first record outside the linear regime, or the last one.
fn linear_cut(d: &[f64]) -> usize {
    d.iter()
        .position(|&x| x > LINEAR_REGIME_LIMIT)
        .unwrap_or(d.len() - 1)
}
const MAX_SNAPSHOTS: usize = 400;
/// Singular directions of the snapshot matrix weaker than this, relative to
/// the strongest, carry nonlinear residue rather than linear modes.
const RANK_CUTOFF: f64 = 1e-3;

/// Fit `y[k + s] = A y[k]` by least squares over the snapshots and return
/// the largest `ln|mu| / (s * spacing)` over the eigenvalues `mu` of `A`.
fn propagator_rate(variant: ModelVariant, ys: &[StateVector], spacing: f64) -> Option<f64> {
    let n = variant.dim();
    let stride = (ys.len() / MAX_SNAPSHOTS).max(1);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = ys
        .iter()
        .step_by(stride)
        .zip(ys.iter().skip(stride).step_by(stride))
        .filter_map(|(a, b)| {
            let scale = norm(variant, a);
            (scale > TINY).then(|| {
                let x = a.components(variant).iter().map(|v| v / scale).collect();
                let y = b.components(variant).iter().map(|v| v / scale).collect();
                (x, y)
            })
        })
        .collect();
    if pairs.len() < 2 * n {
        return None;
    }
    let m = pairs.len();
    let x = DMatrix::from_fn(n, m, |i, j| pairs[j].0[i]);
    let y = DMatrix::from_fn(n, m, |i, j| pairs[j].1[i]);
    let svd = x.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let sigma = svd.singular_values;
    let rank = sigma.iter().filter(|&&s| s > RANK_CUTOFF * sigma[0]).count();
    let u_r = u.columns(0, rank);
    let v_r = v_t.rows(0, rank).transpose();
    let inv = DMatrix::from_diagonal(&sigma.rows(0, rank).map(|s| 1.0 / s));
    let reduced = u_r.transpose() * y * v_r * inv;
    let dt = stride as f64 * spacing;
    reduced
        .complex_eigenvalues()
        .iter()
        .filter(|mu| mu.norm() > 0.0)
        .map(|mu| mu.norm().ln() / dt)
        .reduce(f64::max)
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), &(t, y)| {
        (num + (t - mean_t) * (y - mean_y), den + (t - mean_t) * (t - mean_t))
    });
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn liquidity_decay_matches_exact_solution() {
        let params = ModelParams {
            q: 0.0,
            tau0: 1.0,
            c: 1.0,
            ..ModelParams::default()
        };
        let cfg = SimConfig {
            step: 0.01,
            horizon: 1.0,
            perturbation: 0.0,
            record_every: 1,
        };
        let initial = StateVector {
            p: 2.0,
            ..StateVector::EQUILIBRIUM
        };
        let traj = integrate(ModelVariant::liquidity(), &params, &initial, &cfg).unwrap();
        assert_eq!(traj.times.len(), 101);
        let p1 = traj.last().p;
        assert!((p1 - (1.0 + (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn csv_layout_follows_variant() {
        let params = ModelParams::default();
        let cfg = SimConfig {
            step: 0.05,
            horizon: 0.1,
            perturbation: 0.0,
            record_every: 1,
        };
        let traj = integrate(
            ModelVariant::sentiment(),
            &params,
            &StateVector::EQUILIBRIUM,
            &cfg,
        )
        .unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,P,L,zeta1"));
        assert_eq!(
            lines.next(),
            Some("0.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0")
        );
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn rejects_bad_configs() {
        let params = ModelParams::default();
        let mut cfg = SimConfig::for_params(ModelVariant::full(), &params);
        cfg.perturbation = 0.5;
        assert!(perturb_and_classify(ModelVariant::full(), &params, &cfg).is_err());
        cfg.perturbation = 1e-4;
        cfg.step = 0.0;
        assert!(perturb_and_classify(ModelVariant::full(), &params, &cfg).is_err());
        cfg.step = 1.0;
        cfg.horizon = 0.5;
        assert!(integrate(ModelVariant::full(), &params, &StateVector::EQUILIBRIUM, &cfg).is_err());
    }

    #[test]
    fn default_step_ignores_unused_time_scales() {
        let params = ModelParams {
            c3: 0.001,
            tau0: 0.2,
            ..ModelParams::default()
        };
        let cfg = SimConfig::for_params(ModelVariant::sentiment(), &params);
        assert!((cfg.step - 0.01).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_reported_as_unstable() {
        let params = ModelParams {
            q: 10.0,
            q1: 10.0,
            tau0: 1.0,
            c: 1.0,
            c1: 1.0,
            ..ModelParams::default()
        };
        let cfg = SimConfig {
            perturbation: 1e-2,
            ..SimConfig::for_params(ModelVariant::sentiment(), &params)
        };
        let out = perturb_and_classify(ModelVariant::sentiment(), &params, &cfg).unwrap();
        assert_eq!(out.verdict, EmpiricalVerdict::Unstable);
        assert!(out.blow_up_time.is_some());
    }
}
