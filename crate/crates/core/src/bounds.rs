//! A-priori run-length bounds: trials for an (α, δ) guarantee, transitions for
//! a relative pointwise distance γ, and their product per trial.
//!
//! Logarithms are natural throughout. The mixing ratio does not depend on the
//! base; the ⌈−log δ⌉ factor of the per-trial count does.

use crate::error::{Error, Result};
use crate::network::{BeliefNetwork, Evidence};
use crate::oracle::{build_transition_matrix_with, min_joint_posterior_with, min_transition_probability, OracleConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorTolerances {
    /// Interval (absolute) error.
    pub alpha: f64,
    /// Failure probability.
    pub delta: f64,
    /// Relative pointwise distance target.
    pub gamma: f64,
    /// Relative error; reported only, no bound here consumes it.
    pub epsilon: f64,
}

impl ErrorTolerances {
    pub fn new(alpha: f64, delta: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        open_unit("alpha", alpha)?;
        open_unit("delta", delta)?;
        open_unit("gamma", gamma)?;
        open_unit("epsilon", epsilon)?;
        Ok(ErrorTolerances { alpha, delta, gamma, epsilon })
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { name, value, domain: "(0, 1)" })
    }
}

/// Ceiling that treats values within a few ulps above an integer as that
/// integer, so decimal inputs like α = 0.05 do not gain a spurious +1.
fn ceil_count(x: f64, what: &str) -> Result<u64> {
    if !x.is_finite() || x >= u64::MAX as f64 {
        return Err(Error::BoundOverflow(format!("{what} = {x} does not fit a transition count")));
    }
    let r = x.round();
    let c = if (x - r).abs() <= 4.0 * f64::EPSILON * r.abs().max(1.0) { r } else { x.ceil() };
    Ok(c.max(1.0) as u64)
}

/// N = ⌈1 / (4 δ α²)⌉.
pub fn trials_bound(alpha: f64, delta: f64) -> Result<u64> {
    open_unit("alpha", alpha)?;
    open_unit("delta", delta)?;
    ceil_count(1.0 / (4.0 * delta * alpha * alpha), "trials")
}

/// (log γ + log Π) / log(1 − p₀²/8), unceiled.
pub fn mixing_ratio(gamma: f64, pi_min: f64, p0: f64) -> Result<f64> {
    open_unit("gamma", gamma)?;
    open_unit("pi_min", pi_min)?;
    open_unit("p0", p0)?;
    let x = p0 * p0 / 8.0;
    if 1.0 - x == 1.0 {
        return Err(Error::BoundOverflow(format!(
            "p0 = {p0} is so small that 1 - p0^2/8 rounds to 1"
        )));
    }
    Ok((gamma.ln() + pi_min.ln()) / (-x).ln_1p())
}

/// t_mix = ⌈(log γ + log Π) / log(1 − p₀²/8)⌉.
pub fn mixing_bound(gamma: f64, pi_min: f64, p0: f64) -> Result<u64> {
    ceil_count(mixing_ratio(gamma, pi_min, p0)?, "mixing transitions")
}

/// ⌈4(1+γ)³ / (3α²)⌉.
pub fn trial_quality_factor(alpha: f64, gamma: f64) -> Result<u64> {
    open_unit("alpha", alpha)?;
    open_unit("gamma", gamma)?;
    ceil_count(4.0 * (1.0 + gamma).powi(3) / (3.0 * alpha * alpha), "quality factor")
}

/// 12⌈−ln δ⌉ + 1.
pub fn confidence_factor(delta: f64) -> Result<u64> {
    open_unit("delta", delta)?;
    Ok(12 * ceil_count(-delta.ln(), "confidence factor")? + 1)
}

/// t = ⌈ ⌈4(1+γ)³/(3α²)⌉ · (12⌈−ln δ⌉ + 1) · (log γ + log Π)/log(1 − p₀²/8) ⌉.
pub fn transitions_per_trial(tol: &ErrorTolerances, pi_min: f64, p0: f64) -> Result<u64> {
    let quality = trial_quality_factor(tol.alpha, tol.gamma)? as f64;
    let confidence = confidence_factor(tol.delta)? as f64;
    let ratio = mixing_ratio(tol.gamma, pi_min, p0)?;
    ceil_count(quality * confidence * ratio, "transitions per trial")
}

/// Lower bounds on Π and p₀ from CPT extremes alone.
///
/// Π ≥ product over all nodes of the node's smallest entry. For p₀, the full
/// conditional of a free node X with k outcomes is at least m / (k M), where
/// m and M are the products of the smallest and largest entries over X and its
/// children; the node-selection factor 1/(2n) is applied on top.
pub fn factored_lower_bounds(net: &BeliefNetwork, ev: &Evidence) -> Result<(f64, f64)> {
    if !net.is_positive() {
        return Err(Error::NonPositiveNetwork);
    }
    let free = net.free_nodes(ev);
    if free.is_empty() {
        return Err(Error::NoFreeNodes);
    }
    let pi_lb: f64 = net.nodes().iter().map(|n| n.cpt.min_entry()).product();
    let q_lb = free
        .iter()
        .map(|&x| {
            let group = std::iter::once(x).chain(net.children(x).iter().copied());
            let (lo, hi) = group.fold((1.0, 1.0), |(lo, hi), i| {
                let cpt = &net.node(i).cpt;
                (lo * cpt.min_entry(), hi * cpt.max_entry())
            });
            lo / (net.arity(x) as f64 * hi)
        })
        .fold(f64::INFINITY, f64::min);
    let p0_lb = q_lb / (2.0 * free.len() as f64);
    Ok((pi_lb, p0_lb))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMode {
    /// Π and p₀ from enumeration and the explicit transition matrix.
    Exact,
    /// Π and p₀ from [`factored_lower_bounds`].
    Factored,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub trials: u64,
    pub t_mix: u64,
    pub t_per_trial: u64,
    pub pi_min: f64,
    pub p0: f64,
    pub tolerances: ErrorTolerances,
    pub mode: BoundsMode,
}

impl BoundsReport {
    /// Π and p₀ are certified lower bounds rather than exact values.
    pub fn lower_bound_inputs(&self) -> bool {
        self.mode == BoundsMode::Factored
    }
}

pub fn report_bounds(
    net: &BeliefNetwork,
    ev: &Evidence,
    tol: &ErrorTolerances,
    mode: BoundsMode,
    cfg: &OracleConfig,
) -> Result<BoundsReport> {
    if !net.is_positive() {
        return Err(Error::NonPositiveNetwork);
    }
    let (pi_min, p0) = match mode {
        BoundsMode::Exact => {
            let pi = min_joint_posterior_with(net, ev, cfg)?;
            let tm = build_transition_matrix_with(net, ev, cfg)?;
            (pi, min_transition_probability(&tm))
        }
        BoundsMode::Factored => factored_lower_bounds(net, ev)?,
    };
    Ok(BoundsReport {
        trials: trials_bound(tol.alpha, tol.delta)?,
        t_mix: mixing_bound(tol.gamma, pi_min, p0)?,
        t_per_trial: transitions_per_trial(tol, pi_min, p0)?,
        pi_min,
        p0,
        tolerances: *tol,
        mode,
    })
}
