//! Transportation-information constants, the rate function `I_p` and
//! variation-based tail bounds.
//!
//! For a finitely supported `P` on a finite grid,
//!
//! ```text
//! Φ(t)        = E_P[ max_g { t(f(g) − f(z)) − ‖g − z‖^p } ]
//! I_p(ε; f)^p = sup_{t>0} { εt − Φ(t) }
//! ```
//!
//! `Φ` is a finite maximum of affine functions of `t` per atom, so it is
//! convex and piecewise linear with an exactly computable right derivative.
//! That derivative decides when the supremum is infinite.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::domain::DomainSpec;
use crate::error::{Result, WdroError};
use crate::loss::LossModel;
use crate::norm::NormSpec;
use crate::optim::golden_section_min;
use crate::regularizer::robust_loss_dual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauProvenance {
    BoundedSupport,
    BolleyVillani,
    UserSupplied,
}

/// A constant `τ` with `W_p(Q, P) ≤ √(τ·H(Q‖P))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpConstant {
    pub p: f64,
    pub tau: f64,
    pub provenance: TauProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Smallest `τ` handed out; a single-point support would otherwise give zero.
pub const TAU_FLOOR: f64 = 1e-12;

impl TpConstant {
    pub fn user(p: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(WdroError::InvalidInput(format!(
                "τ must be positive and finite, got {tau}"
            )));
        }
        Ok(TpConstant {
            p,
            tau,
            provenance: TauProvenance::UserSupplied,
            warning: None,
        })
    }
}

/// `τ = 2·diam(Z)²` for `p = 1`.
pub fn tau_bounded(domain: &DomainSpec, norm: &NormSpec) -> Result<TpConstant> {
    let d = domain.diameter(norm);
    if !d.is_finite() {
        return Err(WdroError::InvalidInput("support has infinite diameter".into()));
    }
    let raw = 2.0 * d * d;
    let (tau, warning) = if raw < TAU_FLOOR {
        (
            TAU_FLOOR,
            Some(format!("degenerate support: τ raised from {raw} to {TAU_FLOOR}")),
        )
    } else {
        (raw, None)
    };
    Ok(TpConstant {
        p: 1.0,
        tau,
        provenance: TauProvenance::BoundedSupport,
        warning,
    })
}

/// `τ = (2/a)(1 + C)` where `C = log E[exp(a‖Z‖²)]`.
pub fn tau_bolley_villani(a: f64, c: f64) -> Result<TpConstant> {
    if !(a > 0.0) {
        return Err(WdroError::InvalidInput(format!("exponent a must be positive, got {a}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(WdroError::InvalidInput(format!(
            "log-moment C must be finite and nonnegative, got {c}"
        )));
    }
    Ok(TpConstant {
        p: 1.0,
        tau: 2.0 / a * (1.0 + c),
        provenance: TauProvenance::BolleyVillani,
        warning: None,
    })
}

fn grid_of(domain: &DomainSpec) -> Result<&[Vec<f64>]> {
    domain
        .grid_points()
        .ok_or_else(|| WdroError::InvalidInput("exact Φ needs a finite-grid domain".into()))
}

/// Per-atom maximum and the largest gain `f(g) − f(z)` among maximizers:
/// the value and right derivative of that atom's term at `t`.
fn atom_term(f: &LossModel, z: &[f64], t: f64, norm: &NormSpec, grid: &[Vec<f64>]) -> (f64, f64) {
    let fz = f.value(z);
    let mut best = f64::NEG_INFINITY;
    let mut slope = f64::NEG_INFINITY;
    let cands: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|g| {
            let c = norm.cost(g, z);
            c.is_finite().then(|| {
                let gain = f.value(g) - fz;
                (t * gain - c, gain)
            })
        })
        .collect();
    for &(v, _) in &cands {
        best = best.max(v);
    }
    // z itself is on the grid, so the maximum is at least 0
    let best = best.max(0.0);
    let tol = 1e-12 * (1.0 + best.abs());
    for &(v, gain) in &cands {
        if v >= best - tol {
            slope = slope.max(gain);
        }
    }
    (best, slope.max(0.0))
}

fn phi_and_slope(f: &LossModel, p: &DiscreteDistribution, t: f64, norm: &NormSpec, grid: &[Vec<f64>]) -> (f64, f64) {
    let mut v = 0.0;
    let mut s = 0.0;
    for (z, w) in p.iter() {
        if w == 0.0 {
            continue;
        }
        let (a, b) = atom_term(f, z, t, norm, grid);
        v += w * a;
        s += w * b;
    }
    (v, s)
}

/// `Φ(t)` by exact enumeration over the grid.
pub fn phi(f: &LossModel, p_true: &DiscreteDistribution, t: f64, norm: &NormSpec, domain: &DomainSpec) -> Result<f64> {
    let grid = grid_of(domain)?;
    f.check_dim(p_true.dim())?;
    if !(t >= 0.0) {
        return Err(WdroError::InvalidInput(format!("t must be nonnegative, got {t}")));
    }
    Ok(phi_and_slope(f, p_true, t, norm, grid).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn as_f64(self) -> f64 {
        match self {
            RateValue::Finite(v) => v,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RateValue::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionResult {
    pub epsilon: f64,
    pub value: RateValue,
    pub t_opt: Option<f64>,
    pub phi_samples: Vec<(f64, f64)>,
}

const T_MIN: f64 = 1e-6;
const T_CAP: f64 = 1e9;

/// `I_p(ε; f)` on a finite grid.
pub fn rate_function(
    f: &LossModel,
    p_true: &DiscreteDistribution,
    epsilon: f64,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<RateFunctionResult> {
    let grid = grid_of(domain)?;
    f.check_dim(p_true.dim())?;
    if epsilon.is_nan() {
        return Err(WdroError::InvalidInput("ε is NaN".into()));
    }
    let phi_at = |t: f64| phi_and_slope(f, p_true, t, norm, grid);
    if epsilon <= 0.0 {
        return Ok(RateFunctionResult {
            epsilon,
            value: RateValue::Finite(0.0),
            t_opt: None,
            phi_samples: Vec::new(),
        });
    }

    let mut t_hi = 1.0;
    loop {
        let (_, slope) = phi_at(t_hi);
        if epsilon - slope <= 0.0 {
            break;
        }
        if t_hi > T_CAP {
            return Ok(RateFunctionResult {
                epsilon,
                value: RateValue::Infinite,
                t_opt: None,
                phi_samples: samples(&phi_at, t_hi),
            });
        }
        t_hi *= 2.0;
    }

    let objective = |t: f64| epsilon * t - phi_at(t).0;
    let (log_t, neg) = golden_section_min(|u| -objective(u.exp()), T_MIN.ln(), t_hi.ln(), 1e-13, 400);
    let mut best = (log_t.exp(), -neg);
    for t in [t_hi, T_MIN] {
        let v = objective(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let sup = best.1.max(0.0);
    Ok(RateFunctionResult {
        epsilon,
        value: RateValue::Finite(sup.powf(1.0 / norm.p)),
        t_opt: (sup > 0.0).then_some(best.0),
        phi_samples: samples(&phi_at, t_hi),
    })
}

fn samples(phi_at: &impl Fn(f64) -> (f64, f64), t_hi: f64) -> Vec<(f64, f64)> {
    (0..=16)
        .map(|k| {
            let t = t_hi * 2f64.powi(k - 16);
            (t, phi_at(t).0)
        })
        .collect()
}

/// `I_p(R(ρ)) ` against `ρ`, with the boundary flag of the dual solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub lhs: f64,
    pub rhs: f64,
    pub boundary: bool,
}

pub fn prop1_roundtrip(
    f: &LossModel,
    p_true: &DiscreteDistribution,
    rho: f64,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<RoundTrip> {
    let r = robust_loss_dual(p_true, f, rho, norm, domain)?;
    let lhs = rate_function(f, p_true, r.regularizer, norm, domain)?.value.as_f64();
    Ok(RoundTrip {
        lhs,
        rhs: rho,
        boundary: r.boundary,
    })
}

/// `exp(−n·I²/τ)`, capped to `[0, 1]`; zero when the rate is infinite.
pub fn tail_bound(n: u64, rate: RateValue, tau: &TpConstant) -> f64 {
    if n == 0 {
        return 1.0;
    }
    match rate {
        RateValue::Infinite => 0.0,
        RateValue::Finite(i) => (-(n as f64) * i * i / tau.tau).exp().clamp(0.0, 1.0),
    }
}

/// Bound on `P{E_{P_n}[f] − E_P[f] < −ε}`: `exp(−n·I_p(ε; −f)²/τ)`.
pub fn theorem1_tail_bound(
    n: u64,
    epsilon: f64,
    f: &LossModel,
    p_true: &DiscreteDistribution,
    tau: &TpConstant,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let rate = rate_function(&f.negated(), p_true, epsilon, norm, domain)?;
    Ok(tail_bound(n, rate.value, tau))
}

/// Bound on the upper deviation `P{E_{P_n}[f] − E_P[f] > ε}`: `exp(−n·I_p(ε; f)²/τ)`.
pub fn upper_tail_bound(
    n: u64,
    epsilon: f64,
    f: &LossModel,
    p_true: &DiscreteDistribution,
    tau: &TpConstant,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let rate = rate_function(f, p_true, epsilon, norm, domain)?;
    Ok(tail_bound(n, rate.value, tau))
}
