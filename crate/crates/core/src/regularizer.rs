//! Worst-case expected loss over a p-Wasserstein ball.
//!
//! The robust loss `sup {E_P[f] : W_p(P, Q) ≤ ρ}` is evaluated through its
//! one-dimensional dual
//!
//! ```text
//! min_{λ ≥ λ̲}  λρ^p + E_Q[ sup_z̃ { f(z̃) − λ‖z̃ − z‖^p } ]
//! ```
//!
//! whose inner supremum is available in closed form for the built-in loss
//! families on an unbounded space, and by enumeration on a finite grid. The
//! dual objective is convex in `λ`; it is minimized by bracket doubling and
//! golden-section search, and the floor `λ̲` is evaluated separately because
//! the minimizer may sit there.
//!
//! [`robust_loss_oracle`] solves the primal transport problem on a finite grid
//! directly and shares no code with the dual path.

use serde::{Deserialize, Serialize};

use crate::distribution::{expectation, DiscreteDistribution};
use crate::domain::DomainSpec;
use crate::error::{Result, WdroError};
use crate::loss::{composite_arg, lift, split_label, BaseLoss, LossFamily, LossModel, PredictionMode};
use crate::norm::{dot, l2, GroundNorm, NormSpec};
use crate::optim::golden_section_min;

/// How a robust value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    DualExact,
    LipschitzSurrogate,
    GradientSurrogate,
    OracleGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEvalResult {
    pub robust_loss: f64,
    /// `robust_loss − E_Q[f]`, never negative.
    pub regularizer: f64,
    /// Dual minimizer `λ_o`; `None` when `ρ = 0` (the infimum is approached as `λ → ∞`).
    pub lambda_opt: Option<f64>,
    pub lambda_floor: f64,
    pub boundary: bool,
    pub method: EvalMethod,
    /// False when the value is only an upper bound on the robust loss.
    pub exact: bool,
}

/// Lipschitz sandwich for `p = 2`: the exact regularizer lies in `center ± halfwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSurrogate {
    pub center: f64,
    pub halfwidth: f64,
}

const LAMBDA_REL_TOL: f64 = 1e-10;
const LAMBDA_MAX_ITER: usize = 200;
const LAMBDA_CAP: f64 = 1e15;

/// `sup_{z̃ ∈ Z} { f(z̃) − λ‖z̃ − z‖^p }`; `+inf` when the supremum diverges.
pub fn inner_sup(f: &LossModel, z: &[f64], lambda: f64, norm: &NormSpec, domain: &DomainSpec) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(WdroError::InvalidInput(format!(
            "multiplier must be nonnegative, got {lambda}"
        )));
    }
    match domain {
        DomainSpec::FiniteGrid { points } => Ok(grid_inner_sup(f, z, lambda, norm, points)),
        DomainSpec::Box { .. } => Err(no_solver(f, domain)),
        DomainSpec::Unbounded => closed_form_inner_sup(f, z, lambda, norm).ok_or_else(|| no_solver(f, domain)),
    }
}

fn no_solver(f: &LossModel, domain: &DomainSpec) -> WdroError {
    WdroError::NoSolver {
        family: f.family_name().into(),
        domain: domain.kind().into(),
    }
}

fn grid_inner_sup(f: &LossModel, z: &[f64], lambda: f64, norm: &NormSpec, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .filter_map(|g| {
            let c = norm.cost(g, z);
            c.is_finite().then(|| f.value(g) - lambda * c)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_{r ≥ 0} { k·r − λ·r^p }` for a linear gain of slope `k ≥ 0`.
fn linear_gain_sup(k: f64, lambda: f64, p: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else if p == 1.0 {
        if lambda >= k {
            0.0
        } else {
            f64::INFINITY
        }
    } else if lambda == 0.0 {
        f64::INFINITY
    } else {
        k * k / (4.0 * lambda)
    }
}

fn closed_form_inner_sup(f: &LossModel, z: &[f64], lambda: f64, norm: &NormSpec) -> Option<f64> {
    let p = norm.p;
    if p != 1.0 && p != 2.0 {
        return None;
    }
    let s = f.scale;
    if s == 0.0 {
        return Some(0.0);
    }
    match &f.family {
        LossFamily::Affine { coef, .. } => {
            let k = s.abs() * norm.dual_norm(coef);
            Some(f.value(z) + linear_gain_sup(k, lambda, p))
        }
        LossFamily::Newsvendor { theta, h, b } => {
            if s < 0.0 {
                return None;
            }
            // max of two affine pieces: sup of the max is the max of the sups
            let g = norm.dual_norm(&lift(theta));
            let (x, y) = split_label(z);
            let u = dot(theta, x) - y;
            let up = s * h * u + linear_gain_sup(s * h * g, lambda, p);
            let down = -s * b * u + linear_gain_sup(s * b * g, lambda, p);
            Some(up.max(down))
        }
        LossFamily::LinearComposite { theta, base, mode } => {
            if s < 0.0 {
                return None;
            }
            let k = match (mode, norm.ground) {
                (_, GroundNorm::ProductXOnly) => l2(theta),
                (PredictionMode::Regression, _) => norm.dual_norm(&lift(theta)),
                (PredictionMode::Classification, _) => return None,
            };
            let (x, y) = split_label(z);
            let arg = composite_arg(*mode, dot(theta, x), y);
            if k == 0.0 {
                return Some(s * base.value(arg));
            }
            if p == 1.0 {
                let lip = s * base.lipschitz() * k;
                return Some(if lambda >= lip {
                    s * base.value(arg)
                } else {
                    f64::INFINITY
                });
            }
            if lambda == 0.0 {
                return Some(f64::INFINITY);
            }
            Some(composite_quadratic_penalty_sup(*base, arg, s, k, lambda))
        }
        LossFamily::QuadraticPortfolio { theta, shift } => {
            let kk = norm.dual_norm(theta).powi(2);
            let a = dot(theta, z);
            if kk == 0.0 {
                return Some(f.value(z));
            }
            if p == 2.0 {
                if s > 0.0 && lambda <= s * kk {
                    return Some(f64::INFINITY);
                }
                return Some(s * a * a * lambda / (lambda - s * kk) + s * shift);
            }
            if s > 0.0 {
                return Some(f64::INFINITY);
            }
            // −|s|·min_{r ≥ 0} {(|a| − c r)² + μ r} with c = ‖θ‖_*, μ = λ/|s|
            let c = kk.sqrt();
            let mu = lambda / s.abs();
            let knee = mu / (2.0 * c);
            let m = if a.abs() <= knee {
                a * a
            } else {
                mu * a.abs() / c - mu * mu / (4.0 * c * c)
            };
            Some(-s.abs() * m + s * shift)
        }
        LossFamily::CustomDiscrete { .. } => None,
    }
}

/// `sup_δ { s·ℓ(arg + δ) − λ(δ/k)² }`.
fn composite_quadratic_penalty_sup(base: BaseLoss, arg: f64, s: f64, k: f64, lambda: f64) -> f64 {
    let penalty = |d: f64| s * base.value(arg + d) - lambda * (d / k).powi(2);
    match base {
        // max(0, 1 − t): pieces with slopes 0 and −1
        BaseLoss::Hinge => (s * (1.0 - arg) + s * s * k * k / (4.0 * lambda)).max(0.0),
        BaseLoss::Logistic | BaseLoss::Huber { .. } => {
            // stationarity: 2λδ/k² = s·ℓ'(arg + δ), |ℓ'| ≤ 1
            let reach = s * k * k / (2.0 * lambda);
            let concave = base
                .derivative_lipschitz()
                .map(|h| s * h <= 2.0 * lambda / (k * k))
                .unwrap_or(false);
            if concave {
                let (_, v) = golden_section_min(|d| -penalty(d), -reach, reach, 1e-14, 400);
                return (-v).max(penalty(0.0));
            }
            let cells = 4000;
            let step = 2.0 * reach / cells as f64;
            let (mut best_d, mut best_v) = (0.0, penalty(0.0));
            for i in 0..=cells {
                let d = -reach + step * i as f64;
                let v = penalty(d);
                if v > best_v {
                    best_d = d;
                    best_v = v;
                }
            }
            let (_, v) = golden_section_min(|d| -penalty(d), best_d - step, best_d + step, 1e-14, 400);
            best_v.max(-v)
        }
    }
}

/// Dual objective `λρ^p + E_Q[inner_sup(λ)]`.
pub fn dual_objective(
    q: &DiscreteDistribution,
    f: &LossModel,
    rho: f64,
    norm: &NormSpec,
    domain: &DomainSpec,
    lambda: f64,
) -> Result<f64> {
    let mut total = lambda * rho.powf(norm.p);
    for (z, w) in q.iter() {
        if w == 0.0 {
            continue;
        }
        let v = inner_sup(f, z, lambda, norm, domain)?;
        if v == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        total += w * v;
    }
    Ok(total)
}

fn validate(q: &DiscreteDistribution, f: &LossModel, rho: f64, norm: &NormSpec, domain: &DomainSpec) -> Result<()> {
    norm.validate()?;
    f.check_dim(q.dim())?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(WdroError::InvalidInput(format!(
            "radius must be finite and nonnegative, got {rho}"
        )));
    }
    if let DomainSpec::FiniteGrid { points } = domain {
        if points[0].len() != q.dim() {
            return Err(WdroError::DimensionMismatch {
                expected: q.dim(),
                got: points[0].len(),
            });
        }
        for (z, _) in q.iter() {
            if !points.iter().any(|g| g.as_slice() == z) {
                return Err(WdroError::InvalidInput(format!(
                    "atom {z:?} is not a point of the finite grid"
                )));
            }
        }
    }
    Ok(())
}

/// Robust loss by minimizing the dual over `λ ∈ [λ̲, ∞)`.
pub fn robust_loss_dual(
    q: &DiscreteDistribution,
    f: &LossModel,
    rho: f64,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<RobustEvalResult> {
    validate(q, f, rho, norm, domain)?;
    if matches!(domain, DomainSpec::Box { .. }) {
        return Err(no_solver(f, domain));
    }
    let nominal = expectation(q, f);
    let floor = f.tail_slope(norm, domain);
    if rho == 0.0 {
        return Ok(RobustEvalResult {
            robust_loss: nominal,
            regularizer: 0.0,
            lambda_opt: None,
            lambda_floor: floor,
            boundary: false,
            method: EvalMethod::DualExact,
            exact: true,
        });
    }
    if !floor.is_finite() {
        return Err(WdroError::UnboundedRobustLoss);
    }
    let phi = |l: f64| dual_objective(q, f, rho, norm, domain, l);

    let lo = floor + 1e-8 * (1.0 + floor);
    let f_lo = phi(lo)?;
    let mut mid = (floor + 1.0).max(1.0);
    let mut f_mid = phi(mid)?;
    let mut left = lo;
    let right;
    if f_lo <= f_mid {
        right = mid;
    } else {
        loop {
            let next = floor + 2.0 * (mid - floor);
            let f_next = phi(next)?;
            if f_next >= f_mid && f_mid.is_finite() {
                right = next;
                break;
            }
            if next > LAMBDA_CAP * (1.0 + floor) {
                if !f_next.is_finite() {
                    return Err(WdroError::UnboundedRobustLoss);
                }
                right = next;
                break;
            }
            left = mid;
            mid = next;
            f_mid = f_next;
        }
    }
    let mut eval_err = None;
    let (mut lam, mut best) = golden_section_min(
        |l| match phi(l) {
            Ok(v) => v,
            Err(e) => {
                eval_err.get_or_insert(e);
                f64::INFINITY
            }
        },
        left,
        right,
        LAMBDA_REL_TOL,
        LAMBDA_MAX_ITER,
    );
    if let Some(e) = eval_err {
        return Err(e);
    }
    for (l, v) in [(lo, f_lo), (mid, f_mid)] {
        if v < best {
            lam = l;
            best = v;
        }
    }
    let f_floor = phi(floor)?;
    if f_floor <= best {
        lam = floor;
        best = f_floor;
    }
    if !best.is_finite() {
        return Err(WdroError::UnboundedRobustLoss);
    }
    let regularizer = (best - nominal).max(0.0);
    Ok(RobustEvalResult {
        robust_loss: nominal + regularizer,
        regularizer,
        lambda_opt: Some(lam),
        lambda_floor: floor,
        boundary: lam - floor <= 1e-6 * (1.0 + floor),
        method: EvalMethod::DualExact,
        exact: true,
    })
}

/// `E_Q[f] + ρ‖f‖_Lip`: exact when the Lipschitz norm is attained at infinity,
/// an upper bound otherwise.
pub fn lipschitz_surrogate(
    q: &DiscreteDistribution,
    f: &LossModel,
    rho: f64,
    norm: &NormSpec,
) -> Result<RobustEvalResult> {
    let lip = f.lip_norm(norm).ok_or(WdroError::MissingLipschitz)?;
    let estimated = matches!(
        f.family,
        LossFamily::CustomDiscrete {
            lip_estimated: true,
            ..
        }
    );
    let regularizer = rho * lip;
    Ok(RobustEvalResult {
        robust_loss: expectation(q, f) + regularizer,
        regularizer,
        lambda_opt: None,
        lambda_floor: 0.0,
        boundary: false,
        method: EvalMethod::LipschitzSurrogate,
        exact: f.lip_attained_at_infinity() && !estimated,
    })
}

/// `ρ·‖‖∇f‖_*‖_{Q,2} ± ħρ²`.
pub fn gradient_surrogate(
    q: &DiscreteDistribution,
    f: &LossModel,
    rho: f64,
    norm: &NormSpec,
) -> Result<GradientSurrogate> {
    let hbar = f.grad_lip(norm).ok_or(WdroError::MissingGradient)?;
    let mut second = 0.0;
    for (z, w) in q.iter() {
        let g = f.gradient(z).ok_or(WdroError::MissingGradient)?;
        second += w * norm.dual_norm(&g).powi(2);
    }
    Ok(GradientSurrogate {
        center: rho * second.sqrt(),
        halfwidth: hbar * rho * rho,
    })
}

/// Upper limit on `atoms × grid points` accepted by the primal oracle.
pub const ORACLE_MAX_WORK: usize = 1_000_000;

/// Primal brute force on a finite grid.
///
/// Each atom's best achievable gain as a function of the transport budget it
/// spends is the upper concave envelope of `{(‖g − zᵢ‖^p, f(g))}`; the coupled
/// problem `max Σ wᵢVᵢ(bᵢ) s.t. Σ wᵢbᵢ ≤ ρ^p` is a fractional knapsack over
/// envelope segments, solved exactly by taking segments in decreasing slope.
pub fn robust_loss_oracle(
    q: &DiscreteDistribution,
    f: &LossModel,
    rho: f64,
    norm: &NormSpec,
    domain: &DomainSpec,
) -> Result<f64> {
    validate(q, f, rho, norm, domain)?;
    let points = domain
        .grid_points()
        .ok_or_else(|| WdroError::InvalidInput("the primal oracle needs a finite-grid domain".into()))?;
    if q.len().saturating_mul(points.len()) > ORACLE_MAX_WORK {
        return Err(WdroError::TooLarge(format!(
            "{} atoms × {} grid points exceeds {ORACLE_MAX_WORK}",
            q.len(),
            points.len()
        )));
    }
    let values: Vec<f64> = points.iter().map(|g| f.value(g)).collect();
    let mut nominal = 0.0;
    // (slope, mass-weighted budget length)
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for (z, w) in q.iter() {
        if w == 0.0 {
            continue;
        }
        let base = f.value(z);
        nominal += w * base;
        let mut pts: Vec<(f64, f64)> = points
            .iter()
            .zip(&values)
            .map(|(g, &v)| (norm.cost(g, z), v))
            .filter(|(c, v)| c.is_finite() && *c > 0.0 && *v > base)
            .collect();
        pts.push((0.0, base));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let hull = upper_envelope(&pts);
        for win in hull.windows(2) {
            let (c0, v0) = win[0];
            let (c1, v1) = win[1];
            if v1 > v0 {
                segments.push(((v1 - v0) / (c1 - c0), w * (c1 - c0)));
            }
        }
    }
    segments.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut budget = rho.powf(norm.p);
    let mut gain = 0.0;
    for (slope, len) in segments {
        if budget <= 0.0 {
            break;
        }
        let used = len.min(budget);
        gain += slope * used;
        budget -= used;
    }
    Ok(nominal + gain)
}

/// Upper concave hull of points sorted by abscissa, truncated at its maximum.
fn upper_envelope(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        if let Some(&last) = hull.last() {
            if p.0 == last.0 {
                continue;
            }
            if p.1 <= last.1 {
                continue;
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> (DiscreteDistribution, DomainSpec) {
        (
            DiscreteDistribution::uniform(vec![vec![0.0], vec![1.0]]).unwrap(),
            DomainSpec::grid(vec![vec![0.0], vec![1.0]]).unwrap(),
        )
    }

    #[test]
    fn linear_loss_at_point_mass() {
        let q = DiscreteDistribution::point_mass(vec![0.0]).unwrap();
        let f = LossModel::linear(vec![1.0], 0.0);
        let r = robust_loss_dual(&q, &f, 0.5, &NormSpec::euclidean(1.0), &DomainSpec::Unbounded).unwrap();
        assert!((r.robust_loss - 0.5).abs() < 1e-12);
        assert!((r.lambda_opt.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.boundary);
    }

    #[test]
    fn zero_radius_is_nominal() {
        let (q, grid) = two_point();
        let f = LossModel::linear(vec![1.0], 0.0);
        let r = robust_loss_dual(&q, &f, 0.0, &NormSpec::euclidean(1.0), &grid).unwrap();
        assert_eq!(r.robust_loss, 0.5);
        assert_eq!(r.regularizer, 0.0);
        assert_eq!(
            robust_loss_oracle(&q, &f, 0.0, &NormSpec::euclidean(1.0), &grid).unwrap(),
            0.5
        );
    }

    #[test]
    fn quadratic_two_atoms() {
        let q = DiscreteDistribution::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let f = LossModel::quadratic(vec![1.0], 0.0);
        let r = robust_loss_dual(&q, &f, 1.0, &NormSpec::euclidean(2.0), &DomainSpec::Unbounded).unwrap();
        assert!((r.robust_loss - 4.0).abs() < 1e-9, "{r:?}");
        assert!((r.lambda_opt.unwrap() - 2.0).abs() < 1e-4);
        assert!(!r.boundary);
    }

    #[test]
    fn two_point_grid() {
        let (q, grid) = two_point();
        let f = LossModel::linear(vec![1.0], 0.0);
        let n = NormSpec::euclidean(1.0);
        let r = robust_loss_dual(&q, &f, 0.25, &n, &grid).unwrap();
        assert!((r.robust_loss - 0.75).abs() < 1e-9);
        assert!((r.lambda_opt.unwrap() - 1.0).abs() < 1e-6);
        assert!((robust_loss_oracle(&q, &f, 0.25, &n, &grid).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn inner_sup_cases() {
        let n1 = NormSpec::euclidean(1.0);
        let n2 = NormSpec::euclidean(2.0);
        let lin = LossModel::linear(vec![2.0], 1.0);
        assert_eq!(
            inner_sup(&lin, &[0.7], 3.0, &n1, &DomainSpec::Unbounded).unwrap(),
            lin.value(&[0.7])
        );
        assert!(inner_sup(&lin, &[0.7], 1.5, &n1, &DomainSpec::Unbounded)
            .unwrap()
            .is_infinite());
        let quad = LossModel::quadratic(vec![1.0, 0.0], 0.0);
        assert_eq!(
            inner_sup(&quad, &[1.0, 0.0], 2.0, &n2, &DomainSpec::Unbounded).unwrap(),
            2.0
        );
        assert_eq!(
            inner_sup(&quad, &[0.0, 0.0], 2.0, &n2, &DomainSpec::Unbounded).unwrap(),
            0.0
        );
        let (_, grid) = two_point();
        let id = LossModel::linear(vec![1.0], 0.0);
        assert_eq!(inner_sup(&id, &[0.0], 0.5, &n1, &grid).unwrap(), 0.5);
    }

    #[test]
    fn quadratic_inner_sup_matches_line_search() {
        // maximize (z̃₁)² − 2‖z̃ − (1, 0)‖² over z̃₁ on a fine grid
        let best = (0..=400_000)
            .map(|i| -5.0 + i as f64 * 2.5e-5)
            .map(|t| t * t - 2.0 * (t - 1.0) * (t - 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - 2.0).abs() < 1e-8);
    }

    #[test]
    fn unsupported_combinations() {
        let q = DiscreteDistribution::point_mass(vec![0.0, 0.0]).unwrap();
        let quad = LossModel::quadratic(vec![1.0, 0.0], 0.0);
        assert!(matches!(
            robust_loss_dual(&q, &quad, 0.1, &NormSpec::euclidean(1.0), &DomainSpec::Unbounded),
            Err(WdroError::UnboundedRobustLoss)
        ));
        let custom = LossModel::custom_discrete(vec![vec![0.0, 0.0]], vec![1.0], None).unwrap();
        assert!(matches!(
            robust_loss_dual(&q, &custom, 0.1, &NormSpec::euclidean(1.0), &DomainSpec::Unbounded),
            Err(WdroError::NoSolver { .. })
        ));
        assert!(matches!(
            lipschitz_surrogate(&q, &custom, 0.1, &NormSpec::euclidean(1.0)),
            Err(WdroError::MissingLipschitz)
        ));
        assert!(matches!(
            gradient_surrogate(&q, &custom, 0.1, &NormSpec::euclidean(2.0)),
            Err(WdroError::MissingGradient)
        ));
    }

    #[test]
    fn surrogates() {
        let q = DiscreteDistribution::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let n2 = NormSpec::euclidean(2.0);
        let quad = LossModel::quadratic(vec![1.0], 0.0);
        let g = gradient_surrogate(&q, &quad, 1.0, &n2).unwrap();
        assert_eq!((g.center, g.halfwidth), (2.0, 2.0));
        assert_eq!(
            gradient_surrogate(&q, &quad, 0.0, &n2).unwrap(),
            GradientSurrogate {
                center: 0.0,
                halfwidth: 0.0
            }
        );
        let lin = LossModel::linear(vec![3.0, 4.0], 0.0);
        let q2 = DiscreteDistribution::point_mass(vec![1.0, 1.0]).unwrap();
        let g = gradient_surrogate(&q2, &lin, 0.5, &n2).unwrap();
        assert_eq!((g.center, g.halfwidth), (2.5, 0.0));

        let n1 = NormSpec::euclidean(1.0);
        let lip2 = LossModel::linear(vec![2.0], 0.0);
        let r = lipschitz_surrogate(&q, &lip2, 0.25, &n1).unwrap();
        assert_eq!(r.regularizer, 0.5);
        assert!(r.exact);
        assert_eq!(lipschitz_surrogate(&q, &lip2, 0.0, &n1).unwrap().regularizer, 0.0);
        let nv = LossModel::newsvendor(vec![1.0], 2.0, 1.0);
        let qn = DiscreteDistribution::point_mass(vec![1.0, 1.0]).unwrap();
        let r = lipschitz_surrogate(&qn, &nv, 1.0, &n1).unwrap();
        assert!((r.regularizer - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn envelope_drops_dominated_points() {
        let hull = upper_envelope(&[(0.0, 1.0), (1.0, 4.0), (2.0, 5.0), (4.0, 9.0), (9.0, 16.0)]);
        assert_eq!(hull, vec![(0.0, 1.0), (1.0, 4.0), (4.0, 9.0), (9.0, 16.0)]);
    }
}
