//! Robust mean-variance portfolio over the 2-Wasserstein ball of asset-loss laws.
//!
//! With `a = wᵀx − u + α/2` the loss is `f(x) = (wᵀx − u)² + αwᵀx = a² + αu − α²/4`,
//! and only `x` moves. Cauchy–Schwarz along `w` gives the worst case
//!
//! ```text
//! sup_{W₂ ≤ ρ} E[f] = (‖a‖_{P_n,2} + ρ‖w‖₂)² + αu − α²/4,
//! ```
//!
//! attained by the dual multiplier `λ = ‖w‖²(1 + ‖a‖_{P_n,2}/(ρ‖w‖))`.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Result, WdroError};
use crate::loss::LossModel;
use crate::norm::{dot, l2, GroundNorm, NormSpec};
use crate::optim::{minimize_convex_line, project_budget_ball};

use super::SolveResult;

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    pub alpha: f64,
    /// Radius of the weight ball `‖w‖₂ ≤ B`.
    pub radius: f64,
    /// Asset-loss vectors `x`.
    pub data: DiscreteDistribution,
}

impl PortfolioProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(WdroError::InvalidInput("risk aversion α must be positive".into()));
        }
        let d = self.data.dim() as f64;
        if !(self.radius * self.radius >= 1.0 / d - 1e-15) {
            return Err(WdroError::InfeasibleProjection(format!(
                "budget ball B = {} misses the simplex hyperplane (need B ≥ 1/√{d})",
                self.radius
            )));
        }
        Ok(())
    }

    /// The quadratic loss on lifted points `(x, 1)`, for cross-checks with the general dual.
    pub fn lifted_loss(&self, w: &[f64], u: f64) -> LossModel {
        let mut theta = w.to_vec();
        theta.push(-u + self.alpha / 2.0);
        LossModel::quadratic(theta, self.alpha * u - self.alpha * self.alpha / 4.0)
    }

    /// Atoms `(x, 1)`.
    pub fn lifted_data(&self) -> DiscreteDistribution {
        let atoms = self
            .data
            .atoms()
            .iter()
            .map(|x| {
                let mut z = x.clone();
                z.push(1.0);
                z
            })
            .collect();
        DiscreteDistribution::new(atoms, self.data.weights().to_vec()).expect("lifting preserves validity")
    }

    pub fn lifted_norm() -> NormSpec {
        NormSpec {
            p: 2.0,
            ground: GroundNorm::ProductXOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioEval {
    pub value: f64,
    pub nominal: f64,
    pub regularizer: f64,
    /// `None` at `ρ = 0` or `w = 0`, where no finite multiplier is needed.
    pub lambda_opt: Option<f64>,
    /// `‖a‖_{P_n,2}`.
    pub rms: f64,
}

fn residual_moments(w: &[f64], u: f64, alpha: f64, data: &DiscreteDistribution) -> (f64, f64, Vec<f64>) {
    let d = w.len();
    let (mut sq, mut mean) = (0.0, 0.0);
    let mut ax = vec![0.0; d];
    for (x, wt) in data.iter() {
        let a = dot(w, x) - u + alpha / 2.0;
        sq += wt * a * a;
        mean += wt * a;
        for k in 0..d {
            ax[k] += wt * a * x[k];
        }
    }
    (sq, mean, ax)
}

/// Exact robust mean-variance objective at `(w, u)`.
pub fn portfolio_robust_objective(
    w: &[f64],
    u: f64,
    alpha: f64,
    data: &DiscreteDistribution,
    rho: f64,
) -> Result<PortfolioEval> {
    if w.len() != data.dim() {
        return Err(WdroError::DimensionMismatch {
            expected: data.dim(),
            got: w.len(),
        });
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(WdroError::InvalidInput(format!(
            "radius must be nonnegative, got {rho}"
        )));
    }
    let (sq, ..) = residual_moments(w, u, alpha, data);
    let rms = sq.sqrt();
    let wn = l2(w);
    let constant = alpha * u - alpha * alpha / 4.0;
    let nominal = sq + constant;
    let value = if rho > 0.0 {
        (rms + rho * wn).powi(2) + constant
    } else {
        nominal
    };
    let lambda_opt = (rho > 0.0 && wn > 0.0).then(|| wn * wn * (1.0 + rms / (rho * wn)));
    Ok(PortfolioEval {
        value,
        nominal,
        regularizer: (value - nominal).max(0.0),
        lambda_opt,
        rms,
    })
}

/// Gradient in `w` at fixed `u` (Danskin: differentiate the dual at its minimizer).
fn w_gradient(w: &[f64], u: f64, alpha: f64, data: &DiscreteDistribution, rho: f64) -> Vec<f64> {
    let (sq, _, ax) = residual_moments(w, u, alpha, data);
    let rms = sq.sqrt();
    let wn = l2(w);
    let outer = 2.0 * (rms + rho * wn);
    (0..w.len())
        .map(|k| {
            let d_rms = if rms > 0.0 { ax[k] / rms } else { 0.0 };
            let d_norm = if wn > 0.0 { w[k] / wn } else { 0.0 };
            outer * (d_rms + rho * d_norm)
        })
        .collect()
}

fn value_at(p: &PortfolioProblem, w: &[f64], u: f64, rho: f64) -> f64 {
    let (sq, ..) = residual_moments(w, u, p.alpha, &p.data);
    (sq.sqrt() + rho * l2(w)).powi(2) + p.alpha * u - p.alpha * p.alpha / 4.0
}

fn best_u(p: &PortfolioProblem, w: &[f64], u0: f64, rho: f64) -> f64 {
    let spread = p.data.atoms().iter().map(|x| dot(w, x).abs()).fold(1.0, f64::max);
    minimize_convex_line(|u| value_at(p, w, u, rho), u0, spread).0
}

/// Alternating minimization: exact `u`-step by line search, then one
/// Armijo-backtracked projected-gradient step in `w`.
pub fn solve_portfolio(problem: &PortfolioProblem, rho: f64, max_iter: usize) -> Result<SolveResult> {
    problem.validate()?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(WdroError::InvalidInput(format!(
            "radius must be nonnegative, got {rho}"
        )));
    }
    let d = problem.data.dim();
    let mut w = vec![1.0 / d as f64; d];
    if !project_budget_ball(&mut w, problem.radius) {
        return Err(WdroError::InfeasibleProjection("empty feasible set".into()));
    }
    let mut u = problem.data.expect(|x| dot(&w, x));
    u = best_u(problem, &w, u, rho);
    let mut value = value_at(problem, &w, u, rho);
    let mut step: f64 = 1.0;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let g = w_gradient(&w, u, problem.alpha, &problem.data, rho);
        let mut accepted = None;
        let mut s = (step * 4.0_f64).min(1e6);
        for _ in 0..60 {
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - s * gi).collect();
            project_budget_ball(&mut cand, problem.radius);
            let move_sq: f64 = cand.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum();
            let v = value_at(problem, &cand, u, rho);
            if v <= value - 1e-4 * move_sq / s {
                accepted = Some((cand, v, move_sq));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, _, move_sq)) = accepted else {
            converged = true;
            break;
        };
        step = s;
        w = cand;
        u = best_u(problem, &w, u, rho);
        let new_value = value_at(problem, &w, u, rho);
        let drop = value - new_value;
        value = new_value.min(value);
        if move_sq.sqrt() < 1e-12 * (1.0 + problem.radius) && drop.abs() <= 1e-14 * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }
    let eval = portfolio_robust_objective(&w, u, problem.alpha, &problem.data, rho)?;
    Ok(SolveResult {
        robust_objective: eval.value,
        nominal_objective: eval.nominal,
        regularizer_used: eval.regularizer,
        variation_norm: 2.0 * l2(&w) * eval.rms,
        theta: w,
        u: Some(u),
        iterations: it,
        converged,
        warnings: Vec::new(),
    })
}

/// High-probability bound on the optimal `u`: `2B²(μ₂² + τ²√(t/n) + τ²√(2d) + ρ²)`.
pub fn bound_u_n(radius: f64, mu2: f64, tau: f64, t: f64, n: u64, d: usize, rho: f64) -> Result<f64> {
    if !(t > 0.0) || (n as f64) < t {
        return Err(WdroError::InvalidInput(format!("need n ≥ t > 0, got n = {n}, t = {t}")));
    }
    let tau2 = tau * tau;
    Ok(2.0 * radius * radius * (mu2 * mu2 + tau2 * (t / n as f64).sqrt() + tau2 * (2.0 * d as f64).sqrt() + rho * rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::regularizer::robust_loss_dual;

    #[test]
    fn zero_radius_is_nominal() {
        let data = DiscreteDistribution::uniform(vec![vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let e = portfolio_robust_objective(&[0.3, 0.7], 0.2, 0.5, &data, 0.0).unwrap();
        let direct = data.expect(|x| {
            let r = 0.3 * x[0] + 0.7 * x[1];
            (r - 0.2).powi(2) + 0.5 * r
        });
        assert!((e.value - direct).abs() < 1e-14);
        assert_eq!(e.regularizer, 0.0);
    }

    #[test]
    fn single_asset_example() {
        let data = DiscreteDistribution::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        // α → 0 limit of the lifted quadratic example
        let e = portfolio_robust_objective(&[1.0], 0.0, 0.0, &data, 1.0).unwrap();
        assert!((e.value - 4.0).abs() < 1e-14);
        assert_eq!(e.lambda_opt, Some(2.0));
    }

    #[test]
    fn closed_form_matches_general_dual() {
        let data = DiscreteDistribution::uniform(vec![vec![0.3, -0.2], vec![1.0, 0.4], vec![-0.5, 0.9]]).unwrap();
        let p = PortfolioProblem {
            alpha: 0.7,
            radius: 2.0,
            data,
        };
        let (w, u) = ([0.6, 0.4], 0.25);
        let e = portfolio_robust_objective(&w, u, p.alpha, &p.data, 0.3).unwrap();
        let r = robust_loss_dual(
            &p.lifted_data(),
            &p.lifted_loss(&w, u),
            0.3,
            &PortfolioProblem::lifted_norm(),
            &DomainSpec::Unbounded,
        )
        .unwrap();
        assert!(
            (e.value - r.robust_loss).abs() < 1e-9 * (1.0 + e.value.abs()),
            "{e:?} {r:?}"
        );
        assert!((e.lambda_opt.unwrap() - r.lambda_opt.unwrap()).abs() < 1e-4);
    }

    #[test]
    fn single_asset_is_forced() {
        let data = DiscreteDistribution::uniform(vec![vec![-1.0], vec![2.0], vec![0.5]]).unwrap();
        let p = PortfolioProblem {
            alpha: 1.0,
            radius: 1.0,
            data,
        };
        let r = solve_portfolio(&p, 0.2, 2000).unwrap();
        assert!((r.theta[0] - 1.0).abs() < 1e-12);
        let u = r.u.unwrap();
        let grid_best = (0..=40_000)
            .map(|i| -2.0 + i as f64 * 1e-4)
            .map(|uu| value_at(&p, &[1.0], uu, 0.2))
            .fold(f64::INFINITY, f64::min);
        assert!(r.robust_objective <= grid_best + 1e-9);
        assert!(value_at(&p, &[1.0], u, 0.2) - r.robust_objective < 1e-12);
    }

    #[test]
    fn deterministic_assets() {
        // every atom equal: zero variance, so w minimizes αwᵀx on the feasible set
        let data = DiscreteDistribution::uniform(vec![vec![1.0, 3.0]; 4]).unwrap();
        let p = PortfolioProblem {
            alpha: 1.0,
            radius: 2.0,
            data,
        };
        let r = solve_portfolio(&p, 0.0, 5000).unwrap();
        // minimize w₁ + 3w₂ with w₁ + w₂ = 1, ‖w‖ ≤ 2: w₂ = (1 − √7)/2
        let w2 = (1.0 - 7f64.sqrt()) / 2.0;
        assert!((r.theta[1] - w2).abs() < 1e-6, "{r:?}");
        assert!((r.nominal_objective - (1.0 - w2 + 3.0 * w2)).abs() < 1e-8);
    }

    #[test]
    fn u_bound_arithmetic() {
        assert_eq!(bound_u_n(1.0, 1.0, 0.0, 1.0, 10, 2, 0.0).unwrap(), 2.0);
        assert!((bound_u_n(1.0, 1.0, 1.0, 100.0, 100, 2, 0.1).unwrap() - 8.02).abs() < 1e-12);
        assert_eq!(
            bound_u_n(2.0, 1.0, 1.0, 1.0, 10, 2, 0.1).unwrap(),
            4.0 * bound_u_n(1.0, 1.0, 1.0, 1.0, 10, 2, 0.1).unwrap()
        );
        assert!(bound_u_n(1.0, 1.0, 1.0, 5.0, 4, 1, 0.0).is_err());
        let bad = PortfolioProblem {
            alpha: 1.0,
            radius: 0.5,
            data: DiscreteDistribution::uniform(vec![vec![1.0, 0.0, 2.0]]).unwrap(),
        };
        assert!(matches!(
            solve_portfolio(&bad, 0.1, 10),
            Err(WdroError::InfeasibleProjection(_))
        ));
    }
}
