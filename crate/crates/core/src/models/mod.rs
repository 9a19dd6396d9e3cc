//! Robust learning problems with their variation norms and solvers.
//!
//! Each solver minimizes "empirical loss + radius × variation" over a norm
//! ball of parameters, which for these families is the robust loss itself or
//! a certified upper bound on it.

mod linear;
mod newsvendor;
mod portfolio;

use serde::{Deserialize, Serialize};

use crate::norm::{l2, GroundNorm, NormSpec};

pub use linear::{linear_p2_objective, solve_linear_p1, solve_linear_p2, LinearPredictionProblem};
pub use newsvendor::{
    newsvendor_lip_norm, newsvendor_objective, solve_newsvendor, solve_newsvendor_from, LipBounds, NewsvendorProblem,
};
pub use portfolio::{bound_u_n, portfolio_robust_objective, solve_portfolio, PortfolioEval, PortfolioProblem};

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    pub robust_objective: f64,
    pub nominal_objective: f64,
    pub regularizer_used: f64,
    /// Lipschitz norm (`p = 1`) or RMS gradient norm (`p = 2`) at the solution.
    pub variation_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A subgradient of `v ↦ ‖v‖_*` restricted to the movable block, padded with zeros.
pub(crate) fn dual_norm_subgradient(norm: &NormSpec, v: &[f64]) -> Vec<f64> {
    let m = norm.movable(v);
    let mut g = vec![0.0; v.len()];
    match norm.ground {
        GroundNorm::Euclidean | GroundNorm::ProductXOnly => {
            let n = l2(m);
            if n > 0.0 {
                for (gi, vi) in g.iter_mut().zip(m) {
                    *gi = vi / n;
                }
            }
        }
        // dual of ℓ₁ is ℓ∞
        GroundNorm::OneNorm => {
            if let Some((k, x)) = m.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
                if *x != 0.0 {
                    g[k] = x.signum();
                }
            }
        }
        GroundNorm::InfNorm => {
            for (gi, vi) in g.iter_mut().zip(m) {
                if *vi != 0.0 {
                    *gi = vi.signum();
                }
            }
        }
    }
    g
}
