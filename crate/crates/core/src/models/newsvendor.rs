use serde::{Deserialize, Serialize};

use crate::distribution::{expectation, DiscreteDistribution};
use crate::error::{Result, WdroError};
use crate::loss::{lift, split_label, LossModel};
use crate::norm::{dot, NormSpec};
use crate::optim::{project_dual_ball, projected_subgradient};

use super::{dual_norm_subgradient, SolveResult};

/// Feature-based newsvendor: order `θᵀx`, pay `h` per unit left over and `b`
/// per unit short. Atoms of `data` are `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsvendorProblem {
    pub h: f64,
    pub b: f64,
    /// Radius of the θ-ball, measured in the dual norm.
    pub radius: f64,
    pub data: DiscreteDistribution,
    pub norm: NormSpec,
}

impl NewsvendorProblem {
    pub fn new(h: f64, b: f64, radius: f64, data: DiscreteDistribution) -> Result<Self> {
        let p = NewsvendorProblem {
            h,
            b,
            radius,
            data,
            norm: NormSpec::euclidean(1.0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.b > 0.0 && self.radius > 0.0) {
            return Err(WdroError::InvalidInput("newsvendor needs h, b, B > 0".into()));
        }
        if self.data.dim() < 2 {
            return Err(WdroError::InvalidInput(
                "newsvendor data rows are (x, y) with at least one feature".into(),
            ));
        }
        self.norm.validate()
    }

    pub fn loss(&self, theta: &[f64]) -> LossModel {
        LossModel::newsvendor(theta.to_vec(), self.h, self.b)
    }
}

/// Lipschitz norm of the newsvendor loss and the fraction of it the
/// empirical regularizer is guaranteed to reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipBounds {
    /// `max(h, b)·‖(θ, −1)‖_*`
    pub upper: f64,
    /// `min(h, b)·‖(θ, −1)‖_*`
    pub lower: f64,
}

pub fn newsvendor_lip_norm(theta: &[f64], h: f64, b: f64, norm: &NormSpec) -> LipBounds {
    let g = norm.dual_norm(&lift(theta));
    LipBounds {
        upper: h.max(b) * g,
        lower: h.min(b) * g,
    }
}

/// `E_{P_n}[f_θ] + ρ·max(h, b)‖(θ, −1)‖_*` and a subgradient in θ.
pub fn newsvendor_objective(problem: &NewsvendorProblem, theta: &[f64], rho: f64) -> (f64, Vec<f64>) {
    let (h, b) = (problem.h, problem.b);
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (z, w) in problem.data.iter() {
        let (x, y) = split_label(z);
        let u = dot(theta, x) - y;
        let slope = if u > 0.0 {
            h
        } else if u < 0.0 {
            -b
        } else {
            0.0
        };
        value += w * (h * u.max(0.0) + b * (-u).max(0.0));
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += w * slope * xi;
        }
    }
    let v = lift(theta);
    let k = h.max(b);
    value += rho * k * problem.norm.dual_norm(&v);
    let sub = dual_norm_subgradient(&problem.norm, &v);
    for (g, s) in grad.iter_mut().zip(&sub) {
        *g += rho * k * s;
    }
    (value, grad)
}

pub fn solve_newsvendor(problem: &NewsvendorProblem, rho: f64, max_iter: usize) -> Result<SolveResult> {
    let d = problem.data.dim() - 1;
    solve_newsvendor_from(problem, rho, &vec![0.0; d], max_iter)
}

pub fn solve_newsvendor_from(
    problem: &NewsvendorProblem,
    rho: f64,
    x0: &[f64],
    max_iter: usize,
) -> Result<SolveResult> {
    problem.validate()?;
    if !(rho >= 0.0) {
        return Err(WdroError::InvalidInput(format!(
            "radius must be nonnegative, got {rho}"
        )));
    }
    if x0.len() + 1 != problem.data.dim() {
        return Err(WdroError::DimensionMismatch {
            expected: problem.data.dim() - 1,
            got: x0.len(),
        });
    }
    let ground = problem.norm.ground;
    let radius = problem.radius;
    let out = projected_subgradient(
        |th| newsvendor_objective(problem, th, rho),
        |th| project_dual_ball(ground, th, radius),
        x0,
        radius,
        max_iter,
    );
    let loss = problem.loss(&out.x);
    let nominal = expectation(&problem.data, &loss);
    let lip = newsvendor_lip_norm(&out.x, problem.h, problem.b, &problem.norm).upper;
    Ok(SolveResult {
        robust_objective: out.value,
        nominal_objective: nominal,
        regularizer_used: rho * lip,
        variation_norm: lip,
        theta: out.x,
        u: None,
        iterations: out.iterations,
        converged: out.converged,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lip_bounds() {
        let n = NormSpec::euclidean(1.0);
        let l = newsvendor_lip_norm(&[1.0], 2.0, 1.0, &n);
        assert!((l.upper - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((l.lower - 2f64.sqrt()).abs() < 1e-15);
        let z = newsvendor_lip_norm(&[0.0], 1.0, 1.0, &n);
        assert_eq!((z.upper, z.lower), (1.0, 1.0));
        let d = newsvendor_lip_norm(&[1.0], 4.0, 2.0, &n);
        assert_eq!((d.upper, d.lower), (2.0 * l.upper, 2.0 * l.lower));
    }

    #[test]
    fn single_sample_fit() {
        let data = DiscreteDistribution::point_mass(vec![1.0, 1.0]).unwrap();
        let p = NewsvendorProblem::new(1.0, 1.0, 10.0, data).unwrap();
        let r = solve_newsvendor(&p, 0.0, 10_000).unwrap();
        assert!((r.theta[0] - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.robust_objective < 1e-6);
    }

    #[test]
    fn perfect_linear_fit() {
        let atoms = vec![vec![1.0, 0.5, 1.05], vec![-0.5, 2.0, 0.6], vec![0.3, 0.1, 0.29]];
        let data = DiscreteDistribution::uniform(atoms).unwrap();
        let p = NewsvendorProblem::new(2.0, 1.0, 5.0, data).unwrap();
        let r = solve_newsvendor(&p, 0.0, 10_000).unwrap();
        assert!(r.robust_objective < 1e-6, "{r:?}");
        assert!((r.theta[0] - 0.8).abs() < 1e-4 && (r.theta[1] - 0.5).abs() < 1e-4);
    }
}
