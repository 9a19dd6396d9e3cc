use rand::Rng;

use crate::distribution::DiscreteDistribution;
use crate::error::{Result, WdroError};
use crate::loss::{composite_arg, split_label, BaseLoss, PredictionMode};
use crate::norm::{dot, l2};
use crate::optim::{project_l2_ball, projected_subgradient};
use crate::seed::rng_for;

use super::SolveResult;

/// `ℓ(θᵀx − y)` or `ℓ(y·θᵀx)` over `‖θ‖₂ ≤ B`, transported on `x` only.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictionProblem {
    pub mode: PredictionMode,
    pub base: BaseLoss,
    pub radius: f64,
    pub data: DiscreteDistribution,
}

impl LinearPredictionProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(WdroError::InvalidInput("parameter radius B must be positive".into()));
        }
        if self.data.dim() < 2 {
            return Err(WdroError::InvalidInput(
                "data rows are (x, y) with at least one feature".into(),
            ));
        }
        if let BaseLoss::Huber { delta } = self.base {
            if !(delta > 0.0) {
                return Err(WdroError::InvalidInput("Huber threshold must be positive".into()));
            }
        }
        if self.mode == PredictionMode::Classification {
            for (i, (z, _)) in self.data.iter().enumerate() {
                let y = z[z.len() - 1];
                if y != 1.0 && y != -1.0 {
                    return Err(WdroError::Data {
                        context: "classification labels".into(),
                        row: i + 1,
                        message: format!("label {y} is not ±1"),
                    });
                }
            }
        }
        Ok(())
    }

    fn features(&self) -> usize {
        self.data.dim() - 1
    }

    /// `(E ℓ, E ℓ'², ∇_θ E ℓ, ∇_θ E ℓ'²)`.
    fn moments(&self, theta: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let d = theta.len();
        let (mut loss, mut sq) = (0.0, 0.0);
        let mut g_loss = vec![0.0; d];
        let mut g_sq = vec![0.0; d];
        for (z, w) in self.data.iter() {
            let (x, y) = split_label(z);
            let arg = composite_arg(self.mode, dot(theta, x), y);
            let dl = self.base.derivative(arg);
            let d2 = self.base.second_derivative(arg);
            // ∂arg/∂θ
            let scale = match self.mode {
                PredictionMode::Regression => 1.0,
                PredictionMode::Classification => y,
            };
            loss += w * self.base.value(arg);
            sq += w * dl * dl;
            for k in 0..d {
                g_loss[k] += w * dl * scale * x[k];
                g_sq[k] += w * 2.0 * dl * d2 * scale * x[k];
            }
        }
        (loss, sq, g_loss, g_sq)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(WdroError::InvalidInput(format!(
            "radius must be nonnegative, got {rho}"
        )))
    }
}

/// `E ℓ + ρ·L_ℓ‖θ‖₂`: the exact 1-Wasserstein robust loss under the product norm.
pub fn solve_linear_p1(problem: &LinearPredictionProblem, rho: f64, max_iter: usize) -> Result<SolveResult> {
    solve_linear_p1_from(problem, rho, &vec![0.0; problem.data.dim().saturating_sub(1)], max_iter)
}

pub(crate) fn solve_linear_p1_from(
    problem: &LinearPredictionProblem,
    rho: f64,
    x0: &[f64],
    max_iter: usize,
) -> Result<SolveResult> {
    problem.validate()?;
    check_rho(rho)?;
    let lip = problem.base.lipschitz();
    let oracle = |th: &[f64]| {
        let (loss, _, mut g, _) = problem.moments(th);
        let n = l2(th);
        if n > 0.0 {
            for (gi, ti) in g.iter_mut().zip(th) {
                *gi += rho * lip * ti / n;
            }
        }
        (loss + rho * lip * n, g)
    };
    let radius = problem.radius;
    let out = projected_subgradient(oracle, |th| project_l2_ball(th, radius), x0, radius, max_iter);
    let (nominal, ..) = problem.moments(&out.x);
    let variation = lip * l2(&out.x);
    Ok(SolveResult {
        robust_objective: out.value,
        nominal_objective: nominal,
        regularizer_used: rho * variation,
        variation_norm: variation,
        theta: out.x,
        u: None,
        iterations: out.iterations,
        converged: out.converged,
        warnings: Vec::new(),
    })
}

/// `E ℓ + ρ‖θ‖₂·√(E ℓ'²)` and its gradient (zero penalty gradient at `θ = 0`).
pub fn linear_p2_objective(problem: &LinearPredictionProblem, theta: &[f64], rho: f64) -> (f64, Vec<f64>) {
    let (loss, sq, mut g, g_sq) = problem.moments(theta);
    let n = l2(theta);
    let s = sq.sqrt();
    if n > 0.0 {
        for k in 0..theta.len() {
            let from_norm = theta[k] / n * s;
            let from_rms = if s > 0.0 { n * g_sq[k] / (2.0 * s) } else { 0.0 };
            g[k] += rho * (from_norm + from_rms);
        }
    }
    (loss + rho * n * s, g)
}

/// Multi-start minimization of the gradient-regularized objective.
///
/// Start 0 is `θ = 0`; the others are uniform in the ball, drawn from `seed`.
pub fn solve_linear_p2(
    problem: &LinearPredictionProblem,
    rho: f64,
    max_iter: usize,
    restarts: usize,
    seed: u64,
) -> Result<SolveResult> {
    problem.validate()?;
    check_rho(rho)?;
    if problem.base.derivative_lipschitz().is_none() {
        return Err(WdroError::InvalidInput(format!(
            "the {} loss has no Lipschitz derivative",
            problem.base.name()
        )));
    }
    let d = problem.features();
    let radius = problem.radius;
    let mut best: Option<(f64, Vec<f64>, usize, bool)> = None;
    let mut total_iter = 0;
    for r in 0..restarts.max(1) {
        let x0 = if r == 0 {
            vec![0.0; d]
        } else {
            let mut rng = rng_for(seed, r as u64);
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale = radius * rng.random::<f64>().powf(1.0 / d as f64) / l2(&v).max(1e-300);
            v.iter_mut().for_each(|x| *x *= scale);
            v
        };
        let out = projected_subgradient(
            |th| linear_p2_objective(problem, th, rho),
            |th| project_l2_ball(th, radius),
            &x0,
            radius,
            max_iter,
        );
        total_iter += out.iterations;
        if best.as_ref().is_none_or(|b| out.value < b.0) {
            best = Some((out.value, out.x, out.iterations, out.converged));
        }
    }
    let (value, theta, _, converged) = best.expect("at least one start");
    let (nominal, sq, ..) = problem.moments(&theta);
    let variation = l2(&theta) * sq.sqrt();
    let mut warnings = Vec::new();
    if sq < 1e-8 {
        warnings.push(format!(
            "mean squared loss derivative {sq:.3e} is near zero at the solution"
        ));
    }
    Ok(SolveResult {
        robust_objective: value,
        nominal_objective: nominal,
        regularizer_used: rho * variation,
        variation_norm: variation,
        theta,
        u: None,
        iterations: total_iter,
        converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> LinearPredictionProblem {
        let atoms = vec![
            vec![2.0, 1.0, 1.0],
            vec![1.5, -0.5, 1.0],
            vec![-1.0, -2.0, -1.0],
            vec![-2.0, 0.5, -1.0],
        ];
        LinearPredictionProblem {
            mode: PredictionMode::Classification,
            base: BaseLoss::Hinge,
            radius: 50.0,
            data: DiscreteDistribution::uniform(atoms).unwrap(),
        }
    }

    #[test]
    fn separable_hinge_reaches_zero() {
        let r = solve_linear_p1(&separable(), 0.0, 10_000).unwrap();
        assert!(r.nominal_objective < 1e-6, "{r:?}");
    }

    #[test]
    fn huge_radius_shrinks_to_zero() {
        let r = solve_linear_p1(&separable(), 1e3, 10_000).unwrap();
        assert!(l2(&r.theta) < 1e-6, "{r:?}");
        assert!((r.robust_objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn p2_gradient_matches_differences() {
        let mut p = separable();
        p.base = BaseLoss::Logistic;
        let th = [0.3, -0.7];
        let (_, g) = linear_p2_objective(&p, &th, 0.4);
        for k in 0..2 {
            let mut a = th;
            let mut b = th;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (linear_p2_objective(&p, &a, 0.4).0 - linear_p2_objective(&p, &b, 0.4).0) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6, "{k}: {fd} vs {}", g[k]);
        }
        let (_, g0) = linear_p2_objective(&p, &[0.0, 0.0], 0.4);
        assert!(g0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn p2_rejects_hinge_and_bad_labels() {
        assert!(solve_linear_p2(&separable(), 0.1, 100, 1, 0).is_err());
        let mut p = separable();
        p.base = BaseLoss::Logistic;
        p.data = DiscreteDistribution::uniform(vec![vec![1.0, 0.5]]).unwrap();
        assert!(matches!(
            solve_linear_p1(&p, 0.1, 100),
            Err(WdroError::Data { row: 1, .. })
        ));
    }
}
