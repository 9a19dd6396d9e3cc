//! One-dimensional searches, norm-ball projections and a projected subgradient method.

use crate::norm::{l2, GroundNorm};

pub(crate) const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[a, b]`.
///
/// Stops when the bracket is narrower than `rel_tol·(1 + |x|)` or after
/// `max_iter` shrinks. Returns `(x, f(x))` for the best point evaluated.
pub fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (b - a).abs() <= rel_tol * (1.0 + x1.abs().max(x2.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes a convex function on the real line: the bracket `[c − w, c + w]`
/// is widened until both ends sit above an interior point, then golden section.
pub fn minimize_convex_line(f: impl Fn(f64) -> f64, center: f64, width: f64) -> (f64, f64) {
    let mut w = width.max(1e-8);
    let fc = f(center);
    for _ in 0..200 {
        let lo = f(center - w);
        let hi = f(center + w);
        if lo >= fc && hi >= fc {
            break;
        }
        w *= 2.0;
    }
    golden_section_min(&f, center - w, center + w, 1e-13, 400)
}

pub fn project_l2_ball(v: &mut [f64], radius: f64) {
    let n = l2(v);
    if n > radius && n > 0.0 {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

pub fn project_linf_ball(v: &mut [f64], radius: f64) {
    v.iter_mut().for_each(|x| *x = x.clamp(-radius, radius));
}

/// Euclidean projection onto the ℓ₁ ball (sort-and-threshold).
pub fn project_l1_ball(v: &mut [f64], radius: f64) {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total <= radius {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (k + 1) as f64;
        if *m > t {
            shift = t;
        }
    }
    v.iter_mut().for_each(|x| *x = x.signum() * (x.abs() - shift).max(0.0));
}

/// Projection onto the ball `{θ : ‖θ‖_* ≤ r}` of the norm dual to `ground`.
pub fn project_dual_ball(ground: GroundNorm, v: &mut [f64], radius: f64) {
    match ground {
        GroundNorm::Euclidean | GroundNorm::ProductXOnly => project_l2_ball(v, radius),
        GroundNorm::OneNorm => project_linf_ball(v, radius),
        GroundNorm::InfNorm => project_l1_ball(v, radius),
    }
}

/// Exact projection onto `{w : Σw = 1, ‖w‖₂ ≤ B}`.
///
/// The hyperplane meets the ball in a ball of radius `√(B² − 1/d)` centered at
/// `1/d·𝟙`, so the projection is hyperplane projection followed by a radial clamp.
pub fn project_budget_ball(v: &mut [f64], radius: f64) -> bool {
    let d = v.len() as f64;
    let r2 = radius * radius - 1.0 / d;
    if r2 < -1e-15 {
        return false;
    }
    let r = r2.max(0.0).sqrt();
    let shift = (v.iter().sum::<f64>() - 1.0) / d;
    let c = 1.0 / d;
    let mut dev: Vec<f64> = v.iter().map(|x| x - shift - c).collect();
    project_l2_ball(&mut dev, r);
    for (x, e) in v.iter_mut().zip(dev) {
        *x = c + e;
    }
    true
}

#[derive(Debug, Clone)]
pub struct SubgradientOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected subgradient descent with best-iterate tracking.
///
/// The first half of the budget uses normalized steps `s₀/√k` with
/// `s₀ = scale/(1 + f(x₀))`; the second half restarts from the best iterate
/// with constant steps halved every 100-step phase. `converged` reports that the final
/// phase step fell below `1e-9·(1 + scale)` or a zero subgradient was met.
pub fn projected_subgradient(
    oracle: impl Fn(&[f64]) -> (f64, Vec<f64>),
    project: impl Fn(&mut [f64]),
    x0: &[f64],
    scale: f64,
    max_iter: usize,
) -> SubgradientOutcome {
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = oracle(&x);
    let mut best = (x.clone(), fx);
    let s0 = scale / (1.0 + fx.abs());
    let first = max_iter / 2;
    let mut it = 0;

    let step = |x: &mut Vec<f64>, g: &[f64], len: f64| -> bool {
        let gn = l2(g);
        if gn == 0.0 || !gn.is_finite() {
            return false;
        }
        for (xi, gi) in x.iter_mut().zip(g) {
            *xi -= len * gi / gn;
        }
        project(x);
        true
    };

    while it < first {
        it += 1;
        if !step(&mut x, &g, s0 / (it as f64).sqrt()) {
            return SubgradientOutcome {
                x: best.0,
                value: best.1,
                iterations: it,
                converged: true,
            };
        }
        (fx, g) = oracle(&x);
        if fx < best.1 {
            best = (x.clone(), fx);
        }
    }

    let phase_len = 100usize;
    let mut alpha = s0 / (first.max(1) as f64).sqrt();
    let target = 1e-9 * (1.0 + scale);
    while it < max_iter && alpha > target {
        x = best.0.clone();
        (fx, g) = oracle(&x);
        for _ in 0..phase_len.min(max_iter - it) {
            it += 1;
            if !step(&mut x, &g, alpha) {
                return SubgradientOutcome {
                    x: best.0,
                    value: best.1,
                    iterations: it,
                    converged: true,
                };
            }
            (fx, g) = oracle(&x);
            if fx < best.1 {
                best = (x.clone(), fx);
            }
        }
        alpha *= 0.5;
    }
    let _ = fx;
    SubgradientOutcome {
        x: best.0,
        value: best.1,
        iterations: it,
        converged: alpha <= target,
    }
}
