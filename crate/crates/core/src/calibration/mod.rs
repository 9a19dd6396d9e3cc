//! Radius-selection rules, residuals and failure-probability budgets.
//!
//! Each rule turns `(n, t)` and a handful of problem constants into a radius
//! `ρ_n` of order `n^{-1/2}`, an additive residual `ε_n`, and a multiplier `m`
//! such that the coverage guarantee fails with probability at most `m·e^{−t}`.
//! Constants carry a provenance label; an estimated constant makes the whole
//! result approximate.

mod rademacher;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};

pub use rademacher::{
    rademacher_bound_g_quadratic, rademacher_bound_linear, rademacher_bound_quadratic, rademacher_mc, FiniteClass,
    LinearBallClass, McEstimate, QuadraticBallClass, SupOracle,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Estimated,
    Assumed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `ρ = √(τt/n)` for a single loss.
    Thm1,
    /// Same radius, union bound over a θ-cover.
    Cor2,
    /// Gradient rule with fourth-moment inflation.
    Cor3,
    /// Local-complexity rule for `p = 1`.
    Cor4,
    /// `Cor4` for `ℓ∘f` with an `L_ℓ`-Lipschitz outer loss.
    Cor5,
    /// Local-complexity rule for `p = 2`, population gradient norm.
    Thm3,
    /// `Thm3` with the inflated radius for the empirical gradient norm.
    Cor6,
    /// `((h∨b)/(h∧b))·√(τt/n)` for the newsvendor loss.
    Newsvendor,
}

/// Everything a rule may need. Unused fields are ignored; missing required
/// fields are reported by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CalibrationInputs {
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    pub n: u64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    pub t: f64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rad_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rad_f: Option<f64>,
    /// Bound on `‖∇f(z)‖_* / ‖‖∇f‖_*‖_{P,2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip_ratio: Option<f64>,
    /// Lipschitz constant of the outer loss in the composition rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2_rms: Option<f64>,
    /// `log N(1/n; Θ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_log: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Provenance per field name; unlisted fields count as analytic.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, Provenance>,
}

fn is_zero_u64(v: &u64) -> bool {
    *v == 0
}

fn is_zero_f64(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub rule: Rule,
    pub rho: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_tilde: Option<f64>,
    /// Number of `e^{−t}` terms in the failure probability (at least 1).
    pub prob_multiplier: f64,
    /// `min(1, prob_multiplier·e^{−t})`.
    pub failure_budget: f64,
    pub applicable: bool,
    pub approximate: bool,
    /// Named pieces of `rho` and `epsilon`.
    pub terms: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

fn check_nt(n: u64, t: f64) -> Result<()> {
    if n == 0 {
        return Err(WdroError::InvalidInput("sample size n must be at least 1".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(WdroError::InvalidInput(format!(
            "confidence exponent t must be positive, got {t}"
        )));
    }
    Ok(())
}

fn nonneg(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(WdroError::InvalidInput(format!(
            "{name} must be finite and nonnegative, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(WdroError::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

/// `max(1, ⌈log₂ x⌉)`.
pub fn log2_multiplier(x: f64) -> f64 {
    if x > 0.0 {
        x.log2().ceil().max(1.0)
    } else {
        1.0
    }
}

/// `√(τt/n)`.
pub fn radius_thm1(n: u64, t: f64, tau: f64) -> f64 {
    (tau * t / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cor3Radius {
    pub rho: f64,
    pub min_n: u64,
}

/// `√(τt/n)(1 + σ√(2t/n))`, valid once `n ≥ 8σ²t`.
pub fn radius_cor3(n: u64, t: f64, tau: f64, sigma: f64) -> Result<Cor3Radius> {
    check_nt(n, t)?;
    nonneg("sigma", sigma)?;
    let need = 8.0 * sigma * sigma * t;
    let min_n = need.ceil() as u64;
    if (n as f64) < need {
        return Err(WdroError::MinSampleSize { n, min_n });
    }
    let nf = n as f64;
    Ok(Cor3Radius {
        rho: radius_thm1(n, t, tau) * (1.0 + sigma * (2.0 * t / nf).sqrt()),
        min_n,
    })
}

/// Residuals of the gradient rule: `(ħρ², (3E[κ] + 2ρ‖κ₂‖)/n)`.
pub fn cor3_residuals(n: u64, rho: f64, hbar: f64, e_kappa: f64, kappa2_rms: f64) -> (f64, f64) {
    (hbar * rho * rho, (3.0 * e_kappa + 2.0 * rho * kappa2_rms) / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cor4Radius {
    pub rho: f64,
    pub epsilon: f64,
    pub prob_multiplier: f64,
}

/// `ρ = 2√(τt/n) + 4√r⋆ + 2/(n√r⋆)`, `ε = 4r⋆ + 2/n`, multiplier `⌈log₂(κ₁√(τtn))⌉`.
pub fn radius_cor4(n: u64, t: f64, tau: f64, r_star: f64, kappa1: f64) -> Result<Cor4Radius> {
    check_nt(n, t)?;
    positive("r_star", r_star)?;
    let nf = n as f64;
    let sr = r_star.sqrt();
    Ok(Cor4Radius {
        rho: 2.0 * radius_thm1(n, t, tau) + 4.0 * sr + 2.0 / (nf * sr),
        epsilon: 4.0 * r_star + 2.0 / nf,
        prob_multiplier: log2_multiplier(kappa1 * (tau * t * nf).sqrt()),
    })
}

/// Composition form: the coefficient multiplying `‖f‖_Lip`, the residual and the multiplier.
pub fn radius_cor5(n: u64, t: f64, tau: f64, r_star: f64, l_ell: f64, kappa1: f64) -> Result<Cor4Radius> {
    check_nt(n, t)?;
    positive("r_star", r_star)?;
    nonneg("l_ell", l_ell)?;
    let nf = n as f64;
    let sr = r_star.sqrt();
    Ok(Cor4Radius {
        rho: 2.0 * (radius_thm1(n, t, tau) * l_ell + 2.0 * l_ell * l_ell * sr + l_ell / (nf * sr)),
        epsilon: 4.0 * l_ell * l_ell * r_star + 2.0 * l_ell / nf,
        prob_multiplier: log2_multiplier(l_ell * kappa1 * (tau * t * nf).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm3Radius {
    pub rho: f64,
    pub epsilon: f64,
    pub rho_tilde: f64,
    pub epsilon_tilde: f64,
    pub prob_multiplier: f64,
    pub prob_multiplier_tilde: f64,
    /// `2·rad_G + L²√(t/2n) < 1/2`.
    pub applicable: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn radius_thm3_cor6(
    n: u64,
    t: f64,
    tau: f64,
    r_star: f64,
    rad_g: f64,
    hbar: f64,
    kappa2: f64,
    lip_ratio: f64,
) -> Result<Thm3Radius> {
    check_nt(n, t)?;
    positive("r_star", r_star)?;
    nonneg("rad_g", rad_g)?;
    nonneg("hbar", hbar)?;
    nonneg("lip_ratio", lip_ratio)?;
    let nf = n as f64;
    let sr = r_star.sqrt();
    let rho = 2.0 * radius_thm1(n, t, tau) * (1.0 + 2.0 * rad_g)
        + 4.0 * sr
        + (2.0 + hbar * tau * t + 2.0 * rad_g) / (nf * sr);
    let epsilon = 4.0 * r_star + 2.0 / nf + (hbar * tau * t + 2.0 * rad_g) / nf;
    let inflation = 2.0 * rad_g + lip_ratio * lip_ratio * (t / (2.0 * nf)).sqrt();
    let rho_tilde = rho * (1.0 + inflation);
    let m = log2_multiplier(kappa2 * (tau * nf * t).sqrt());
    Ok(Thm3Radius {
        rho,
        epsilon,
        rho_tilde,
        epsilon_tilde: epsilon + hbar * rho_tilde * rho_tilde,
        prob_multiplier: m,
        prob_multiplier_tilde: m + 1.0,
        applicable: inflation < 0.5,
    })
}

/// `((h∨b)/(h∧b))·√(τt/n)`.
pub fn radius_newsvendor(n: u64, t: f64, tau: f64, h: f64, b: f64) -> Result<f64> {
    check_nt(n, t)?;
    positive("h", h)?;
    positive("b", b)?;
    Ok(h.max(b) / h.min(b) * radius_thm1(n, t, tau))
}

/// `d·log(B(1 + 2/ε))`.
pub fn covering_log_ball(radius: f64, d: usize, eps: f64) -> Result<f64> {
    positive("B", radius)?;
    positive("ε", eps)?;
    if d == 0 {
        return Err(WdroError::InvalidInput("dimension must be at least 1".into()));
    }
    Ok(d as f64 * (radius * (1.0 + 2.0 / eps)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    /// Set when both coefficients vanish and the root is the trivial 0.
    pub degenerate: bool,
}

/// Largest root of `B·r^{1/q} + A = r` (`q > 1`).
pub fn fixed_point_subroot(a: f64, b: f64, q: f64) -> Result<FixedPoint> {
    nonneg("A", a)?;
    nonneg("B", b)?;
    if !(q > 1.0) || !q.is_finite() {
        return Err(WdroError::InvalidInput(format!("q must exceed 1, got {q}")));
    }
    if a == 0.0 && b == 0.0 {
        return Ok(FixedPoint {
            value: 0.0,
            degenerate: true,
        });
    }
    if q == 2.0 {
        let s = (b + (b * b + 4.0 * a).sqrt()) / 2.0;
        return Ok(FixedPoint {
            value: s * s,
            degenerate: false,
        });
    }
    let g = |r: f64| b * r.powf(1.0 / q) + a - r;
    let (mut lo, mut hi) = (a, lemma10_bound(a, b, q) + 1.0);
    // g(lo) ≥ 0 > g(hi); the largest root is the last sign change
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FixedPoint {
        value: 0.5 * (lo + hi),
        degenerate: false,
    })
}

/// `(q/(q−1))A + B^{q/(q−1)}`, an upper bound on [`fixed_point_subroot`].
pub fn lemma10_bound(a: f64, b: f64, q: f64) -> f64 {
    let p = q / (q - 1.0);
    p * a + b.powf(p)
}

fn need(v: Option<f64>, name: &str, rule: Rule) -> Result<f64> {
    v.ok_or_else(|| WdroError::InvalidInput(format!("rule {rule:?} requires `{name}`")))
}

impl CalibrationInputs {
    fn validate(&self) -> Result<()> {
        check_nt(self.n, self.t)?;
        positive("tau", self.tau)?;
        let opt = [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("hbar", self.hbar),
            ("sigma", self.sigma),
            ("r_star", self.r_star),
            ("rad_g", self.rad_g),
            ("rad_f", self.rad_f),
            ("lip_ratio", self.lip_ratio),
            ("l_ell", self.l_ell),
            ("e_kappa", self.e_kappa),
            ("kappa2_rms", self.kappa2_rms),
            ("cover_log", self.cover_log),
            ("h", self.h),
            ("b", self.b),
        ];
        for (name, v) in opt {
            if let Some(v) = v {
                nonneg(name, v)?;
            }
        }
        Ok(())
    }
}

/// Applies `rule` to `inputs`, materializing every term.
pub fn calibrate(rule: Rule, inputs: &CalibrationInputs) -> Result<CalibrationResult> {
    inputs.validate()?;
    let CalibrationInputs { n, t, tau, .. } = *inputs;
    let nf = n as f64;
    let mut terms = BTreeMap::new();
    let mut notes = Vec::new();
    let mut multiplier = 1.0;
    let mut rho_tilde = None;
    let mut epsilon_tilde = None;
    let mut applicable = true;

    let kappa_or_default = |v: Option<f64>, name: &str, notes: &mut Vec<String>| -> f64 {
        v.unwrap_or_else(|| {
            notes.push(format!(
                "`{name}` not supplied: assumed 1 for the probability multiplier"
            ));
            1.0
        })
    };
    let cover = |notes: &mut Vec<String>| -> f64 {
        match inputs.cover_log {
            Some(c) => {
                notes.push("exp(−Cn) envelope term is unquantified and not included in failure_budget".into());
                c.exp().max(1.0)
            }
            None => {
                notes.push("`cover_log` not supplied: single-loss budget reported".into());
                1.0
            }
        }
    };

    let (rho, epsilon) = match rule {
        Rule::Thm1 => {
            let rho = radius_thm1(n, t, tau);
            terms.insert("sqrt_tau_t_over_n".into(), rho);
            (rho, 0.0)
        }
        Rule::Cor2 => {
            let rho = radius_thm1(n, t, tau);
            let e_kappa = inputs.e_kappa.unwrap_or(0.0);
            terms.insert("sqrt_tau_t_over_n".into(), rho);
            terms.insert("envelope_residual".into(), 3.0 * e_kappa / nf);
            multiplier = cover(&mut notes);
            (rho, 3.0 * e_kappa / nf)
        }
        Rule::Cor3 => {
            let sigma = need(inputs.sigma, "sigma", rule)?;
            let r = radius_cor3(n, t, tau, sigma)?;
            let (curv, env) = cor3_residuals(
                n,
                r.rho,
                inputs.hbar.unwrap_or(0.0),
                inputs.e_kappa.unwrap_or(0.0),
                inputs.kappa2_rms.unwrap_or(0.0),
            );
            terms.insert("sqrt_tau_t_over_n".into(), radius_thm1(n, t, tau));
            terms.insert("sigma_inflation".into(), sigma * (2.0 * t / nf).sqrt());
            terms.insert("curvature_residual".into(), curv);
            terms.insert("envelope_residual".into(), env);
            terms.insert("min_n".into(), r.min_n as f64);
            multiplier = 2.0 * cover(&mut notes);
            (r.rho, curv + env)
        }
        Rule::Cor4 => {
            let r_star = need(inputs.r_star, "r_star", rule)?;
            let kappa1 = kappa_or_default(inputs.kappa1, "kappa1", &mut notes);
            let r = radius_cor4(n, t, tau, r_star, kappa1)?;
            terms.insert("deviation".into(), 2.0 * radius_thm1(n, t, tau));
            terms.insert("localization".into(), 4.0 * r_star.sqrt());
            terms.insert("peeling".into(), 2.0 / (nf * r_star.sqrt()));
            multiplier = r.prob_multiplier;
            (r.rho, r.epsilon)
        }
        Rule::Cor5 => {
            let r_star = need(inputs.r_star, "r_star", rule)?;
            let l_ell = need(inputs.l_ell, "l_ell", rule)?;
            let kappa1 = kappa_or_default(inputs.kappa1, "kappa1", &mut notes);
            let r = radius_cor5(n, t, tau, r_star, l_ell, kappa1)?;
            terms.insert("deviation".into(), 2.0 * radius_thm1(n, t, tau) * l_ell);
            terms.insert("localization".into(), 4.0 * l_ell * l_ell * r_star.sqrt());
            terms.insert("peeling".into(), 2.0 * l_ell / (nf * r_star.sqrt()));
            multiplier = r.prob_multiplier;
            (r.rho, r.epsilon)
        }
        Rule::Thm3 | Rule::Cor6 => {
            let r_star = need(inputs.r_star, "r_star", rule)?;
            let rad_g = need(inputs.rad_g, "rad_g", rule)?;
            let hbar = inputs.hbar.unwrap_or(0.0);
            let kappa2 = kappa_or_default(inputs.kappa2, "kappa2", &mut notes);
            let lip_ratio = if rule == Rule::Cor6 {
                need(inputs.lip_ratio, "lip_ratio", rule)?
            } else {
                inputs.lip_ratio.unwrap_or(0.0)
            };
            let r = radius_thm3_cor6(n, t, tau, r_star, rad_g, hbar, kappa2, lip_ratio)?;
            terms.insert("deviation".into(), 2.0 * radius_thm1(n, t, tau) * (1.0 + 2.0 * rad_g));
            terms.insert("localization".into(), 4.0 * r_star.sqrt());
            terms.insert(
                "peeling".into(),
                (2.0 + hbar * tau * t + 2.0 * rad_g) / (nf * r_star.sqrt()),
            );
            notes.push("rad_g is the full-class complexity (conservative)".into());
            if rule == Rule::Cor6 {
                rho_tilde = Some(r.rho_tilde);
                epsilon_tilde = Some(r.epsilon_tilde);
                applicable = r.applicable;
                multiplier = r.prob_multiplier_tilde;
                if !r.applicable {
                    notes.push("2·rad_G + L²√(t/2n) ≥ 1/2: inflated radius carries no guarantee".into());
                }
            } else {
                multiplier = r.prob_multiplier;
            }
            (r.rho, r.epsilon)
        }
        Rule::Newsvendor => {
            let h = need(inputs.h, "h", rule)?;
            let b = need(inputs.b, "b", rule)?;
            let rho = radius_newsvendor(n, t, tau, h, b)?;
            terms.insert("sqrt_tau_t_over_n".into(), radius_thm1(n, t, tau));
            terms.insert("cost_ratio".into(), h.max(b) / h.min(b));
            let e_kappa = inputs.e_kappa.unwrap_or(0.0);
            terms.insert("envelope_residual".into(), 3.0 * e_kappa / nf);
            multiplier = cover(&mut notes);
            (rho, 3.0 * e_kappa / nf)
        }
    };
    let approximate = inputs.provenance.values().any(|p| *p == Provenance::Estimated);
    Ok(CalibrationResult {
        rule,
        rho,
        epsilon,
        rho_tilde,
        epsilon_tilde,
        prob_multiplier: multiplier,
        failure_budget: (multiplier * (-t).exp()).min(1.0),
        applicable,
        approximate,
        terms,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thm1_arithmetic() {
        assert!((radius_thm1(100, 1.0, 1.0) - 0.1).abs() < 1e-15);
        assert_eq!(radius_thm1(4, 2.0, 2.0), 1.0);
        assert_eq!(radius_thm1(10, 0.0, 1.0), 0.0);
    }

    #[test]
    fn cor3_arithmetic() {
        let r = radius_cor3(100, 1.0, 1.0, 1.0).unwrap();
        assert!((r.rho - 0.1 * (1.0 + 0.02f64.sqrt())).abs() < 1e-15);
        assert_eq!(radius_cor3(100, 1.0, 1.0, 0.0).unwrap().rho, radius_thm1(100, 1.0, 1.0));
        match radius_cor3(7, 1.0, 1.0, 1.0) {
            Err(WdroError::MinSampleSize { n: 7, min_n: 8 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cor4_arithmetic() {
        let r = radius_cor4(100, 1.0, 1.0, 0.01, 1.0).unwrap();
        assert!((r.rho - 0.8).abs() <= 2.0 * f64::EPSILON);
        assert!((r.epsilon - 0.06).abs() < 1e-15);
        assert_eq!(r.prob_multiplier, 4.0);
        assert!(radius_cor4(100, 1.0, 1.0, 0.0, 1.0).is_err());
        let big = radius_cor4(100, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(4.0 > 2.0 * 0.1 && big.rho > 4.0);
    }

    #[test]
    fn thm3_worked_example() {
        let r = radius_thm3_cor6(100, 1.0, 1.0, 0.01, 0.05, 0.0, 1.0, 1.0).unwrap();
        // independent path: term by term
        let rho = 0.2 * (1.0 + 0.1) + 4.0 * 0.1 + (2.0 + 0.0 + 0.1) / (100.0 * 0.1);
        assert!((r.rho - rho).abs() < 1e-14);
        assert!((r.rho - 0.83).abs() < 1e-14);
        assert!((r.epsilon - 0.061).abs() < 1e-14);
        let infl = 0.1 + (1.0f64 / 200.0).sqrt();
        assert!((r.rho_tilde - 0.83 * (1.0 + infl)).abs() < 1e-14);
        assert!(r.applicable);
        let flat = radius_thm3_cor6(100, 1.0, 1.0, 0.01, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(flat.rho, flat.rho_tilde);
        let bad = radius_thm3_cor6(2, 1.0, 1.0, 0.01, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(!bad.applicable);
    }

    #[test]
    fn fixed_points() {
        assert!((fixed_point_subroot(3.0, 0.0, 2.0).unwrap().value - 3.0).abs() < 1e-14);
        assert_eq!(fixed_point_subroot(0.0, 2.0, 2.0).unwrap().value, 4.0);
        let r = fixed_point_subroot(1.0, 2.0, 2.0).unwrap().value;
        assert!((r - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!(r <= lemma10_bound(1.0, 2.0, 2.0));
        assert_eq!(lemma10_bound(1.0, 2.0, 2.0), 6.0);
        assert!(fixed_point_subroot(0.0, 0.0, 2.0).unwrap().degenerate);
        let r3 = fixed_point_subroot(1.0, 2.0, 3.0).unwrap().value;
        assert!((2.0 * r3.powf(1.0 / 3.0) + 1.0 - r3).abs() < 1e-10);
    }

    #[test]
    fn covering_numbers() {
        assert!((covering_log_ball(1.0, 1, 2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((covering_log_ball(2.0, 3, 1.0).unwrap() - 3.0 * 6f64.ln()).abs() < 1e-14);
        assert!((covering_log_ball(1.0, 2, 0.1).unwrap() - 2.0 * 21f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn calibrate_reports_terms() {
        let inputs = CalibrationInputs {
            n: 100,
            t: 1.0,
            tau: 1.0,
            r_star: Some(0.01),
            ..Default::default()
        };
        let r = calibrate(Rule::Cor4, &inputs).unwrap();
        assert!((r.rho - 0.8).abs() <= 2.0 * f64::EPSILON);
        assert_eq!(r.terms.len(), 3);
        assert!(!r.approximate);
        let mut est = inputs.clone();
        est.provenance.insert("r_star".into(), Provenance::Estimated);
        assert!(calibrate(Rule::Cor4, &est).unwrap().approximate);
        assert!(calibrate(Rule::Cor3, &inputs).is_err());
        let nv = CalibrationInputs {
            h: Some(2.0),
            b: Some(1.0),
            ..inputs
        };
        assert!((calibrate(Rule::Newsvendor, &nv).unwrap().rho - 0.2).abs() < 1e-15);
    }
}
