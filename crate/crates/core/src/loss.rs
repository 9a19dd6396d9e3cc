//! Parametric loss families and the regularity metadata the guarantees depend on.
//!
//! Every family reports, relative to a [`NormSpec`]:
//!
//! * its Lipschitz norm `‖f‖_Lip` and whether it is attained at infinity,
//! * the Lipschitz constant `ħ` of its gradient, when smooth,
//! * growth constants `(M, L)` with `f(z) ≤ M + L‖z‖^p`,
//! * the tail slope `λ̲ = limsup f(z)/‖z‖^p`, the smallest dual multiplier for
//!   which the inner supremum of the dual can be finite.
//!
//! A loss carries a `scale` so that `−f` (needed by the concentration bounds)
//! is the same family with `scale = −1`.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Result, WdroError};
use crate::norm::{dot, l2, GroundNorm, NormSpec};

/// One-dimensional margin/residual loss `ℓ` composed with a linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseLoss {
    /// `(1 − t)₊`
    Hinge,
    /// `log(1 + e^{−t})`
    Logistic,
    /// Huber loss with threshold `delta`; 1-Lipschitz with `1/delta`-Lipschitz derivative.
    Huber { delta: f64 },
}

impl BaseLoss {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            BaseLoss::Hinge => (1.0 - t).max(0.0),
            BaseLoss::Logistic => {
                if t > 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                }
            }
            BaseLoss::Huber { delta } => {
                if t.abs() <= delta {
                    t * t / (2.0 * delta)
                } else {
                    t.abs() - delta / 2.0
                }
            }
        }
    }

    /// Derivative; at the hinge kink the minimal-norm subgradient 0 is returned.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            BaseLoss::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BaseLoss::Logistic => -1.0 / (1.0 + t.exp()),
            BaseLoss::Huber { delta } => (t / delta).clamp(-1.0, 1.0),
        }
    }

    /// Second derivative where it exists; zero on the flat parts.
    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            BaseLoss::Hinge => 0.0,
            BaseLoss::Logistic => {
                let e = (-t.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            BaseLoss::Huber { delta } => {
                if t.abs() <= delta {
                    1.0 / delta
                } else {
                    0.0
                }
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Lipschitz constant of the derivative, if it exists.
    pub fn derivative_lipschitz(&self) -> Option<f64> {
        match *self {
            BaseLoss::Hinge => None,
            BaseLoss::Logistic => Some(0.25),
            BaseLoss::Huber { delta } => Some(1.0 / delta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseLoss::Hinge => "hinge",
            BaseLoss::Logistic => "logistic",
            BaseLoss::Huber { .. } => "huber",
        }
    }
}

/// How a linear score `u = θᵀx` meets the label `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// `ℓ(u − y)`
    Regression,
    /// `ℓ(y·u)` with `y ∈ {±1}`
    Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossFamily {
    /// `cᵀz + b`
    Affine { coef: Vec<f64>, intercept: f64 },
    /// `h(θᵀx − y)₊ + b(y − θᵀx)₊` on `z = (x, y)`.
    Newsvendor { theta: Vec<f64>, h: f64, b: f64 },
    /// `ℓ(θᵀx − y)` or `ℓ(y·θᵀx)` on `z = (x, y)`.
    LinearComposite {
        theta: Vec<f64>,
        base: BaseLoss,
        mode: PredictionMode,
    },
    /// `(θᵀz)² + shift`.
    QuadraticPortfolio { theta: Vec<f64>, shift: f64 },
    /// Values tabulated on finitely many points; only usable on a matching finite grid.
    CustomDiscrete {
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        lip_norm: Option<f64>,
        lip_estimated: bool,
    },
}

/// A loss `z ↦ scale · f_family(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoss", into = "RawLoss")]
pub struct LossModel {
    pub family: LossFamily,
    pub scale: f64,
}

/// Upper estimate of a Lipschitz constant from samples. Always a lower bound
/// of the true constant; guarantees built on it are approximate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub lower_bound: bool,
}

/// θ-space description used by covering-number calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFamilyMeta {
    /// Radius `B` of the parameter ball.
    pub theta_radius: f64,
    /// `E[κ]` for the envelope `|f_θ̃(z) − f_θ(z)| ≤ κ(z)‖θ̃ − θ‖`.
    pub kappa_mean: f64,
    /// `‖κ₂‖_{P,2}` for the gradient envelope.
    #[serde(default)]
    pub kappa2_rms: f64,
    pub dimension: usize,
}

impl LossFamilyMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_radius > 0.0) || self.dimension == 0 || self.kappa_mean < 0.0 || self.kappa2_rms < 0.0 {
            return Err(WdroError::InvalidInput(
                "family metadata needs B > 0, d ≥ 1 and nonnegative envelopes".into(),
            ));
        }
        Ok(())
    }
}

fn magnitude_dual(norm: &NormSpec, v: &[f64]) -> f64 {
    match norm.ground {
        GroundNorm::ProductXOnly => l2(v),
        _ => norm.dual_norm(v),
    }
}

impl LossModel {
    pub fn new(family: LossFamily) -> Self {
        LossModel { family, scale: 1.0 }
    }

    pub fn linear(coef: Vec<f64>, intercept: f64) -> Self {
        Self::new(LossFamily::Affine { coef, intercept })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::linear(vec![0.0; dim], c)
    }

    pub fn newsvendor(theta: Vec<f64>, h: f64, b: f64) -> Self {
        Self::new(LossFamily::Newsvendor { theta, h, b })
    }

    pub fn linear_composite(theta: Vec<f64>, base: BaseLoss, mode: PredictionMode) -> Self {
        Self::new(LossFamily::LinearComposite { theta, base, mode })
    }

    pub fn quadratic(theta: Vec<f64>, shift: f64) -> Self {
        Self::new(LossFamily::QuadraticPortfolio { theta, shift })
    }

    pub fn custom_discrete(points: Vec<Vec<f64>>, values: Vec<f64>, lip_norm: Option<f64>) -> Result<Self> {
        if points.len() != values.len() || points.is_empty() {
            return Err(WdroError::InvalidInput("custom loss needs one value per point".into()));
        }
        Ok(Self::new(LossFamily::CustomDiscrete {
            points,
            values,
            lip_norm,
            lip_estimated: false,
        }))
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// `−f`.
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.scale = -m.scale;
        m
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            LossFamily::Affine { .. } => "linear",
            LossFamily::Newsvendor { .. } => "newsvendor",
            LossFamily::LinearComposite { .. } => "linear_composite",
            LossFamily::QuadraticPortfolio { .. } => "quadratic_portfolio",
            LossFamily::CustomDiscrete { .. } => "custom_discrete",
        }
    }

    /// Point dimension the loss expects, if fixed by its parameters.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.family {
            LossFamily::Affine { coef, .. } => Some(coef.len()),
            LossFamily::Newsvendor { theta, .. } | LossFamily::LinearComposite { theta, .. } => Some(theta.len() + 1),
            LossFamily::QuadraticPortfolio { theta, .. } => Some(theta.len()),
            LossFamily::CustomDiscrete { points, .. } => points.first().map(Vec::len),
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.input_dim() {
            Some(e) if e != d => Err(WdroError::DimensionMismatch { expected: e, got: d }),
            _ => Ok(()),
        }
    }

    fn unscaled(&self, z: &[f64]) -> f64 {
        match &self.family {
            LossFamily::Affine { coef, intercept } => dot(coef, z) + intercept,
            LossFamily::Newsvendor { theta, h, b } => {
                let (x, y) = split_label(z);
                let u = dot(theta, x) - y;
                h * u.max(0.0) + b * (-u).max(0.0)
            }
            LossFamily::LinearComposite { theta, base, mode } => {
                let (x, y) = split_label(z);
                base.value(composite_arg(*mode, dot(theta, x), y))
            }
            LossFamily::QuadraticPortfolio { theta, shift } => {
                let a = dot(theta, z);
                a * a + shift
            }
            LossFamily::CustomDiscrete { points, values, .. } => lookup(points, values, z),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.scale * self.unscaled(z)
    }

    /// Gradient in full `z` coordinates, when the family is (a.e.) differentiable.
    pub fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        let s = self.scale;
        match &self.family {
            LossFamily::Affine { coef, .. } => Some(coef.iter().map(|c| s * c).collect()),
            LossFamily::Newsvendor { theta, h, b } => {
                let (x, y) = split_label(z);
                let u = dot(theta, x) - y;
                let slope = if u > 0.0 {
                    *h
                } else if u < 0.0 {
                    -*b
                } else {
                    0.0
                };
                let mut g: Vec<f64> = theta.iter().map(|t| s * slope * t).collect();
                g.push(-s * slope);
                Some(g)
            }
            LossFamily::LinearComposite { theta, base, mode } => {
                let (x, y) = split_label(z);
                let u = dot(theta, x);
                let d = base.derivative(composite_arg(*mode, u, y));
                let (dx, dy) = match mode {
                    PredictionMode::Regression => (d, -d),
                    PredictionMode::Classification => (d * y, d * u),
                };
                let mut g: Vec<f64> = theta.iter().map(|t| s * dx * t).collect();
                g.push(s * dy);
                Some(g)
            }
            LossFamily::QuadraticPortfolio { theta, .. } => {
                let a = dot(theta, z);
                Some(theta.iter().map(|t| 2.0 * s * a * t).collect())
            }
            LossFamily::CustomDiscrete { .. } => None,
        }
    }

    /// `‖f‖_Lip` under the ground norm, when finite and known.
    pub fn lip_norm(&self, norm: &NormSpec) -> Option<f64> {
        let s = self.scale.abs();
        match &self.family {
            LossFamily::Affine { coef, .. } => Some(s * norm.dual_norm(coef)),
            LossFamily::Newsvendor { theta, h, b } => Some(s * h.max(*b) * norm.dual_norm(&lift(theta))),
            LossFamily::LinearComposite { theta, base, mode } => match (mode, norm.ground) {
                (_, GroundNorm::ProductXOnly) => Some(s * base.lipschitz() * l2(theta)),
                (PredictionMode::Regression, _) => Some(s * base.lipschitz() * norm.dual_norm(&lift(theta))),
                (PredictionMode::Classification, _) => None,
            },
            LossFamily::QuadraticPortfolio { theta, .. } => {
                if norm.dual_norm(theta) == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            LossFamily::CustomDiscrete { lip_norm, .. } => lip_norm.map(|l| s * l),
        }
    }

    /// Whether `‖f‖_Lip` is attained along rays to infinity on an unbounded domain.
    pub fn lip_attained_at_infinity(&self) -> bool {
        match &self.family {
            LossFamily::Affine { .. } => true,
            LossFamily::Newsvendor { .. } | LossFamily::LinearComposite { .. } => self.scale >= 0.0,
            LossFamily::QuadraticPortfolio { .. } | LossFamily::CustomDiscrete { .. } => false,
        }
    }

    /// Lipschitz constant `ħ` of the gradient.
    pub fn grad_lip(&self, norm: &NormSpec) -> Option<f64> {
        let s = self.scale.abs();
        match &self.family {
            LossFamily::Affine { .. } => Some(0.0),
            LossFamily::Newsvendor { theta, .. } => {
                if norm.dual_norm(&lift(theta)) == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            LossFamily::LinearComposite { theta, base, mode } => {
                let hb = base.derivative_lipschitz()?;
                match (mode, norm.ground) {
                    (_, GroundNorm::ProductXOnly) => Some(s * hb * l2(theta).powi(2)),
                    (PredictionMode::Regression, _) => Some(s * hb * norm.dual_norm(&lift(theta)).powi(2)),
                    (PredictionMode::Classification, _) => None,
                }
            }
            LossFamily::QuadraticPortfolio { theta, .. } => Some(2.0 * s * norm.dual_norm(theta).powi(2)),
            LossFamily::CustomDiscrete { .. } => None,
        }
    }

    /// Growth constants `(M, L)` with `f(z) ≤ M + L·‖z‖^p`.
    pub fn growth(&self, norm: &NormSpec) -> Option<(f64, f64)> {
        let s = self.scale;
        let quadratic_order = norm.p >= 2.0;
        let linear = |m: f64, k: f64| -> (f64, f64) {
            if quadratic_order {
                (m + k * k / 4.0, if k > 0.0 { 1.0 } else { 0.0 })
            } else {
                (m, k)
            }
        };
        match &self.family {
            LossFamily::Affine { coef, intercept } => {
                Some(linear((s * intercept).abs(), s.abs() * magnitude_dual(norm, coef)))
            }
            LossFamily::Newsvendor { theta, h, b } => {
                if s <= 0.0 {
                    return Some((0.0, 0.0));
                }
                Some(linear(0.0, s * h.max(*b) * magnitude_dual(norm, &lift(theta))))
            }
            LossFamily::LinearComposite { theta, base, mode } => {
                if s <= 0.0 {
                    return Some((0.0, 0.0));
                }
                let k = match mode {
                    PredictionMode::Regression => magnitude_dual(norm, &lift(theta)),
                    PredictionMode::Classification => l2(theta),
                };
                Some(linear(s * base.value(0.0), s * base.lipschitz() * k))
            }
            LossFamily::QuadraticPortfolio { theta, shift } => {
                let m = (s * shift).max(0.0);
                let k = magnitude_dual(norm, theta);
                if s <= 0.0 || k == 0.0 {
                    Some((m, 0.0))
                } else if quadratic_order {
                    Some((m, s * k * k))
                } else {
                    None
                }
            }
            LossFamily::CustomDiscrete { values, .. } => {
                let m = values.iter().fold(0.0f64, |acc, v| acc.max(s * v));
                Some((m, 0.0))
            }
        }
    }

    /// `λ̲`: below it the inner supremum of the dual is infinite.
    pub fn tail_slope(&self, norm: &NormSpec, domain: &DomainSpec) -> f64 {
        if domain.is_bounded() {
            return 0.0;
        }
        let s = self.scale;
        let p1 = norm.p == 1.0;
        match &self.family {
            LossFamily::Affine { .. } => {
                if p1 {
                    self.lip_norm(norm).unwrap_or(f64::INFINITY)
                } else {
                    0.0
                }
            }
            LossFamily::Newsvendor { .. } | LossFamily::LinearComposite { .. } => {
                if p1 && s > 0.0 {
                    self.lip_norm(norm).unwrap_or(f64::INFINITY)
                } else {
                    0.0
                }
            }
            LossFamily::QuadraticPortfolio { theta, .. } => {
                let k = norm.dual_norm(theta);
                if s <= 0.0 || k == 0.0 {
                    0.0
                } else if norm.p >= 2.0 {
                    s * k * k
                } else {
                    f64::INFINITY
                }
            }
            LossFamily::CustomDiscrete { .. } => 0.0,
        }
    }
}

/// `(θ, −1)`.
pub(crate) fn lift(theta: &[f64]) -> Vec<f64> {
    let mut g = theta.to_vec();
    g.push(-1.0);
    g
}

pub(crate) fn split_label(z: &[f64]) -> (&[f64], f64) {
    let (x, y) = z.split_at(z.len() - 1);
    (x, y[0])
}

pub(crate) fn composite_arg(mode: PredictionMode, u: f64, y: f64) -> f64 {
    match mode {
        PredictionMode::Regression => u - y,
        PredictionMode::Classification => y * u,
    }
}

fn lookup(points: &[Vec<f64>], values: &[f64], z: &[f64]) -> f64 {
    points
        .iter()
        .position(|p| p.len() == z.len() && p.iter().zip(z).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())))
        .map(|i| values[i])
        .unwrap_or(f64::NAN)
}

/// Estimates `‖f‖_Lip` from a sample of points: the largest dual gradient norm when
/// a gradient exists, otherwise the largest pairwise difference quotient.
pub fn estimate_lipschitz(f: &LossModel, samples: &[Vec<f64>], norm: &NormSpec) -> LipschitzEstimate {
    let grad_est = samples
        .iter()
        .filter_map(|z| f.gradient(z))
        .map(|g| norm.dual_norm(&g))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let value = grad_est.unwrap_or_else(|| {
        let mut best = 0.0f64;
        for (i, a) in samples.iter().enumerate() {
            for b in &samples[i + 1..] {
                let d = norm.distance_unchecked(a, b);
                if d > 0.0 && d.is_finite() {
                    best = best.max((f.value(a) - f.value(b)).abs() / d);
                }
            }
        }
        best
    });
    LipschitzEstimate {
        value,
        lower_bound: true,
    }
}

// JSON shape: {"family": ..., "theta": [...], "constants": {...}, "scale": 1}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FamilyKind {
    Linear,
    Newsvendor,
    LinearComposite,
    QuadraticPortfolio,
    CustomDiscrete,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<BaseLoss>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<PredictionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lip_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lip_estimated: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    family: FamilyKind,
    #[serde(default)]
    theta: Vec<f64>,
    #[serde(default)]
    constants: RawConstants,
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn required<T>(v: Option<T>, name: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| WdroError::InvalidInput(format!("{family} loss requires constant `{name}`")))
}

impl TryFrom<RawLoss> for LossModel {
    type Error = WdroError;

    fn try_from(raw: RawLoss) -> Result<Self> {
        let c = raw.constants;
        let family = match raw.family {
            FamilyKind::Linear => LossFamily::Affine {
                coef: raw.theta,
                intercept: c.intercept.unwrap_or(0.0),
            },
            FamilyKind::Newsvendor => {
                let h = required(c.h, "h", "newsvendor")?;
                let b = required(c.b, "b", "newsvendor")?;
                if !(h > 0.0 && b > 0.0) {
                    return Err(WdroError::InvalidInput("newsvendor costs must be positive".into()));
                }
                LossFamily::Newsvendor { theta: raw.theta, h, b }
            }
            FamilyKind::LinearComposite => LossFamily::LinearComposite {
                theta: raw.theta,
                base: required(c.base, "base", "linear_composite")?,
                mode: required(c.mode, "mode", "linear_composite")?,
            },
            FamilyKind::QuadraticPortfolio => LossFamily::QuadraticPortfolio {
                theta: raw.theta,
                shift: c.shift.unwrap_or(0.0),
            },
            FamilyKind::CustomDiscrete => {
                let points = required(c.points, "points", "custom_discrete")?;
                let values = required(c.values, "values", "custom_discrete")?;
                if points.len() != values.len() || points.is_empty() {
                    return Err(WdroError::InvalidInput("custom loss needs one value per point".into()));
                }
                LossFamily::CustomDiscrete {
                    points,
                    values,
                    lip_norm: c.lip_norm,
                    lip_estimated: c.lip_estimated.unwrap_or(false),
                }
            }
        };
        if !raw.scale.is_finite() {
            return Err(WdroError::InvalidInput("loss scale must be finite".into()));
        }
        Ok(LossModel {
            family,
            scale: raw.scale,
        })
    }
}

impl From<LossModel> for RawLoss {
    fn from(m: LossModel) -> Self {
        let mut c = RawConstants::default();
        let (family, theta) = match m.family {
            LossFamily::Affine { coef, intercept } => {
                c.intercept = Some(intercept);
                (FamilyKind::Linear, coef)
            }
            LossFamily::Newsvendor { theta, h, b } => {
                c.h = Some(h);
                c.b = Some(b);
                (FamilyKind::Newsvendor, theta)
            }
            LossFamily::LinearComposite { theta, base, mode } => {
                c.base = Some(base);
                c.mode = Some(mode);
                (FamilyKind::LinearComposite, theta)
            }
            LossFamily::QuadraticPortfolio { theta, shift } => {
                c.shift = Some(shift);
                (FamilyKind::QuadraticPortfolio, theta)
            }
            LossFamily::CustomDiscrete {
                points,
                values,
                lip_norm,
                lip_estimated,
            } => {
                c.points = Some(points);
                c.values = Some(values);
                c.lip_norm = lip_norm;
                c.lip_estimated = Some(lip_estimated);
                (FamilyKind::CustomDiscrete, Vec::new())
            }
        };
        RawLoss {
            family,
            theta,
            constants: c,
            scale: m.scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newsvendor_values_and_lip() {
        let f = LossModel::newsvendor(vec![1.0], 2.0, 1.0);
        assert_eq!(f.value(&[3.0, 1.0]), 4.0);
        assert_eq!(f.value(&[1.0, 3.0]), 2.0);
        let lip = f.lip_norm(&NormSpec::euclidean(1.0)).unwrap();
        assert!((lip - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.gradient(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn base_losses() {
        assert_eq!(BaseLoss::Hinge.value(0.0), 1.0);
        assert_eq!(BaseLoss::Hinge.derivative(1.0), 0.0);
        assert!((BaseLoss::Logistic.value(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(BaseLoss::Logistic.derivative(0.0), -0.5);
        assert!((BaseLoss::Logistic.value(-800.0) - 800.0).abs() < 1e-9);
        assert_eq!(BaseLoss::Huber { delta: 0.5 }.value(2.0), 1.75);
    }

    #[test]
    fn negation_flips_sign_only() {
        let f = LossModel::quadratic(vec![1.0, 2.0], 0.5);
        let g = f.negated();
        assert_eq!(g.value(&[1.0, 1.0]), -f.value(&[1.0, 1.0]));
        let n = NormSpec::euclidean(2.0);
        assert_eq!(f.grad_lip(&n), g.grad_lip(&n));
        assert_eq!(g.tail_slope(&n, &DomainSpec::Unbounded), 0.0);
        assert!((f.tail_slope(&n, &DomainSpec::Unbounded) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn json_shape() {
        let f: LossModel =
            serde_json::from_str(r#"{"family": "newsvendor", "theta": [1.0], "constants": {"h": 2.0, "b": 1.0}}"#)
                .unwrap();
        assert_eq!(f, LossModel::newsvendor(vec![1.0], 2.0, 1.0));
        let back: LossModel = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<LossModel>(r#"{"family": "newsvendor", "theta": [1.0]}"#).is_err());
        assert!(serde_json::from_str::<LossModel>(
            r#"{"family": "linear", "theta": [1.0], "constants": {"bogus": 1}}"#
        )
        .is_err());
    }

    #[test]
    fn custom_lookup_and_estimate() {
        let f = LossModel::custom_discrete(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.0, 2.0, 3.0], None).unwrap();
        assert_eq!(f.value(&[1.0]), 2.0);
        assert!(f.value(&[2.0]).is_nan());
        let est = estimate_lipschitz(&f, &[vec![0.0], vec![1.0], vec![3.0]], &NormSpec::euclidean(1.0));
        assert_eq!(est.value, 2.0);
        assert!(est.lower_bound);
    }
}
