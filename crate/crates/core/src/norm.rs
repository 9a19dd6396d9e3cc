//! Ground norms and the transport cost they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};

/// Norm on the sample space used as the transport ground cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroundNorm {
    #[default]
    Euclidean,
    OneNorm,
    InfNorm,
    /// `‖z − z̃‖ = ‖x − x̃‖₂ + ∞·1{y ≠ ỹ}` where `y` is the last coordinate.
    /// Only the feature block can be transported.
    ProductXOnly,
}

impl GroundNorm {
    /// Norm of a vector that lives entirely in the movable block.
    fn primal(self, v: &[f64]) -> f64 {
        match self {
            GroundNorm::Euclidean | GroundNorm::ProductXOnly => l2(v),
            GroundNorm::OneNorm => v.iter().map(|x| x.abs()).sum(),
            GroundNorm::InfNorm => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn dual(self, v: &[f64]) -> f64 {
        match self {
            GroundNorm::Euclidean | GroundNorm::ProductXOnly => l2(v),
            GroundNorm::OneNorm => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            GroundNorm::InfNorm => v.iter().map(|x| x.abs()).sum(),
        }
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Wasserstein order together with the ground norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub p: f64,
    #[serde(default)]
    pub ground: GroundNorm,
}

impl NormSpec {
    pub fn new(p: f64, ground: GroundNorm) -> Result<Self> {
        let spec = NormSpec { p, ground };
        spec.validate()?;
        Ok(spec)
    }

    pub fn euclidean(p: f64) -> Self {
        NormSpec {
            p,
            ground: GroundNorm::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.p) {
            return Err(WdroError::InvalidInput(format!(
                "Wasserstein order p must lie in [1, 2], got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Hölder conjugate `q` with `1/p + 1/q = 1`; infinite for `p = 1`.
    pub fn holder_conjugate(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }

    /// The block of `v` that transport may move.
    pub fn movable<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        match self.ground {
            GroundNorm::ProductXOnly => &v[..v.len().saturating_sub(1)],
            _ => v,
        }
    }

    /// Ground distance; `+inf` under [`GroundNorm::ProductXOnly`] when labels differ.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(WdroError::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(self.distance_unchecked(a, b))
    }

    pub(crate) fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        if self.ground == GroundNorm::ProductXOnly {
            if let (Some(ya), Some(yb)) = (a.last(), b.last()) {
                if ya != yb {
                    return f64::INFINITY;
                }
            }
        }
        self.ground.primal(self.movable(&diff))
    }

    /// Transport cost `‖a − b‖^p`.
    pub(crate) fn cost(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.distance_unchecked(a, b);
        if self.p == 1.0 {
            d
        } else {
            d.powf(self.p)
        }
    }

    /// Dual norm of a (co)vector; only its movable block is measured.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        self.ground.dual(self.movable(v))
    }

    /// Primal norm of a vector restricted to the movable block.
    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        self.ground.primal(self.movable(v))
    }

    /// Size of a point used in growth bounds `f(z) ≤ M + L‖z‖^p`.
    /// The product convention has no finite norm off the `y = 0` slice, so the
    /// full Euclidean length is used there.
    pub fn magnitude(&self, z: &[f64]) -> f64 {
        match self.ground {
            GroundNorm::ProductXOnly => l2(z),
            g => g.primal(z),
        }
    }
}

/// Free-function form of [`NormSpec::distance`].
pub fn ground_distance(z1: &[f64], z2: &[f64], norm: &NormSpec) -> Result<f64> {
    norm.distance(z1, z2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_are_at_zero_distance() {
        let n = NormSpec::euclidean(1.0);
        assert_eq!(ground_distance(&[1.5, -2.0], &[1.5, -2.0], &n).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let n = NormSpec::euclidean(2.0);
        assert_eq!(ground_distance(&[0.0, 0.0], &[3.0, 4.0], &n).unwrap(), 5.0);
    }

    #[test]
    fn product_norm_is_infinite_across_labels() {
        let n = NormSpec::new(1.0, GroundNorm::ProductXOnly).unwrap();
        let d = ground_distance(&[0.3, 1.0], &[0.3, -1.0], &n).unwrap();
        assert!(d.is_infinite());
        let d = ground_distance(&[0.0, 0.0, 1.0], &[3.0, 4.0, 1.0], &n).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let n = NormSpec::euclidean(1.0);
        assert!(matches!(
            ground_distance(&[0.0], &[0.0, 1.0], &n),
            Err(WdroError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dual_pairs() {
        let v = [3.0, -4.0];
        assert_eq!(NormSpec::new(1.0, GroundNorm::OneNorm).unwrap().dual_norm(&v), 4.0);
        assert_eq!(NormSpec::new(1.0, GroundNorm::InfNorm).unwrap().dual_norm(&v), 7.0);
        assert_eq!(NormSpec::euclidean(1.0).dual_norm(&v), 5.0);
    }

    #[test]
    fn order_outside_range_rejected() {
        assert!(NormSpec::new(2.5, GroundNorm::Euclidean).is_err());
        assert!(NormSpec::new(0.5, GroundNorm::Euclidean).is_err());
        assert_eq!(NormSpec::euclidean(2.0).holder_conjugate(), 2.0);
        assert!(NormSpec::euclidean(1.0).holder_conjugate().is_infinite());
    }
}
