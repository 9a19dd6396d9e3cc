//! Monte Carlo Rademacher complexities and their analytic bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};
use crate::norm::{dot, l2};
use crate::par::{map_range, Execution};
use crate::seed::rng_for;

/// `sup_{f∈F} (1/n) Σ σᵢ f(zᵢ)` for a fixed sample and sign vector.
pub trait SupOracle: Sync {
    fn sample_size(&self) -> usize;
    fn sup(&self, signs: &[f64]) -> f64;
}

/// `{x ↦ θᵀx : ‖θ‖₂ ≤ B}`: the supremum is `(B/n)‖Σσᵢxᵢ‖₂`.
pub struct LinearBallClass {
    pub x: Vec<Vec<f64>>,
    pub radius: f64,
}

impl SupOracle for LinearBallClass {
    fn sample_size(&self) -> usize {
        self.x.len()
    }

    fn sup(&self, signs: &[f64]) -> f64 {
        let d = self.x.first().map_or(0, Vec::len);
        let mut acc = vec![0.0; d];
        for (xi, s) in self.x.iter().zip(signs) {
            for (a, v) in acc.iter_mut().zip(xi) {
                *a += s * v;
            }
        }
        self.radius * l2(&acc) / self.x.len() as f64
    }
}

/// `{z ↦ (θᵀz)² : ‖θ‖₂ ≤ B}`: the supremum is `(B²/n)·max(λ_max(Σσᵢzᵢzᵢᵀ), 0)`.
pub struct QuadraticBallClass {
    pub z: Vec<Vec<f64>>,
    pub radius: f64,
}

impl SupOracle for QuadraticBallClass {
    fn sample_size(&self) -> usize {
        self.z.len()
    }

    fn sup(&self, signs: &[f64]) -> f64 {
        let d = self.z.first().map_or(0, Vec::len);
        let mut m = DMatrix::<f64>::zeros(d, d);
        for (zi, s) in self.z.iter().zip(signs) {
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] += s * zi[r] * zi[c];
                }
            }
        }
        let top = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        self.radius * self.radius * top.max(0.0) / self.z.len() as f64
    }
}

/// Finitely many functions given by their values on the sample.
pub struct FiniteClass {
    pub values: Vec<Vec<f64>>,
}

impl SupOracle for FiniteClass {
    fn sample_size(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn sup(&self, signs: &[f64]) -> f64 {
        let n = self.sample_size() as f64;
        self.values
            .iter()
            .map(|f| dot(f, signs) / n)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Mean of the supremum over `draws` independent sign vectors.
///
/// Draw `k` uses its own generator derived from `(seed, k)`, and the mean is
/// accumulated in draw order, so the estimate does not depend on `exec`.
pub fn rademacher_mc(class: &dyn SupOracle, draws: usize, seed: u64, exec: Execution) -> Result<McEstimate> {
    if draws < 100 {
        return Err(WdroError::InvalidInput(format!("need at least 100 draws, got {draws}")));
    }
    let n = class.sample_size();
    if n == 0 {
        return Err(WdroError::InvalidInput("empty sample".into()));
    }
    let sups = map_range(exec, draws, |k| {
        let mut rng = rng_for(seed, k as u64);
        let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        class.sup(&signs)
    });
    let m = draws as f64;
    let mean = sups.iter().sum::<f64>() / m;
    let var = sups.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / m).sqrt(),
        draws,
    })
}

/// `B·√(E‖x‖₂²/n)`.
pub fn rademacher_bound_linear(radius: f64, second_moment: f64, n: u64) -> f64 {
    radius * (second_moment / n as f64).sqrt()
}

/// `B²·√E‖z‖⁴ / √n`; `fourth_moment_sqrt` is `√E‖z‖⁴`.
pub fn rademacher_bound_quadratic(radius: f64, fourth_moment_sqrt: f64, n: u64) -> f64 {
    radius * radius * fourth_moment_sqrt / (n as f64).sqrt()
}

/// `(1/(1∧ζ))·√(E‖z‖⁴/n)` for the normalized quadratic class.
pub fn rademacher_bound_g_quadratic(fourth_moment: f64, zeta: f64, n: u64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(WdroError::InvalidInput(format!("ζ must be positive, got {zeta}")));
    }
    Ok((fourth_moment / n as f64).sqrt() / zeta.min(1.0))
}
