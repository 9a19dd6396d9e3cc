use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::domain::DomainSpec;
use crate::error::{Result, WdroError};

/// A known, bounded-support `P_true` to draw replicated samples from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    FiniteDiscrete {
        distribution: DiscreteDistribution,
    },
    BoundedUniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Independent coordinates `N(mean_k, std_k²)` conditioned on `[lo_k, hi_k]`.
    TruncatedGaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(WdroError::InvalidInput(
            "box bounds must share a nonzero dimension".into(),
        ));
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
    {
        return Err(WdroError::InvalidInput("box needs finite lo < hi on every axis".into()));
    }
    Ok(())
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::FiniteDiscrete { .. } => Ok(()),
            Generator::BoundedUniformBox { lo, hi } => check_box(lo, hi),
            Generator::TruncatedGaussian { mean, std, lo, hi } => {
                check_box(lo, hi)?;
                if mean.len() != lo.len() || std.len() != lo.len() {
                    return Err(WdroError::DimensionMismatch {
                        expected: lo.len(),
                        got: mean.len().min(std.len()),
                    });
                }
                for k in 0..lo.len() {
                    let (m, s) = (mean[k], std[k]);
                    // keeps rejection sampling cheap
                    if !(s > 0.0) || !s.is_finite() || m < lo[k] || m > hi[k] || hi[k] - lo[k] < 1e-2 * s {
                        return Err(WdroError::InvalidInput(format!(
                            "truncated gaussian axis {k}: need std > 0, mean inside the box and width ≥ std/100"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::FiniteDiscrete { distribution } => distribution.dim(),
            Generator::BoundedUniformBox { lo, .. } | Generator::TruncatedGaussian { lo, .. } => lo.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Generator::FiniteDiscrete { .. } => "finite_discrete",
            Generator::BoundedUniformBox { .. } => "bounded_uniform_box",
            Generator::TruncatedGaussian { .. } => "truncated_gaussian",
        }
    }

    pub fn discrete(&self) -> Option<&DiscreteDistribution> {
        match self {
            Generator::FiniteDiscrete { distribution } => Some(distribution),
            _ => None,
        }
    }

    /// Support of `P_true`: its atoms, or the box.
    pub fn support(&self) -> DomainSpec {
        match self {
            Generator::FiniteDiscrete { distribution } => DomainSpec::FiniteGrid {
                points: distribution.support().atoms().to_vec(),
            },
            Generator::BoundedUniformBox { lo, hi } | Generator::TruncatedGaussian { lo, hi, .. } => DomainSpec::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        match self {
            Generator::FiniteDiscrete { distribution } => {
                let mut cum = Vec::with_capacity(distribution.len());
                let mut acc = 0.0;
                for w in distribution.weights() {
                    acc += w;
                    cum.push(acc);
                }
                let last = distribution.len() - 1;
                (0..n)
                    .map(|_| {
                        let u = rng.random::<f64>() * acc;
                        let k = cum.partition_point(|c| *c <= u).min(last);
                        distribution.atoms()[k].clone()
                    })
                    .collect()
            }
            Generator::BoundedUniformBox { lo, hi } => (0..n)
                .map(|_| {
                    lo.iter()
                        .zip(hi)
                        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                        .collect()
                })
                .collect(),
            Generator::TruncatedGaussian { mean, std, lo, hi } => {
                let normals: Vec<Normal<f64>> = mean
                    .iter()
                    .zip(std)
                    .map(|(m, s)| Normal::new(*m, *s).expect("validated std"))
                    .collect();
                (0..n)
                    .map(|_| {
                        (0..lo.len())
                            .map(|k| loop {
                                let v = normals[k].sample(rng);
                                if v >= lo[k] && v <= hi[k] {
                                    break v;
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// Empirical distribution of a sample with repeated points merged, in first-seen order.
pub fn empirical(sample: Vec<Vec<f64>>) -> Result<DiscreteDistribution> {
    let n = sample.len();
    if n == 0 {
        return Err(WdroError::InvalidInput("empty sample".into()));
    }
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut atoms = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for z in sample {
        let key: Vec<u64> = z.iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&k) => counts[k] += 1,
            None => {
                index.insert(key, atoms.len());
                atoms.push(z);
                counts.push(1);
            }
        }
    }
    let weights = counts.into_iter().map(|c| c as f64 / n as f64).collect();
    DiscreteDistribution::new(atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn samples_stay_in_support() {
        let g = Generator::TruncatedGaussian {
            mean: vec![0.0, 1.0],
            std: vec![1.0, 2.0],
            lo: vec![-0.5, 0.0],
            hi: vec![0.5, 1.5],
        };
        g.validate().unwrap();
        let xs = g.sample(&mut rng_for(3, 0), 500);
        assert!(xs
            .iter()
            .all(|x| (-0.5..=0.5).contains(&x[0]) && (0.0..=1.5).contains(&x[1])));
        let d = Generator::FiniteDiscrete {
            distribution: DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap(),
        };
        let ones = d
            .sample(&mut rng_for(3, 1), 20_000)
            .iter()
            .filter(|x| x[0] == 1.0)
            .count();
        assert!((ones as f64 / 20_000.0 - 0.75).abs() < 0.02);
    }

    #[test]
    fn empirical_merges_repeats() {
        let e = empirical(vec![vec![1.0], vec![0.0], vec![1.0], vec![-0.0]]).unwrap();
        assert_eq!(e.atoms(), &[vec![1.0], vec![0.0]]);
        assert_eq!(e.weights(), &[0.5, 0.5]);
    }
}
