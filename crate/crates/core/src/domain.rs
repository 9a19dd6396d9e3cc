use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};
use crate::norm::NormSpec;

/// Support of the sample space `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "support", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    FiniteGrid {
        points: Vec<Vec<f64>>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    #[default]
    Unbounded,
}

impl DomainSpec {
    pub fn grid(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(WdroError::InvalidInput("finite grid has no points".into()));
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(WdroError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        Ok(DomainSpec::FiniteGrid { points })
    }

    /// Regular tensor grid with `per_axis` points along each coordinate of a box.
    pub fn box_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(WdroError::InvalidInput(
                "box bounds must share a nonzero dimension".into(),
            ));
        }
        if per_axis < 2 {
            return Err(WdroError::InvalidInput(
                "box grid needs at least 2 points per axis".into(),
            ));
        }
        let axes: Vec<Vec<f64>> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                (0..per_axis)
                    .map(|k| a + (b - a) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        DomainSpec::grid(points)
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DomainSpec::Unbounded)
    }

    pub fn grid_points(&self) -> Option<&[Vec<f64>]> {
        match self {
            DomainSpec::FiniteGrid { points } => Some(points),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DomainSpec::FiniteGrid { .. } => "finite_grid",
            DomainSpec::Box { .. } => "box",
            DomainSpec::Unbounded => "unbounded",
        }
    }

    /// `sup ‖z̃ − z‖` under the ground norm: maximum pairwise distance on a grid,
    /// the diagonal length on a box, `+inf` otherwise.
    pub fn diameter(&self, norm: &NormSpec) -> f64 {
        match self {
            DomainSpec::FiniteGrid { points } => {
                let mut best = 0.0f64;
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        best = best.max(norm.distance_unchecked(a, b));
                    }
                }
                best
            }
            DomainSpec::Box { lo, hi } => norm.distance_unchecked(lo, hi),
            DomainSpec::Unbounded => f64::INFINITY,
        }
    }
}
