//! Finitely supported distributions: nominal, empirical and desk-scale "true" laws.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};
use crate::loss::LossModel;

/// Tolerance within which input weights are renormalized instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Weighted atoms in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = WdroError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw.weights {
            Some(w) => DiscreteDistribution::new(raw.atoms, w),
            None => DiscreteDistribution::uniform(raw.atoms),
        }
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution {
            atoms: d.atoms,
            weights: Some(d.weights),
        }
    }
}

impl DiscreteDistribution {
    /// Builds a distribution, renormalizing weights whose sum is within
    /// [`RENORMALIZE_TOL`] of one.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(WdroError::InvalidDistribution("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(WdroError::InvalidDistribution(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(WdroError::InvalidDistribution("zero-dimensional atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != dim {
                return Err(WdroError::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(WdroError::InvalidDistribution(format!(
                    "atom {i} has a non-finite coordinate"
                )));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WdroError::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(WdroError::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteDistribution { atoms, weights })
    }

    /// Equal weights on every atom: the empirical distribution of a sample.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(WdroError::InvalidDistribution("no atoms".into()));
        }
        DiscreteDistribution::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(z: Vec<f64>) -> Result<Self> {
        DiscreteDistribution::new(vec![z], vec![1.0])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }

    /// `Σ wᵢ g(zᵢ)`.
    pub fn expect(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(z, w)| w * g(z)).sum()
    }

    /// Drops atoms of zero mass, merging nothing else.
    pub fn support(&self) -> DiscreteDistribution {
        let (atoms, weights) = self
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(z, w)| (z.to_vec(), w))
            .unzip();
        DiscreteDistribution { atoms, weights }
    }

    /// Reads a weighted distribution: header row, one atom per row, last column = weight.
    pub fn read_weighted_csv(reader: impl Read) -> Result<Self> {
        let rows = read_numeric_csv(reader, "distribution csv")?;
        let (atoms, weights) = rows
            .into_iter()
            .map(|mut r| {
                let w = r.pop().unwrap_or(f64::NAN);
                (r, w)
            })
            .unzip();
        DiscreteDistribution::new(atoms, weights)
    }

    /// Reads a sample as its empirical distribution: header row, one sample per row.
    pub fn read_sample_csv(reader: impl Read) -> Result<Self> {
        DiscreteDistribution::uniform(read_numeric_csv(reader, "data csv")?)
    }

    /// Writes the weighted CSV form (`z1..zd,weight`).
    pub fn write_weighted_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("z{i}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (z, wt) in self.iter() {
            let mut rec: Vec<String> = z.iter().map(|x| format!("{x:.16e}")).collect();
            rec.push(format!("{wt:.16e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Expected loss `E_Q[f]`.
pub fn expectation(q: &DiscreteDistribution, f: &LossModel) -> f64 {
    q.expect(|z| f.value(z))
}

/// Parses a headed CSV of finite reals. Row numbers in errors are 1-based data rows.
pub fn read_numeric_csv(reader: impl Read, context: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != width {
            return Err(WdroError::Data {
                context: context.into(),
                row,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| WdroError::Data {
                context: context.into(),
                row,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(WdroError::Data {
                    context: context.into(),
                    row,
                    message: format!("non-finite value {field:?}"),
                });
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(WdroError::Data {
            context: context.into(),
            row: 0,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossModel;

    #[test]
    fn point_mass_expectation() {
        let q = DiscreteDistribution::point_mass(vec![2.0]).unwrap();
        let f = LossModel::quadratic(vec![1.0], 0.0);
        assert_eq!(expectation(&q, &f), 4.0);
    }

    #[test]
    fn symmetric_square() {
        let q = DiscreteDistribution::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(expectation(&q, &LossModel::quadratic(vec![1.0], 0.0)), 1.0);
    }

    #[test]
    fn uniform_identity() {
        let q = DiscreteDistribution::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(expectation(&q, &LossModel::linear(vec![1.0], 0.0)), 0.5);
    }

    #[test]
    fn weights_renormalized_or_rejected() {
        let q = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5 + 5e-10]).unwrap();
        let s: f64 = q.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(DiscreteDistribution::new(vec![], vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let q = DiscreteDistribution::new(vec![vec![0.1, 2.0], vec![-3.0, 4.5]], vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        q.write_weighted_csv(&mut buf).unwrap();
        let back = DiscreteDistribution::read_weighted_csv(buf.as_slice()).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn csv_rejects_non_finite_with_row_number() {
        let data = "x,y\n1.0,2.0\n3.0,NaN\n";
        match DiscreteDistribution::read_sample_csv(data.as_bytes()) {
            Err(WdroError::Data { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let data = "x,y\n1.0,2.0\n3.0,inf\n";
        assert!(DiscreteDistribution::read_sample_csv(data.as_bytes()).is_err());
    }

    #[test]
    fn json_form() {
        let q: DiscreteDistribution =
            serde_json::from_str(r#"{"atoms": [[0.0], [1.0]], "weights": [0.25, 0.75]}"#).unwrap();
        assert_eq!(q.weights(), &[0.25, 0.75]);
        let u: DiscreteDistribution = serde_json::from_str(r#"{"atoms": [[0.0], [1.0]]}"#).unwrap();
        assert_eq!(u.weights(), &[0.5, 0.5]);
        assert!(serde_json::from_str::<DiscreteDistribution>(r#"{"atoms": [[0.0]], "weights": [0.3]}"#).is_err());
    }
}
