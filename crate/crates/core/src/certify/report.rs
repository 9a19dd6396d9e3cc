use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jsonfmt::fmt_f64;

use super::{CertReport, TailCell, TradeoffTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub lo: f64,
    pub hi: f64,
    pub half_width: f64,
}

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> WilsonInterval {
    if n == 0 {
        return WilsonInterval {
            lo: 0.0,
            hi: 1.0,
            half_width: 0.5,
        };
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    WilsonInterval {
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
        half_width: half,
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One row per successful replication.
pub fn write_coverage_csv(w: impl Write, report: &CertReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "replication",
        "seed",
        "rho",
        "residual",
        "empirical_loss",
        "robust_bound",
        "true_loss",
        "true_loss_se",
        "gap",
        "violated",
        "uniform_violated",
        "u_hat",
        "theta",
    ])?;
    for r in &report.replications {
        out.write_record([
            r.replication.to_string(),
            r.seed.to_string(),
            fmt_f64(r.rho),
            fmt_f64(r.residual),
            fmt_f64(r.empirical_loss),
            fmt_f64(r.robust_bound),
            fmt_f64(r.true_loss),
            fmt_f64(r.true_loss_se),
            fmt_f64(r.gap),
            r.violated.to_string(),
            r.uniform_violated.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.u_hat),
            join(&r.theta),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tail_csv(w: impl Write, cells: &[TailCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "epsilon", "empirical", "std_error", "bound", "method", "flagged"])?;
    for c in cells {
        out.write_record([
            c.n.to_string(),
            fmt_f64(c.epsilon),
            fmt_f64(c.empirical),
            fmt_f64(c.std_error),
            fmt_f64(c.bound),
            c.method.as_str().to_string(),
            c.flagged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tradeoff_csv(w: impl Write, table: &TradeoffTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rho",
        "mean_empirical_loss",
        "mean_robust_objective",
        "mean_variation",
        "mean_true_loss",
        "true_loss_se",
        "replications",
    ])?;
    for r in &table.rows {
        out.write_record([
            fmt_f64(r.rho),
            fmt_f64(r.mean_empirical_loss),
            fmt_f64(r.mean_robust_objective),
            fmt_f64(r.mean_variation),
            fmt_f64(r.mean_true_loss),
            fmt_f64(r.true_loss_se),
            r.replications.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_limits() {
        let w = wilson_interval(0, 2000, 1.96);
        assert_eq!(w.lo, 0.0);
        assert!(w.hi > 0.0 && w.hi < 0.002);
        let h = wilson_interval(1000, 2000, 1.96);
        assert!((h.lo + h.hi - 1.0).abs() < 1e-12);
        // close to the Wald width at p = 1/2
        assert!((h.half_width - 1.96 * (0.25f64 / 2000.0).sqrt()).abs() < 1e-4);
    }
}
