//! Monte Carlo certification against a known `P_true`.
//!
//! Each replication draws `n` points, fits the configured problem at the
//! calibrated radius and checks whether the certified bound covers the true
//! expected loss at the fitted parameters. Replication `r` uses the RNG stream
//! `mix_seed(seed, r)`, so reports are bit-identical across thread counts.

mod generator;
mod report;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate, rademacher_bound_g_quadratic, CalibrationInputs, CalibrationResult, Provenance, Rule,
};
use crate::concentration::{theorem1_tail_bound, TauProvenance, TpConstant};
use crate::distribution::DiscreteDistribution;
use crate::domain::DomainSpec;
use crate::error::{Result, WdroError};
use crate::loss::{BaseLoss, LossModel, PredictionMode};
use crate::models::{
    bound_u_n, newsvendor_objective, portfolio_robust_objective, solve_linear_p1, solve_newsvendor, solve_portfolio,
    LinearPredictionProblem, NewsvendorProblem, PortfolioProblem, DEFAULT_MAX_ITER,
};
use crate::norm::{dot, l2, GroundNorm, NormSpec};
use crate::optim::minimize_convex_line;
use crate::par::{map_range, Execution};
use crate::regularizer::robust_loss_dual;
use crate::seed::{mix_seed, rng_for};

pub use generator::{empirical, Generator};
pub use report::{wilson_interval, write_coverage_csv, write_tail_csv, write_tradeoff_csv, WilsonInterval};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HOLDOUT: usize = 1_000_000;
pub const WILSON_Z: f64 = 1.96;
/// Largest `n` for which two-atom tail probabilities are enumerated exactly.
pub const EXACT_TAIL_MAX_N: u64 = 60;

const HOLDOUT_STREAM: u64 = u64::MAX;
const TAIL_STREAM: u64 = 0x7461_696c_0000_0000;
/// Relative slack on "true loss exceeds bound" so that exact ties are not violations.
const VIOLATION_TOL: f64 = 1e-12;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// How `E_{P_true}[f]` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrueLossEval {
    ExactDiscrete,
    /// Mean over one fixed holdout sample drawn from the generator.
    LargeHoldout {
        n_eval: usize,
    },
}

fn default_p1() -> NormSpec {
    NormSpec::euclidean(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A single loss; nothing is fitted.
    FixedLoss {
        loss: LossModel,
        norm: NormSpec,
        /// Defaults to the support grid for discrete generators, `unbounded` otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    Newsvendor {
        h: f64,
        b: f64,
        radius: f64,
        #[serde(default = "default_p1")]
        norm: NormSpec,
    },
    LinearP1 {
        mode: PredictionMode,
        base: BaseLoss,
        radius: f64,
    },
    Portfolio {
        alpha: f64,
        radius: f64,
    },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::FixedLoss { .. } => "fixed_loss",
            ProblemSpec::Newsvendor { .. } => "newsvendor",
            ProblemSpec::LinearP1 { .. } => "linear_p1",
            ProblemSpec::Portfolio { .. } => "portfolio",
        }
    }

    /// Wasserstein order of the robust objective.
    pub fn p(&self) -> f64 {
        match self {
            ProblemSpec::FixedLoss { norm, .. } => norm.p,
            ProblemSpec::Newsvendor { .. } | ProblemSpec::LinearP1 { .. } => 1.0,
            ProblemSpec::Portfolio { .. } => 2.0,
        }
    }

    /// Norm whose diameter on the support sets the default `τ`.
    fn ground(&self) -> NormSpec {
        match self {
            ProblemSpec::FixedLoss { norm, .. } | ProblemSpec::Newsvendor { norm, .. } => *norm,
            ProblemSpec::LinearP1 { .. } => NormSpec {
                p: 1.0,
                ground: GroundNorm::ProductXOnly,
            },
            ProblemSpec::Portfolio { .. } => NormSpec::euclidean(2.0),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ProblemSpec::FixedLoss { loss, norm, domain } => {
                norm.validate()?;
                loss.check_dim(dim)?;
                if let Some(DomainSpec::Box { .. }) = domain {
                    return Err(WdroError::NoSolver {
                        family: loss.family_name().into(),
                        domain: "box".into(),
                    });
                }
                Ok(())
            }
            ProblemSpec::Newsvendor { h, b, radius, norm } => {
                norm.validate()?;
                if !(*h > 0.0 && *b > 0.0 && *radius > 0.0) {
                    return Err(WdroError::InvalidInput("newsvendor needs h, b, B > 0".into()));
                }
                if dim < 2 {
                    return Err(WdroError::InvalidInput(
                        "newsvendor points are (x, y) with at least one feature".into(),
                    ));
                }
                if norm.p != 1.0 {
                    return Err(WdroError::InvalidInput("newsvendor is certified for p = 1 only".into()));
                }
                Ok(())
            }
            ProblemSpec::LinearP1 { radius, .. } => {
                if !(*radius > 0.0) || dim < 2 {
                    return Err(WdroError::InvalidInput(
                        "linear prediction needs B > 0 and points (x, y)".into(),
                    ));
                }
                Ok(())
            }
            ProblemSpec::Portfolio { alpha, radius } => {
                if !(*alpha > 0.0) {
                    return Err(WdroError::InvalidInput("risk aversion α must be positive".into()));
                }
                if radius * radius < 1.0 / dim as f64 - 1e-15 {
                    return Err(WdroError::InfeasibleProjection(format!(
                        "budget ball B = {radius} misses the simplex hyperplane in dimension {dim}"
                    )));
                }
                Ok(())
            }
        }
    }
}

type PointFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;

/// Parameters produced by a fit.
#[derive(Debug, Clone, PartialEq)]
enum Fit {
    Fixed,
    Theta(Vec<f64>),
    Portfolio { w: Vec<f64>, u: f64 },
}

impl Fit {
    fn theta(&self) -> Vec<f64> {
        match self {
            Fit::Fixed => Vec::new(),
            Fit::Theta(t) => t.clone(),
            Fit::Portfolio { w, .. } => w.clone(),
        }
    }

    fn u(&self) -> Option<f64> {
        match self {
            Fit::Portfolio { u, .. } => Some(*u),
            _ => None,
        }
    }
}

struct Fitted {
    fit: Fit,
    empirical: f64,
    robust: f64,
    variation: f64,
    converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub epsilons: Vec<f64>,
    pub ns: Vec<u64>,
    /// Monte Carlo draws per cell when enumeration does not apply; defaults to `replications`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSpec {
    pub rhos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub generator: Generator,
    pub problem: ProblemSpec,
    pub rule: Rule,
    pub n: u64,
    pub replications: usize,
    pub t: f64,
    /// Transport constant; `2·diam(support)²` when absent.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Rule constants other than `n`, `t` and `τ`.
    #[serde(default)]
    pub constants: CalibrationInputs,
    #[serde(default)]
    pub eval: Option<TrueLossEval>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Size of the θ-grid for the uniform spot check; 0 turns it off.
    #[serde(default)]
    pub theta_grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tradeoff: Option<TradeoffSpec>,
}

/// Diameter of the support, measured on the transportable block only.
fn support_diameter(support: &DomainSpec, norm: &NormSpec) -> f64 {
    if norm.ground != GroundNorm::ProductXOnly {
        return support.diameter(norm);
    }
    let strip = |v: &[f64]| v[..v.len() - 1].to_vec();
    let x_only = match support {
        DomainSpec::FiniteGrid { points } => DomainSpec::FiniteGrid {
            points: points.iter().map(|p| strip(p)).collect(),
        },
        DomainSpec::Box { lo, hi } => DomainSpec::Box {
            lo: strip(lo),
            hi: strip(hi),
        },
        DomainSpec::Unbounded => DomainSpec::Unbounded,
    };
    x_only.diameter(&NormSpec::euclidean(norm.p))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(WdroError::InvalidInput(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.generator.validate()?;
        let dim = self.generator.dim();
        self.problem.validate(dim)?;
        if self.n == 0 || self.replications == 0 {
            return Err(WdroError::InvalidInput("n and replications must be positive".into()));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(WdroError::InvalidInput(format!(
                "confidence exponent t must be positive, got {}",
                self.t
            )));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(WdroError::InvalidInput(format!("τ must be positive, got {tau}")));
            }
        }
        if self.constants.n != 0 || self.constants.t != 0.0 || self.constants.tau != 0.0 {
            return Err(WdroError::InvalidInput(
                "set n, t and tau at the top level, not inside constants".into(),
            ));
        }
        match self.eval {
            Some(TrueLossEval::ExactDiscrete) if self.generator.discrete().is_none() => {
                return Err(WdroError::InvalidInput(format!(
                    "exact_discrete evaluation needs a finite_discrete generator, not {}",
                    self.generator.kind()
                )))
            }
            Some(TrueLossEval::LargeHoldout { n_eval: 0 }) => {
                return Err(WdroError::InvalidInput("holdout size must be positive".into()))
            }
            _ => {}
        }
        let p2_rule = matches!(self.rule, Rule::Thm3 | Rule::Cor6 | Rule::Cor3);
        if p2_rule != (self.problem.p() == 2.0) {
            return Err(WdroError::InvalidInput(format!(
                "rule {:?} does not match the p = {} {} problem",
                self.rule,
                self.problem.p(),
                self.problem.kind()
            )));
        }
        if self.theta_grid > 0 {
            let d = match &self.problem {
                ProblemSpec::FixedLoss { .. } => {
                    return Err(WdroError::InvalidInput("a fixed loss has no θ-grid".into()));
                }
                ProblemSpec::Portfolio { .. } => dim,
                _ => dim - 1,
            };
            if d > 2 {
                return Err(WdroError::InvalidInput(format!("θ-grid check supports d ≤ 2, got {d}")));
            }
        }
        if let Some(tail) = &self.tail {
            tail_problem(self)?;
            if tail.epsilons.iter().any(|e| !e.is_finite()) {
                return Err(WdroError::InvalidInput("tail ε grid must be finite".into()));
            }
        }
        if let Some(tr) = &self.tradeoff {
            if matches!(self.problem, ProblemSpec::FixedLoss { .. }) {
                return Err(WdroError::InvalidInput(
                    "the trade-off curve needs a problem with parameters".into(),
                ));
            }
            if tr.rhos.is_empty() || tr.rhos.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                return Err(WdroError::InvalidInput(
                    "trade-off radii must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Copy with every default materialized.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        self.validate()?;
        let mut c = self.clone();
        if c.tau.is_none() {
            let d = support_diameter(&c.generator.support(), &c.problem.ground());
            let tau = (2.0 * d * d).max(crate::concentration::TAU_FLOOR);
            c.tau = Some(tau);
        }
        if c.eval.is_none() {
            c.eval = Some(match c.generator {
                Generator::FiniteDiscrete { .. } => TrueLossEval::ExactDiscrete,
                _ => TrueLossEval::LargeHoldout {
                    n_eval: DEFAULT_HOLDOUT,
                },
            });
        }
        if c.max_iter.is_none() {
            c.max_iter = Some(DEFAULT_MAX_ITER);
        }
        Ok(c)
    }

    fn tau_value(&self) -> f64 {
        self.tau.expect("resolved config")
    }

    fn fixed_domain(&self) -> DomainSpec {
        match &self.problem {
            ProblemSpec::FixedLoss { domain: Some(d), .. } => d.clone(),
            _ => match self.generator {
                Generator::FiniteDiscrete { .. } => self.generator.support(),
                _ => DomainSpec::Unbounded,
            },
        }
    }
}

fn tail_problem(config: &ExperimentConfig) -> Result<(&DiscreteDistribution, &LossModel, NormSpec)> {
    let p_true = config
        .generator
        .discrete()
        .ok_or_else(|| WdroError::InvalidInput("the tail table needs a finite_discrete generator".into()))?;
    match &config.problem {
        ProblemSpec::FixedLoss { loss, norm, .. } => Ok((p_true, loss, *norm)),
        _ => Err(WdroError::InvalidInput(
            "the tail table needs a fixed_loss problem".into(),
        )),
    }
}

/// `E_{P_true}` by exact summation or over a fixed holdout.
enum Truth {
    Exact(DiscreteDistribution),
    Holdout(Vec<Vec<f64>>),
}

impl Truth {
    fn build(config: &ExperimentConfig) -> Truth {
        match config.eval.expect("resolved config") {
            TrueLossEval::ExactDiscrete => Truth::Exact(config.generator.discrete().expect("validated").clone()),
            TrueLossEval::LargeHoldout { n_eval } => {
                let mut rng = rng_for(config.seed, HOLDOUT_STREAM);
                Truth::Holdout(config.generator.sample(&mut rng, n_eval))
            }
        }
    }

    fn provenance(&self) -> Provenance {
        match self {
            Truth::Exact(_) => Provenance::Analytic,
            Truth::Holdout(_) => Provenance::Estimated,
        }
    }

    /// Mean of `g` and its standard error (zero when exact).
    fn mean_se(&self, g: &dyn Fn(&[f64]) -> f64) -> (f64, f64) {
        match self {
            Truth::Exact(p) => (p.expect(g), 0.0),
            Truth::Holdout(xs) => {
                let n = xs.len() as f64;
                let vals: Vec<f64> = xs.iter().map(|x| g(x)).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
                (mean, (var / n).sqrt())
            }
        }
    }

    fn mean(&self, g: &dyn Fn(&[f64]) -> f64) -> f64 {
        self.mean_se(g).0
    }
}

/// Smallest eigenvalue of the covariance of `x` under the truth.
fn min_cov_eigen(truth: &Truth, d: usize) -> f64 {
    let mean: Vec<f64> = (0..d).map(|k| truth.mean(&|x: &[f64]| x[k])).collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let c = truth.mean(&|x: &[f64]| (x[i] - mean[i]) * (x[j] - mean[j]));
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    nalgebra::SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Everything fixed across replications.
struct Prepared {
    config: ExperimentConfig,
    truth: Truth,
    inputs: CalibrationInputs,
    calibration: CalibrationResult,
    rho: f64,
    epsilon: f64,
    domain: DomainSpec,
    u_bound: Option<f64>,
}

fn u_bound_for(config: &ExperimentConfig, truth: &Truth, rho: f64) -> Result<Option<f64>> {
    let ProblemSpec::Portfolio { radius, .. } = config.problem else {
        return Ok(None);
    };
    if (config.n as f64) < config.t {
        return Ok(None);
    }
    let mu2 = truth.mean(&|x: &[f64]| dot(x, x)).sqrt();
    bound_u_n(
        radius,
        mu2,
        config.tau_value(),
        config.t,
        config.n,
        config.generator.dim(),
        rho,
    )
    .map(Some)
}

fn rho_used(rule: Rule, cal: &CalibrationResult) -> (f64, f64) {
    if rule == Rule::Cor6 {
        (
            cal.rho_tilde.unwrap_or(cal.rho),
            cal.epsilon_tilde.unwrap_or(cal.epsilon),
        )
    } else {
        (cal.rho, cal.epsilon)
    }
}

fn derive_inputs(
    config: &ExperimentConfig,
    truth: &Truth,
    tau_derived: bool,
) -> Result<(CalibrationInputs, CalibrationResult)> {
    let mut inputs = config.constants.clone();
    inputs.n = config.n;
    inputs.t = config.t;
    inputs.tau = config.tau_value();
    if tau_derived && !config.constants.provenance.contains_key("tau") {
        let prov = if config.problem.p() == 2.0 {
            // bounded support gives T₁, not T₂
            Provenance::Assumed
        } else {
            Provenance::Analytic
        };
        inputs.provenance.insert("tau".into(), prov);
    }
    let prov = truth.provenance();
    match &config.problem {
        ProblemSpec::Newsvendor { h, b, norm, .. } => {
            for (name, slot, value) in [("h", &mut inputs.h, *h), ("b", &mut inputs.b, *b)] {
                match slot {
                    Some(v) if *v != value => {
                        return Err(WdroError::InvalidInput(format!(
                            "constants.{name} = {v} disagrees with the problem's {value}"
                        )))
                    }
                    _ => *slot = Some(value),
                }
            }
            if inputs.e_kappa.is_none() {
                let ex = truth.mean(&|z: &[f64]| norm.primal_norm(&z[..z.len() - 1]));
                inputs.e_kappa = Some(h.max(*b) * ex);
                inputs.provenance.insert("e_kappa".into(), prov);
            }
        }
        ProblemSpec::Portfolio { alpha, radius } if matches!(config.rule, Rule::Thm3 | Rule::Cor6) => {
            let d = config.generator.dim();
            if inputs.rad_g.is_none() {
                let m4 = truth.mean(&|x: &[f64]| (1.0 + dot(x, x)).powi(2));
                let zeta = min_cov_eigen(truth, d);
                inputs.rad_g = Some(rademacher_bound_g_quadratic(m4, zeta, config.n)?);
                inputs.provenance.insert("rad_g".into(), prov);
            }
            if inputs.kappa2.is_none() {
                let first = calibrate(config.rule, &inputs)?;
                let (rho, _) = rho_used(config.rule, &first);
                if let Some(u) = u_bound_for(config, truth, rho)? {
                    let mu2 = truth.mean(&|x: &[f64]| dot(x, x)).sqrt();
                    inputs.kappa2 = Some(2.0 * radius * (radius * mu2 + u + alpha / 2.0));
                    inputs.provenance.insert("kappa2".into(), prov);
                }
            }
        }
        _ => {}
    }
    let cal = calibrate(config.rule, &inputs)?;
    Ok((inputs, cal))
}

fn prepare(raw: &ExperimentConfig) -> Result<Prepared> {
    let config = raw.resolved()?;
    let truth = Truth::build(&config);
    let (inputs, calibration) = derive_inputs(&config, &truth, raw.tau.is_none())?;
    let (rho, epsilon) = rho_used(config.rule, &calibration);
    let u_bound = u_bound_for(&config, &truth, rho)?;
    Ok(Prepared {
        domain: config.fixed_domain(),
        config,
        truth,
        inputs,
        calibration,
        rho,
        epsilon,
        u_bound,
    })
}

fn portfolio_problem(alpha: f64, radius: f64, data: DiscreteDistribution) -> PortfolioProblem {
    PortfolioProblem { alpha, radius, data }
}

impl Prepared {
    fn max_iter(&self) -> usize {
        self.config.max_iter.expect("resolved config")
    }

    fn fit(&self, pn: &DiscreteDistribution, rho: f64) -> Result<Fitted> {
        let max_iter = self.max_iter();
        let r = match &self.config.problem {
            ProblemSpec::FixedLoss { loss, norm, .. } => {
                let e = robust_loss_dual(pn, loss, rho, norm, &self.domain)?;
                let nominal = e.robust_loss - e.regularizer;
                return Ok(Fitted {
                    fit: Fit::Fixed,
                    empirical: nominal,
                    robust: e.robust_loss,
                    variation: if rho > 0.0 { e.regularizer / rho } else { 0.0 },
                    converged: true,
                });
            }
            ProblemSpec::Newsvendor { h, b, radius, norm } => {
                let p = NewsvendorProblem {
                    h: *h,
                    b: *b,
                    radius: *radius,
                    data: pn.clone(),
                    norm: *norm,
                };
                solve_newsvendor(&p, rho, max_iter)?
            }
            ProblemSpec::LinearP1 { mode, base, radius } => {
                let p = LinearPredictionProblem {
                    mode: *mode,
                    base: *base,
                    radius: *radius,
                    data: pn.clone(),
                };
                solve_linear_p1(&p, rho, max_iter)?
            }
            ProblemSpec::Portfolio { alpha, radius } => {
                let r = solve_portfolio(&portfolio_problem(*alpha, *radius, pn.clone()), rho, max_iter)?;
                return Ok(Fitted {
                    fit: Fit::Portfolio {
                        w: r.theta,
                        u: r.u.expect("portfolio sets u"),
                    },
                    empirical: r.nominal_objective,
                    robust: r.robust_objective,
                    variation: r.variation_norm,
                    converged: r.converged,
                });
            }
        };
        Ok(Fitted {
            fit: Fit::Theta(r.theta),
            empirical: r.nominal_objective,
            robust: r.robust_objective,
            variation: r.variation_norm,
            converged: r.converged,
        })
    }

    /// The loss at fitted parameters as a function of a data point.
    fn loss_fn<'a>(&'a self, fit: &'a Fit) -> PointFn<'a> {
        match (&self.config.problem, fit) {
            (ProblemSpec::FixedLoss { loss, .. }, _) => Box::new(move |z| loss.value(z)),
            (ProblemSpec::Newsvendor { h, b, .. }, Fit::Theta(th)) => {
                let f = LossModel::newsvendor(th.clone(), *h, *b);
                Box::new(move |z| f.value(z))
            }
            (ProblemSpec::LinearP1 { mode, base, .. }, Fit::Theta(th)) => {
                let f = LossModel::linear_composite(th.clone(), *base, *mode);
                Box::new(move |z| f.value(z))
            }
            (ProblemSpec::Portfolio { alpha, .. }, Fit::Portfolio { w, u }) => {
                let (alpha, u) = (*alpha, *u);
                Box::new(move |x| {
                    let r = dot(w, x);
                    (r - u) * (r - u) + alpha * r
                })
            }
            _ => unreachable!("fit kind follows the problem kind"),
        }
    }

    /// `‖‖∇_z f‖_*‖_{P_true,2}` at the fitted parameters.
    fn true_grad_rms(&self, fit: &Fit) -> Result<f64> {
        match (&self.config.problem, fit) {
            (ProblemSpec::FixedLoss { loss, norm, .. }, _) => {
                let sq = self
                    .truth
                    .mean(&|z| loss.gradient(z).map_or(f64::NAN, |g| norm.dual_norm(&g).powi(2)));
                if sq.is_nan() {
                    return Err(WdroError::MissingGradient);
                }
                Ok(sq.sqrt())
            }
            (ProblemSpec::Portfolio { alpha, .. }, Fit::Portfolio { w, u }) => {
                let shift = alpha / 2.0 - u;
                let rms = self.truth.mean(&|x| (dot(w, x) + shift).powi(2)).sqrt();
                Ok(2.0 * l2(w) * rms)
            }
            _ => Err(WdroError::MissingGradient),
        }
    }

    /// Robust objective at given parameters on the empirical distribution.
    fn robust_at(&self, pn: &DiscreteDistribution, fit: &Fit, rho: f64) -> Result<(f64, f64)> {
        match (&self.config.problem, fit) {
            (ProblemSpec::FixedLoss { loss, norm, .. }, _) => {
                let e = robust_loss_dual(pn, loss, rho, norm, &self.domain)?;
                Ok((e.robust_loss - e.regularizer, e.robust_loss))
            }
            (ProblemSpec::Newsvendor { h, b, radius, norm }, Fit::Theta(th)) => {
                let p = NewsvendorProblem {
                    h: *h,
                    b: *b,
                    radius: *radius,
                    data: pn.clone(),
                    norm: *norm,
                };
                let f = LossModel::newsvendor(th.clone(), *h, *b);
                Ok((pn.expect(|z| f.value(z)), newsvendor_objective(&p, th, rho).0))
            }
            (ProblemSpec::LinearP1 { mode, base, .. }, Fit::Theta(th)) => {
                let f = LossModel::linear_composite(th.clone(), *base, *mode);
                let e = pn.expect(|z| f.value(z));
                Ok((e, e + rho * base.lipschitz() * l2(th)))
            }
            (ProblemSpec::Portfolio { alpha, .. }, Fit::Portfolio { w, u }) => {
                let e = portfolio_robust_objective(w, *u, *alpha, pn, rho)?;
                Ok((e.nominal, e.value))
            }
            _ => unreachable!("fit kind follows the problem kind"),
        }
    }

    /// The certified upper bound on the true loss at `fit`.
    fn bound(&self, fit: &Fit, empirical: f64, robust: f64) -> Result<f64> {
        if self.config.rule == Rule::Thm3 {
            Ok(empirical + self.rho * self.true_grad_rms(fit)? + self.epsilon)
        } else {
            Ok(robust + self.epsilon)
        }
    }

    fn theta_grid(&self, pn: &DiscreteDistribution) -> Vec<Fit> {
        let m = self.config.theta_grid;
        if m == 0 {
            return Vec::new();
        }
        match &self.config.problem {
            ProblemSpec::Newsvendor { radius, .. } | ProblemSpec::LinearP1 { radius, .. } => {
                let d = pn.dim() - 1;
                let per_axis = ((m as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
                let dual = match &self.config.problem {
                    ProblemSpec::Newsvendor { norm, .. } => *norm,
                    _ => NormSpec::euclidean(1.0),
                };
                let axis: Vec<f64> = (0..per_axis)
                    .map(|k| -radius + 2.0 * radius * k as f64 / (per_axis - 1) as f64)
                    .collect();
                let mut pts = vec![Vec::new()];
                for _ in 0..d {
                    pts = pts
                        .into_iter()
                        .flat_map(|p: Vec<f64>| {
                            axis.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                pts.into_iter()
                    .filter(|th| theta_norm(&dual, th) <= radius * (1.0 + 1e-12))
                    .map(Fit::Theta)
                    .collect()
            }
            ProblemSpec::Portfolio { alpha, radius } => {
                let half = (radius * radius - 0.5).max(0.0).sqrt();
                let problem = portfolio_problem(*alpha, *radius, pn.clone());
                (0..m)
                    .map(|k| {
                        let s = if m == 1 {
                            0.0
                        } else {
                            -half + 2.0 * half * k as f64 / (m - 1) as f64
                        };
                        let w = vec![0.5 + s / 2f64.sqrt(), 0.5 - s / 2f64.sqrt()];
                        let center = problem.data.expect(|x| dot(&w, x));
                        let (u, _) = minimize_convex_line(
                            |u| {
                                portfolio_robust_objective(&w, u, *alpha, &problem.data, self.rho)
                                    .map(|e| e.value)
                                    .unwrap_or(f64::INFINITY)
                            },
                            center,
                            1.0,
                        );
                        Fit::Portfolio { w, u }
                    })
                    .collect()
            }
            ProblemSpec::FixedLoss { .. } => Vec::new(),
        }
    }

    fn violated(&self, true_loss: f64, se: f64, bound: f64) -> bool {
        true_loss - 3.0 * se > bound + VIOLATION_TOL * (1.0 + true_loss.abs())
    }

    fn replicate(&self, r: usize) -> Result<ReplicationRecord> {
        let seed = mix_seed(self.config.seed, r as u64);
        let mut rng = rng_for(self.config.seed, r as u64);
        let pn = empirical(self.config.generator.sample(&mut rng, self.config.n as usize))?;
        let fitted = self.fit(&pn, self.rho)?;
        let bound = self.bound(&fitted.fit, fitted.empirical, fitted.robust)?;
        let loss = self.loss_fn(&fitted.fit);
        let (true_loss, se) = self.truth.mean_se(&*loss);
        let violated = self.violated(true_loss, se, bound);
        let grid = self.theta_grid(&pn);
        let uniform_violated = if grid.is_empty() {
            None
        } else {
            let mut any = false;
            for fit in &grid {
                let (emp, rob) = self.robust_at(&pn, fit, self.rho)?;
                let b = self.bound(fit, emp, rob)?;
                let (tl, tse) = self.truth.mean_se(&*self.loss_fn(fit));
                if self.violated(tl, tse, b) {
                    any = true;
                    break;
                }
            }
            Some(any || violated)
        };
        let u_hat = fitted.fit.u();
        Ok(ReplicationRecord {
            replication: r,
            seed,
            rho: self.rho,
            residual: self.epsilon,
            empirical_loss: fitted.empirical,
            robust_bound: bound,
            true_loss,
            true_loss_se: se,
            gap: bound - true_loss,
            violated,
            uniform_violated,
            u_hat,
            u_within_bound: match (u_hat, self.u_bound) {
                (Some(u), Some(b)) => Some(u.abs() <= b),
                _ => None,
            },
            theta: fitted.fit.theta(),
            converged: fitted.converged,
        })
    }
}

/// Norm of θ in the parameter ball: the dual of the ground norm on features.
fn theta_norm(norm: &NormSpec, theta: &[f64]) -> f64 {
    let ground = match norm.ground {
        GroundNorm::ProductXOnly => GroundNorm::Euclidean,
        g => g,
    };
    NormSpec { p: 1.0, ground }.dual_norm(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub rho: f64,
    /// Additive residual `ε` included in `robust_bound`.
    pub residual: f64,
    pub empirical_loss: f64,
    pub robust_bound: f64,
    pub true_loss: f64,
    pub true_loss_se: f64,
    /// `robust_bound − true_loss`.
    pub gap: f64,
    pub violated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_violated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_within_bound: Option<bool>,
    pub theta: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    /// Replications that produced a record.
    pub completed: usize,
    pub failed: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub wilson: WilsonInterval,
    pub prob_multiplier: f64,
    /// `prob_multiplier·e^{−t}`, not clipped at 1.
    pub budget: f64,
    /// `violation_rate ≤ budget + 3·wilson.half_width`.
    pub within_budget: bool,
    /// Fewer than 100 replications make the rate too noisy to assert on.
    pub assertable: bool,
    pub mean_gap: f64,
    pub min_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_violations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bound_exceeded: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Exact,
    MonteCarlo,
}

impl TailMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TailMethod::Exact => "exact",
            TailMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCell {
    pub n: u64,
    pub epsilon: f64,
    /// Frequency of `E_{P_n}[f] − E_{P_true}[f] < −ε`.
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub method: TailMethod,
    /// `empirical > bound + 3·std_error`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub rho: f64,
    pub mean_empirical_loss: f64,
    pub mean_robust_objective: f64,
    pub mean_variation: f64,
    pub mean_true_loss: f64,
    pub true_loss_se: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffTable {
    pub rows: Vec<TradeoffRow>,
    /// Radius with the smallest mean true loss.
    pub argmin_rho: f64,
    /// The minimizer is neither the first nor the last radius of the grid.
    pub interior_minimum: bool,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    /// The configuration with all defaults materialized.
    pub config: ExperimentConfig,
    pub calibration_inputs: CalibrationInputs,
    pub calibration: CalibrationResult,
    pub coverage: CoverageSummary,
    pub replications: Vec<ReplicationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<ReplicationFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail_table: Vec<TailCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tradeoff: Option<TradeoffTable>,
}

fn summarize(prep: &Prepared, records: &[ReplicationRecord], failed: usize) -> CoverageSummary {
    let completed = records.len();
    let violations = records.iter().filter(|r| r.violated).count();
    let rate = if completed == 0 {
        0.0
    } else {
        violations as f64 / completed as f64
    };
    let wilson = wilson_interval(violations, completed, WILSON_Z);
    let m = prep.calibration.prob_multiplier;
    let budget = m * (-prep.config.t).exp();
    let gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    let uniform = records
        .iter()
        .any(|r| r.uniform_violated.is_some())
        .then(|| records.iter().filter(|r| r.uniform_violated == Some(true)).count());
    let exceeded = prep
        .u_bound
        .map(|_| records.iter().filter(|r| r.u_within_bound == Some(false)).count());
    CoverageSummary {
        completed,
        failed,
        violations,
        violation_rate: rate,
        wilson,
        prob_multiplier: m,
        budget,
        within_budget: rate <= budget + 3.0 * wilson.half_width,
        assertable: completed >= 100,
        mean_gap: if completed == 0 {
            f64::NAN
        } else {
            gaps.iter().sum::<f64>() / completed as f64
        },
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        uniform_violations: uniform,
        u_bound: prep.u_bound,
        u_bound_exceeded: exceeded,
    }
}

fn coverage_with(prep: &Prepared, exec: Execution) -> (Vec<ReplicationRecord>, Vec<ReplicationFailure>) {
    let outcomes = map_range(exec, prep.config.replications, |r| prep.replicate(r));
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ReplicationFailure {
                replication: r,
                error: format!("{}: {e}", e.name()),
            }),
        }
    }
    (records, failures)
}

/// Replicated coverage experiment; solver errors are recorded per replication
/// and excluded from the rate.
pub fn run_coverage(config: &ExperimentConfig, exec: Execution) -> Result<CertReport> {
    let prep = prepare(config)?;
    let (records, failures) = coverage_with(&prep, exec);
    let coverage = summarize(&prep, &records, failures.len());
    Ok(CertReport {
        calibration_inputs: prep.inputs.clone(),
        calibration: prep.calibration.clone(),
        config: prep.config.clone(),
        coverage,
        replications: records,
        failures,
        tail_table: Vec::new(),
        tradeoff: None,
    })
}

/// Distribution of the count of atom 0 in `n` draws, by dynamic programming.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, m) in pmf.iter().enumerate() {
            next[k + 1] += m * p;
            next[k] += m * (1.0 - p);
        }
        pmf = next;
    }
    pmf
}

/// Lower-tail frequencies of `E_{P_n}[f] − E_{P_true}[f]` next to the concentration bound.
pub fn run_tail_table(raw: &ExperimentConfig, epsilons: &[f64], ns: &[u64], exec: Execution) -> Result<Vec<TailCell>> {
    let config = raw.resolved()?;
    let (p_true, loss, norm) = tail_problem(&config)?;
    let domain = config.fixed_domain();
    let tau = TpConstant {
        p: norm.p,
        tau: config.tau_value(),
        provenance: if raw.tau.is_some() {
            TauProvenance::UserSupplied
        } else {
            TauProvenance::BoundedSupport
        },
        warning: None,
    };
    let support = p_true.support();
    let mean = support.expect(|z| loss.value(z));
    let draws = config
        .tail
        .as_ref()
        .and_then(|t| t.draws)
        .unwrap_or(config.replications);
    let mut cells = Vec::with_capacity(epsilons.len() * ns.len());
    let mut index = 0u64;
    for &n in ns {
        for &eps in epsilons {
            let bound = theorem1_tail_bound(n, eps, loss, p_true, &tau, &norm, &domain)?;
            let below = |m: f64| m - mean < -eps;
            let (empirical, se, method) = if n == 0 {
                (0.0, 0.0, TailMethod::Exact)
            } else if support.len() <= 2 && n <= EXACT_TAIL_MAX_N {
                let f: Vec<f64> = support.atoms().iter().map(|z| loss.value(z)).collect();
                let (f0, f1) = (f[0], *f.last().expect("nonempty"));
                let pmf = binomial_pmf(n, support.weights()[0]);
                let nf = n as f64;
                let prob: f64 = pmf
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| below((*k as f64 * f0 + (nf - *k as f64) * f1) / nf))
                    .map(|(_, m)| m)
                    .sum();
                (prob, 0.0, TailMethod::Exact)
            } else {
                let stream = mix_seed(config.seed, TAIL_STREAM ^ index);
                let hits = map_range(exec, draws, |r| {
                    let mut rng = rng_for(stream, r as u64);
                    let xs = config.generator.sample(&mut rng, n as usize);
                    let m = xs.iter().map(|z| loss.value(z)).sum::<f64>() / n as f64;
                    below(m)
                });
                let k = hits.iter().filter(|h| **h).count() as f64;
                let p = k / draws as f64;
                (p, (p * (1.0 - p) / draws as f64).sqrt(), TailMethod::MonteCarlo)
            };
            cells.push(TailCell {
                n,
                epsilon: eps,
                empirical,
                std_error: se,
                bound,
                method,
                flagged: empirical > bound + 3.0 * se,
            });
            index += 1;
        }
    }
    Ok(cells)
}

/// Mean empirical loss, variation and true loss of the fitted parameters per radius.
/// Every radius sees the same replicated samples.
pub fn run_tradeoff_curve(config: &ExperimentConfig, rhos: &[f64], exec: Execution) -> Result<TradeoffTable> {
    let prep = prepare(config)?;
    if matches!(prep.config.problem, ProblemSpec::FixedLoss { .. }) {
        return Err(WdroError::InvalidInput(
            "the trade-off curve needs a problem with parameters".into(),
        ));
    }
    if rhos.is_empty() {
        return Err(WdroError::InvalidInput("empty radius grid".into()));
    }
    let reps = prep
        .config
        .tradeoff
        .as_ref()
        .and_then(|t| t.replications)
        .unwrap_or(prep.config.replications);
    let per_rep = map_range(exec, reps, |r| -> Result<Vec<(f64, f64, f64, f64)>> {
        let mut rng = rng_for(prep.config.seed, r as u64);
        let pn = empirical(prep.config.generator.sample(&mut rng, prep.config.n as usize))?;
        rhos.iter()
            .map(|&rho| {
                let f = prep.fit(&pn, rho)?;
                let truth = prep.truth.mean(&*prep.loss_fn(&f.fit));
                Ok((f.empirical, f.robust, f.variation, truth))
            })
            .collect()
    });
    let ok: Vec<Vec<(f64, f64, f64, f64)>> = per_rep.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let failed = per_rep.len() - ok.len();
    let k = ok.len().max(1) as f64;
    let rows: Vec<TradeoffRow> = rhos
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let col: Vec<(f64, f64, f64, f64)> = ok.iter().map(|v| v[j]).collect();
            let mean = |sel: fn(&(f64, f64, f64, f64)) -> f64| col.iter().map(sel).sum::<f64>() / k;
            let mt = mean(|c| c.3);
            let var = col.iter().map(|c| (c.3 - mt).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            TradeoffRow {
                rho,
                mean_empirical_loss: mean(|c| c.0),
                mean_robust_objective: mean(|c| c.1),
                mean_variation: mean(|c| c.2),
                mean_true_loss: mt,
                true_loss_se: (var / k).sqrt(),
                replications: ok.len(),
            }
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_true_loss.total_cmp(&b.1.mean_true_loss))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(TradeoffTable {
        argmin_rho: rows[best].rho,
        interior_minimum: best > 0 && best + 1 < rows.len(),
        rows,
        failed,
    })
}

/// Coverage plus whichever tail table and trade-off curve the config requests.
pub fn certify(config: &ExperimentConfig, exec: Execution) -> Result<CertReport> {
    let mut report = run_coverage(config, exec)?;
    if let Some(tail) = &config.tail {
        report.tail_table = run_tail_table(config, &tail.epsilons, &tail.ns, exec)?;
    }
    if let Some(tr) = &config.tradeoff {
        report.tradeoff = Some(run_tradeoff_curve(config, &tr.rhos, exec)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "generator": {"kind": "finite_discrete", "distribution": {"atoms": [[0.0], [1.0]]}},
                "problem": {"kind": "fixed_loss", "loss": {"family": "linear", "theta": [1.0]},
                            "norm": {"p": 1.0}},
                "rule": "thm1",
                "n": 50,
                "replications": 200,
                "t": 2.0,
                "seed": 7
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn resolved_defaults() {
        let c = two_point_config().resolved().unwrap();
        assert_eq!(c.tau, Some(2.0));
        assert_eq!(c.eval, Some(TrueLossEval::ExactDiscrete));
        assert_eq!(c.max_iter, Some(DEFAULT_MAX_ITER));
    }

    #[test]
    fn point_mass_never_violates() {
        let mut c = two_point_config();
        c.generator = Generator::FiniteDiscrete {
            distribution: DiscreteDistribution::point_mass(vec![0.3]).unwrap(),
        };
        let r = run_coverage(&c, Execution::Sequential).unwrap();
        assert_eq!(r.coverage.violations, 0);
        assert!(r.replications.iter().all(|x| x.empirical_loss == x.true_loss));
    }

    #[test]
    fn two_point_spot_value() {
        let c = two_point_config();
        let cells = run_tail_table(&c, &[0.3, 0.6], &[10, 0], Execution::Sequential).unwrap();
        assert_eq!(cells[0].empirical, 11.0 / 1024.0);
        assert!((cells[0].bound - (-0.45f64).exp()).abs() < 1e-9);
        assert_eq!((cells[1].empirical, cells[1].bound), (0.0, 0.0));
        assert_eq!(cells[2].bound, 1.0);
        assert!(cells.iter().all(|c| !c.flagged));
    }

    #[test]
    fn rule_and_order_must_match() {
        let mut c = two_point_config();
        c.rule = Rule::Thm3;
        assert!(c.validate().is_err());
    }
}
