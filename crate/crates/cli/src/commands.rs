use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wdro::calibration::{calibrate as run_rule, CalibrationInputs, CalibrationResult, Rule};
use wdro::certify::{self as cert, write_coverage_csv, write_tail_csv, write_tradeoff_csv, ExperimentConfig};
use wdro::concentration::{rate_function as rate, tail_bound, tau_bounded, RateValue, TpConstant};
use wdro::jsonfmt::fmt_f64;
use wdro::models::{
    solve_linear_p1, solve_linear_p2, solve_newsvendor, solve_portfolio, LinearPredictionProblem, NewsvendorProblem,
    PortfolioProblem, SolveResult, DEFAULT_MAX_ITER, DEFAULT_RESTARTS,
};
use wdro::regularizer::{gradient_surrogate, lipschitz_surrogate, GradientSurrogate};
use wdro::{
    expectation, par, robust_loss_dual, robust_loss_oracle, BaseLoss, DiscreteDistribution, DomainSpec, Execution,
    LossModel, NormSpec, PredictionMode, RobustEvalResult, WdroError,
};

use crate::output::Outputs;
use crate::{seed_override, CliError, Common};

const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(v: u32) -> Result<(), CliError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(WdroError::InvalidInput(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})")).into())
    }
}

fn load<T: DeserializeOwned>(common: &Common) -> Result<(T, PathBuf), CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required for this subcommand".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| WdroError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((serde_json::from_str(&text)?, base))
}

fn csv_bytes(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w).map_err(WdroError::from)?;
    w.into_inner()
        .map_err(|e| CliError::Core(WdroError::Io(e.into_error())))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A CSV sample on disk. Relative paths resolve against the config's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub csv: PathBuf,
    /// Last column is a probability weight rather than a coordinate.
    #[serde(default)]
    pub weighted: bool,
}

fn load_data(
    inline: &Option<DiscreteDistribution>,
    file: &Option<DataFile>,
    base: &Path,
) -> Result<DiscreteDistribution, CliError> {
    match (inline, file) {
        (Some(d), None) => Ok(d.clone()),
        (None, Some(f)) => {
            let path = if f.csv.is_absolute() {
                f.csv.clone()
            } else {
                base.join(&f.csv)
            };
            let reader = fs::File::open(&path)
                .map_err(|e| WdroError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            Ok(if f.weighted {
                DiscreteDistribution::read_weighted_csv(reader)?
            } else {
                DiscreteDistribution::read_sample_csv(reader)?
            })
        }
        _ => Err(WdroError::InvalidInput("give exactly one of `distribution` and `data`".into()).into()),
    }
}

#[derive(Serialize)]
struct Report<'a, C, R> {
    config: &'a C,
    result: &'a R,
}

// ---- eval ----

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalChoice {
    #[default]
    Dual,
    Oracle,
    Lipschitz,
    Gradient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    #[serde(default = "schema_version")]
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<DiscreteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<DataFile>,
    loss: LossModel,
    rho: f64,
    norm: NormSpec,
    #[serde(default)]
    domain: DomainSpec,
    #[serde(default)]
    method: EvalChoice,
    /// Also run the primal grid oracle (finite-grid domains only).
    #[serde(default)]
    check_oracle: bool,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    nominal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    robust: Option<RobustEvalResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    surrogate: Option<GradientSurrogate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<f64>,
}

pub fn eval(common: &Common) -> Result<(), CliError> {
    let (config, base): (EvalConfig, _) = load(common)?;
    check_schema(config.schema_version)?;
    let q = load_data(&config.distribution, &config.data, &base)?;
    let (f, rho, norm, domain) = (&config.loss, config.rho, &config.norm, &config.domain);
    let mut out = EvalOutput {
        nominal: expectation(&q, f),
        robust: None,
        surrogate: None,
        oracle: None,
    };
    match config.method {
        EvalChoice::Dual => out.robust = Some(robust_loss_dual(&q, f, rho, norm, domain)?),
        EvalChoice::Lipschitz => out.robust = Some(lipschitz_surrogate(&q, f, rho, norm)?),
        EvalChoice::Gradient => out.surrogate = Some(gradient_surrogate(&q, f, rho, norm)?),
        EvalChoice::Oracle => {}
    }
    if config.method == EvalChoice::Oracle || config.check_oracle {
        out.oracle = Some(robust_loss_oracle(&q, f, rho, norm, domain)?);
    }

    let mut files = Outputs::default();
    if common.format.json() {
        files.json(
            "eval.json",
            &Report {
                config: &config,
                result: &out,
            },
        )?;
    }
    if common.format.csv() {
        let body = csv_bytes(|w| {
            w.write_record([
                "nominal",
                "robust_loss",
                "regularizer",
                "lambda_opt",
                "boundary",
                "method",
                "exact",
                "surrogate_center",
                "surrogate_halfwidth",
                "oracle",
            ])?;
            let r = out.robust.as_ref();
            w.write_record([
                fmt_f64(out.nominal),
                opt(r.map(|r| r.robust_loss)),
                opt(r.map(|r| r.regularizer)),
                opt(r.and_then(|r| r.lambda_opt)),
                r.map(|r| r.boundary.to_string()).unwrap_or_default(),
                r.map(|r| format!("{:?}", r.method)).unwrap_or_default(),
                r.map(|r| r.exact.to_string()).unwrap_or_default(),
                opt(out.surrogate.map(|s| s.center)),
                opt(out.surrogate.map(|s| s.halfwidth)),
                opt(out.oracle),
            ])
        })?;
        files.csv("eval.csv", body);
    }
    files.emit(common)
}

// ---- solve ----

fn euclid_p1() -> NormSpec {
    NormSpec::euclidean(1.0)
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SolveProblem {
    Newsvendor {
        h: f64,
        b: f64,
        radius: f64,
        #[serde(default = "euclid_p1")]
        norm: NormSpec,
    },
    LinearP1 {
        mode: PredictionMode,
        base: BaseLoss,
        radius: f64,
    },
    LinearP2 {
        mode: PredictionMode,
        base: BaseLoss,
        radius: f64,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Portfolio {
        alpha: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    #[serde(default = "schema_version")]
    schema_version: u32,
    problem: SolveProblem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<DiscreteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<DataFile>,
    rho: f64,
    #[serde(default)]
    max_iter: Option<usize>,
    /// Seeds the random restarts of the `p = 2` linear solver.
    #[serde(default)]
    seed: u64,
}

pub fn solve(common: &Common) -> Result<(), CliError> {
    let (mut config, base): (SolveConfig, _) = load(common)?;
    check_schema(config.schema_version)?;
    if let Some(s) = seed_override(common.seed)? {
        config.seed = s;
    }
    let max_iter = *config.max_iter.get_or_insert(DEFAULT_MAX_ITER);
    let data = load_data(&config.distribution, &config.data, &base)?;
    let rho = config.rho;
    let result: SolveResult = match config.problem.clone() {
        SolveProblem::Newsvendor { h, b, radius, norm } => solve_newsvendor(
            &NewsvendorProblem {
                h,
                b,
                radius,
                data,
                norm,
            },
            rho,
            max_iter,
        )?,
        SolveProblem::LinearP1 { mode, base, radius } => solve_linear_p1(
            &LinearPredictionProblem {
                mode,
                base,
                radius,
                data,
            },
            rho,
            max_iter,
        )?,
        SolveProblem::LinearP2 {
            mode,
            base,
            radius,
            restarts,
        } => solve_linear_p2(
            &LinearPredictionProblem {
                mode,
                base,
                radius,
                data,
            },
            rho,
            max_iter,
            restarts,
            config.seed,
        )?,
        SolveProblem::Portfolio { alpha, radius } => {
            solve_portfolio(&PortfolioProblem { alpha, radius, data }, rho, max_iter)?
        }
    };
    if common.verbose {
        for w in &result.warnings {
            eprintln!("warning: {w}");
        }
    }

    let mut files = Outputs::default();
    if common.format.json() {
        files.json(
            "solve.json",
            &Report {
                config: &config,
                result: &result,
            },
        )?;
    }
    if common.format.csv() {
        let body = csv_bytes(|w| {
            w.write_record([
                "robust_objective",
                "nominal_objective",
                "regularizer_used",
                "variation_norm",
                "u",
                "iterations",
                "converged",
                "theta",
            ])?;
            w.write_record([
                fmt_f64(result.robust_objective),
                fmt_f64(result.nominal_objective),
                fmt_f64(result.regularizer_used),
                fmt_f64(result.variation_norm),
                opt(result.u),
                result.iterations.to_string(),
                result.converged.to_string(),
                result.theta.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
            ])
        })?;
        files.csv("solve.csv", body);
    }
    files.emit(common)
}

// ---- calibrate ----

/// Direct inputs for `calibrate`; each overrides the config when given.
#[derive(Args, Debug, Clone, Default)]
pub struct CalibrateFlags {
    /// thm1, cor2, cor3, cor4, cor5, thm3, cor6 or newsvendor.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub r_star: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rad_g: Option<f64>,
    #[arg(long)]
    pub rad_f: Option<f64>,
    #[arg(long)]
    pub lip_ratio: Option<f64>,
    #[arg(long)]
    pub l_ell: Option<f64>,
    #[arg(long)]
    pub e_kappa: Option<f64>,
    #[arg(long)]
    pub kappa2_rms: Option<f64>,
    #[arg(long)]
    pub cover_log: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateConfig {
    #[serde(default = "schema_version")]
    schema_version: u32,
    rule: Option<Rule>,
    #[serde(default)]
    inputs: CalibrationInputs,
}

impl CalibrateFlags {
    fn apply(&self, config: &mut CalibrateConfig) -> Result<(), CliError> {
        if let Some(r) = &self.rule {
            let rule = serde_json::from_value(serde_json::Value::String(r.to_ascii_lowercase()))
                .map_err(|_| CliError::Usage(format!("unknown rule {r:?}")))?;
            config.rule = Some(rule);
        }
        let i = &mut config.inputs;
        if let Some(v) = self.n {
            i.n = v;
        }
        if let Some(v) = self.t {
            i.t = v;
        }
        if let Some(v) = self.tau {
            i.tau = v;
        }
        let optional = [
            (&mut i.r_star, self.r_star),
            (&mut i.kappa1, self.kappa1),
            (&mut i.kappa2, self.kappa2),
            (&mut i.hbar, self.hbar),
            (&mut i.sigma, self.sigma),
            (&mut i.rad_g, self.rad_g),
            (&mut i.rad_f, self.rad_f),
            (&mut i.lip_ratio, self.lip_ratio),
            (&mut i.l_ell, self.l_ell),
            (&mut i.e_kappa, self.e_kappa),
            (&mut i.kappa2_rms, self.kappa2_rms),
            (&mut i.cover_log, self.cover_log),
            (&mut i.h, self.h),
            (&mut i.b, self.b),
        ];
        for (slot, flag) in optional {
            if flag.is_some() {
                *slot = flag;
            }
        }
        Ok(())
    }
}

pub fn calibrate(common: &Common, flags: &CalibrateFlags) -> Result<(), CliError> {
    let mut config = match &common.config {
        Some(_) => load::<CalibrateConfig>(common)?.0,
        None => CalibrateConfig {
            schema_version: SCHEMA_VERSION,
            rule: None,
            inputs: CalibrationInputs::default(),
        },
    };
    check_schema(config.schema_version)?;
    flags.apply(&mut config)?;
    let rule = config
        .rule
        .ok_or_else(|| CliError::Usage("a rule is required (--rule or `rule` in the config)".into()))?;
    let result: CalibrationResult = run_rule(rule, &config.inputs)?;

    let mut files = Outputs::default();
    if common.format.json() {
        files.json(
            "calibration.json",
            &Report {
                config: &config,
                result: &result,
            },
        )?;
    }
    if common.format.csv() {
        let body = csv_bytes(|w| {
            w.write_record(["term", "value"])?;
            let head = [
                ("rho", Some(result.rho)),
                ("epsilon", Some(result.epsilon)),
                ("rho_tilde", result.rho_tilde),
                ("epsilon_tilde", result.epsilon_tilde),
                ("prob_multiplier", Some(result.prob_multiplier)),
                ("failure_budget", Some(result.failure_budget)),
            ];
            for (k, v) in head {
                if let Some(v) = v {
                    w.write_record([k.to_string(), fmt_f64(v)])?;
                }
            }
            for (k, v) in &result.terms {
                w.write_record([k.clone(), fmt_f64(*v)])?;
            }
            Ok(())
        })?;
        files.csv("calibration.csv", body);
    }
    files.emit(common)
}

// ---- certify ----

pub fn certify(common: &Common) -> Result<(), CliError> {
    let (raw, _): (ExperimentConfig, _) = load(common)?;
    let mut raw = raw;
    if let Some(s) = seed_override(common.seed)? {
        raw.seed = s;
    }
    if common.verbose {
        eprintln!("certify: seed {} over {} replications", raw.seed, raw.replications);
    }
    let report = par::with_jobs(common.jobs, || cert::certify(&raw, Execution::Parallel))?;
    if common.verbose {
        let c = &report.coverage;
        eprintln!(
            "certify: {} violations in {} replications (budget {:.3e})",
            c.violations, c.completed, c.budget
        );
    }

    let mut files = Outputs::default();
    if common.format.json() {
        files.json("report.json", &report)?;
    }
    if common.format.csv() {
        let mut body = Vec::new();
        write_coverage_csv(&mut body, &report)?;
        files.csv("coverage.csv", body);
        if report.config.tail.is_some() {
            let mut body = Vec::new();
            write_tail_csv(&mut body, &report.tail_table)?;
            files.csv("tail.csv", body);
        }
        if let Some(t) = &report.tradeoff {
            let mut body = Vec::new();
            write_tradeoff_csv(&mut body, t)?;
            files.csv("tradeoff.csv", body);
        }
    }
    files.emit(common)
}

// ---- rate-function ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateConfig {
    #[serde(default = "schema_version")]
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<DiscreteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<DataFile>,
    loss: LossModel,
    norm: NormSpec,
    /// Finite grid to transport over; the support of `P` when absent.
    #[serde(default)]
    domain: Option<DomainSpec>,
    epsilons: Vec<f64>,
    /// Sample size for the tail bounds; rates only when absent.
    #[serde(default)]
    n: Option<u64>,
    /// Transport constant; `2·diam(domain)²` when absent (`p = 1` only).
    #[serde(default)]
    tau: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RateRow {
    epsilon: f64,
    /// `I_p(ε; f)`, governing upward deviations of the empirical mean.
    rate: RateValue,
    t_opt: Option<f64>,
    /// `I_p(ε; −f)`, governing downward deviations.
    rate_lower: RateValue,
    t_opt_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper_tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_tail_bound: Option<f64>,
}

fn rate_str(v: RateValue) -> String {
    match v {
        RateValue::Finite(x) => fmt_f64(x),
        RateValue::Infinite => "inf".into(),
    }
}

pub fn rate_function(common: &Common) -> Result<(), CliError> {
    let (mut config, base): (RateConfig, _) = load(common)?;
    check_schema(config.schema_version)?;
    let p_true = load_data(&config.distribution, &config.data, &base)?;
    if config.epsilons.is_empty() {
        return Err(WdroError::InvalidInput("`epsilons` is empty".into()).into());
    }
    let domain = config
        .domain
        .get_or_insert_with(|| DomainSpec::FiniteGrid {
            points: p_true.support().atoms().to_vec(),
        })
        .clone();
    let tau: Option<TpConstant> = match (config.n, config.tau) {
        (None, _) => None,
        (Some(_), Some(t)) => Some(TpConstant::user(config.norm.p, t)?),
        (Some(_), None) if config.norm.p == 1.0 => {
            let t = tau_bounded(&domain, &config.norm)?;
            config.tau = Some(t.tau);
            Some(t)
        }
        (Some(_), None) => {
            return Err(WdroError::InvalidInput("`tau` is required for tail bounds when p > 1".into()).into());
        }
    };
    let negated = config.loss.negated();
    let rows = config
        .epsilons
        .iter()
        .map(|&eps| {
            let up = rate(&config.loss, &p_true, eps, &config.norm, &domain)?;
            let down = rate(&negated, &p_true, eps, &config.norm, &domain)?;
            let bounds = match (config.n, &tau) {
                (Some(n), Some(tau)) => (Some(tail_bound(n, up.value, tau)), Some(tail_bound(n, down.value, tau))),
                _ => (None, None),
            };
            Ok(RateRow {
                epsilon: eps,
                rate: up.value,
                t_opt: up.t_opt,
                rate_lower: down.value,
                t_opt_lower: down.t_opt,
                upper_tail_bound: bounds.0,
                lower_tail_bound: bounds.1,
            })
        })
        .collect::<Result<Vec<_>, WdroError>>()?;

    let mut files = Outputs::default();
    if common.format.json() {
        files.json(
            "rate_function.json",
            &Report {
                config: &config,
                result: &rows,
            },
        )?;
    }
    if common.format.csv() {
        let body = csv_bytes(|w| {
            w.write_record([
                "epsilon",
                "rate",
                "t_opt",
                "rate_lower",
                "t_opt_lower",
                "upper_tail_bound",
                "lower_tail_bound",
            ])?;
            for r in &rows {
                w.write_record([
                    fmt_f64(r.epsilon),
                    rate_str(r.rate),
                    opt(r.t_opt),
                    rate_str(r.rate_lower),
                    opt(r.t_opt_lower),
                    opt(r.upper_tail_bound),
                    opt(r.lower_tail_bound),
                ])?;
            }
            Ok(())
        })?;
        files.csv("rate_function.csv", body);
    }
    files.emit(common)
}
