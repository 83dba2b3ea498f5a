//! Command-line front end: experiment configs, the `simulate`, `converge` and
//! `validate` subcommands, and their CSV outputs.
//!
//! Configs are TOML:
//!
//! ```toml
//! output_dir = "out"            # optional
//!
//! [model]
//! name = "point_delay_linear"
//! params = { a = 1.5, b = 0.1, delay = 1.0, theta_scale = 1.0 }
//!
//! [experiment]
//! horizon = 2.0
//! k_list = [4, 8, 16, 32]
//! substeps = 8                  # r, sub-steps per gap interval
//! fine_steps = 2048             # optional: hold k * r at this value instead
//! samples = 500
//! seed = 1
//! reference_k = 256             # optional, default 8 * max(k_list)
//! oracle = false                # compare against a closed form instead
//! variant = "standard"          # or "alternative"
//!
//! [simulate]                    # optional
//! k = 64                        # default: last entry of k_list
//! paths = 1                     # default: samples
//!
//! [converge]                    # optional
//! expect_slope = [0.4, 0.65]
//!
//! [validate]                    # optional, every key has a default
//! gamma_list = [1, 2]
//! lags = [0.25, 0.125, 0.0625, 0.03125]
//! bounds = { moment_variation = 1.5 }
//! ```
//!
//! The output directory is taken from `--out`, then the `MEMGAP_OUT_DIR`
//! environment variable, then `output_dir`, then the working directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    convergence_rate, dde_oracle, gbm_exact, holder_check, increment_moment_check, martingale_inequality_check,
    moment_bound_check, path_inputs, strong_errors, ExactSolution, Exec, Integrand, MartingaleSetup, McOptions,
    Reference, Substeps,
};
use crate::error::{Error, Result};
use crate::models::{builtin_model, probe_lipschitz, BuiltinModel, ModelKind, ParamMap, SfdeModel};
use crate::scheme::{solve, SchemeConfig, Variant};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "MEMGAP_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "memgap",
    version,
    about = "Memory-gap simulation of stochastic functional differential equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write sample paths of x^k, one CSV per path.
    Simulate(RunArgs),
    /// Estimate strong errors over k_list and fit the order.
    Converge(RunArgs),
    /// Run the property checks and write one row per check.
    Validate(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Reduce Monte Carlo statistics sequentially in path order.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: ParamMap,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Standard,
    Alternative,
}

fn default_substeps() -> usize {
    8
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub horizon: f64,
    pub k_list: Vec<usize>,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_steps: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_k: Option<usize>,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub variant: VariantName,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_slope: Option<[f64; 2]>,
}

fn default_gammas() -> Vec<u32> {
    vec![1, 2]
}

fn default_lags() -> Vec<f64> {
    vec![0.25, 0.125, 0.0625, 0.03125]
}

fn default_orders() -> Vec<u32> {
    vec![1, 2]
}

fn default_probes() -> usize {
    64
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Gap size for the increment and Hölder checks; default the last entry
    /// of `k_list`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_gammas")]
    pub gamma_list: Vec<u32>,
    #[serde(default = "default_lags")]
    pub lags: Vec<f64>,
    #[serde(default = "default_orders")]
    pub martingale_orders: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub martingale_samples: Option<usize>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Replaces the bound of the named check.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, f64>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            k: None,
            gamma_list: default_gammas(),
            lags: default_lags(),
            martingale_orders: default_orders(),
            martingale_samples: None,
            probes: default_probes(),
            bounds: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config; errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    fn check(&self) -> Result<()> {
        let e = &self.experiment;
        if !(e.horizon > 0.0 && e.horizon.is_finite()) {
            return Err(Error::config(format!(
                "experiment.horizon must be positive, got {}",
                e.horizon
            )));
        }
        if e.k_list.is_empty() {
            return Err(Error::config("experiment.k_list must not be empty"));
        }
        if e.k_list.contains(&0) {
            return Err(Error::config("experiment.k_list entries must be positive"));
        }
        if e.samples == 0 {
            return Err(Error::config("experiment.samples must be positive"));
        }
        if e.substeps == 0 || e.fine_steps == Some(0) {
            return Err(Error::config("experiment.substeps and fine_steps must be positive"));
        }
        builtin_model(&self.model.name, &self.model.params)?;
        Ok(())
    }

    pub fn model(&self) -> Result<BuiltinModel> {
        builtin_model(&self.model.name, &self.model.params)
    }

    pub fn substeps(&self) -> Substeps {
        match self.experiment.fine_steps {
            Some(n) => Substeps::FineGrid(n),
            None => Substeps::Fixed(self.experiment.substeps),
        }
    }

    pub fn reference_k(&self) -> usize {
        let max = self.experiment.k_list.iter().copied().max().unwrap_or(1);
        self.experiment.reference_k.unwrap_or(8 * max)
    }

    fn variant(&self) -> Variant {
        match self.experiment.variant {
            VariantName::Standard => Variant::Standard,
            VariantName::Alternative => Variant::Alternative,
        }
    }

    fn last_k(&self) -> usize {
        *self.experiment.k_list.last().expect("k_list checked non-empty")
    }

    fn options(&self, exec: Exec) -> McOptions {
        McOptions::new(self.experiment.samples, self.experiment.horizon, self.experiment.seed).with_exec(exec)
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PropertyFailure,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::PropertyFailure => 1,
        }
    }
}

/// Resolves the output directory: `flag`, then the environment, then the
/// config, then `.`.
pub fn output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

type Runner = fn(&ExperimentConfig, &Path, Exec) -> Result<Outcome>;

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let (args, run): (&RunArgs, Runner) = match &cli.command {
        Command::Simulate(a) => (a, run_simulate),
        Command::Converge(a) => (a, run_converge),
        Command::Validate(a) => (a, run_validate),
    };
    if args.workers == 0 {
        return Err(Error::config("--workers must be at least 1"));
    }
    let config = ExperimentConfig::load(&args.config)?;
    let out = output_dir(args.out.as_deref(), &config);
    let exec = Exec {
        workers: args.workers,
        deterministic: args.deterministic || args.workers == 1,
    };
    run(&config, &out, exec)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// Writes `path_NNNNN.csv` for each sample path: a `d,dt_fine,t_start,t_end`
/// header line and its values, then `t,x_1,...,x_d` rows at every node.
pub fn run_simulate(config: &ExperimentConfig, out: &Path, _exec: Exec) -> Result<Outcome> {
    let model = config.model()?;
    let section = config.simulate.clone().unwrap_or_default();
    let k = section.k.unwrap_or_else(|| config.last_k());
    let paths = section.paths.unwrap_or(config.experiment.samples);
    let horizon = config.experiment.horizon;
    let cfg = SchemeConfig::new(k, config.substeps().for_k(k)?, horizon).with_variant(config.variant());
    cfg.validate()?;
    for i in 0..paths as u64 {
        let (w, theta) = path_inputs(&model, horizon, cfg.steps_per_unit(), config.experiment.seed, i)?;
        let path = solve(&model, &cfg, &w, &theta)?;
        let grid = path.grid();
        let d = path.dim();
        let mut text = String::new();
        text.push_str("d,dt_fine,t_start,t_end\n");
        let _ = writeln!(
            text,
            "{d},{},{},{}",
            fmt_f(grid.dt()),
            fmt_f(grid.t_start()),
            fmt_f(grid.t_end())
        );
        text.push('t');
        for c in 1..=d {
            let _ = write!(text, ",x_{c}");
        }
        text.push('\n');
        for j in 0..grid.n_nodes() {
            text.push_str(&fmt_f(grid.time(j)));
            for v in path.node(j) {
                text.push(',');
                text.push_str(&fmt_f(*v));
            }
            text.push('\n');
        }
        write_file(out, &format!("path_{i:05}.csv"), &text)?;
    }
    Ok(Outcome::Success)
}

/// The closed form or deterministic oracle for models that have one.
fn oracle_for(model: &BuiltinModel, horizon: f64) -> Result<Box<ExactSolution>> {
    match model.kind() {
        ModelKind::GbmL0 { mu, sigma } => Ok(Box::new(move |w, theta| {
            let x0 = theta.eval(0.0)?[0];
            gbm_exact(mu, sigma, x0, w)
        })),
        ModelKind::DeterministicDde | ModelKind::PointDelayLinear { b: 0.0, .. } => {
            let model = model.clone();
            Ok(Box::new(move |w, theta| {
                dde_oracle(&model, theta, horizon, w.steps_per_unit())
            }))
        }
        _ => Err(Error::config(format!("model {} has no oracle solution", model.name()))),
    }
}

/// Writes `converge.csv`: `k,error,std_error` rows, then a summary header
/// and a `summary,slope,intercept,r_squared,status` row.
pub fn run_converge(config: &ExperimentConfig, out: &Path, exec: Exec) -> Result<Outcome> {
    let model = config.model()?;
    let opts = config.options(exec);
    let oracle;
    let reference = if config.experiment.oracle {
        oracle = oracle_for(&model, opts.horizon)?;
        Reference::Exact {
            tag: "oracle",
            solution: oracle.as_ref(),
        }
    } else {
        Reference::Gap(config.reference_k())
    };
    let report = convergence_rate(&model, &config.experiment.k_list, &reference, &opts, config.substeps())?;

    let mut text = String::from("k,error,std_error\n");
    for e in &report.errors {
        let _ = writeln!(text, "{},{},{}", e.k_coarse, fmt_f(e.value), fmt_f(e.std_error));
    }
    text.push_str("summary,slope,intercept,r_squared,status\n");
    let expect = config.converge.as_ref().and_then(|c| c.expect_slope);
    let outcome = match report.fit {
        None => {
            text.push_str("summary,nan,nan,nan,degenerate\n");
            Outcome::Success
        }
        Some(fit) => {
            let ok = expect.is_none_or(|[lo, hi]| fit.order >= lo && fit.order <= hi);
            let _ = writeln!(
                text,
                "summary,{},{},{},{}",
                fmt_f(fit.order),
                fmt_f(fit.intercept),
                fmt_f(fit.r_squared),
                if ok { "ok" } else { "fail" }
            );
            if ok {
                Outcome::Success
            } else {
                Outcome::PropertyFailure
            }
        }
    };
    write_file(out, "converge.csv", &text)?;
    Ok(outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Degenerate,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    AtMost,
    AtLeast,
}

struct CheckRow {
    name: String,
    statistic: f64,
    bound: f64,
    status: Status,
}

struct Checks<'a> {
    rows: Vec<CheckRow>,
    overrides: &'a BTreeMap<String, f64>,
}

impl Checks<'_> {
    fn push(&mut self, name: String, statistic: Option<f64>, bound: f64, dir: Direction) {
        let bound = self.overrides.get(&name).copied().unwrap_or(bound);
        let (statistic, status) = match statistic {
            None => (f64::NAN, Status::Degenerate),
            Some(s) => {
                let ok = match dir {
                    Direction::AtMost => s <= bound,
                    Direction::AtLeast => s >= bound,
                };
                (s, if ok { Status::Pass } else { Status::Fail })
            }
        };
        self.rows.push(CheckRow {
            name,
            statistic,
            bound,
            status,
        });
    }
}

/// Writes `validate.csv` with one `name,statistic,bound,status` row per
/// check. Degenerate checks (an undefined statistic) do not fail the run.
pub fn run_validate(config: &ExperimentConfig, out: &Path, exec: Exec) -> Result<Outcome> {
    let model = config.model()?;
    let section = config.validate.clone().unwrap_or_default();
    let opts = config.options(exec);
    let substeps = config.substeps();
    let k_list = &config.experiment.k_list;
    let mut checks = Checks {
        rows: Vec::new(),
        overrides: &section.bounds,
    };

    let probe = probe_lipschitz(&model, section.probes, opts.horizon, opts.seed)?;
    log::info!("probed alpha = {}, D = {}", probe.alpha, probe.growth);

    let moments = moment_bound_check(&model, k_list, substeps, probe.growth, &opts)?;
    checks.push(
        "moment_variation".into(),
        Some(moments.variation()),
        1.5,
        Direction::AtMost,
    );
    checks.push(
        "moment_ceiling".into(),
        Some(moments.max_estimate()),
        moments.ceiling,
        Direction::AtMost,
    );

    let k = section.k.unwrap_or_else(|| config.last_k());
    let r = substeps.for_k(k)?;
    let increments = increment_moment_check(&model, k, r, &section.gamma_list, &section.lags, &opts)?;
    for s in &increments.slopes {
        checks.push(
            format!("increment_gamma{}", s.gamma),
            s.slope(),
            s.gamma as f64 - 0.15,
            Direction::AtLeast,
        );
    }

    let holder = holder_check(&model, k, r, &section.lags, &opts)?;
    checks.push("holder_median".into(), holder.median, 0.3, Direction::AtLeast);

    if k_list.len() >= 2 {
        let errors = strong_errors(&model, k_list, &Reference::Gap(config.reference_k()), &opts, substeps)?;
        let stat = if errors.iter().all(|e| e.value == 0.0) {
            None
        } else {
            // Finer lower end over coarser upper end; below 1 means the error
            // shrinks beyond Monte Carlo noise.
            errors
                .windows(2)
                .map(|w| (w[1].value - w[1].std_error) / (w[0].value + w[0].std_error))
                .reduce(f64::max)
        };
        checks.push("gap_closure".into(), stat, 1.0, Direction::AtMost);
    }

    let setup = MartingaleSetup {
        d: model.state_dim(),
        m: model.noise_dim(),
        a: 0.0,
        b: opts.horizon,
        steps_per_unit: k * r,
    };
    let m_samples = section.martingale_samples.unwrap_or(opts.samples);
    for &order in &section.martingale_orders {
        for integrand in [Integrand::Constant, Integrand::ClippedBrownian] {
            let c = martingale_inequality_check(order, integrand, &setup, m_samples, opts.seed, exec)?;
            checks.push(
                format!("martingale_k{order}_{}", integrand.name()),
                Some(c.lhs),
                c.rhs + c.rhs_half_width + c.lhs_half_width,
                Direction::AtMost,
            );
        }
    }

    let mut text = String::from("name,statistic,bound,status\n");
    for row in &checks.rows {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            row.name,
            fmt_f(row.statistic),
            fmt_f(row.bound),
            row.status.as_str()
        );
    }
    write_file(out, "validate.csv", &text)?;
    if checks.rows.iter().any(|r| r.status == Status::Fail) {
        Ok(Outcome::PropertyFailure)
    } else {
        Ok(Outcome::Success)
    }
}
