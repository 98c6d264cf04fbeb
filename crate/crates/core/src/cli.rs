//! Batch front-end: JSON configuration, command dispatch and CSV output.
//!
//! ```text
//! linsde <simulate|moments|validate|lst|order-check> --config <file>
//!        [--out <dir>] [--seed N] [--reps N] [--n N] [--tol X] [--t X]
//! ```
//!
//! Exit codes: 0 success, 1 failed validation or order check, 2 configuration,
//! runtime or output error. Every CSV starts with a comment line carrying the
//! version, the SHA-256 of the effective configuration and the seed; the same
//! triple reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::estimate::{
    analytic_moment, compare_report, conditional_lst, mc_moments, plain_lst, stationary_lst_mc, stochastic_order_check,
    InitialValue, Scenario,
};
use crate::model::{DriverPair, JumpComponent, JumpDistribution, SubordinatorSpec};
use crate::moments::{moment_curve, second_moment_mixture, transient_mean_mixture, ExpMixture, MAX_MOMENT_ORDER};
use crate::pathsim::evolve_with_drifts;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

// ---------------------------------------------------------------------------
// Configuration schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistConfig {
    Point { x: f64 },
    Uniform { b: f64 },
    Exp { mean: f64 },
    Erlang { k: u32, mean: f64 },
}

impl From<&DistConfig> for JumpDistribution<f64> {
    fn from(d: &DistConfig) -> Self {
        match *d {
            DistConfig::Point { x } => JumpDistribution::point(x),
            DistConfig::Uniform { b } => JumpDistribution::uniform(b),
            DistConfig::Exp { mean } => JumpDistribution::exponential(mean),
            DistConfig::Erlang { k, mean } => JumpDistribution::erlang(k, mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub rate: f64,
    pub dist: DistConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
}

impl From<&DriverConfig> for SubordinatorSpec<f64> {
    fn from(d: &DriverConfig) -> Self {
        SubordinatorSpec::new(
            d.drift,
            d.jumps.iter().map(|j| JumpComponent { rate: j.rate, dist: (&j.dist).into() }).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum X0Config {
    Const { value: f64 },
    Exp { mean: f64 },
}

impl Default for X0Config {
    fn default() -> Self {
        Self::Const { value: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YModeConfig {
    #[default]
    Levy,
    RandomDrift { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalConfig {
    pub law: DistConfig,
    #[serde(default = "default_true")]
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderCheckConfig {
    pub t1: f64,
    pub t2: f64,
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub y: DriverConfig,
    pub z: DriverConfig,
    #[serde(default)]
    pub x0: X0Config,
    #[serde(default)]
    pub y_mode: YModeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renewal: Option<RenewalConfig>,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_check: Option<OrderCheckConfig>,
}

fn default_true() -> bool {
    true
}

fn default_reps() -> usize {
    100_000
}

fn default_n_max() -> usize {
    4
}

fn default_quad_tol() -> f64 {
    crate::estimate::DEFAULT_QUAD_TOL
}

fn default_alphas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl RunConfig {
    /// The estimation scenario described by this configuration.
    pub fn scenario(&self) -> Result<Scenario<f64>, Error> {
        let pair = DriverPair::new((&self.y).into(), (&self.z).into())?;
        let mut scn = Scenario::new(pair, self.horizon, self.t_grid.clone())?;
        scn = scn.with_x0(match self.x0 {
            X0Config::Const { value } => InitialValue::Const(value),
            X0Config::Exp { mean } => InitialValue::Exponential { mean },
        })?;
        if let YModeConfig::RandomDrift { values, probs } = &self.y_mode {
            scn = scn.with_random_drift(values.clone(), probs.clone())?;
        }
        if let Some(r) = &self.renewal {
            scn = scn.with_renewal((&r.law).into(), r.stationary)?;
        }
        Ok(scn)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.scenario()?;
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be positive".into()));
        }
        if self.n_max == 0 || self.n_max > MAX_MOMENT_ORDER {
            return Err(Error::OrderTooLarge { n: self.n_max, max: MAX_MOMENT_ORDER });
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("quad_tol {} must be positive", self.quad_tol)));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::NegativeArgument("alphas must be finite and nonnegative".into()));
        }
        if let Some(h) = self.trunc_horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("trunc_horizon {h} must be positive")));
            }
        }
        if let Some(o) = &self.order_check {
            for t in [o.t1, o.t2] {
                if !(t >= 0.0 && t <= self.horizon) {
                    return Err(Error::InvalidParameter(format!("order_check time {t} outside [0, horizon]")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            ConfigError::Schema(inner.to_string())
        } else {
            ConfigError::Schema(format!("{path}: {inner}"))
        }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &FsPath) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(if b { "true" } else { "false" }.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("row {row} has {got} fields, header has {want}")]
    Ragged { row: usize, got: usize, want: usize },
    #[error("NaN in row {row}, column {column}")]
    NaN { row: usize, column: String },
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Identifies the run in the leading comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn format_number(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Renders a table: optional comment line, header, one line per row, LF endings.
pub fn render_csv(table: &Table, provenance: Option<&Provenance>) -> Result<String, CsvError> {
    let mut out = String::new();
    if let Some(p) = provenance {
        writeln!(out, "# linsde {VERSION} config_sha256={} seed={}", p.config_hash, p.seed).unwrap();
    }
    out.push_str(&table.header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.header.len() {
            return Err(CsvError::Ragged { row: r, got: row.len(), want: table.header.len() });
        }
        let mut fields = Vec::with_capacity(row.len());
        for (c, cell) in row.iter().enumerate() {
            fields.push(match cell {
                Cell::Num(x) if x.is_nan() => {
                    return Err(CsvError::NaN { row: r, column: table.header[c].clone() });
                }
                Cell::Num(x) => format_number(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => quote(s),
            });
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(table: &Table, path: &FsPath, provenance: Option<&Provenance>) -> Result<(), CsvError> {
    let text = render_csv(table, provenance)?;
    std::fs::write(path, text).map_err(|e| CsvError::Io { path: path.display().to_string(), reason: e.to_string() })
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Parser)]
#[command(name = "linsde", version, about = "Exact simulation and moments of X_t = X_0 + Y_t - ∫ X_{s-} dZ_s")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Highest moment order.
    #[arg(long)]
    pub n: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Replaces the time grid by the single time `t`.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write it to path.csv.
    Simulate(CommonArgs),
    /// Closed-form moments on the grid (moments.csv, mixtures.csv).
    Moments(CommonArgs),
    /// Monte-Carlo moments against the closed forms (validate.csv).
    Validate(CommonArgs),
    /// Plain, conditional and stationary Laplace-transform estimates (lst.csv).
    Lst(CommonArgs),
    /// Stochastic monotonicity check (order_check.csv).
    OrderCheck(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Moments(a) | Command::Validate(a) | Command::Lst(a) | Command::OrderCheck(a) => a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{0}")]
    Csv(#[from] CsvError),
    #[error("{0}")]
    Other(String),
}

/// Applies command-line overrides and revalidates.
fn effective_config(args: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(n) = args.n {
        cfg.n_max = n;
    }
    if let Some(tol) = args.tol {
        cfg.quad_tol = tol;
    }
    if let Some(t) = args.t {
        cfg.t_grid = vec![t];
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    provenance: Provenance,
}

impl Output {
    fn write(&self, name: &str, table: &Table) -> Result<(), CsvError> {
        write_csv(table, &self.dir.join(name), Some(&self.provenance))
    }
}

/// Exponential-mixture curves for orders `1..=k`, stopping at the first order without one.
pub fn analytic_curves(scn: &Scenario<f64>, n_max: usize) -> Vec<ExpMixture<f64>> {
    let mut curves = Vec::new();
    if !scn.is_levy_z() || scn.pair.z.is_zero() {
        return curves;
    }
    let z = &scn.pair.z;
    let y = &scn.pair.y;
    for n in 1..=n_max {
        let curve = if n == 1 {
            transient_mean_mixture(scn.x0.mean(), scn.ey1(), z).ok()
        } else if !scn.is_levy_y() {
            None
        } else {
            match scn.x0 {
                InitialValue::Const(x) if y.components.is_empty() && y.drift > 0.0 => moment_curve(x, n, z, y.drift).ok(),
                InitialValue::Const(x) if n == 2 && x == 0.0 => second_moment_mixture(y, z).ok(),
                _ => None,
            }
        };
        match curve {
            Some(c) => curves.push(c),
            None => break,
        }
    }
    curves
}

fn cmd_simulate(cfg: &RunConfig, scn: &Scenario<f64>, out: &Output) -> Result<i32, RunError> {
    let rep = scn.replication(cfg.seed, 0)?;
    let path = evolve_with_drifts(rep.x0, rep.y_drift, scn.pair.z.drift, &rep.events)?;
    let mut rows: Vec<(f64, u8, Vec<Cell>)> = vec![(0.0, 0, vec![0.0.into(), rep.x0.into(), "".into(), "".into()])];
    for ev in rep.events.events() {
        rows.push((ev.time, 1, vec![ev.time.into(), path.eval(ev.time)?.into(), ev.source.label().into(), ev.size.into()]));
    }
    for &t in &cfg.t_grid {
        rows.push((t, 2, vec![t.into(), path.eval(t)?.into(), "".into(), "".into()]));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut table = Table::new(&["t", "x", "event_source", "event_size"]);
    rows.into_iter().for_each(|r| table.push(r.2));
    out.write("path.csv", &table)?;
    println!("simulated {} events on (0, {}]", rep.events.len(), cfg.horizon);
    Ok(EXIT_OK)
}

fn cmd_moments(cfg: &RunConfig, scn: &Scenario<f64>, out: &Output) -> Result<i32, RunError> {
    let mut table = Table::new(&["t", "order", "value"]);
    for &t in &cfg.t_grid {
        for n in 1..=cfg.n_max {
            if let Some(v) = analytic_moment(scn, n, t) {
                table.push(vec![t.into(), n.into(), v.into()]);
                println!("t={t} n={n} E X^n = {v:.10}");
            }
        }
    }
    let mut mixtures = Table::new(&["order", "coefficient", "rate"]);
    for (k, curve) in analytic_curves(scn, cfg.n_max).iter().enumerate() {
        for &(c, rho) in curve.terms() {
            mixtures.push(vec![(k + 1).into(), c.into(), rho.into()]);
        }
    }
    out.write("moments.csv", &table)?;
    out.write("mixtures.csv", &mixtures)?;
    if table.rows.is_empty() {
        return Err(RunError::Other("no closed-form moments for this scenario".into()));
    }
    Ok(EXIT_OK)
}

fn cmd_validate(cfg: &RunConfig, scn: &Scenario<f64>, out: &Output) -> Result<i32, RunError> {
    let curves = analytic_curves(scn, cfg.n_max);
    if curves.is_empty() {
        return Err(RunError::Other("no closed-form moment curves for this scenario".into()));
    }
    let report = mc_moments(scn, curves.len(), cfg.reps, cfg.seed)?;
    let cmp = compare_report(&cfg.t_grid, &curves, &report)?;
    let mut table = Table::new(&["t", "order", "analytic", "mc", "std_err", "z", "pass"]);
    for r in &cmp.rows {
        table.push(vec![r.t.into(), r.order.into(), r.analytic.into(), r.mc.into(), r.std_err.into(), r.z.into(), r.pass.into()]);
    }
    out.write("validate.csv", &table)?;
    let failed = cmp.rows.iter().filter(|r| !r.pass).count();
    println!(
        "{} cells, {} above |z|=4, {} above |z|=3: {}",
        cmp.rows.len(),
        failed,
        cmp.above_three,
        if cmp.pass { "PASS" } else { "FAIL" }
    );
    Ok(if cmp.pass { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_lst(cfg: &RunConfig, scn: &Scenario<f64>, out: &Output) -> Result<i32, RunError> {
    let mut table = Table::new(&["estimator", "alpha", "t", "value", "std_err", "variance"]);
    for &alpha in &cfg.alphas {
        for &t in &cfg.t_grid {
            let p = plain_lst(alpha, t, scn, cfg.reps, cfg.seed)?;
            table.push(vec!["plain".into(), alpha.into(), t.into(), p.value.into(), p.std_err.into(), p.variance.into()]);
            if scn.is_levy_y() {
                let c = conditional_lst(alpha, t, scn, cfg.reps, cfg.seed, cfg.quad_tol)?;
                table.push(vec![
                    "conditional".into(),
                    alpha.into(),
                    t.into(),
                    c.value.into(),
                    c.std_err.into(),
                    c.variance.into(),
                ]);
            }
        }
    }
    out.write("lst.csv", &table)?;
    let has_regime = scn.renewal.is_some() || !scn.pair.z.is_zero();
    if scn.is_levy_y() && has_regime {
        let trunc = cfg.trunc_horizon.unwrap_or(cfg.horizon);
        let mut stat = Table::new(&["alpha", "value", "std_err", "truncated", "truncation_bound"]);
        for &alpha in &cfg.alphas {
            let s = stationary_lst_mc(alpha, scn, cfg.reps, cfg.seed, trunc, cfg.quad_tol)?;
            stat.push(vec![alpha.into(), s.estimate.value.into(), s.estimate.std_err.into(), s.truncated.into(), s.truncation_bound.into()]);
        }
        out.write("lst_stationary.csv", &stat)?;
    }
    println!("wrote {} Laplace-transform rows", table.rows.len());
    Ok(EXIT_OK)
}

fn cmd_order_check(cfg: &RunConfig, scn: &Scenario<f64>, out: &Output) -> Result<i32, RunError> {
    let (t1, t2) = match &cfg.order_check {
        Some(o) => (o.t1, o.t2),
        None => match (cfg.t_grid.first(), cfg.t_grid.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(RunError::Other("order-check needs order_check times or a nonempty t_grid".into())),
        },
    };
    let res = stochastic_order_check(scn, t1, t2, cfg.reps, cfg.seed)?;
    let mut table = Table::new(&["t1", "t2", "max_violation", "epsilon", "pass"]);
    table.push(vec![t1.into(), t2.into(), res.max_violation.into(), res.epsilon.into(), res.pass.into()]);
    out.write("order_check.csv", &table)?;
    println!(
        "sup(F_t2 - F_t1) = {:.6} vs 2ε = {:.6}: {}",
        res.max_violation,
        2.0 * res.epsilon,
        if res.pass { "PASS" } else { "FAIL" }
    );
    Ok(if res.pass { EXIT_OK } else { EXIT_VALIDATION })
}

fn dispatch(command: &Command) -> Result<i32, RunError> {
    let args = command.args();
    let cfg = effective_config(args)?;
    let scn = cfg.scenario()?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CsvError::Io { path: args.out.display().to_string(), reason: e.to_string() })?;
    let out = Output { dir: args.out.clone(), provenance: Provenance { config_hash: cfg.hash(), seed: cfg.seed } };
    match command {
        Command::Simulate(_) => cmd_simulate(&cfg, &scn, &out),
        Command::Moments(_) => cmd_moments(&cfg, &scn, &out),
        Command::Validate(_) => cmd_validate(&cfg, &scn, &out),
        Command::Lst(_) => cmd_lst(&cfg, &scn, &out),
        Command::OrderCheck(_) => cmd_order_check(&cfg, &scn, &out),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
