//! `fadesched` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical non-convergence, 4 incompatible policy/table.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::{FadingModel, SeededStream};
use crate::error::{Result, SchedError};
use crate::montecarlo::{
    compare_report, run_experiment_with, ExperimentConfig, McSummary, Ranking,
};
use crate::policies::{causal_primal_bits, PolicyKind, PolicySpec, Problem, QueueState};
use crate::quadrature::QuadratureConfig;
use crate::thresholds::{fmt_num, xi_table, zeta_table, MonomialCost, TableKind, ThresholdTable};
use crate::verify::{self, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

pub const SEED_ENV: &str = "SCHED_SEED";

pub fn exit_code(err: &SchedError) -> i32 {
    match err {
        SchedError::QuadratureNotConverged { .. } | SchedError::GridTooCoarse(_) => EXIT_NUMERICAL,
        SchedError::TableMismatch(_) | SchedError::IndexOutOfHorizon { .. } => EXIT_MISMATCH,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fadesched",
    version,
    about = "Deadline-constrained scheduling over fading channels"
)]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build xi or zeta threshold tables for one or more orders.
    Thresholds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_enum, default_value = "xi")]
        kind: KindArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded Monte Carlo policy comparison.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-episode totals to trace.csv.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run invariant suites; exit 1 if any check fails.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
        /// Tolerance for first-order and oracle checks.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        dp_grid: Option<usize>,
        #[arg(long)]
        dp_tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report as JSON (plus a manifest) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit plot data as CSV.
    Figure {
        #[arg(long, value_enum)]
        which: FigureArg,
        #[arg(long)]
        out: PathBuf,
        /// Config supplying the model; defaults to the truncated exponential
        /// with threshold 0.001 and unit rate.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Xi,
    Zeta,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Thresholds,
    Policy,
    Dp,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FigureArg {
    Eta,
    Xi,
    PolicyVsT,
}

/// One JSON document drives every command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<FadingModel>,
    pub cost: Option<MonomialCost>,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub problem: Problem,
    pub budget: Option<f64>,
    #[serde(default)]
    pub policies: Vec<PolicyDecl>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDecl {
    pub kind: PolicyKind,
    /// Must agree with the experiment's cost order when given.
    pub n: Option<f64>,
    /// Threshold table (`.json`, or `.csv` as written by `thresholds`);
    /// built from the model when omitted.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub trace: bool,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| SchedError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| SchedError::Config(format!("{}: {e}", path.display())))
    }

    fn model(&self) -> Result<FadingModel> {
        self.model
            .clone()
            .ok_or_else(|| SchedError::Config("config has no `model` section".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub master_seed: Option<u64>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, manifest)?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| SchedError::Config(format!("{SEED_ENV}={v} is not a u64"))),
        Err(_) => Ok(0),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let exec = || dispatch(cli.command);
    let outcome = match cli.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
        {
            Ok(pool) => pool.install(exec),
            Err(e) => Err(SchedError::Config(format!("thread pool: {e}"))),
        },
        None => exec(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fadesched: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Thresholds {
            config,
            n,
            horizon,
            kind,
            out,
        } => cmd_thresholds(&config, &n, horizon, kind, &out),
        Command::Simulate {
            config,
            episodes,
            seed,
            trace,
            out,
        } => cmd_simulate(&config, episodes, seed, trace, &out),
        Command::Verify {
            suite,
            n,
            tol,
            dp_grid,
            dp_tol,
            seed,
            out,
        } => {
            let mut opts = VerifyOptions::default();
            if !n.is_empty() {
                opts.orders = Some(n);
            }
            if let Some(t) = tol {
                opts.policy_tol = t;
            }
            if let Some(g) = dp_grid {
                opts.dp_points = g;
            }
            opts.dp_tol = dp_tol;
            if let Some(s) = seed {
                opts.seed = s;
            }
            cmd_verify(suite, &opts, out.as_deref())
        }
        Command::Figure {
            which,
            out,
            config,
            n,
            horizon,
            episodes,
            seed,
        } => cmd_figure(which, &out, config.as_deref(), &n, horizon, episodes, seed),
    }
}

fn orders_from(flags: &[f64], cfg: &Config) -> Result<Vec<MonomialCost>> {
    if flags.is_empty() {
        let cost = cfg.cost.ok_or_else(|| {
            SchedError::Config("no --n given and config has no `cost` section".into())
        })?;
        Ok(vec![cost])
    } else {
        flags.iter().map(|&n| MonomialCost::new(n)).collect()
    }
}

fn build_table(
    model: &FadingModel,
    cost: MonomialCost,
    horizon: usize,
    kind: TableKind,
    quad: &QuadratureConfig,
) -> Result<ThresholdTable> {
    let channel = model.validate_with(quad)?;
    match kind {
        TableKind::PrimalXi => xi_table(&channel, cost, horizon, quad),
        TableKind::DualZeta => zeta_table(&channel, cost, horizon, quad),
    }
}

fn write_threshold_rows<W: Write>(out: W, tables: &[ThresholdTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "t", "value", "eta", "root"])?;
    for tab in tables {
        for t in 1..=tab.horizon {
            let eta = if t >= 2 {
                fmt_num(tab.roots[t - 2])
            } else {
                String::new()
            };
            w.write_record([
                fmt_num(tab.n),
                t.to_string(),
                fmt_num(tab.values[t - 1]),
                eta,
                fmt_num(tab.roots[t - 1]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_thresholds(
    config: &Path,
    n: &[f64],
    horizon: Option<usize>,
    kind: KindArg,
    out: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let cfg = Config::load(config)?;
    let model = cfg.model()?;
    let horizon = horizon.or(cfg.horizon).ok_or_else(|| {
        SchedError::Config("no --horizon given and config has no `horizon`".into())
    })?;
    let kind = match kind {
        KindArg::Xi => TableKind::PrimalXi,
        KindArg::Zeta => TableKind::DualZeta,
    };
    let tables = orders_from(n, &cfg)?
        .into_iter()
        .map(|cost| build_table(&model, cost, horizon, kind, &cfg.quadrature))
        .collect::<Result<Vec<_>>>()?;
    write_threshold_rows(BufWriter::new(File::create(out)?), &tables)?;
    let resolved = serde_json::json!({
        "model": model,
        "n": tables.iter().map(|t| t.n).collect::<Vec<_>>(),
        "horizon": horizon,
        "kind": kind,
        "quadrature": cfg.quadrature,
    });
    write_manifest(
        &manifest_path(out),
        &RunManifest {
            command: "thresholds".into(),
            config: resolved,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: None,
            outputs: vec![out.display().to_string()],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(EXIT_OK)
}

fn load_table(path: &Path, cost: MonomialCost, kind: TableKind) -> Result<ThresholdTable> {
    let file = File::open(path)
        .map_err(|e| SchedError::Config(format!("cannot open {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => ThresholdTable::read_csv(file, cost, kind),
        _ => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
    }
}

/// Resolves a config into an experiment, building tables where none are given.
pub fn experiment_from_config(
    cfg: &Config,
    episodes: usize,
    seed: u64,
) -> Result<ExperimentConfig> {
    let model = cfg.model()?;
    let channel = model.validate_with(&cfg.quadrature)?;
    let cost = cfg
        .cost
        .ok_or_else(|| SchedError::Config("config has no `cost` section".into()))?;
    let horizon = cfg
        .horizon
        .ok_or_else(|| SchedError::Config("config has no `horizon`".into()))?;
    let budget = cfg
        .budget
        .ok_or_else(|| SchedError::Config("config has no `budget`".into()))?;
    if cfg.policies.is_empty() {
        return Err(SchedError::Config("config lists no policies".into()));
    }
    let mut policies = Vec::with_capacity(cfg.policies.len());
    for decl in &cfg.policies {
        if let Some(n) = decl.n {
            if n != cost.n() {
                return Err(SchedError::TableMismatch(format!(
                    "{} declares n = {n}, experiment uses n = {}",
                    decl.kind,
                    cost.n()
                )));
            }
        }
        let table = match (decl.kind.table_kind(), &decl.table) {
            (Some(kind), Some(path)) => Some(Arc::new(load_table(path, cost, kind)?)),
            (Some(TableKind::PrimalXi), None) => Some(Arc::new(xi_table(
                &channel,
                cost,
                horizon,
                &cfg.quadrature,
            )?)),
            (Some(TableKind::DualZeta), None) => Some(Arc::new(zeta_table(
                &channel,
                cost,
                horizon,
                &cfg.quadrature,
            )?)),
            (None, Some(_)) => {
                return Err(SchedError::TableMismatch(format!(
                    "{} takes no table",
                    decl.kind
                )))
            }
            (None, None) => None,
        };
        policies.push(PolicySpec::new(decl.kind, cost, table)?);
    }
    Ok(ExperimentConfig {
        channel,
        cost,
        horizon,
        problem: cfg.problem,
        budget,
        policies,
        episodes,
        master_seed: seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub summary: McSummary,
    pub ranking: Option<Ranking>,
}

fn cmd_simulate(
    config: &Path,
    episodes: Option<usize>,
    seed: Option<u64>,
    trace: bool,
    out: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let cfg = Config::load(config)?;
    let episodes = episodes.or(cfg.mc.episodes).ok_or_else(|| {
        SchedError::Config("no --episodes given and config has no mc.episodes".into())
    })?;
    if episodes == 0 {
        return Err(SchedError::Config("episodes must be >= 1".into()));
    }
    let seed = resolve_seed(seed, cfg.mc.seed)?;
    let exp = experiment_from_config(&cfg, episodes, seed)?;
    fs::create_dir_all(out)?;

    let mut outputs = Vec::new();
    let trace_path = out.join("trace.csv");
    let summary = if trace || cfg.mc.trace {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&trace_path)?));
        w.write_record(["episode", "policy", "total"])?;
        let names: Vec<&str> = exp.policies.iter().map(|p| p.kind().name()).collect();
        let summary = run_experiment_with(&exp, |i, totals| {
            for (name, x) in names.iter().zip(totals) {
                w.write_record([i.to_string(), name.to_string(), fmt_num(*x)])?;
            }
            Ok(())
        })?;
        w.flush()?;
        outputs.push(trace_path.display().to_string());
        summary
    } else {
        run_experiment_with(&exp, |_, _| Ok(()))?
    };
    let ranking = (summary.policies.len() >= 2).then(|| compare_report(&summary));
    let summary_path = out.join("summary.json");
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(&summary_path)?),
        &SimulationReport { summary, ranking },
    )?;
    outputs.insert(0, summary_path.display().to_string());

    let mut resolved = serde_json::to_value(&cfg)?;
    resolved["mc"]["episodes"] = episodes.into();
    resolved["mc"]["seed"] = seed.into();
    write_manifest(
        &out.join("manifest.json"),
        &RunManifest {
            command: "simulate".into(),
            config: resolved,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: Some(seed),
            outputs,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(EXIT_OK)
}

fn cmd_verify(suite: SuiteArg, opts: &VerifyOptions, out: Option<&Path>) -> Result<i32> {
    let started = Instant::now();
    let suites: Vec<Suite> = match suite {
        SuiteArg::Thresholds => vec![Suite::Thresholds],
        SuiteArg::Policy => vec![Suite::Policy],
        SuiteArg::Dp => vec![Suite::Dp],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let checks = verify::run(&suites, opts)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    if let Some(path) = out {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &checks)?;
        write_manifest(
            &manifest_path(path),
            &RunManifest {
                command: "verify".into(),
                config: serde_json::json!({
                    "suite": format!("{suite:?}").to_lowercase(),
                    "orders": opts.orders,
                    "policy_tol": opts.policy_tol,
                    "dp_points": opts.dp_points,
                    "dp_tol": opts.dp_tolerance(),
                }),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                master_seed: Some(opts.seed),
                outputs: vec![path.display().to_string()],
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(if failed == 0 {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

pub const FIGURE_ORDERS: [f64; 4] = [2.0, 2.67, 5.0, 100.0];
pub const FIGURE_HORIZON: usize = 20;

fn cmd_figure(
    which: FigureArg,
    out: &Path,
    config: Option<&Path>,
    n: &[f64],
    horizon: Option<usize>,
    episodes: Option<usize>,
    seed: Option<u64>,
) -> Result<i32> {
    let started = Instant::now();
    let cfg = match config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let model = cfg
        .model
        .clone()
        .unwrap_or_else(FadingModel::reference_default);
    let horizon = horizon.or(cfg.horizon).unwrap_or(FIGURE_HORIZON);
    let orders: Vec<MonomialCost> = if n.is_empty() {
        FIGURE_ORDERS
            .iter()
            .map(|&n| MonomialCost::new(n))
            .collect::<Result<_>>()?
    } else {
        n.iter()
            .map(|&n| MonomialCost::new(n))
            .collect::<Result<_>>()?
    };
    let tables = orders
        .iter()
        .map(|&cost| build_table(&model, cost, horizon, TableKind::PrimalXi, &cfg.quadrature))
        .collect::<Result<Vec<_>>>()?;
    let file = BufWriter::new(File::create(out)?);
    let mut w = csv::Writer::from_writer(file);
    let mut seed_used = None;
    match which {
        FigureArg::Eta => {
            w.write_record(["n", "t", "eta", "root"])?;
            for tab in &tables {
                for t in 1..=tab.horizon {
                    let eta = if t >= 2 {
                        fmt_num(tab.roots[t - 2])
                    } else {
                        String::new()
                    };
                    w.write_record([
                        fmt_num(tab.n),
                        t.to_string(),
                        eta,
                        fmt_num(tab.roots[t - 1]),
                    ])?;
                }
            }
        }
        FigureArg::Xi => {
            w.write_record(["n", "t", "value"])?;
            for tab in &tables {
                for t in 1..=tab.horizon {
                    w.write_record([fmt_num(tab.n), t.to_string(), fmt_num(tab.values[t - 1])])?;
                }
            }
        }
        FigureArg::PolicyVsT => {
            let episodes = episodes.or(cfg.mc.episodes).unwrap_or(10_000);
            if episodes == 0 {
                return Err(SchedError::Config("episodes must be >= 1".into()));
            }
            let seed = resolve_seed(seed, cfg.mc.seed)?;
            seed_used = Some(seed);
            let channel = model.validate_with(&cfg.quadrature)?;
            w.write_record(["n", "t", "mean_fraction", "std_error"])?;
            for (tab, &cost) in tables.iter().zip(&orders) {
                let spec =
                    PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(Arc::new(tab.clone())))?;
                for (row, (mean, se)) in policy_fractions(&channel, &spec, horizon, episodes, seed)?
                    .into_iter()
                    .enumerate()
                {
                    let t = horizon - row;
                    w.write_record([fmt_num(cost.n()), t.to_string(), fmt_num(mean), fmt_num(se)])?;
                }
            }
        }
    }
    w.flush()?;
    write_manifest(
        &manifest_path(out),
        &RunManifest {
            command: "figure".into(),
            config: serde_json::json!({
                "which": which,
                "model": model,
                "n": orders.iter().map(|c| c.n()).collect::<Vec<_>>(),
                "horizon": horizon,
                "quadrature": cfg.quadrature,
            }),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: seed_used,
            outputs: vec![out.display().to_string()],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(EXIT_OK)
}

/// Mean and standard error of the served fraction `b_t / beta_t` per slot,
/// ordered `t = T..1`. The causal rule is linear in the queue, so the
/// fraction is the allocation for a unit queue.
pub fn policy_fractions(
    channel: &crate::channel::Channel,
    spec: &PolicySpec,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    // Welford per slot: (mean, m2)
    let mut stats = vec![(0.0f64, 0.0f64); horizon];
    let mut gains = Vec::with_capacity(horizon);
    for i in 0..episodes {
        channel.sample_into(SeededStream::new(seed, i as u64), horizon, &mut gains);
        let count = (i + 1) as f64;
        for (row, &g) in gains.iter().enumerate() {
            let f = causal_primal_bits(
                QueueState {
                    beta: 1.0,
                    t: horizon - row,
                },
                g,
                spec,
            )?;
            let (mean, m2) = &mut stats[row];
            let delta = f - *mean;
            *mean += delta / count;
            *m2 += delta * (f - *mean);
        }
    }
    let k = episodes as f64;
    Ok(stats
        .into_iter()
        .map(|(mean, m2)| {
            let var = if episodes > 1 { m2 / (k - 1.0) } else { 0.0 };
            (mean, (var / k).sqrt())
        })
        .collect())
}
