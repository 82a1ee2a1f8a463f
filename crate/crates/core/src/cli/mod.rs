//! The `foxh` command line: `validate`, `simulate`, `eval` and `analyze`.
//!
//! Exit codes: 0 on success, 1 on a domain failure (invalid parameters,
//! moment mismatch, generator failure), 2 on usage or format errors. Errors
//! are printed to stderr as one JSON object.

pub mod config;
pub mod io;
mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::analysis::{self, berman_check, AnalysisError};
use crate::fbm::FbmError;
use crate::fhdam::{fhdam_moment, FhdamError};
use crate::gfhp::{self, simulate, GfhpConfig, GfhpError, DEFAULT_QUAD_NODES};
use crate::wright::WrightError;

use config::{RunConfig, Sidecar, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Format { message: String, row: Option<usize> },
    #[error("{message}")]
    Domain { kind: &'static str, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn format(message: impl Into<String>) -> Self {
        CliError::Format { message: message.into(), row: None }
    }

    pub fn format_at(message: impl Into<String>, row: usize) -> Self {
        CliError::Format { message: message.into(), row: Some(row) }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Format { .. } => 2,
            CliError::Domain { .. } | CliError::Io { .. } => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Format { message, row } => json!({ "error": "FormatError", "message": message, "row": row }),
            CliError::Domain { kind, message } => json!({ "error": kind, "message": message }),
            CliError::Io { .. } => json!({ "error": "IoError", "message": self.to_string() }),
        }
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain { kind: e.kind(), message: e.to_string() }
            }
        }
    )*};
}
domain_from!(WrightError, FhdamError, FbmError, GfhpError, AnalysisError);

#[derive(Debug, Parser)]
#[command(name = "foxh", version, about = "Generalized Fox-H processes: simulation, evaluation and analysis")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "FOXH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check parameters, the decomposition and the local-time criterion.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate an ensemble and write a trajectory CSV plus JSON sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate analytic quantities at the rows of a points file.
    Eval {
        #[arg(value_enum)]
        quantity: EvalKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Output CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a trajectory file written by `simulate`.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalKind {
    Chf,
    Density,
    Moments,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzeKind {
    Msd,
    Localtime,
    Qv,
    Selfsim,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    kind: AnalyzeKind,
    /// Trajectory CSV; its sidecar is the same path with a .json extension.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (default: next to the input).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG log-log plot (msd only).
    #[arg(long)]
    plot: bool,
    /// MSD lags in grid steps.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<usize>>,
    /// Path index for the local time.
    #[arg(long, default_value_t = 0)]
    path: usize,
    /// Time interval `start,end` for the local time.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    interval: Option<Vec<f64>>,
    /// Number of equal-width spatial bins for the local time.
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Partition sizes for the quadratic variation.
    #[arg(long, value_delimiter = ',')]
    partitions: Option<Vec<usize>>,
    /// Scale factor for the self-similarity test.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Base time for the self-similarity test (default: t_max / c).
    #[arg(long)]
    t: Option<f64>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Simulate { config, out, seed } => cmd_simulate(&config, out, seed),
        Command::Eval { quantity, config, points, out } => cmd_eval(&config, quantity, &points, out.as_deref()),
        Command::Analyze(a) => cmd_analyze(&a),
    };
    match result {
        Ok(serde_json::Value::Null) => 0,
        Ok(report) => {
            // a closed stdout (e.g. piped into `head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&report).expect("reports always serialize"));
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn cmd_validate(path: &Path) -> Result<serde_json::Value, CliError> {
    let cfg = RunConfig::load(path)?;
    let gc = cfg.process.build()?;
    let spec = gc.spec();
    let berman = match berman_check(&gc) {
        Ok(r) => json!({ "established": true, "report": r }),
        Err(e @ AnalysisError::ParameterConditionFailed { .. }) => {
            json!({ "established": false, "reason": e.to_string() })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(json!({
        "status": "ok",
        "class": spec.class(),
        "simple_poles": spec.simple_poles(),
        "nonnegativity": spec.nonnegativity(),
        "constants": spec.constants(),
        "hurst": gc.hurst(),
        "moment_table": gc.moment_table(),
        "berman": berman,
    }))
}

#[derive(Debug, Serialize)]
struct MomentCheck {
    order: u32,
    empirical: f64,
    std_err: f64,
    analytic: f64,
    z_score: f64,
}

fn cmd_simulate(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<serde_json::Value, CliError> {
    let cfg = RunConfig::load(path)?;
    let grid = cfg.grid()?;
    let ens = cfg.ensemble()?;
    let gc = cfg.process.build()?;
    let seed = seed.unwrap_or(ens.seed);
    let trajs = simulate(&gc, grid, ens.n_paths, seed, ens.mode)?;

    let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
    let csv_path = dir.join(format!("{}.csv", cfg.output.name));
    io::write_trajectories(&csv_path, &trajs)?;
    let side = Sidecar {
        schema_version: SCHEMA_VERSION.into(),
        hurst: gc.hurst(),
        spec: gc.spec().params().clone(),
        decomposition: gc.decomposition().clone(),
        seed,
        generator_tag: trajs.generator_tag,
        mode: ens.mode,
        grid,
        n_paths: ens.n_paths,
        spec_id: gc.decomposition().spec_id(),
    };
    let side_path = io::sidecar_path(&csv_path);
    io::write_json(&side_path, &side)?;

    let t = grid.t_max;
    let last = trajs.column(grid.n_steps);
    let moments: Vec<MomentCheck> = [2u32, 4]
        .iter()
        .map(|&order| {
            let powers: Vec<f64> = last.iter().map(|x| x.powi(order as i32)).collect();
            let (empirical, std_err) = analysis::mean_and_se(&powers);
            let analytic = gfhp::analytic_moment(&gc, t, order);
            MomentCheck { order, empirical, std_err, analytic, z_score: (empirical - analytic) / std_err }
        })
        .collect();
    Ok(json!({
        "csv": csv_path,
        "sidecar": side_path,
        "n_paths": ens.n_paths,
        "n_steps": grid.n_steps,
        "seed": seed,
        "generator": trajs.generator_tag,
        "t": t,
        "moments": moments,
    }))
}

fn cmd_eval(path: &Path, kind: EvalKind, points: &Path, out: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let cfg = RunConfig::load(path)?;
    let gc = cfg.process.build()?;
    let rows = io::read_points(points)?;
    if rows.is_empty() {
        return Err(CliError::format("points file has no rows"));
    }
    let width = rows[0].1.len();
    let arity_ok = match kind {
        EvalKind::Chf | EvalKind::Density => width >= 2 && width % 2 == 0,
        EvalKind::Moments | EvalKind::Covariance => width == 2,
    };
    for (line, r) in &rows {
        if !arity_ok || r.len() != width {
            return Err(CliError::format_at(arity_message(kind, r.len()), *line));
        }
    }
    let d = width / 2;
    let header: Vec<String> = match kind {
        EvalKind::Chf => numbered("t", d).chain(numbered("lambda", d)).chain(["value".into()]).collect(),
        EvalKind::Density => numbered("t", d).chain(numbered("x", d)).chain(["value".into()]).collect(),
        EvalKind::Moments => ["t", "order", "value"].map(String::from).to_vec(),
        EvalKind::Covariance => ["t", "s", "value"].map(String::from).to_vec(),
    };

    let mut table = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        let value = eval_row(&gc, kind, r).map_err(|e| match e {
            CliError::Format { message, .. } => CliError::format_at(message, *line),
            other => other,
        })?;
        let mut row = r.clone();
        row.push(value);
        table.push(row);
    }
    match out {
        Some(p) => io::write_table(p, &header, &table)?,
        None => {
            let stdout = std::io::stdout();
            io::write_rows(&mut stdout.lock(), &header, &table).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            // the table itself is the report
            return Ok(serde_json::Value::Null);
        }
    }
    Ok(json!({ "status": "ok", "rows": table.len(), "out": out }))
}

fn numbered(prefix: &'static str, n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn arity_message(kind: EvalKind, got: usize) -> String {
    let want = match kind {
        EvalKind::Chf => "t_1..t_d,lambda_1..lambda_d (the same d on every row)",
        EvalKind::Density => "t_1..t_d,x_1..x_d (the same d on every row)",
        EvalKind::Moments => "t,order",
        EvalKind::Covariance => "t,s",
    };
    format!("row has {got} fields, expected {want}")
}

fn eval_row(gc: &GfhpConfig, kind: EvalKind, r: &[f64]) -> Result<f64, CliError> {
    let d = r.len() / 2;
    Ok(match kind {
        EvalKind::Chf => gfhp::char_fn(gc, &r[..d], &r[d..])?,
        EvalKind::Density => gfhp::joint_density(gc, &r[..d], &r[d..], DEFAULT_QUAD_NODES)?,
        EvalKind::Moments => {
            let order = r[1];
            if !(order >= 0.0 && order.fract() == 0.0 && order <= u32::MAX as f64) {
                return Err(CliError::format(format!("order must be a non-negative integer, got {order}")));
            }
            gfhp::analytic_moment(gc, r[0], order as u32)
        }
        EvalKind::Covariance => gfhp::covariance(gc, r[0], r[1]),
    })
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<serde_json::Value, CliError> {
    let (side, trajs) = io::read_trajectories(&a.input)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| a.input.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectories").to_owned();
    let file = |suffix: &str| dir.join(format!("{stem}_{suffix}"));
    let grid = trajs.grid;

    match a.kind {
        AnalyzeKind::Msd => {
            let lags = a.lags.clone().unwrap_or_else(|| analysis::default_lags(&grid));
            let report = analysis::msd(&trajs, &lags)?;
            let rows: Vec<Vec<f64>> = report.lags.iter().zip(&report.msd).map(|(l, m)| vec![*l, *m]).collect();
            io::write_table(&file("msd.csv"), &["lag".into(), "msd".into()], &rows)?;
            let mut out = json!({ "report": report, "csv": file("msd.csv") });
            if a.plot {
                let svg = file("msd.svg");
                std::fs::write(&svg, plot::msd_svg(&report)).map_err(|e| CliError::io(&svg, e))?;
                out["svg"] = json!(svg);
            }
            Ok(out)
        }
        AnalyzeKind::Localtime => {
            if a.path >= trajs.n_paths() {
                return Err(CliError::format(format!("path {} out of range, file has {}", a.path, trajs.n_paths())));
            }
            if a.bins < 2 {
                return Err(CliError::format("need at least 2 bins"));
            }
            let path = trajs.path(a.path);
            let interval = match a.interval.as_deref() {
                None => (0.0, grid.t_max),
                Some(&[s, e]) => (s, e),
                Some(v) => return Err(CliError::format(format!("--interval takes start,end, got {} values", v.len()))),
            };
            let lo = path.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = path.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pad = ((hi - lo) * 1e-6).max(1e-12);
            let (lo, hi) = (lo - pad, hi + pad);
            let edges: Vec<f64> = (0..=a.bins).map(|k| lo + (hi - lo) * k as f64 / a.bins as f64).collect();
            let est = analysis::local_time(path, &grid, interval, &edges)?;
            let rows: Vec<Vec<f64>> =
                est.x_bins.windows(2).zip(&est.values).map(|(e, v)| vec![e[0], e[1], *v]).collect();
            io::write_table(&file("localtime.csv"), &["x_lo".into(), "x_hi".into(), "local_time".into()], &rows)?;
            Ok(json!({
                "path": a.path,
                "interval": est.interval,
                "interval_length": est.interval.1 - est.interval.0,
                "total_time": est.total_time(),
                "unbinned_time": est.unbinned_time,
                "x_bins": est.x_bins,
                "values": est.values,
                "csv": file("localtime.csv"),
            }))
        }
        AnalyzeKind::Qv => {
            let partitions = a.partitions.clone().unwrap_or_else(|| {
                std::iter::successors(Some(1usize), |n| Some(n * 2))
                    .take_while(|&n| n <= grid.n_steps)
                    .filter(|n| grid.n_steps % n == 0)
                    .collect()
            });
            let rows = analysis::quadratic_variation_scan(&trajs, &partitions)?;
            let gc = sidecar_config(&side)?;
            let mean_y = fhdam_moment(gc.spec(), 1);
            let expected: Vec<f64> =
                rows.iter().map(|r| analysis::qv_expected(mean_y, side.hurst, grid.t_max, r.n)).collect();
            let table: Vec<Vec<f64>> =
                rows.iter().zip(&expected).map(|(r, e)| vec![r.n as f64, r.qv, r.std_err, *e]).collect();
            io::write_table(&file("qv.csv"), &["n", "qv", "std_err", "expected"].map(String::from), &table)?;
            Ok(json!({ "rows": rows, "expected": expected, "csv": file("qv.csv") }))
        }
        AnalyzeKind::Selfsim => {
            let t = a.t.unwrap_or(grid.t_max / a.c);
            let r = analysis::self_similarity_ensemble(&trajs, a.c, t, side.hurst)?;
            Ok(json!({
                "c": a.c,
                "t": t,
                "hurst": side.hurst,
                "statistic": r.statistic,
                "p_value": r.p_value,
                "n1": r.n1,
                "n2": r.n2,
            }))
        }
    }
}

fn sidecar_config(side: &Sidecar) -> Result<GfhpConfig, CliError> {
    side.to_run_config().process.build()
}
