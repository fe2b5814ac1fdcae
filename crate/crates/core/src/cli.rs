//! Command-line front end: `solve`, `converge`, `bench` and `memory-model`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad parameters, 3 degenerate
//! stencil, 4 unstable iteration, 5 no steady state within the step cap.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::mean_nearest_neighbor_distance;
use crate::perf_model::{
    benchmark_time_loop, write_memory_model_csv, write_timing_csv, MemoryModel, TimingReport,
    DEFAULT_CACHE_BYTES, REFERENCE_SUPPORT_SIZES,
};
use crate::solver::{
    run_time_loop, stability_bound, Discretization, Mode, Resolution, SolveConfig,
    DEFAULT_CHUNK_SIZE,
};

pub const THREADS_ENV: &str = "RBFFD_THREADS";

/// Integer flag values may be written as `100000`, `1e5` or `1.0E5`.
fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

fn parse_bytes(s: &str) -> std::result::Result<u64, String> {
    parse_count(s).map(|v| v as u64)
}

#[derive(Debug, Parser)]
#[command(name = "rbffd", version, about = "RBF-FD Poisson solver on scattered nodes in the unit disk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate nodes, assemble shapes and run the explicit time loop.
    Solve(SolveArgs),
    /// Steady-state error over a refinement sequence, with a fitted order.
    Converge(ConvergeArgs),
    /// Time the explicit loop over node counts, support sizes and thread counts.
    Bench(BenchArgs),
    /// Working-set memory model and cache-peak node counts.
    MemoryModel(MemoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Highest augmented monomial degree.
    #[arg(long, default_value = "2", value_parser = parse_count)]
    pub m: usize,
    /// Support size.
    #[arg(long, default_value = "15", value_parser = parse_count)]
    pub n: usize,
    /// Target node count.
    #[arg(long, value_parser = parse_count, conflicts_with = "h")]
    pub nodes: Option<usize>,
    /// Target node spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Time step; defaults to 1e-6, or half the stability bound with --steady.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    pub steps: usize,
    /// Iterate until the residual reaches --tol instead of a fixed step count.
    #[arg(long)]
    pub steady: bool,
    #[arg(long, default_value = "1e-9")]
    pub tol: f64,
    /// Step cap for --steady.
    #[arg(long, default_value = "10000000", value_parser = parse_count)]
    pub max_steps: usize,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub seed: usize,
    #[arg(long, env = THREADS_ENV, default_value = "1", value_parser = parse_count)]
    pub threads: usize,
    /// Nodes per parallel work item.
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE, value_parser = parse_count)]
    pub chunk: usize,
    #[arg(long, default_value = "rbffd-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, default_value = "2", value_parser = parse_count)]
    pub m: usize,
    #[arg(long, default_value = "12", value_parser = parse_count)]
    pub n: usize,
    /// Target node counts, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000", value_parser = parse_count)]
    pub nodes: Vec<usize>,
    #[arg(long, default_value = "1e-9")]
    pub tol: f64,
    #[arg(long, default_value = "10000000", value_parser = parse_count)]
    pub max_steps: usize,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub seed: usize,
    #[arg(long, env = THREADS_ENV, default_value = "1", value_parser = parse_count)]
    pub threads: usize,
    #[arg(long, default_value = "rbffd-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "2", value_parser = parse_count)]
    pub m: usize,
    /// Target node counts.
    #[arg(long, value_delimiter = ',', required = true, num_args = 0.., value_parser = parse_count)]
    pub nodes: Vec<usize>,
    /// Support sizes.
    #[arg(long, value_delimiter = ',', default_value = "15", value_parser = parse_count)]
    pub n: Vec<usize>,
    /// Thread counts.
    #[arg(long, value_delimiter = ',', env = THREADS_ENV, default_value = "1", value_parser = parse_count)]
    pub threads: Vec<usize>,
    #[arg(long, default_value = "1e-6")]
    pub dt: f64,
    #[arg(long, default_value = "100", value_parser = parse_count)]
    pub steps: usize,
    #[arg(long, default_value = "3", value_parser = parse_count)]
    pub repeats: usize,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub seed: usize,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE, value_parser = parse_count)]
    pub chunk: usize,
    #[arg(long, default_value = "rbffd-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MemoryArgs {
    #[arg(long, default_value_t = DEFAULT_CACHE_BYTES, value_parser = parse_bytes)]
    pub cache_bytes: u64,
    /// Extra support sizes appended to the reference ones.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n: Vec<usize>,
    /// Also write memory_model.csv (or .json) into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::Format(_) => 2,
        Error::DegenerateStencil { .. } => 3,
        Error::Instability { .. } => 4,
        Error::Timeout { .. } => 5,
        Error::Io(_) => 1,
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Converge(a) => cmd_converge(a, out, err),
        Command::Bench(a) => cmd_bench(a, out),
        Command::MemoryModel(a) => cmd_memory_model(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let resolution = match (args.nodes, args.h) {
        (_, Some(h)) => Resolution::Spacing(h),
        (Some(n), None) => Resolution::NodeCount(n),
        (None, None) => Resolution::NodeCount(1027),
    };
    let mode = if args.steady {
        Mode::Steady {
            tol: args.tol,
            max_steps: args.max_steps,
        }
    } else {
        Mode::FixedSteps
    };
    let mut config = SolveConfig {
        m: args.m,
        n: args.n,
        resolution,
        dt: args.dt.unwrap_or(1e-6),
        steps: args.steps,
        mode,
        seed: args.seed as u64,
        threads: args.threads,
        chunk_size: args.chunk,
    };
    let disc = Discretization::build(&config)?;
    if args.steady && args.dt.is_none() {
        config.dt = 0.5 * stability_bound(&disc.shapes)?;
    }
    let report = run_time_loop(&config, &disc.nodes, &disc.shapes)?;

    report
        .field
        .write_solution_csv(&disc.nodes, create(&args.out, "solution.csv")?)?;
    let mut json = create(&args.out, "report.json")?;
    writeln!(json, "{}", report.to_json())?;
    json.flush()?;
    writeln!(
        out,
        "N = {}, steps = {}, loop {:.3} s, linf = {:.3e}, l2 = {:.3e}, residual = {:.3e}",
        disc.nodes.len(),
        report.steps,
        report.wall_time_s,
        report.linf,
        report.l2,
        report.residual
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub nodes: usize,
    pub h: f64,
    pub linf: f64,
    pub l2: f64,
}

/// Least-squares slope of `log(error)` against `log(h)` over the three
/// finest entries (all of them when fewer than four are given). `None`
/// when any error is zero or not finite.
pub fn fit_order(samples: &[(f64, f64)]) -> Option<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let used = if sorted.len() >= 4 {
        &sorted[sorted.len() - 3..]
    } else {
        &sorted[..]
    };
    if used.len() < 2 || used.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0 && e.is_finite())) {
        return None;
    }
    let pts: Vec<(f64, f64)> = used.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn check_refinement(nodes: &[usize]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(Error::Parameter(format!(
            "convergence study needs at least 3 node counts, got {}",
            nodes.len()
        )));
    }
    if nodes.iter().any(|&n| n < 50) || nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "node counts must be strictly increasing and at least 50".into(),
        ));
    }
    Ok(())
}

pub fn cmd_converge(args: &ConvergeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    check_refinement(&args.nodes)?;
    let mut rows = Vec::with_capacity(args.nodes.len());
    for &target in &args.nodes {
        let mut config = SolveConfig {
            m: args.m,
            n: args.n,
            resolution: Resolution::NodeCount(target),
            dt: 1.0,
            steps: 0,
            mode: Mode::Steady {
                tol: args.tol,
                max_steps: args.max_steps,
            },
            seed: args.seed as u64,
            threads: args.threads,
            chunk_size: DEFAULT_CHUNK_SIZE,
        };
        let disc = Discretization::build(&config)?;
        config.dt = 0.5 * stability_bound(&disc.shapes)?;
        let report = run_time_loop(&config, &disc.nodes, &disc.shapes)?;
        let row = ConvergenceRow {
            nodes: disc.nodes.len(),
            h: mean_nearest_neighbor_distance(disc.nodes.positions()),
            linf: report.linf,
            l2: report.l2,
        };
        writeln!(
            out,
            "N = {:>7}  h = {:.5}  linf = {:.3e}  l2 = {:.3e}  ({} steps)",
            row.nodes, row.h, row.linf, row.l2, report.steps
        )?;
        rows.push(row);
    }
    write_convergence(&rows, args.format, &args.out)?;
    report_order(&rows, out, err)
}

pub fn write_convergence(rows: &[ConvergenceRow], format: Format, dir: &Path) -> Result<()> {
    match format {
        Format::Csv => {
            let mut f = create(dir, "converge.csv")?;
            writeln!(f, "N,h,linf,l2")?;
            for r in rows {
                writeln!(f, "{},{},{},{}", r.nodes, r.h, r.linf, r.l2)?;
            }
            f.flush()?;
        }
        Format::Json => write_json(dir, "converge.json", rows)?,
    }
    Ok(())
}

/// Prints the fitted order, or NaN with a warning when the fit is undefined.
pub fn report_order(rows: &[ConvergenceRow], out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.linf)).collect();
    match fit_order(&samples) {
        Some(order) => writeln!(out, "estimated order: {order:.3}")?,
        None => {
            writeln!(err, "warning: errors are zero or non-finite, order is undefined")?;
            writeln!(out, "estimated order: NaN")?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.nodes.is_empty() || args.n.is_empty() || args.threads.is_empty() {
        return Err(Error::Parameter(
            "node counts, support sizes and thread counts must be non-empty".into(),
        ));
    }
    let mut reports: Vec<TimingReport> = Vec::new();
    for &target in &args.nodes {
        for &n in &args.n {
            let config = SolveConfig {
                m: args.m,
                n,
                resolution: Resolution::NodeCount(target),
                dt: args.dt,
                steps: args.steps,
                mode: Mode::FixedSteps,
                seed: args.seed as u64,
                threads: 1,
                chunk_size: args.chunk,
            };
            let disc = Discretization::build(&config)?;
            for run in benchmark_time_loop(&config, &disc.nodes, &disc.shapes, &args.threads, args.repeats)? {
                writeln!(out, "{}", run.report.csv_row())?;
                reports.push(run.report);
            }
        }
    }
    match args.format {
        Format::Csv => {
            let mut f = create(&args.out, "bench.csv")?;
            write_timing_csv(&reports, &mut f)?;
            f.flush()?;
        }
        Format::Json => write_json(&args.out, "bench.json", &reports)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct MemoryRow {
    n: usize,
    per_node_bytes: u64,
    #[serde(rename = "cache_peak_N")]
    cache_peak_nodes: u64,
}

pub fn cmd_memory_model(args: &MemoryArgs, out: &mut dyn Write) -> Result<()> {
    let models = REFERENCE_SUPPORT_SIZES
        .iter()
        .chain(&args.n)
        .map(|&n| MemoryModel::new(n, args.cache_bytes))
        .collect::<Result<Vec<_>>>()?;
    write_memory_model_csv(&models, &mut *out)?;
    if let Some(dir) = &args.out {
        match args.format {
            Format::Csv => {
                let mut f = create(dir, "memory_model.csv")?;
                write_memory_model_csv(&models, &mut f)?;
                f.flush()?;
            }
            Format::Json => {
                let rows: Vec<MemoryRow> = models
                    .iter()
                    .map(|m| MemoryRow {
                        n: m.n,
                        per_node_bytes: m.per_node_bytes(),
                        cache_peak_nodes: m.cache_peak_nodes(),
                    })
                    .collect();
                write_json(dir, "memory_model.json", &rows)?;
            }
        }
    }
    Ok(())
}
