//! Working-set memory model of the time loop and a throughput harness.
//!
//! The loop touches `N(4 + n)` doubles and `N_i + N n` integers per step.
//! With `N_i = N` the per-node cost is `8(4 + n) + 4(1 + n)` bytes, and the
//! node count at which the working set fills a cache of `C` bytes is
//! `round(C / per_node)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{param, Result};
use crate::geometry::NodeSet;
use crate::rbf_weights::ShapeStore;
use crate::solver::{initial_field, Mode, ScalarField, SolveConfig, TimeLoop};

pub const DOUBLE_BYTES: u64 = 8;
pub const INT_BYTES: u64 = 4;
/// 5.5 MB, decimal.
pub const DEFAULT_CACHE_BYTES: u64 = 5_500_000;
/// Support sizes of the reference sweep.
pub const REFERENCE_SUPPORT_SIZES: [usize; 6] = [12, 15, 20, 30, 45, 60];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryModel {
    pub n: usize,
    pub cache_bytes: u64,
}

impl MemoryModel {
    pub fn new(n: usize, cache_bytes: u64) -> Result<Self> {
        if n == 0 {
            return param("support size must be at least 1");
        }
        if cache_bytes == 0 {
            return param("cache size must be positive");
        }
        Ok(Self { n, cache_bytes })
    }

    /// Bytes per node with every node treated as interior.
    pub fn per_node_bytes(&self) -> u64 {
        let n = self.n as u64;
        DOUBLE_BYTES * (4 + n) + INT_BYTES * (1 + n)
    }

    pub fn cache_peak_nodes(&self) -> u64 {
        // round half up, in integers
        let per = self.per_node_bytes();
        (2 * self.cache_bytes + per) / (2 * per)
    }
}

/// `8·N·(4 + n) + 4·(N_i + N·n)`.
pub fn estimate_memory_bytes(nodes: u64, interior: u64, n: usize) -> Result<u64> {
    if interior > nodes {
        return param(format!("interior count {interior} exceeds node count {nodes}"));
    }
    if n == 0 {
        return param("support size must be at least 1");
    }
    let n = n as u64;
    Ok(DOUBLE_BYTES * nodes * (4 + n) + INT_BYTES * (interior + nodes * n))
}

/// Node count at which the time-loop working set fills `cache_bytes`.
#[allow(non_snake_case)]
pub fn cache_peak_N(n: usize, cache_bytes: u64) -> Result<u64> {
    Ok(MemoryModel::new(n, cache_bytes)?.cache_peak_nodes())
}

pub fn speedup(t_base: f64, t_accel: f64) -> Result<f64> {
    if !(t_base > 0.0 && t_accel > 0.0) || !t_base.is_finite() || !t_accel.is_finite() {
        return param(format!(
            "speedup needs positive times, got {t_base} and {t_accel}"
        ));
    }
    Ok(t_base / t_accel)
}

/// Writes `n,per_node_bytes,cache_peak_N` for each support size.
pub fn write_memory_model_csv<W: Write>(models: &[MemoryModel], mut out: W) -> Result<()> {
    writeln!(out, "n,per_node_bytes,cache_peak_N")?;
    for m in models {
        writeln!(out, "{},{},{}", m.n, m.per_node_bytes(), m.cache_peak_nodes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    #[serde(rename = "N")]
    pub nodes: usize,
    pub interior_nodes: usize,
    pub n: usize,
    pub m: usize,
    pub steps: usize,
    pub threads: usize,
    pub loop_seconds: f64,
    /// `loop_seconds / (steps · N_i)` in nanoseconds; absent when no steps ran.
    pub ns_per_step_node: Option<f64>,
}

impl TimingReport {
    pub const CSV_HEADER: &'static str = "N,n,m,threads,steps,loop_seconds,ns_per_step_node";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.nodes,
            self.n,
            self.m,
            self.threads,
            self.steps,
            self.loop_seconds,
            self.ns_per_step_node.map(|v| v.to_string()).unwrap_or_default()
        )
    }
}

pub fn write_timing_csv<W: Write>(reports: &[TimingReport], mut out: W) -> Result<()> {
    writeln!(out, "{}", TimingReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: TimingReport,
    /// Field after the last repeat.
    pub field: ScalarField,
}

/// Times `config.steps` fixed steps once per thread count, keeping the
/// fastest of `repeats` runs.
pub fn benchmark_time_loop(
    config: &SolveConfig,
    nodes: &NodeSet,
    shapes: &ShapeStore,
    thread_counts: &[usize],
    repeats: usize,
) -> Result<Vec<BenchmarkRun>> {
    if repeats == 0 {
        return param("repeats must be at least 1");
    }
    if thread_counts.is_empty() {
        return param("at least one thread count is required");
    }
    let mut runs = Vec::with_capacity(thread_counts.len());
    for &threads in thread_counts {
        let lp = TimeLoop::new(nodes, shapes, config.dt, threads, config.chunk_size)?;
        let mut best = f64::INFINITY;
        let mut field = initial_field(nodes);
        for _ in 0..repeats {
            field = initial_field(nodes);
            let (_, _, seconds) = lp.run(&mut field, Mode::FixedSteps, config.steps)?;
            best = best.min(seconds);
        }
        let interior = nodes.interior_count();
        let ns_per_step_node = (config.steps > 0 && interior > 0)
            .then(|| best * 1e9 / (config.steps as f64 * interior as f64));
        runs.push(BenchmarkRun {
            report: TimingReport {
                nodes: nodes.len(),
                interior_nodes: interior,
                n: shapes.support_size(),
                m: shapes.degree(),
                steps: config.steps,
                threads,
                loop_seconds: best,
                ns_per_step_node,
            },
            field,
        });
    }
    Ok(runs)
}
