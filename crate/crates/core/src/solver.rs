//! Explicit pseudo-time marching towards the steady Poisson solution:
//! `u₂ = u₁ + dt·(f + ∇²ₕu₁)` on interior nodes, Dirichlet values on the
//! boundary.
//!
//! The loop owns two buffers and swaps them after every step. Interior
//! updates within a step are independent, so they are split into chunks of
//! nodes and run on a rayon pool; every node sums its stencil in a fixed
//! order, which makes the result independent of the thread count.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::geometry::{
    closed_form_solution, forcing, generate_for_node_count, generate_unit_disk_nodes, NodeKind,
    NodeSet,
};
use crate::neighborhoods::{binomial, build_stencils, StencilSet};
use crate::rbf_weights::{assemble_shapes, stencil_dot, ShapeStore};

pub const DEFAULT_CHUNK_SIZE: usize = 1024;

/// Node-indexed scalar values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn sample(nodes: &NodeSet, f: impl Fn(crate::geometry::Point2) -> f64) -> Self {
        Self(nodes.positions().iter().map(|p| f(*p)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Writes `x,y,kind,u,exact,abs_error` rows.
    pub fn write_solution_csv<W: Write>(&self, nodes: &NodeSet, mut out: W) -> Result<()> {
        writeln!(out, "x,y,kind,u,exact,abs_error")?;
        for (i, u) in self.0.iter().enumerate() {
            let p = nodes.position(i);
            let exact = closed_form_solution(p);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.x,
                p.y,
                nodes.kind(i).as_str(),
                u,
                exact,
                (u - exact).abs()
            )?;
        }
        Ok(())
    }
}

/// How the spatial resolution is requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Spacing(f64),
    NodeCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedSteps,
    /// Iterate until the residual drops to `tol`, giving up after `max_steps`.
    Steady { tol: f64, max_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub m: usize,
    pub n: usize,
    pub resolution: Resolution,
    pub dt: f64,
    pub steps: usize,
    pub mode: Mode,
    pub seed: u64,
    pub threads: usize,
    pub chunk_size: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            m: 2,
            n: 15,
            resolution: Resolution::NodeCount(1027),
            dt: 1e-6,
            steps: 100_000,
            mode: Mode::FixedSteps,
            seed: 1,
            threads: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return param(format!("time step must be positive, got {}", self.dt));
        }
        let needed = binomial(self.m + 2, 2);
        if self.n < needed {
            return param(format!(
                "support size {} is below the {needed} monomials of degree {}",
                self.n, self.m
            ));
        }
        if self.threads == 0 || self.chunk_size == 0 {
            return param("thread count and chunk size must be at least 1");
        }
        if let Mode::Steady { tol, .. } = self.mode {
            if !(tol.is_finite() && tol > 0.0) {
                return param(format!("residual tolerance must be positive, got {tol}"));
            }
        }
        Ok(())
    }
}

/// Nodes, supports and shapes for one configuration.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub nodes: NodeSet,
    pub shapes: ShapeStore,
}

impl Discretization {
    pub fn build(config: &SolveConfig) -> Result<Self> {
        config.validate()?;
        let nodes = match config.resolution {
            Resolution::Spacing(h) => generate_unit_disk_nodes(h, config.seed)?,
            Resolution::NodeCount(target) => generate_for_node_count(target, config.seed)?,
        };
        let stencils = build_stencils(&nodes, config.n)?;
        let shapes = assemble_shapes(&nodes, &stencils, config.m)?;
        Ok(Self { nodes, shapes })
    }

    pub fn stencils(&self) -> &StencilSet {
        self.shapes.stencils()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub field: ScalarField,
    pub steps: usize,
    pub wall_time_s: f64,
    pub linf: f64,
    pub l2: f64,
    pub residual: f64,
    pub config: ReportedConfig,
}

/// The configuration as echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ReportedConfig {
    #[serde(flatten)]
    pub config: SolveConfig,
    pub nodes: usize,
    pub interior_nodes: usize,
    pub initial_condition: &'static str,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Sets boundary entries to the closed-form solution.
pub fn apply_dirichlet(nodes: &NodeSet, field: &ScalarField) -> ScalarField {
    let mut out = field.clone();
    for i in nodes.boundary_indices() {
        out.0[i] = closed_form_solution(nodes.position(i));
    }
    out
}

/// Zero interior, exact Dirichlet boundary.
pub fn initial_field(nodes: &NodeSet) -> ScalarField {
    apply_dirichlet(nodes, &ScalarField::zeros(nodes.len()))
}

/// Forcing sampled at every node.
pub fn forcing_values(nodes: &NodeSet) -> Vec<f64> {
    nodes.positions().iter().map(|p| forcing(*p)).collect()
}

/// One explicit step, computed sequentially. `f` is indexed by node.
pub fn explicit_step(u1: &ScalarField, shapes: &ShapeStore, f: &[f64], dt: f64) -> Result<ScalarField> {
    let mut u2 = u1.clone();
    let mut max_abs = 0.0f64;
    let mut finite = true;
    for r in 0..shapes.row_count() {
        let i = shapes.rows()[r];
        let lap = stencil_dot(shapes.row_weights(r), shapes.row_stencil(r), &u1.0);
        let v = u1.0[i] + dt * (f[i] + lap);
        finite &= v.is_finite();
        max_abs = max_abs.max(v.abs());
        u2.0[i] = v;
    }
    if !finite {
        return Err(Error::Instability { step: 1, max_abs });
    }
    Ok(u2)
}

/// `(max |u - u*|, sqrt(mean (u - u*)²))` over all nodes.
pub fn error_norms(field: &ScalarField, nodes: &NodeSet) -> (f64, f64) {
    assert_eq!(field.len(), nodes.len(), "field and node set sizes differ");
    let (mut linf, mut sum_sq) = (0.0f64, 0.0f64);
    for (u, p) in field.0.iter().zip(nodes.positions()) {
        let e = (u - closed_form_solution(*p)).abs();
        linf = linf.max(e);
        sum_sq += e * e;
    }
    let l2 = if field.is_empty() {
        0.0
    } else {
        (sum_sq / field.len() as f64).sqrt()
    };
    (linf, l2)
}

/// `max_i |f_i + ∇²ₕu_i|` over interior rows.
pub fn pde_residual(field: &ScalarField, shapes: &ShapeStore, f: &[f64]) -> f64 {
    shapes
        .apply(&field.0)
        .iter()
        .zip(shapes.rows())
        .map(|(lap, &i)| (f[i] + lap).abs())
        .fold(0.0, f64::max)
}

/// Gershgorin-style explicit-Euler time step limit `min_r 2/∑_j |w_rj|`.
pub fn stability_bound(shapes: &ShapeStore) -> Result<f64> {
    if shapes.row_count() == 0 {
        return param("stability bound needs at least one stencil row");
    }
    Ok((0..shapes.row_count())
        .map(|r| 2.0 / shapes.row_weights(r).iter().map(|w| w.abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy)]
struct StepStats {
    max_update: f64,
    max_abs: f64,
    finite: bool,
}

impl StepStats {
    const EMPTY: Self = Self {
        max_update: 0.0,
        max_abs: 0.0,
        finite: true,
    };

    fn merge(self, o: Self) -> Self {
        Self {
            max_update: self.max_update.max(o.max_update),
            max_abs: self.max_abs.max(o.max_abs),
            finite: self.finite && o.finite,
        }
    }
}

const NO_ROW: u32 = u32::MAX;

/// Prepared state for repeated explicit steps on one discretization.
pub struct TimeLoop<'a> {
    shapes: &'a ShapeStore,
    row_of: Vec<u32>,
    f: Vec<f64>,
    dt: f64,
    chunk_size: usize,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> TimeLoop<'a> {
    pub fn new(nodes: &NodeSet, shapes: &'a ShapeStore, dt: f64, threads: usize, chunk_size: usize) -> Result<Self> {
        if shapes.stencils().len() != nodes.len() {
            return param("shapes were not assembled for this node set");
        }
        if threads == 0 || chunk_size == 0 {
            return param("thread count and chunk size must be at least 1");
        }
        let mut row_of = vec![NO_ROW; nodes.len()];
        for (r, &i) in shapes.rows().iter().enumerate() {
            if nodes.kind(i) != NodeKind::Interior {
                return param(format!("shape row {r} belongs to boundary node {i}"));
            }
            row_of[i] = r as u32;
        }
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Parameter(format!("cannot start {threads} threads: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            shapes,
            row_of,
            f: forcing_values(nodes),
            dt,
            chunk_size,
            pool,
        })
    }

    fn update_chunk(&self, start: usize, u1: &[f64], out: &mut [f64]) -> StepStats {
        let mut stats = StepStats::EMPTY;
        for (k, slot) in out.iter_mut().enumerate() {
            let i = start + k;
            let r = self.row_of[i];
            if r == NO_ROW {
                *slot = u1[i];
                continue;
            }
            let r = r as usize;
            let lap = stencil_dot(self.shapes.row_weights(r), self.shapes.row_stencil(r), u1);
            let v = u1[i] + self.dt * (self.f[i] + lap);
            stats.finite &= v.is_finite();
            stats.max_abs = stats.max_abs.max(v.abs());
            stats.max_update = stats.max_update.max((v - u1[i]).abs());
            *slot = v;
        }
        stats
    }

    fn step(&self, u1: &[f64], u2: &mut [f64]) -> StepStats {
        let chunk = self.chunk_size;
        match &self.pool {
            None => u2
                .chunks_mut(chunk)
                .enumerate()
                .map(|(c, out)| self.update_chunk(c * chunk, u1, out))
                .fold(StepStats::EMPTY, StepStats::merge),
            Some(pool) => pool.install(|| {
                u2.par_chunks_mut(chunk)
                    .enumerate()
                    .map(|(c, out)| self.update_chunk(c * chunk, u1, out))
                    .reduce(|| StepStats::EMPTY, StepStats::merge)
            }),
        }
    }

    /// Advances `u` by `steps` steps (or until steady) and returns the
    /// number of steps taken, the last residual and the loop time.
    pub fn run(&self, u: &mut ScalarField, mode: Mode, steps: usize) -> Result<(usize, f64, f64)> {
        let mut u1 = std::mem::take(&mut u.0);
        let mut u2 = u1.clone();
        let mut residual = f64::NAN;
        let mut taken = 0;
        let cap = match mode {
            Mode::FixedSteps => steps,
            Mode::Steady { max_steps, .. } => max_steps,
        };
        let mut result = Ok(());
        let start = Instant::now();
        while taken < cap {
            let stats = self.step(&u1, &mut u2);
            taken += 1;
            if !stats.finite {
                result = Err(Error::Instability {
                    step: taken,
                    max_abs: stats.max_abs,
                });
                break;
            }
            std::mem::swap(&mut u1, &mut u2);
            residual = stats.max_update / self.dt;
            if let Mode::Steady { tol, .. } = mode {
                if residual <= tol {
                    break;
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        u.0 = u1;
        result?;
        if let Mode::Steady { tol, .. } = mode {
            if !(residual <= tol) {
                return Err(Error::Timeout {
                    steps: taken,
                    residual,
                });
            }
        }
        if taken == 0 {
            residual = pde_residual(u, self.shapes, &self.f);
        }
        Ok((taken, residual, elapsed))
    }
}

/// Runs the configured time loop from the standard initial field.
pub fn run_time_loop(config: &SolveConfig, nodes: &NodeSet, shapes: &ShapeStore) -> Result<SolveReport> {
    config.validate()?;
    if shapes.support_size() != config.n || shapes.degree() != config.m {
        return param(format!(
            "shapes were assembled with m = {}, n = {}, config asks for m = {}, n = {}",
            shapes.degree(),
            shapes.support_size(),
            config.m,
            config.n
        ));
    }
    let lp = TimeLoop::new(nodes, shapes, config.dt, config.threads, config.chunk_size)?;
    let mut field = initial_field(nodes);
    let (steps, residual, wall_time_s) = lp.run(&mut field, config.mode, config.steps)?;
    let (linf, l2) = error_norms(&field, nodes);
    Ok(SolveReport {
        field,
        steps,
        wall_time_s,
        linf,
        l2,
        residual,
        config: ReportedConfig {
            config: config.clone(),
            nodes: nodes.len(),
            interior_nodes: nodes.interior_count(),
            initial_condition: "zero interior, exact Dirichlet boundary",
        },
    })
}
