//! Unit-disk domain, scattered node generation and the analytic
//! solution/forcing pair of the model Poisson problem.
//!
//! Nodes are produced in two stages: an equidistant ring on the unit circle
//! (the Dirichlet boundary), followed by an advancing-front fill of the open
//! disk. Each accepted node spawns candidates on a circle of radius `h`
//! around itself; a candidate is kept when it lies inside the disk and no
//! accepted node is closer than `0.8 h`. Boundary nodes always come first in
//! the resulting ordering.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::kdtree::KdTree;

/// Tolerance on `|‖p‖ - 1|` used to classify boundary nodes.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Tunables of the advancing-front fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillParams {
    /// Minimum candidate separation, as a fraction of the target spacing.
    pub accept_factor: f64,
    /// Candidates spawned on the circle around each front node.
    pub candidates: usize,
}

impl Default for FillParams {
    fn default() -> Self {
        Self {
            accept_factor: 0.8,
            candidates: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Boundary => "boundary",
        }
    }
}

impl std::str::FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interior" => Ok(NodeKind::Interior),
            "boundary" => Ok(NodeKind::Boundary),
            other => Err(Error::Format(format!("unknown node kind `{other}`"))),
        }
    }
}

/// Scattered discretization nodes on the closed unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    positions: Vec<Point2>,
    kinds: Vec<NodeKind>,
    h: f64,
}

impl NodeSet {
    /// Builds a node set from explicit positions and tags, checking the
    /// classification and count invariants.
    pub fn new(positions: Vec<Point2>, kinds: Vec<NodeKind>, h: f64) -> Result<Self> {
        if positions.len() != kinds.len() {
            return param(format!(
                "{} positions but {} node kinds",
                positions.len(),
                kinds.len()
            ));
        }
        if !(h.is_finite() && h > 0.0) {
            return param(format!("spacing must be positive, got {h}"));
        }
        for (i, (p, kind)) in positions.iter().zip(&kinds).enumerate() {
            if !p.is_finite() {
                return param(format!("node {i} has non-finite coordinates"));
            }
            let r = p.norm();
            let ok = match kind {
                NodeKind::Interior => r < 1.0 - BOUNDARY_EPS,
                NodeKind::Boundary => (r - 1.0).abs() <= BOUNDARY_EPS,
            };
            if !ok {
                return param(format!(
                    "node {i} at radius {r} is not a valid {} node",
                    kind.as_str()
                ));
            }
        }
        let set = Self { positions, kinds, h };
        if set.interior_count() < 1 || set.boundary_count() < 3 {
            return param(format!(
                "need at least 1 interior and 3 boundary nodes, got {} and {}",
                set.interior_count(),
                set.boundary_count()
            ));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn position(&self, i: usize) -> Point2 {
        self.positions[i]
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    /// Target spacing the set was generated with.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn interior_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    pub fn boundary_count(&self) -> usize {
        self.len() - self.interior_count()
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        self.indices_of(NodeKind::Interior)
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        self.indices_of(NodeKind::Boundary)
    }

    fn indices_of(&self, kind: NodeKind) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter_map(|(i, k)| (*k == kind).then_some(i))
            .collect()
    }

    /// Writes `x,y,kind` rows in node order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,kind")?;
        for (p, k) in self.positions.iter().zip(&self.kinds) {
            writeln!(out, "{},{},{}", p.x, p.y, k.as_str())?;
        }
        Ok(())
    }

    /// Reads the `x,y,kind` format. The spacing is not stored in the file,
    /// so it is recovered as the mean nearest-neighbour distance.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty node file".into()))??;
        if header.trim() != "x,y,kind" {
            return Err(Error::Format(format!("unexpected header `{header}`")));
        }
        let mut positions = Vec::new();
        let mut kinds = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!("row {row}: expected 3 fields")));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {row}: {e}")))
            };
            positions.push(Point2::new(num(fields[0])?, num(fields[1])?));
            kinds.push(fields[2].parse()?);
        }
        let h = mean_nearest_neighbor_distance(&positions);
        Self::new(positions, kinds, h)
    }
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nearest_neighbor_distance(points: &[Point2]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let tree = KdTree::new(points);
    let total: f64 = points
        .iter()
        .map(|p| {
            let nn = tree.nearest(*p, 2);
            p.dist(points[nn[1]])
        })
        .sum();
    total / points.len() as f64
}

fn check_spacing(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 0.5 {
        Ok(())
    } else {
        param(format!("spacing h must satisfy 0 < h < 0.5, got {h}"))
    }
}

/// Area-plus-perimeter estimate `round(π/h² + 2π/h)` of the node count.
pub fn node_count_for_spacing(h: f64) -> Result<usize> {
    check_spacing(h)?;
    Ok((PI / (h * h) + 2.0 * PI / h).round() as usize)
}

/// Inverse of [`node_count_for_spacing`], solving `π s² + 2π s = N` for `s = 1/h`.
pub fn spacing_for_node_count(target: usize) -> f64 {
    let s = -1.0 + (1.0 + target as f64 / PI).sqrt();
    1.0 / s
}

/// Generates nodes on the unit disk with target spacing `h`.
pub fn generate_unit_disk_nodes(h: f64, seed: u64) -> Result<NodeSet> {
    generate_unit_disk_nodes_with(h, seed, FillParams::default())
}

/// [`generate_unit_disk_nodes`] with explicit fill parameters.
pub fn generate_unit_disk_nodes_with(h: f64, seed: u64, params: FillParams) -> Result<NodeSet> {
    check_spacing(h)?;
    if !(params.accept_factor >= 0.5 && params.accept_factor <= 1.0) || params.candidates < 3 {
        return param(format!("invalid fill parameters {params:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_boundary = ((2.0 * PI / h).round() as usize).max(3);
    let phase = rng.random_range(0.0..2.0 * PI / n_boundary as f64);
    let mut positions: Vec<Point2> = (0..n_boundary)
        .map(|k| {
            let t = phase + 2.0 * PI * k as f64 / n_boundary as f64;
            Point2::new(t.cos(), t.sin())
        })
        .collect();
    let mut kinds = vec![NodeKind::Boundary; n_boundary];

    let min_dist = params.accept_factor * h;
    let mut grid = BackgroundGrid::new(min_dist);
    for (i, p) in positions.iter().enumerate() {
        grid.insert(*p, i);
    }

    let mut front: VecDeque<usize> = (0..n_boundary).collect();
    while let Some(i) = front.pop_front() {
        let origin = positions[i];
        let offset = rng.random_range(0.0..2.0 * PI);
        for j in 0..params.candidates {
            let t = offset + 2.0 * PI * j as f64 / params.candidates as f64;
            let c = Point2::new(origin.x + h * t.cos(), origin.y + h * t.sin());
            if c.norm() >= 1.0 - BOUNDARY_EPS {
                continue;
            }
            if grid.has_neighbor_within(c, min_dist, &positions) {
                continue;
            }
            let idx = positions.len();
            positions.push(c);
            kinds.push(NodeKind::Interior);
            grid.insert(c, idx);
            front.push_back(idx);
        }
    }

    NodeSet::new(positions, kinds, h)
}

/// Generates a node set whose size is close to `target`, adjusting the
/// spacing a few times from the area/perimeter estimate.
pub fn generate_for_node_count(target: usize, seed: u64) -> Result<NodeSet> {
    generate_for_node_count_with(target, seed, FillParams::default())
}

pub fn generate_for_node_count_with(target: usize, seed: u64, params: FillParams) -> Result<NodeSet> {
    if target < 20 {
        return param(format!("target node count must be at least 20, got {target}"));
    }
    let mut h = spacing_for_node_count(target).min(0.49);
    let mut best: Option<NodeSet> = None;
    for _ in 0..8 {
        let nodes = generate_unit_disk_nodes_with(h, seed, params)?;
        let miss = nodes.len().abs_diff(target);
        let better = best.as_ref().is_none_or(|b| miss < b.len().abs_diff(target));
        let ratio = nodes.len() as f64 / target as f64;
        if better {
            best = Some(nodes);
        }
        if (ratio - 1.0).abs() <= 0.005 {
            break;
        }
        h = (h * ratio.sqrt()).min(0.49);
    }
    Ok(best.expect("at least one generation attempt"))
}

/// `sin(πx)·sin(πy)`, the closed-form solution.
pub fn closed_form_solution(p: Point2) -> f64 {
    (PI * p.x).sin() * (PI * p.y).sin()
}

/// `2π²·sin(πx)·sin(πy)`, so that `-∇²u = f`.
pub fn forcing(p: Point2) -> f64 {
    2.0 * PI * PI * closed_form_solution(p)
}

/// Uniform bucket grid over `[-1, 1]²` for separation checks during the fill.
struct BackgroundGrid {
    cell: f64,
    dim: usize,
    buckets: Vec<Vec<usize>>,
}

impl BackgroundGrid {
    fn new(cell: f64) -> Self {
        let dim = (2.0 / cell).ceil() as usize + 1;
        Self {
            cell,
            dim,
            buckets: vec![Vec::new(); dim * dim],
        }
    }

    fn coords(&self, p: Point2) -> (usize, usize) {
        let c = |v: f64| (((v + 1.0) / self.cell).floor().max(0.0) as usize).min(self.dim - 1);
        (c(p.x), c(p.y))
    }

    fn insert(&mut self, p: Point2, idx: usize) {
        let (cx, cy) = self.coords(p);
        self.buckets[cy * self.dim + cx].push(idx);
    }

    fn has_neighbor_within(&self, p: Point2, radius: f64, positions: &[Point2]) -> bool {
        let (cx, cy) = self.coords(p);
        let r2 = radius * radius;
        for gy in cy.saturating_sub(1)..=(cy + 1).min(self.dim - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(self.dim - 1) {
                if self.buckets[gy * self.dim + gx]
                    .iter()
                    .any(|&j| positions[j].dist_sq(p) < r2)
                {
                    return true;
                }
            }
        }
        false
    }
}
