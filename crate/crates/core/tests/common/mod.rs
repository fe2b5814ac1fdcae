//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbffd::geometry::{closed_form_solution, forcing, NodeKind, NodeSet, Point2};
use rbffd::rbf_weights::ShapeStore;

/// O(N²) k-nearest neighbours ordered by (squared distance, index).
pub fn brute_force_knn(nodes: &NodeSet, n: usize) -> Vec<Vec<usize>> {
    let pts = nodes.positions();
    pts.iter()
        .map(|p| {
            let mut all: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(j, q)| {
                    let (dx, dy) = (p.x - q.x, p.y - q.y);
                    (dx * dx + dy * dy, j)
                })
                .collect();
            all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(n).map(|(_, j)| j).collect()
        })
        .collect()
}

pub fn min_pairwise_distance(points: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(points[i].dist(points[j]));
        }
    }
    best
}

/// Steady state of the explicit iteration: solves `L u = -f` on interior
/// rows with the boundary values moved to the right-hand side, by dense LU.
pub fn direct_steady_solve(nodes: &NodeSet, shapes: &ShapeStore) -> Vec<f64> {
    let rows = shapes.rows();
    let mut col_of = vec![usize::MAX; nodes.len()];
    for (r, &i) in rows.iter().enumerate() {
        col_of[i] = r;
    }
    let k = rows.len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (r, &i) in rows.iter().enumerate() {
        b[r] = -forcing(nodes.position(i));
        for (w, &j) in shapes.row_weights(r).iter().zip(shapes.row_stencil(r)) {
            let j = j as usize;
            match nodes.kind(j) {
                NodeKind::Interior => a[(r, col_of[j])] += w,
                NodeKind::Boundary => b[r] -= w * closed_form_solution(nodes.position(j)),
            }
        }
    }
    let x = a.lu().solve(&b).expect("steady system is nonsingular");
    let mut u: Vec<f64> = nodes.positions().iter().map(|p| closed_form_solution(*p)).collect();
    for (r, &i) in rows.iter().enumerate() {
        u[i] = x[r];
    }
    u
}

/// Random support of `n` points in the unit disk around a random centre
/// (the first entry), rejecting points closer than `0.3/√n`.
pub fn random_stencil(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    let center = Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let sep = 0.3 / (n as f64).sqrt();
    let mut pts = vec![center];
    while pts.len() < n {
        let r = rng.random_range(0.0..1.0f64).sqrt();
        let t = rng.random_range(0.0..2.0 * PI);
        let q = Point2::new(center.x + r * t.cos(), center.y + r * t.sin());
        if pts.iter().all(|p| p.dist(q) >= sep) {
            pts.push(q);
        }
    }
    pts
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly random interior points plus an equidistant boundary ring.
pub fn uniform_random_nodes(rng: &mut ChaCha8Rng, interior: usize, boundary: usize) -> NodeSet {
    let mut pos = Vec::new();
    let mut kinds = Vec::new();
    for k in 0..boundary {
        let t = 2.0 * PI * k as f64 / boundary as f64;
        pos.push(Point2::new(t.cos(), t.sin()));
        kinds.push(NodeKind::Boundary);
    }
    while kinds.len() < boundary + interior {
        let p = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm() < 0.999 {
            pos.push(p);
            kinds.push(NodeKind::Interior);
        }
    }
    NodeSet::new(pos, kinds, 2.0 / ((interior + boundary) as f64).sqrt()).unwrap()
}

/// Square lattice clipped to the disk plus boundary ring: many exact ties.
pub fn lattice_nodes(spacing: f64, boundary: usize) -> NodeSet {
    let mut pos = Vec::new();
    let mut kinds = Vec::new();
    for k in 0..boundary {
        let t = 2.0 * PI * k as f64 / boundary as f64;
        pos.push(Point2::new(t.cos(), t.sin()));
        kinds.push(NodeKind::Boundary);
    }
    let steps = (1.0 / spacing) as i64;
    for iy in -steps..=steps {
        for ix in -steps..=steps {
            let p = Point2::new(ix as f64 * spacing, iy as f64 * spacing);
            if p.norm() < 1.0 - spacing / 2.0 {
                pos.push(p);
                kinds.push(NodeKind::Interior);
            }
        }
    }
    NodeSet::new(pos, kinds, spacing).unwrap()
}
