//! RBF-FD Laplacian weights from polyharmonic splines `φ(r) = r³`
//! augmented with monomials up to degree `m`.
//!
//! For a support `q_0 = c, q_1, …, q_{n-1}` the weights solve the saddle
//! system
//!
//! ```text
//! [ A  P ] [ w ]   [ ∇²φ(‖c - q_j‖) ]
//! [ Pᵀ 0 ] [ λ ] = [ ∇²p_α(c)       ]
//! ```
//!
//! with `A_jk = φ(‖q_j - q_k‖)` and `P_jα = p_α(q_j)`. Coordinates are
//! shifted to the centre and divided by the support radius before the solve,
//! and the weights are scaled back by `1/radius²`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::geometry::{NodeKind, NodeSet, Point2};
use crate::lu::LuFactor;
use crate::neighborhoods::{binomial, StencilSet};

/// Local systems with a larger condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Monomials `x^a y^b` with `a + b ≤ m`, graded lexicographic
/// (by degree, then by `a` descending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    m: usize,
    exponents: Vec<(u32, u32)>,
}

impl MonomialBasis {
    pub fn new(m: usize) -> Self {
        let exponents = (0..=m as u32)
            .flat_map(|deg| (0..=deg).rev().map(move |a| (a, deg - a)))
            .collect();
        Self { m, exponents }
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exponents
    }

    pub fn eval(&self, p: Point2) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&(a, b)| p.x.powi(a as i32) * p.y.powi(b as i32))
            .collect()
    }

    /// Analytic Laplacians of every basis monomial at `p`.
    pub fn laplacians(&self, p: Point2) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&(a, b)| monomial_laplacian(a, b, p))
            .collect()
    }
}

/// `∇²(x^a y^b)` at `p`.
pub fn monomial_laplacian(a: u32, b: u32, p: Point2) -> f64 {
    let term = |k: u32, s: f64, other: f64, j: u32| {
        if k < 2 {
            0.0
        } else {
            (k * (k - 1)) as f64 * s.powi(k as i32 - 2) * other.powi(j as i32)
        }
    };
    term(a, p.x, p.y, b) + term(b, p.y, p.x, a)
}

pub fn phs3(r: f64) -> f64 {
    r * r * r
}

/// 2D Laplacian of `r³`: `k(k + d - 2) r^(k-2)` with `k = 3`, `d = 2`.
pub fn laplacian_phs3(r: f64) -> f64 {
    9.0 * r
}

/// Laplacian weights for `center` over `support` (which must start with
/// `center`). Degenerate stencils are reported without a node index.
pub fn compute_laplacian_weights(center: Point2, support: &[Point2], m: usize) -> Result<Vec<f64>> {
    compute_with_basis(center, support, &MonomialBasis::new(m))
}

fn compute_with_basis(center: Point2, support: &[Point2], basis: &MonomialBasis) -> Result<Vec<f64>> {
    let n = support.len();
    let big_m = basis.len();
    if n < big_m {
        return param(format!(
            "support of {n} nodes cannot carry {big_m} monomials (degree {})",
            basis.degree()
        ));
    }
    if support[0] != center {
        return param("support must start with the centre node");
    }
    for j in 1..n {
        if support[..j].contains(&support[j]) {
            return Err(degenerate(center, f64::INFINITY));
        }
    }

    let radius = support.iter().map(|q| center.dist(*q)).fold(0.0, f64::max);
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let local: Vec<Point2> = support
        .iter()
        .map(|q| Point2::new((q.x - center.x) / scale, (q.y - center.y) / scale))
        .collect();

    let size = n + big_m;
    let mut mat = vec![0.0; size * size];
    let mut rhs = vec![0.0; size];
    for j in 0..n {
        for k in 0..j {
            let v = phs3(local[j].dist(local[k]));
            mat[j * size + k] = v;
            mat[k * size + j] = v;
        }
        for (alpha, v) in basis.eval(local[j]).into_iter().enumerate() {
            mat[j * size + n + alpha] = v;
            mat[(n + alpha) * size + j] = v;
        }
        rhs[j] = laplacian_phs3(local[j].norm());
    }
    let origin = Point2::new(0.0, 0.0);
    rhs[n..].copy_from_slice(&basis.laplacians(origin));

    let lu = LuFactor::new(mat, size).ok_or_else(|| degenerate(center, f64::INFINITY))?;
    let condition = lu.condition_estimate();
    if !(condition <= MAX_CONDITION) {
        return Err(degenerate(center, condition));
    }
    let sol = lu.solve(&rhs);
    let inv_r2 = 1.0 / (scale * scale);
    let weights: Vec<f64> = sol[..n].iter().map(|w| w * inv_r2).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(degenerate(center, condition));
    }
    Ok(weights)
}

fn degenerate(center: Point2, condition: f64) -> Error {
    Error::DegenerateStencil {
        node: None,
        x: center.x,
        y: center.y,
        condition,
    }
}

/// Stored Laplacian stencils ("shapes") for the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeStore {
    m: usize,
    stencils: StencilSet,
    rows: Vec<usize>,
    weights: Vec<f64>,
}

impl ShapeStore {
    /// Assembles a store from precomputed parts: `rows[r]` is the node of
    /// row `r`, and `weights` holds `rows.len() · n` values.
    pub fn from_parts(m: usize, stencils: StencilSet, rows: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let n = stencils.support_size();
        if weights.len() != rows.len() * n {
            return param(format!(
                "{} weights for {} rows of length {n}",
                weights.len(),
                rows.len()
            ));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= stencils.len()) {
            return param(format!("row node {bad} has no stencil"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return param("weights must be finite");
        }
        Ok(Self {
            m,
            stencils,
            rows,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn support_size(&self) -> usize {
        self.stencils.support_size()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Node index of every row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn stencils(&self) -> &StencilSet {
        &self.stencils
    }

    pub fn row_weights(&self, r: usize) -> &[f64] {
        let n = self.support_size();
        &self.weights[r * n..(r + 1) * n]
    }

    pub fn row_stencil(&self, r: usize) -> &[u32] {
        self.stencils.stencil(self.rows[r])
    }

    /// Approximate Laplacian of `u` at every row node.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.row_count())
            .map(|r| stencil_dot(self.row_weights(r), self.row_stencil(r), u))
            .collect()
    }

    /// Writes `node_index,w_0,…,w_{n-1}` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "node_index")?;
        for j in 0..self.support_size() {
            write!(out, ",w_{j}")?;
        }
        writeln!(out)?;
        for (r, node) in self.rows.iter().enumerate() {
            write!(out, "{node}")?;
            for w in self.row_weights(r) {
                write!(out, ",{w:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `∑_j w_j u[stencil_j]`, summed in stencil order.
#[inline]
pub fn stencil_dot(weights: &[f64], stencil: &[u32], u: &[f64]) -> f64 {
    weights
        .iter()
        .zip(stencil)
        .fold(0.0, |acc, (w, &j)| acc + w * u[j as usize])
}

/// Computes Laplacian weights for every interior node.
pub fn assemble_shapes(nodes: &NodeSet, stencils: &StencilSet, m: usize) -> Result<ShapeStore> {
    if stencils.len() != nodes.len() {
        return param(format!(
            "stencil set covers {} nodes, node set has {}",
            stencils.len(),
            nodes.len()
        ));
    }
    let n = stencils.support_size();
    let needed = binomial(m + 2, 2);
    if n < needed {
        return param(format!(
            "support size {n} is below the {needed} monomials of degree {m}"
        ));
    }
    let basis = MonomialBasis::new(m);
    let rows: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes.kind(i) == NodeKind::Interior)
        .collect();
    let solved: Vec<Result<Vec<f64>>> = rows
        .par_iter()
        .map(|&i| {
            let support: Vec<Point2> = stencils
                .stencil(i)
                .iter()
                .map(|&j| nodes.position(j as usize))
                .collect();
            compute_with_basis(nodes.position(i), &support, &basis).map_err(|e| match e {
                Error::DegenerateStencil {
                    x, y, condition, ..
                } => Error::DegenerateStencil {
                    node: Some(i),
                    x,
                    y,
                    condition,
                },
                other => other,
            })
        })
        .collect();
    let mut weights = Vec::with_capacity(rows.len() * n);
    for row in solved {
        weights.extend(row?);
    }
    ShapeStore::from_parts(m, stencils.clone(), rows, weights)
}
