//! Supports (stencils): the `n` nearest nodes of every node.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::geometry::NodeSet;
use crate::kdtree::KdTree;

/// Per-node lists of `n` neighbour indices, nearest first, self at position 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilSet {
    n: usize,
    neighbors: Vec<u32>,
}

impl StencilSet {
    /// Wraps explicit rows. Rows must all have length `n`, contain valid
    /// distinct indices and start with their own node.
    pub fn from_rows(n: usize, rows: &[Vec<usize>]) -> Result<Self> {
        if n == 0 {
            return param("support size must be at least 1");
        }
        let total = rows.len();
        let mut neighbors = Vec::with_capacity(total * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return param(format!("stencil {i} has {} entries, expected {n}", row.len()));
            }
            if row[0] != i {
                return param(format!("stencil {i} does not start with its own node"));
            }
            for (a, &j) in row.iter().enumerate() {
                if j >= total {
                    return param(format!("stencil {i} references node {j} out of range"));
                }
                if row[..a].contains(&j) {
                    return param(format!("stencil {i} lists node {j} twice"));
                }
                neighbors.push(j as u32);
            }
        }
        Ok(Self { n, neighbors })
    }

    pub fn support_size(&self) -> usize {
        self.n
    }

    /// Number of stencils (equals the node count).
    pub fn len(&self) -> usize {
        self.neighbors.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn stencil(&self, i: usize) -> &[u32] {
        &self.neighbors[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.neighbors.chunks_exact(self.n)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "node_index")?;
        for j in 0..self.n {
            write!(out, ",neighbor_{j}")?;
        }
        writeln!(out)?;
        for (i, row) in self.iter().enumerate() {
            write!(out, "{i}")?;
            for j in row {
                write!(out, ",{j}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Exact `n`-nearest-neighbour supports for every node.
pub fn build_stencils(nodes: &NodeSet, n: usize) -> Result<StencilSet> {
    if n == 0 || n > nodes.len() {
        return param(format!(
            "support size must satisfy 1 <= n <= N = {}, got {n}",
            nodes.len()
        ));
    }
    if nodes.len() > u32::MAX as usize {
        return param("too many nodes for 32-bit stencil indices");
    }
    let tree = KdTree::new(nodes.positions());
    let mut neighbors = vec![0u32; nodes.len() * n];
    neighbors
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let found = tree.nearest(nodes.position(i), n);
            debug_assert_eq!(found[0], i, "node {i} is not its own nearest neighbour");
            for (slot, j) in row.iter_mut().zip(found) {
                *slot = j as u32;
            }
        });
    Ok(StencilSet { n, neighbors })
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `safety · C(m + d, m)`, the support size suggested for degree-`m`
/// augmentation in `d` dimensions.
pub fn recommended_support_size(m: usize, d: usize, safety: usize) -> Result<usize> {
    if d < 1 {
        return param("dimension must be at least 1");
    }
    if !(safety == 1 || safety == 2) {
        return param(format!("safety factor must be 1 or 2, got {safety}"));
    }
    Ok(safety * binomial(m + d, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_unit_disk_nodes, NodeKind, Point2};

    #[test]
    fn support_size_formula() {
        assert_eq!(recommended_support_size(2, 2, 1).unwrap(), 6);
        assert_eq!(recommended_support_size(2, 2, 2).unwrap(), 12);
        assert_eq!(recommended_support_size(0, 2, 1).unwrap(), 1);
        assert_eq!(recommended_support_size(4, 2, 2).unwrap(), 30);
        assert_eq!(recommended_support_size(6, 2, 2).unwrap(), 56);
        assert!(recommended_support_size(2, 2, 3).is_err());
        assert!(recommended_support_size(2, 0, 1).is_err());
    }

    #[test]
    fn n_one_is_self() {
        let nodes = generate_unit_disk_nodes(0.2, 1).unwrap();
        let st = build_stencils(&nodes, 1).unwrap();
        for (i, row) in st.iter().enumerate() {
            assert_eq!(row, &[i as u32]);
        }
    }

    #[test]
    fn oversized_support_is_rejected() {
        let nodes = generate_unit_disk_nodes(0.3, 1).unwrap();
        assert!(build_stencils(&nodes, nodes.len() + 1).is_err());
        assert!(build_stencils(&nodes, 0).is_err());
        assert!(build_stencils(&nodes, nodes.len()).is_ok());
    }

    #[test]
    fn rows_are_sorted_by_distance() {
        let nodes = generate_unit_disk_nodes(0.1, 9).unwrap();
        let st = build_stencils(&nodes, 20).unwrap();
        for (i, row) in st.iter().enumerate() {
            assert_eq!(row[0] as usize, i);
            let p = nodes.position(i);
            let d: Vec<f64> = row.iter().map(|&j| p.dist_sq(nodes.position(j as usize))).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn from_rows_validates() {
        assert!(StencilSet::from_rows(2, &[vec![0, 1], vec![1, 0]]).is_ok());
        assert!(StencilSet::from_rows(2, &[vec![1, 0], vec![1, 0]]).is_err());
        assert!(StencilSet::from_rows(2, &[vec![0, 0], vec![1, 0]]).is_err());
        assert!(StencilSet::from_rows(2, &[vec![0, 5], vec![1, 0]]).is_err());
    }

    #[test]
    fn mirrored_nodes_have_equal_distance_multisets() {
        // rings symmetric about the x axis, no node on the axis except centre
        let mut pos = vec![Point2::new(0.0, 0.0)];
        let mut kinds = vec![NodeKind::Interior];
        for (r, count) in [(0.35, 7usize), (0.7, 13)] {
            for k in 0..count {
                let t = (k as f64 + 0.5) * std::f64::consts::PI / count as f64;
                pos.push(Point2::new(r * t.cos(), r * t.sin()));
                pos.push(Point2::new(r * t.cos(), -r * t.sin()));
                kinds.extend([NodeKind::Interior; 2]);
            }
        }
        for k in 0..24 {
            let t = (k as f64 + 0.5) * std::f64::consts::PI / 24.0;
            pos.push(Point2::new(t.cos(), t.sin()));
            pos.push(Point2::new(t.cos(), -t.sin()));
            kinds.extend([NodeKind::Boundary; 2]);
        }
        let nodes = NodeSet::new(pos, kinds, 0.2).unwrap();
        let st = build_stencils(&nodes, 9).unwrap();
        for i in (1..nodes.len()).step_by(2) {
            let dists = |a: usize| -> Vec<f64> {
                let p = nodes.position(a);
                st.stencil(a)
                    .iter()
                    .map(|&j| p.dist(nodes.position(j as usize)))
                    .collect()
            };
            let (a, b) = (dists(i), dists(i + 1));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "node {i}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let st = StencilSet::from_rows(2, &[vec![0, 1], vec![1, 0]]).unwrap();
        let mut buf = Vec::new();
        st.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_index,neighbor_0,neighbor_1\n0,0,1\n1,1,0\n"
        );
    }
}
