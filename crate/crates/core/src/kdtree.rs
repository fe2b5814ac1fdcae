//! Static 2D kd-tree with median splits for exact k-nearest-neighbour queries.
//!
//! Results are ordered by `(squared distance, index)`, so equidistant points
//! resolve to the lower index.

use std::cmp::Ordering;

use crate::geometry::Point2;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point2>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

fn coord(p: Point2, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KdTree {
    pub fn new(points: &[Point2]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &i in &self.order[start..end] {
            let p = self.points[i];
            for axis in 0..2 {
                lo[axis] = lo[axis].min(coord(p, axis));
                hi[axis] = hi[axis].max(coord(p, axis));
            }
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            key_cmp((coord(points[a], axis), a), (coord(points[b], axis), b))
        });
        let value = coord(self.points[self.order[start + mid]], axis);

        // placeholder, patched once the children exist
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = KdNode::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Indices of the `k` nearest points to `query`, nearest first.
    pub fn nearest(&self, query: Point2, k: usize) -> Vec<usize> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(0, query, k, &mut best);
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, node: usize, q: Point2, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (self.points[i].dist_sq(q), i);
                    if best.len() == k && key_cmp(cand, best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|probe| key_cmp(*probe, cand))
                        .unwrap_or_else(|p| p);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(q, axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Point2], q: Point2, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> =
            points.iter().enumerate().map(|(i, p)| (p.dist_sq(q), i)).collect();
        all.sort_by(|a, b| key_cmp(*a, *b));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn empty_and_oversized_queries() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(Point2::new(0.0, 0.0), 3).is_empty());
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(Point2::new(0.9, 0.0), 5), vec![1, 0]);
    }

    #[test]
    fn grid_ties_prefer_lower_index() {
        // integer lattice: many exact ties
        let pts: Vec<Point2> = (0..400)
            .map(|i| Point2::new((i % 20) as f64, (i / 20) as f64))
            .collect();
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(*p, 13), brute(&pts, *p, 13), "node {i}");
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..300),
            qx in -1.5f64..1.5, qy in -1.5f64..1.5,
            k in 1usize..40,
        ) {
            let pts: Vec<Point2> = raw.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            let tree = KdTree::new(&pts);
            let q = Point2::new(qx, qy);
            prop_assert_eq!(tree.nearest(q, k), brute(&pts, q, k));
        }
    }
}
