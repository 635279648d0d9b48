//! Exact nearest-neighbour distance queries.
//!
//! [`NeighborIndex`] is a static kd-tree. Split values are always coordinates
//! of stored points, so the pruning bound `(q_d - split)^2` never exceeds the
//! floating-point distance of any pruned point and the tree returns exactly
//! the value a linear scan would.

use crate::error::{Error, Result};
use crate::points::{squared_distance, PointSet};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
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

#[derive(Clone, Debug)]
pub struct NeighborIndex {
    dim: usize,
    // points reordered so every leaf is a contiguous range
    points: Vec<f64>,
    original: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn build(points: &PointSet) -> Result<Self> {
        points.require_nonempty("index point set")?;
        let dim = points.dim();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(points, &mut order, 0, &mut nodes);

        let mut flat = Vec::with_capacity(points.len() * dim);
        for &i in &order {
            flat.extend_from_slice(points.row(i));
        }
        Ok(Self {
            dim,
            points: flat,
            original: order,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    /// Euclidean distance from `query` to the closest stored point.
    pub fn min_distance(&self, query: &[f64]) -> Result<f64> {
        self.nearest(query).map(|(_, d)| d)
    }

    /// Index (into the set the tree was built from) and distance of the
    /// closest stored point. Ties resolve to whichever is visited first.
    pub fn nearest(&self, query: &[f64]) -> Result<(usize, f64)> {
        if query.len() != self.dim {
            return Err(Error::invalid(format!(
                "query has dimension {}, index has {}",
                query.len(),
                self.dim
            )));
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Ok((self.original[best.0], best.1.sqrt()))
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let p = &self.points[slot * self.dim..(slot + 1) * self.dim];
                    let d = squared_distance(q, p);
                    if d < best.1 {
                        *best = (slot, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// `order[..]` is the slice of point ids owned by this node, positioned at
/// `offset` within the final ordering.
fn build_node(points: &PointSet, order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }

    let axis = widest_axis(points, order);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points.row(a)[axis].total_cmp(&points.row(b)[axis])
    });
    let value = points.row(order[mid])[axis];

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, lo, offset, nodes);
    let right = build_node(points, hi, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

fn widest_axis(points: &PointSet, order: &[usize]) -> usize {
    let dim = points.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in order {
        for (d, &v) in points.row(i).iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// Linear-scan reference for [`NeighborIndex::min_distance`].
pub fn min_distance_brute(points: &PointSet, query: &[f64]) -> Result<f64> {
    points.require_nonempty("point set")?;
    if query.len() != points.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, points have {}",
            query.len(),
            points.dim()
        )));
    }
    Ok(points
        .rows()
        .map(|p| squared_distance(query, p))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}
