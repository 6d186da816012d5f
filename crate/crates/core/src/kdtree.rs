//! Static k-d tree over points in R^4 for k-nearest-neighbour queries.
//!
//! Splits are by position after a median selection rather than by coordinate value,
//! so arbitrarily many tied coordinates are fine.

const LEAF_SIZE: usize = 16;
const DIM: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Leaf { lo: usize, hi: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; DIM]>,
    /// Original index of each stored point.
    items: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub dist_sq: f64,
    pub item: u32,
}

#[inline]
fn dist_sq(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn new(source: &[[f64; DIM]]) -> Self {
        let mut order: Vec<u32> = (0..source.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * source.len() / LEAF_SIZE + 1);
        if !source.is_empty() {
            build(source, &mut order, 0, &mut nodes);
        }
        let points = order.iter().map(|&i| source[i as usize]).collect();
        KdTree { points, items: order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `n` stored points closest to `query`, nearest first.
    pub fn nearest_n(&self, query: &[f64; DIM], n: usize) -> Vec<Neighbour> {
        let mut best: Vec<Neighbour> = Vec::with_capacity(n + 1);
        if n > 0 && !self.nodes.is_empty() {
            self.search(0, query, n, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: &[f64; DIM], n: usize, best: &mut Vec<Neighbour>) {
        match self.nodes[node] {
            Node::Leaf { lo, hi } => {
                for i in lo..hi {
                    let d = dist_sq(&self.points[i], q);
                    if best.len() < n || d < best[best.len() - 1].dist_sq {
                        let pos = best.partition_point(|b| b.dist_sq <= d);
                        best.insert(pos, Neighbour { dist_sq: d, item: self.items[i] });
                        best.truncate(n);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, n, best);
                if best.len() < n || diff * diff < best[best.len() - 1].dist_sq {
                    self.search(far, q, n, best);
                }
            }
        }
    }
}

/// Builds the subtree for `order[..]`, whose first element sits at `offset` in the final
/// layout, and returns its node id.
fn build(src: &[[f64; DIM]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { lo: offset, hi: offset + order.len() });
        return id;
    }
    let mut spread = [(f64::INFINITY, f64::NEG_INFINITY); DIM];
    for &i in order.iter() {
        for (d, s) in spread.iter_mut().enumerate() {
            let v = src[i as usize][d];
            s.0 = s.0.min(v);
            s.1 = s.1.max(v);
        }
    }
    let dim = (0..DIM).max_by(|&a, &b| (spread[a].1 - spread[a].0).total_cmp(&(spread[b].1 - spread[b].0))).unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| src[a as usize][dim].total_cmp(&src[b as usize][dim]));
    let value = src[order[mid] as usize][dim];
    nodes.push(Node::Leaf { lo: 0, hi: 0 });
    let (lo_half, hi_half) = order.split_at_mut(mid);
    let left = build(src, lo_half, offset, nodes);
    let right = build(src, hi_half, offset + mid, nodes);
    nodes[id] = Node::Split { dim, value, left, right };
    id
}
