//! MaxCut QAOA circuits on random 3-regular graphs.
//!
//! Each edge `(c, t)` becomes `CX(c,t) Rz(t) CX(c,t)`, and each layer ends with an Rx
//! mixer on every qubit. Edges are laid out so every non-root qubit finishes its layer as
//! the target of the edge to its parent in a BFS tree: non-tree edges come first, then
//! tree edges deepest first. That lets the mixer on each such qubit reach back across
//! the final CX target into the phase rotation before it.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Circuit, Op};
use crate::unitary::GateId;

/// Random connected simple 3-regular graph on `n` vertices (even, at least 4), by
/// rejection from the pairing model.
pub fn random_cubic_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    assert!(n >= 4 && n % 2 == 0, "a cubic graph needs an even vertex count >= 4");
    loop {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v; 3]).collect();
        stubs.shuffle(rng);
        let mut edges: Vec<(usize, usize)> =
            stubs.chunks(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect();
        if edges.iter().any(|&(a, b)| a == b) {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        if is_connected(n, &edges) {
            return edges;
        }
    }
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    bfs(n, edges).1.iter().all(|d| d.is_some())
}

/// BFS from vertex 0: parent and depth of each vertex.
fn bfs(n: usize, edges: &[(usize, usize)]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let adj = adjacency(n, edges);
    let mut parent = vec![None; n];
    let mut depth = vec![None; n];
    depth[0] = Some(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if depth[w].is_none() {
                depth[w] = Some(depth[v].expect("visited") + 1);
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    (parent, depth)
}

/// Oriented edges `(control, target)` in layer order; see the module docs.
pub fn layer_edge_order(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let (parent, depth) = bfs(n, edges);
    let is_tree = |a: usize, b: usize| parent[a] == Some(b) || parent[b] == Some(a);
    let mut out: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| !is_tree(a, b)).collect();
    let mut tree: Vec<usize> = (0..n).filter(|&v| parent[v].is_some()).collect();
    tree.sort_by_key(|&v| std::cmp::Reverse(depth[v]));
    out.extend(tree.into_iter().map(|v| (parent[v].expect("tree vertex"), v)));
    out
}

/// `layers` QAOA layers on a random cubic graph with `n` qubits and random angles.
pub fn qaoa_circuit(n: usize, layers: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_cubic_graph(n, &mut rng);
    let order = layer_edge_order(n, &edges);
    let mut c = Circuit::new(n);
    let mut push = |op| c.push(op).expect("operands in range");
    for q in 0..n {
        push(Op::Fixed(GateId::H, q));
    }
    for _ in 0..layers {
        let gamma: f64 = rng.gen_range(0.1..1.4);
        let beta: f64 = rng.gen_range(0.1..1.4);
        for &(ctl, tgt) in &order {
            push(Op::Cx(ctl, tgt));
            push(Op::Rz(2.0 * gamma, tgt));
            push(Op::Cx(ctl, tgt));
        }
        for q in 0..n {
            push(Op::Rx(2.0 * beta, q));
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{merge_rotations, metrics};

    #[test]
    fn graphs_are_cubic_and_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4, 8, 10, 12] {
            let e = random_cubic_graph(n, &mut rng);
            assert_eq!(e.len(), 3 * n / 2);
            let adj = adjacency(n, &e);
            assert!(adj.iter().all(|a| a.len() == 3));
            assert!(is_connected(n, &e));
        }
    }

    #[test]
    fn edge_order_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = random_cubic_graph(10, &mut rng);
        let mut o: Vec<(usize, usize)> = layer_edge_order(10, &e).into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        o.sort_unstable();
        assert_eq!(o, e);
    }

    #[test]
    fn all_but_one_mixer_merges_per_layer() {
        for (n, p, seed) in [(8, 1, 1), (10, 2, 2), (12, 3, 3)] {
            let c = qaoa_circuit(n, p, seed);
            let before = metrics(&c).rotation_count;
            assert_eq!(before, p * (3 * n / 2 + n));
            let after = metrics(&merge_rotations(&c, true)).rotation_count;
            assert!(before - after >= p * (n - 1), "n={n} p={p}: {before} -> {after}");
        }
    }
}
