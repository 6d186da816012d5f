//! Drawing index tuples from an MPS with probability proportional to `|amplitude|^2`.
//!
//! Conditional marginals come from the right-canonical form: with a prefix contracted
//! into a row vector `v`, the unnormalised weight of choosing `x` next is
//! `|v A[x]|^2 = Re(v A[x] A[x]^dagger v^dagger)`. Each node keeps a segment tree of
//! the Hermitian matrices `A[x] A[x]^dagger`, so all copies of a prefix are split among
//! the children by a chain of binomial draws in one descent.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdtree::KdTree;
use crate::mps::{row_times, Mps, MpsNode};
use crate::tables::UniqueTable;
use crate::unitary::{GateSequence, Unitary2};

/// Smallest total weight the sampler accepts.
pub const MIN_TOTAL_WEIGHT: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("MPS is not right-canonical (deviation {0:.3e})")]
    NotCanonical(f64),
    #[error("all amplitudes vanish")]
    DegenerateDistribution,
    #[error("index {index} out of range for slice {slice} of size {size}")]
    IndexOutOfRange { slice: usize, index: usize, size: usize },
    #[error("tail index covers {index} entries but the last node has {node}")]
    TailMismatch { index: usize, node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Independent draws from the exact distribution.
    #[default]
    Multinomial,
    /// Deterministic beam keeping the `k` heaviest prefixes at every node.
    TopK,
    /// Multinomial prefixes; each group of `c` copies of a prefix is completed by its
    /// `c` best last-node entries.
    GreedyTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub selection: Selection,
    /// Conditional weights are raised to this power; `1.0` samples the exact
    /// distribution.
    pub exponent: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { selection: Selection::Multinomial, exponent: 1.0 }
    }
}

/// A distinct index tuple with its amplitude and how many of the `k` draws it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<u32>,
    pub amplitude: Complex64,
    pub multiplicity: u64,
}

impl Sample {
    /// `|Tr(U^dagger V)| / 2` of the decoded product.
    pub fn trace_value(&self) -> f64 {
        self.amplitude.norm()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    pub node_passes: usize,
    pub amplitude_evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub samples: Vec<Sample>,
    pub requested: u64,
    pub stats: SampleStats,
}

impl SampleBatch {
    pub fn total_multiplicity(&self) -> u64 {
        self.samples.iter().map(|s| s.multiplicity).sum()
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.iter().max_by(|a, b| a.trace_value().total_cmp(&b.trace_value()))
    }
}

/// Nearest-neighbour index over the last slice, used to find the best completions of a
/// prefix without scanning the whole slice.
pub struct TailIndex {
    tree: KdTree,
    len: usize,
}

impl TailIndex {
    pub fn new(matrices: &[Unitary2]) -> Self {
        // Both signs of every quaternion, so that one Euclidean query finds the largest
        // |q . q'|. Point 2x + s belongs to entry x.
        let points: Vec<[f64; 4]> = matrices
            .iter()
            .flat_map(|m| {
                let q = m.quaternion();
                [q, q.map(|c| -c)]
            })
            .collect();
        TailIndex { tree: KdTree::new(&points), len: matrices.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Candidate entries `x` maximising `|Tr(G M(x))|`, nearest first, for an operator
    /// `G` that is a multiple of a unitary.
    pub fn candidates(&self, g: &Unitary2, n: usize) -> Vec<usize> {
        // Tr(G M) = Tr(H^dagger M) with H = G^dagger, which is |q_H . q_M| up to scale.
        let q = g.adjoint().quaternion();
        if q.iter().any(|c| !c.is_finite()) {
            return Vec::new();
        }
        let mut out: Vec<usize> = Vec::with_capacity(n);
        for nn in self.tree.nearest_n(&q, n.min(self.len)) {
            let x = nn.item as usize / 2;
            if !out.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// Segment tree of `A[x] A[x]^dagger` over one node.
struct GramTree {
    dim: usize,
    leaves: usize,
    size: usize,
    /// `2 * size` blocks of `dim * dim` entries, heap-ordered; block 1 is the root.
    data: Vec<Complex64>,
}

impl GramTree {
    fn new(node: &MpsNode) -> Self {
        let dim = node.left;
        let leaves = node.physical;
        let size = leaves.next_power_of_two();
        let block = dim * dim;
        let mut data = vec![Complex64::new(0.0, 0.0); 2 * size * block];
        for x in 0..leaves {
            let s = node.slice(x);
            let dst = &mut data[(size + x) * block..(size + x + 1) * block];
            for a in 0..dim {
                for b in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..node.right {
                        acc += s[a * node.right + k] * s[b * node.right + k].conj();
                    }
                    dst[a * dim + b] = acc;
                }
            }
        }
        for i in (1..size).rev() {
            for e in 0..block {
                data[i * block + e] = data[2 * i * block + e] + data[(2 * i + 1) * block + e];
            }
        }
        GramTree { dim, leaves, size, data }
    }

    /// `Re(v Q v^dagger)` for the block at heap position `i`.
    #[inline]
    fn mass(&self, i: usize, v: &[Complex64]) -> f64 {
        let block = self.dim * self.dim;
        let q = &self.data[i * block..(i + 1) * block];
        let mut acc = 0.0;
        for a in 0..self.dim {
            let mut row = Complex64::new(0.0, 0.0);
            for b in 0..self.dim {
                row += q[a * self.dim + b] * v[b].conj();
            }
            acc += (v[a] * row).re;
        }
        acc.max(0.0)
    }

    /// Splits `count` draws among the leaves under heap position `i`.
    fn descend<R: Rng>(&self, i: usize, count: u64, v: &[Complex64], rng: &mut R, out: &mut Vec<(usize, u64)>) {
        if count == 0 {
            return;
        }
        if i >= self.size {
            out.push((i - self.size, count));
            return;
        }
        let (l, r) = (2 * i, 2 * i + 1);
        let ml = if self.first_leaf(l) < self.leaves { self.mass(l, v) } else { 0.0 };
        let mr = if self.first_leaf(r) < self.leaves { self.mass(r, v) } else { 0.0 };
        let left = split(count, ml, mr, rng);
        self.descend(l, left, v, rng, out);
        self.descend(r, count - left, v, rng, out);
    }

    fn first_leaf(&self, mut i: usize) -> usize {
        while i < self.size {
            i *= 2;
        }
        i - self.size
    }
}

/// Number of `count` draws landing on the left given the two weights.
fn split<R: Rng>(count: u64, wl: f64, wr: f64, rng: &mut R) -> u64 {
    let total = wl + wr;
    if !(total > 0.0) {
        return if wl > 0.0 { count } else if wr > 0.0 { 0 } else { count / 2 };
    }
    let p = (wl / total).clamp(0.0, 1.0);
    if count == 1 {
        return u64::from(rng.gen::<f64>() < p);
    }
    Binomial::new(count, p).map(|d| d.sample(rng)).unwrap_or(0)
}

struct Group {
    prefix: Vec<u32>,
    v: Vec<Complex64>,
    count: u64,
}

/// Exact multinomial sampling with the default options.
pub fn sample(mps: &Mps, k: u64, seed: u64) -> Result<SampleBatch, SamplerError> {
    sample_with(mps, k, seed, &SamplerOptions::default(), None)
}

pub fn sample_with(
    mps: &Mps,
    k: u64,
    seed: u64,
    opts: &SamplerOptions,
    tail: Option<&TailIndex>,
) -> Result<SampleBatch, SamplerError> {
    let canon = mps.canonical_error();
    if !(canon < 1e-8) {
        return Err(SamplerError::NotCanonical(canon));
    }
    let total = mps.total_weight();
    if !(total > MIN_TOTAL_WEIGHT) {
        return Err(SamplerError::DegenerateDistribution);
    }
    let l = mps.len();
    if let Some(t) = tail {
        let node = mps.node(l - 1).physical;
        if t.len() != node {
            return Err(SamplerError::TailMismatch { index: t.len(), node });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SampleStats { node_passes: l, amplitude_evaluations: 0 };
    let root = Group { prefix: Vec::with_capacity(l), v: vec![Complex64::new(1.0, 0.0)], count: k };

    let samples = match opts.selection {
        Selection::TopK => beam(mps, k, &mut stats),
        Selection::Multinomial => {
            let groups = (0..l).fold(vec![root], |g, i| expand(mps.node(i), g, opts.exponent, &mut rng, &mut stats));
            groups.into_iter().map(finish).collect()
        }
        Selection::GreedyTail => {
            let groups =
                (0..l - 1).fold(vec![root], |g, i| expand(mps.node(i), g, opts.exponent, &mut rng, &mut stats));
            let mut out = Vec::new();
            for g in groups {
                greedy_tail(mps, g, tail, &mut stats, &mut out);
            }
            out
        }
    };
    Ok(SampleBatch { samples, requested: k, stats })
}

fn finish(g: Group) -> Sample {
    Sample { indices: g.prefix, amplitude: g.v[0], multiplicity: g.count }
}

fn expand<R: Rng>(node: &MpsNode, groups: Vec<Group>, exponent: f64, rng: &mut R, stats: &mut SampleStats) -> Vec<Group> {
    let mut next = Vec::with_capacity(groups.len());
    let mut leaves = Vec::new();
    let tree = (exponent == 1.0).then(|| GramTree::new(node));
    for g in groups {
        leaves.clear();
        match &tree {
            Some(tree) => tree.descend(1, g.count, &g.v, rng, &mut leaves),
            None => tempered_draw(node, &g, exponent, rng, &mut leaves),
        }
        for &(x, c) in &leaves {
            let mut prefix = g.prefix.clone();
            prefix.push(x as u32);
            stats.amplitude_evaluations += 1;
            next.push(Group { prefix, v: row_times(&g.v, node.slice(x), node.right), count: c });
        }
    }
    next
}

/// Multinomial split over explicitly tempered child weights.
fn tempered_draw<R: Rng>(node: &MpsNode, g: &Group, exponent: f64, rng: &mut R, out: &mut Vec<(usize, u64)>) {
    let weights: Vec<f64> = (0..node.physical)
        .map(|x| {
            let w: f64 = row_times(&g.v, node.slice(x), node.right).iter().map(|z| z.norm_sqr()).sum();
            w.powf(exponent)
        })
        .collect();
    let mut remaining_w: f64 = weights.iter().sum();
    let mut remaining = g.count;
    for (x, w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let c = split(remaining, *w, (remaining_w - w).max(0.0), rng);
        if c > 0 {
            out.push((x, c));
        }
        remaining -= c;
        remaining_w -= w;
    }
    if remaining > 0 {
        let best = weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(x, _)| x).unwrap_or(0);
        match out.iter_mut().find(|(x, _)| *x == best) {
            Some(e) => e.1 += remaining,
            None => out.push((best, remaining)),
        }
    }
}

fn greedy_tail(mps: &Mps, g: Group, index: Option<&TailIndex>, stats: &mut SampleStats, out: &mut Vec<Sample>) {
    let node = mps.node(mps.len() - 1);
    let want = (g.count as usize).min(node.physical);
    let amp = |x: usize| -> Complex64 { row_times(&g.v, node.slice(x), 1)[0] };
    // Scanning beats the index once a sizeable share of the node is wanted.
    let index = index.filter(|_| want * 16 < node.physical);
    let mut scored: Vec<(usize, Complex64)> = match index {
        Some(index) => {
            let op = mps.tail_operator(&g.v);
            let extra = if want == 1 { 0 } else { 2 };
            index.candidates(&op, want + extra).into_iter().map(|x| (x, amp(x))).collect()
        }
        None => (0..node.physical).map(|x| (x, amp(x))).collect(),
    };
    if scored.len() < want {
        scored = (0..node.physical).map(|x| (x, amp(x))).collect();
    }
    stats.amplitude_evaluations += scored.len() as u64;
    let by_weight = |a: &(usize, Complex64), b: &(usize, Complex64)| b.1.norm().total_cmp(&a.1.norm()).then(a.0.cmp(&b.0));
    if scored.len() > want {
        scored.select_nth_unstable_by(want - 1, by_weight);
        scored.truncate(want);
    }
    scored.sort_by(by_weight);
    let first = out.len();
    for (x, a) in scored {
        let mut indices = g.prefix.clone();
        indices.push(x as u32);
        out.push(Sample { indices, amplitude: a, multiplicity: 1 });
    }
    out[first].multiplicity += g.count - want as u64;
}

fn beam(mps: &Mps, k: u64, stats: &mut SampleStats) -> Vec<Sample> {
    let k = k.max(1) as usize;
    let mut groups = vec![Group { prefix: Vec::new(), v: vec![Complex64::new(1.0, 0.0)], count: 1 }];
    for node in mps.nodes() {
        let mut children: Vec<(f64, usize, usize, Vec<Complex64>)> = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            for x in 0..node.physical {
                let v = row_times(&g.v, node.slice(x), node.right);
                let w: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                children.push((w, gi, x, v));
            }
        }
        stats.amplitude_evaluations += children.len() as u64;
        let order = |a: &(f64, usize, usize, Vec<Complex64>), b: &(f64, usize, usize, Vec<Complex64>)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if children.len() > k {
            children.select_nth_unstable_by(k - 1, order);
            children.truncate(k);
        }
        children.sort_by(order);
        groups = children
            .into_iter()
            .map(|(_, gi, x, v)| {
                let mut prefix = groups[gi].prefix.clone();
                prefix.push(x as u32);
                Group { prefix, v, count: 1 }
            })
            .collect();
    }
    groups.into_iter().map(finish).collect()
}

/// Probability of an index tuple under exact sampling.
pub fn probability(mps: &Mps, indices: &[usize]) -> Option<f64> {
    let a = mps.contract(indices).ok()?;
    Some(a.norm_sqr() / mps.total_weight())
}

/// Physical-index window of one node into a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceSpan {
    pub offset: usize,
    pub len: usize,
}

/// Concatenates the words of the chosen entries, node 0 first.
pub fn decode(indices: &[u32], spans: &[SliceSpan], table: &UniqueTable) -> Result<GateSequence, SamplerError> {
    let mut seq = GateSequence::new();
    for (slice, (&x, span)) in indices.iter().zip(spans).enumerate() {
        let x = x as usize;
        if x >= span.len || span.offset + x >= table.len() {
            return Err(SamplerError::IndexOutOfRange { slice, index: x, size: span.len });
        }
        seq.extend_from(&table.entry(span.offset + x).sequence);
    }
    Ok(seq)
}
