//! Matrix product state whose amplitudes are the normalised traces
//! `Tr(U^dagger M_l(x_l) ... M_1(x_1)) / 2` over all choices of table entries.
//!
//! Nodes are in time order: node 0 holds the first gates applied. The state is built
//! with a single right-to-left SVD sweep, leaving every node except node 0
//! right-isometric, so conditional marginals can be read off left to right.

mod svd;

use num_complex::Complex64;
use thiserror::Error;

use crate::unitary::Unitary2;

pub use svd::{svd_small, ComplexMatrix, Svd};

/// Singular values below this fraction of the largest are dropped.
pub const TRUNCATION_REL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD failed to converge: {0}")]
    ConvergenceFailure(String),
}

/// One tensor `A[x]` of shape `left x right` per physical index `x`.
#[derive(Debug, Clone)]
pub struct MpsNode {
    pub physical: usize,
    pub left: usize,
    pub right: usize,
    data: Vec<Complex64>,
}

impl MpsNode {
    /// Row-major `left x right` slice for physical index `x`.
    #[inline]
    pub fn slice(&self, x: usize) -> &[Complex64] {
        let w = self.left * self.right;
        &self.data[x * w..(x + 1) * w]
    }

    /// `sum_x A[x] A[x]^dagger`, the identity for a right-isometric node.
    pub fn right_gram(&self) -> ComplexMatrix {
        let mut g = ComplexMatrix::zeros(self.left, self.left);
        for x in 0..self.physical {
            let s = self.slice(x);
            for a in 0..self.left {
                for b in 0..self.left {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..self.right {
                        acc += s[a * self.right + k] * s[b * self.right + k].conj();
                    }
                    *g.at_mut(a, b) += acc;
                }
            }
        }
        g
    }
}

/// Operation counts recorded while building.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub svds: usize,
    pub multiply_adds: u64,
}

#[derive(Debug, Clone)]
pub struct Mps {
    nodes: Vec<MpsNode>,
    /// For the last node: amplitude of `x` given a left vector `v` is
    /// `Tr(sum_j v_j G_j M(x)) / 2`.
    tail_frame: Vec<Unitary2>,
    stats: BuildStats,
}

/// Reads a flat `[p, 2, 2]` array into matrices.
pub fn stack_from_flat(flat: &[Complex64]) -> Result<Vec<Unitary2>, MpsError> {
    if flat.is_empty() || flat.len() % 4 != 0 {
        return Err(MpsError::DimensionMismatch(format!("{} values do not form a [p, 2, 2] stack", flat.len())));
    }
    Ok(flat.chunks_exact(4).map(|c| Unitary2([c[0], c[1], c[2], c[3]])).collect())
}

pub fn build_mps(slices: &[&[Unitary2]], target: &Unitary2) -> Result<Mps, MpsError> {
    if slices.is_empty() {
        return Err(MpsError::DimensionMismatch("no slices".into()));
    }
    if let Some(i) = slices.iter().position(|s| s.is_empty()) {
        return Err(MpsError::DimensionMismatch(format!("slice {i} is empty")));
    }
    let udag = target.adjoint();
    let mut stats = BuildStats::default();
    let l = slices.len();

    if l == 1 {
        let data: Vec<Complex64> = slices[0].iter().map(|m| (udag * *m).trace() * 0.5).collect();
        stats.multiply_adds += 8 * slices[0].len() as u64;
        let node = MpsNode { physical: slices[0].len(), left: 1, right: 1, data };
        return Ok(Mps { nodes: vec![node], tail_frame: vec![udag], stats });
    }

    let mut nodes: Vec<Option<MpsNode>> = vec![None; l];

    // Last node: T[(b, a0), x] = (U^dagger M(x))[a0, b] / 2.
    let last = slices[l - 1];
    let p = last.len();
    let mut t = ComplexMatrix::zeros(4, p);
    for (x, m) in last.iter().enumerate() {
        let prod = udag * *m;
        for b in 0..2 {
            for a0 in 0..2 {
                *t.at_mut(2 * b + a0, x) = prod.get(a0, b) * 0.5;
            }
        }
    }
    stats.multiply_adds += 8 * p as u64;
    let svd = truncated_svd(&t, &mut stats)?;
    let r = svd.s.len();
    let mut data = vec![Complex64::new(0.0, 0.0); p * r];
    for x in 0..p {
        for j in 0..r {
            data[x * r + j] = svd.v_adjoint.at(j, x);
        }
    }
    nodes[l - 1] = Some(MpsNode { physical: p, left: r, right: 1, data });
    let tail_frame = (0..r)
        .map(|j| {
            let mut w = [Complex64::new(0.0, 0.0); 4];
            for b in 0..2 {
                for a0 in 0..2 {
                    w[2 * b + a0] = svd.u.at(2 * b + a0, j).conj() / svd.s[j];
                }
            }
            Unitary2(w) * udag
        })
        .collect();
    let mut carry = scaled_u(&svd);

    for i in (1..l - 1).rev() {
        let slice = slices[i];
        let p = slice.len();
        let r = carry.cols;
        // N[(c, a0), (x, j)] = sum_b M(x)[b, c] C[(b, a0), j]
        let mut n = ComplexMatrix::zeros(4, p * r);
        for (x, m) in slice.iter().enumerate() {
            for cc in 0..2 {
                for a0 in 0..2 {
                    for j in 0..r {
                        let v = m.get(0, cc) * carry.at(a0, j) + m.get(1, cc) * carry.at(2 + a0, j);
                        *n.at_mut(2 * cc + a0, x * r + j) = v;
                    }
                }
            }
        }
        stats.multiply_adds += 8 * (p * r) as u64;
        let svd = truncated_svd(&n, &mut stats)?;
        let rl = svd.s.len();
        let mut data = vec![Complex64::new(0.0, 0.0); p * rl * r];
        for x in 0..p {
            for jl in 0..rl {
                for j in 0..r {
                    data[(x * rl + jl) * r + j] = svd.v_adjoint.at(jl, x * r + j);
                }
            }
        }
        nodes[i] = Some(MpsNode { physical: p, left: rl, right: r, data });
        carry = scaled_u(&svd);
    }

    // First node closes the trace: A[x][0, j] = sum_{b, a0} M(x)[b, a0] C[(b, a0), j].
    let first = slices[0];
    let r = carry.cols;
    let mut data = vec![Complex64::new(0.0, 0.0); first.len() * r];
    for (x, m) in first.iter().enumerate() {
        for j in 0..r {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..2 {
                for a0 in 0..2 {
                    acc += m.get(b, a0) * carry.at(2 * b + a0, j);
                }
            }
            data[x * r + j] = acc;
        }
    }
    stats.multiply_adds += 4 * (first.len() * r) as u64;
    nodes[0] = Some(MpsNode { physical: first.len(), left: 1, right: r, data });

    let nodes = nodes.into_iter().map(|n| n.expect("every node built")).collect();
    Ok(Mps { nodes, tail_frame, stats })
}

fn truncated_svd(a: &ComplexMatrix, stats: &mut BuildStats) -> Result<Svd, MpsError> {
    let mut svd = svd_small(a)?;
    stats.svds += 1;
    stats.multiply_adds += (a.rows * a.rows * a.cols * 8) as u64;
    let smax = svd.s[0];
    let keep = svd.s.iter().take_while(|&&s| s > smax * TRUNCATION_REL && s > 0.0).count().max(1);
    if keep < svd.s.len() {
        svd.s.truncate(keep);
        let mut u = ComplexMatrix::zeros(svd.u.rows, keep);
        for r in 0..svd.u.rows {
            for c in 0..keep {
                *u.at_mut(r, c) = svd.u.at(r, c);
            }
        }
        svd.u = u;
        svd.v_adjoint.data.truncate(keep * svd.v_adjoint.cols);
        svd.v_adjoint.rows = keep;
    }
    Ok(svd)
}

fn scaled_u(svd: &Svd) -> ComplexMatrix {
    let mut c = svd.u.clone();
    for r in 0..c.rows {
        for (j, s) in svd.s.iter().enumerate() {
            *c.at_mut(r, j) *= s;
        }
    }
    c
}

impl Mps {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MpsNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &MpsNode {
        &self.nodes[i]
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.nodes.iter().skip(1).map(|n| n.left).collect()
    }

    /// `G_j` matrices of the last node; see [`Mps::tail_operator`].
    pub fn tail_frame(&self) -> &[Unitary2] {
        &self.tail_frame
    }

    /// 2x2 operator `G` with last-node amplitude `Tr(G M(x)) / 2` for left vector `v`.
    pub fn tail_operator(&self, v: &[Complex64]) -> Unitary2 {
        let mut g = [Complex64::new(0.0, 0.0); 4];
        for (vj, gj) in v.iter().zip(&self.tail_frame) {
            for (e, ge) in g.iter_mut().zip(gj.0) {
                *e += vj * ge;
            }
        }
        Unitary2(g)
    }

    /// Amplitude of one index tuple: the normalised trace.
    pub fn contract(&self, indices: &[usize]) -> Result<Complex64, MpsError> {
        if indices.len() != self.nodes.len() {
            return Err(MpsError::DimensionMismatch(format!(
                "{} indices for {} nodes",
                indices.len(),
                self.nodes.len()
            )));
        }
        let mut v = vec![Complex64::new(1.0, 0.0)];
        for (node, &x) in self.nodes.iter().zip(indices) {
            if x >= node.physical {
                return Err(MpsError::DimensionMismatch(format!("index {x} out of range {}", node.physical)));
            }
            v = row_times(&v, node.slice(x), node.right);
        }
        Ok(v[0])
    }

    /// `sum_x |amplitude(x)|^2` over all index tuples.
    pub fn total_weight(&self) -> f64 {
        let n0 = &self.nodes[0];
        (0..n0.physical).map(|x| n0.slice(x).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    /// Largest deviation of a non-leading node from right-isometry.
    pub fn canonical_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in self.nodes.iter().skip(1) {
            let g = node.right_gram();
            for a in 0..g.rows {
                for b in 0..g.cols {
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((g.at(a, b) - want).norm());
                }
            }
        }
        worst
    }

    pub fn is_right_canonical(&self) -> bool {
        self.canonical_error() < 1e-9
    }
}

/// Row vector times a row-major `len(v) x cols` matrix.
#[inline]
pub fn row_times(v: &[Complex64], m: &[Complex64], cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); cols];
    for (a, va) in v.iter().enumerate() {
        let row = &m[a * cols..(a + 1) * cols];
        for (o, x) in out.iter_mut().zip(row) {
            *o += va * x;
        }
    }
    out
}
