//! Thin SVD of small, very wide complex matrices by one-sided Jacobi rotations.

use num_complex::Complex64;

use super::MpsError;

const MAX_SWEEPS: usize = 60;
const ORTH_TOL: f64 = 1e-15;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, MpsError> {
        if data.len() != rows * cols {
            return Err(MpsError::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c).conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `A = U diag(s) V^dagger` with `k = min(rows, cols)`, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows x k, orthonormal columns.
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    /// k x cols, orthonormal rows.
    pub v_adjoint: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for r in 0..us.rows {
            for (c, s) in self.s.iter().enumerate() {
                *us.at_mut(r, c) *= s;
            }
        }
        us.matmul(&self.v_adjoint)
    }
}

pub fn svd_small(a: &ComplexMatrix) -> Result<Svd, MpsError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(MpsError::DimensionMismatch(format!("empty {}x{} matrix", a.rows, a.cols)));
    }
    if a.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MpsError::ConvergenceFailure("non-finite input".into()));
    }
    if a.rows <= a.cols {
        svd_wide(a)
    } else {
        let t = svd_wide(&a.adjoint())?;
        Ok(Svd { u: t.v_adjoint.adjoint(), s: t.s, v_adjoint: t.u.adjoint() })
    }
}

/// Orthogonalises the rows of a matrix with `rows <= cols`.
fn svd_wide(a: &ComplexMatrix) -> Result<Svd, MpsError> {
    let m = a.rows;
    let n = a.cols;
    let mut b = a.clone();
    let mut q = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        *q.at_mut(i, i) = Complex64::new(1.0, 0.0);
    }
    let mut converged = m == 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..m {
            for j in i + 1..m {
                let (ri, rj) = (b.row(i), b.row(j));
                let alpha: f64 = ri.iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = rj.iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
                let g = gamma.norm();
                if g <= ORTH_TOL * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = -zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let ph = Complex64::from_polar(1.0, -gamma.arg());
                rotate_rows(&mut b.data, n, i, j, cs, sn, ph);
                rotate_rows(&mut q.data, m, i, j, cs, sn, ph);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(MpsError::ConvergenceFailure(format!("no convergence after {MAX_SWEEPS} sweeps")));
    }

    let norms: Vec<f64> = (0..m).map(|i| b.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms[order[0]];

    let mut u = ComplexMatrix::zeros(m, m);
    let mut vt = ComplexMatrix::zeros(m, n);
    let mut s = Vec::with_capacity(m);
    let mut filled = Vec::with_capacity(m);
    for (k, &i) in order.iter().enumerate() {
        // U = Q^dagger, so column k of U is the conjugated row i of Q.
        for r in 0..m {
            *u.at_mut(r, k) = q.at(i, r).conj();
        }
        let sigma = norms[i];
        if sigma > smax * 1e-15 && sigma > 0.0 {
            for c in 0..n {
                *vt.at_mut(k, c) = b.at(i, c) / sigma;
            }
            s.push(sigma);
            filled.push(true);
        } else {
            s.push(0.0);
            filled.push(false);
        }
    }
    complete_rows(&mut vt, &filled);
    Ok(Svd { u, s, v_adjoint: vt })
}

#[inline]
fn rotate_rows(data: &mut [Complex64], width: usize, i: usize, j: usize, cs: f64, sn: f64, ph: Complex64) {
    let (lo, hi) = data.split_at_mut(j * width);
    let ri = &mut lo[i * width..(i + 1) * width];
    let rj = &mut hi[..width];
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let xi = *x * ph;
        let yj = *y;
        *x = xi * cs + yj * sn;
        *y = -xi * sn + yj * cs;
    }
}

/// Fills unset rows with unit vectors orthogonal to all others (Gram-Schmidt on the
/// standard basis).
fn complete_rows(vt: &mut ComplexMatrix, filled: &[bool]) {
    let n = vt.cols;
    let mut basis = 0;
    for k in 0..vt.rows {
        if filled[k] {
            continue;
        }
        loop {
            assert!(basis < n, "not enough columns to complete the basis");
            let mut cand = vec![Complex64::new(0.0, 0.0); n];
            cand[basis] = Complex64::new(1.0, 0.0);
            basis += 1;
            for _ in 0..2 {
                for r in 0..vt.rows {
                    if r == k || (!filled[r] && r > k) {
                        continue;
                    }
                    let row = vt.row(r);
                    let p: Complex64 = row.iter().zip(&cand).map(|(a, b)| a.conj() * b).sum();
                    for (c, a) in cand.iter_mut().zip(row) {
                        *c -= p * a;
                    }
                }
            }
            let nrm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 1e-6 {
                for (c, z) in cand.iter().enumerate() {
                    *vt.at_mut(k, c) = z / nrm;
                }
                break;
            }
        }
    }
}
