//! Dense unitary of a small circuit. Qubit `q` is bit `q` of the basis index.

use num_complex::Complex64;

use super::{Circuit, CircuitError, Op};

pub const MAX_SIM_QUBITS: usize = 6;

/// Row-major `2^n x 2^n` unitary of `circuit`.
pub fn circuit_unitary(circuit: &Circuit) -> Result<Vec<Complex64>, CircuitError> {
    let n = circuit.num_qubits();
    if n > MAX_SIM_QUBITS {
        return Err(CircuitError::TooWide { got: n, max: MAX_SIM_QUBITS });
    }
    let d = 1usize << n;
    let mut m = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        m[i * d + i] = Complex64::new(1.0, 0.0);
    }
    // Left-multiply each gate onto every column.
    for op in circuit.ops() {
        match *op {
            Op::Cx(c, t) => {
                for row in 0..d {
                    if row >> c & 1 == 1 && row >> t & 1 == 0 {
                        let other = row | 1 << t;
                        for col in 0..d {
                            m.swap(row * d + col, other * d + col);
                        }
                    }
                }
            }
            _ => {
                let g = op.matrix().expect("single-qubit op");
                let q = op.qubits().0;
                for r0 in (0..d).filter(|r| r >> q & 1 == 0) {
                    let r1 = r0 | 1 << q;
                    for col in 0..d {
                        let (a, b) = (m[r0 * d + col], m[r1 * d + col]);
                        m[r0 * d + col] = g.get(0, 0) * a + g.get(0, 1) * b;
                        m[r1 * d + col] = g.get(1, 0) * a + g.get(1, 1) * b;
                    }
                }
            }
        }
    }
    Ok(m)
}

/// `sqrt(1 - |Tr(A^dagger B)/2^n|^2)`, the phase-insensitive distance used for single
/// qubits, lifted to `n` qubits.
pub fn circuit_distance(a: &Circuit, b: &Circuit) -> Result<f64, CircuitError> {
    if a.num_qubits() != b.num_qubits() {
        return Err(CircuitError::WidthMismatch(a.num_qubits(), b.num_qubits()));
    }
    let (ua, ub) = (circuit_unitary(a)?, circuit_unitary(b)?);
    let d = (1usize << a.num_qubits()) as f64;
    let tr: Complex64 = ua.iter().zip(&ub).map(|(x, y)| x.conj() * y).sum();
    // 1 - tv from the aligned Frobenius gap avoids cancellation near zero.
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { Complex64::new(1.0, 0.0) };
    let gap: f64 = ua.iter().zip(&ub).map(|(x, y)| (x * phase - y).norm_sqr()).sum();
    let one_minus = (gap / (2.0 * d)).clamp(0.0, 1.0);
    Ok((one_minus * (2.0 - one_minus)).sqrt())
}
