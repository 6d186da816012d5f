//! Multi-qubit circuits: parsing, rotation merging, metrics, per-rotation synthesis and
//! dense simulation for small widths.

mod parse;
pub mod qaoa;
mod sim;

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;
use thiserror::Error;

use crate::synth::{MinTOptions, SynthError, Synthesizer};
use crate::tables::{cached_table, UniqueTable};
use crate::unitary::{distance, rx, ry, rz, u3, zyz_decompose, EulerAngles, GateId, Unitary2};

pub use parse::{emit, eval_expr, parse};
pub use sim::{circuit_distance, circuit_unitary, MAX_SIM_QUBITS};

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: unsupported gate {name:?}")]
    UnsupportedGate { line: usize, column: usize, name: String },
    #[error("line {line}: qubit {qubit} out of range for a {num_qubits}-qubit register")]
    OperandOutOfRange { line: usize, qubit: usize, num_qubits: usize },
    #[error("line {line}: cx needs two distinct qubits")]
    SameOperands { line: usize },
    #[error("line {line}: statement before the qreg declaration")]
    MissingQreg { line: usize },
    #[error("non-finite rotation angle")]
    NonFiniteAngle,
    #[error("dense simulation supports at most {max} qubits, circuit has {got}")]
    TooWide { got: usize, max: usize },
    #[error("circuits act on different register sizes ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error(transparent)]
    Synthesis(#[from] SynthError),
}

impl CircuitError {
    fn at_line(self, line: usize) -> Self {
        match self {
            CircuitError::OperandOutOfRange { qubit, num_qubits, .. } => {
                CircuitError::OperandOutOfRange { line, qubit, num_qubits }
            }
            CircuitError::SameOperands { .. } => CircuitError::SameOperands { line },
            other => other,
        }
    }
}

/// One gate. Qubit operands index the register; `Cx(control, target)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Cx(usize, usize),
    Fixed(GateId, usize),
    Rz(f64, usize),
    Rx(f64, usize),
    Ry(f64, usize),
    U3(EulerAngles, usize),
}

/// True when `angle` is an integer multiple of pi/4 up to `1e-12`.
pub fn is_multiple_of_quarter_pi(angle: f64) -> bool {
    let k = angle / FRAC_PI_4;
    (k - k.round()).abs() * FRAC_PI_4 <= 1e-12
}

/// Clifford+T words with at most one T.
fn small_table() -> &'static UniqueTable {
    &cached_table(1).0
}

impl Op {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Op::Cx(c, t) => (c, Some(t)),
            Op::Fixed(_, q) | Op::Rz(_, q) | Op::Rx(_, q) | Op::Ry(_, q) | Op::U3(_, q) => (q, None),
        }
    }

    /// The 2x2 matrix of a single-qubit op.
    pub fn matrix(&self) -> Option<Unitary2> {
        Some(match *self {
            Op::Cx(..) => return None,
            Op::Fixed(g, _) => g.matrix(),
            Op::Rz(a, _) => rz(a),
            Op::Rx(a, _) => rx(a),
            Op::Ry(a, _) => ry(a),
            Op::U3(e, _) => u3(e),
        })
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Op::Rz(..) | Op::Rx(..) | Op::Ry(..) | Op::U3(..))
    }

    /// A rotation whose angles are all multiples of pi/4, or whose matrix is a
    /// Clifford+T word with at most one T.
    pub fn is_trivial_rotation(&self) -> bool {
        let by_angle = match *self {
            Op::Rz(a, _) | Op::Rx(a, _) | Op::Ry(a, _) => is_multiple_of_quarter_pi(a),
            Op::U3(e, _) => [e.theta, e.phi, e.lambda].into_iter().all(is_multiple_of_quarter_pi),
            _ => return false,
        };
        by_angle
            || self.matrix().is_some_and(|m| {
                small_table().find(&m).is_some_and(|i| distance(small_table().matrix(i), &m) <= 1e-12)
            })
    }

    pub fn is_nontrivial_rotation(&self) -> bool {
        self.is_rotation() && !self.is_trivial_rotation()
    }

    fn angles_finite(&self) -> bool {
        match *self {
            Op::Rz(a, _) | Op::Rx(a, _) | Op::Ry(a, _) => a.is_finite(),
            Op::U3(e, _) => e.theta.is_finite() && e.phi.is_finite() && e.lambda.is_finite(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit { num_qubits, ops: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Appends `op` after checking operands and angles. Errors carry line 0.
    pub fn push(&mut self, op: Op) -> Result<(), CircuitError> {
        let (a, b) = op.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= self.num_qubits {
                return Err(CircuitError::OperandOutOfRange { line: 0, qubit: q, num_qubits: self.num_qubits });
            }
        }
        if b == Some(a) {
            return Err(CircuitError::SameOperands { line: 0 });
        }
        if !op.angles_finite() {
            return Err(CircuitError::NonFiniteAngle);
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn from_ops(num_qubits: usize, ops: impl IntoIterator<Item = Op>) -> Result<Self, CircuitError> {
        let mut c = Circuit::new(num_qubits);
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircuitMetrics {
    pub t_count: usize,
    /// Longest chain of T gates through the qubit dependency graph.
    pub t_depth: usize,
    /// H, S and CX gates; Paulis are not counted.
    pub clifford_count: usize,
    pub rotation_count: usize,
}

pub fn metrics(circuit: &Circuit) -> CircuitMetrics {
    let mut m = CircuitMetrics { t_count: 0, t_depth: t_depth(circuit), clifford_count: 0, rotation_count: 0 };
    for op in circuit.ops() {
        match op {
            Op::Fixed(GateId::T, _) => m.t_count += 1,
            Op::Fixed(GateId::H | GateId::S, _) | Op::Cx(..) => m.clifford_count += 1,
            Op::Fixed(..) => {}
            _ if op.is_nontrivial_rotation() => m.rotation_count += 1,
            _ => {}
        }
    }
    m
}

/// Longest T-weighted path in the gate DAG, where each gate depends on the previous gate
/// on each of its qubits.
fn t_depth(circuit: &Circuit) -> usize {
    let ops = circuit.ops();
    let mut last_on: Vec<Option<usize>> = vec![None; circuit.num_qubits()];
    let mut preds: Vec<Vec<usize>> = Vec::with_capacity(ops.len());
    for (i, op) in ops.iter().enumerate() {
        let (a, b) = op.qubits();
        let mut p: Vec<usize> = std::iter::once(a).chain(b).filter_map(|q| last_on[q]).collect();
        p.dedup();
        preds.push(p);
        for q in std::iter::once(a).chain(b) {
            last_on[q] = Some(i);
        }
    }
    // Ops are already in topological order.
    let mut depth = vec![0usize; ops.len()];
    for i in 0..ops.len() {
        let w = usize::from(matches!(ops[i], Op::Fixed(GateId::T, _)));
        depth[i] = preds[i].iter().map(|&p| depth[p]).max().unwrap_or(0) + w;
    }
    depth.into_iter().max().unwrap_or(0)
}

const COMMUTE_TOL: f64 = 1e-12;

/// Fused run of single-qubit ops waiting on one qubit.
#[derive(Debug, Clone)]
struct Block {
    matrix: Unitary2,
    ops: Vec<Op>,
    has_rotation: bool,
}

impl Block {
    fn is_diagonal(&self) -> bool {
        self.matrix.get(0, 1).norm() < COMMUTE_TOL && self.matrix.get(1, 0).norm() < COMMUTE_TOL
    }

    /// Commutes exactly with X, so it slides across a CX target.
    fn commutes_with_x(&self) -> bool {
        let m = &self.matrix;
        (m.get(0, 0) - m.get(1, 1)).norm() < COMMUTE_TOL && (m.get(0, 1) - m.get(1, 0)).norm() < COMMUTE_TOL
    }
}

/// Fuses runs of single-qubit gates containing a nontrivial rotation into one U3 each.
/// With `commute`, pending blocks slide across CX controls when diagonal and across CX
/// targets when they commute with X. A forward pass is followed by one backward pass.
pub fn merge_rotations(circuit: &Circuit, commute: bool) -> Circuit {
    let forward = merge_pass(circuit.num_qubits(), circuit.ops().iter().copied(), commute, false);
    let mut backward = merge_pass(circuit.num_qubits(), forward.into_iter().rev(), commute, true);
    backward.reverse();
    Circuit { num_qubits: circuit.num_qubits(), ops: backward }
}

/// One greedy sweep. With `reversed`, ops arrive in reverse time order and the output is
/// reversed as well.
fn merge_pass(n: usize, ops: impl Iterator<Item = Op>, commute: bool, reversed: bool) -> Vec<Op> {
    let mut pending: Vec<Option<Block>> = vec![None; n];
    let mut out = Vec::new();
    let flush = |slot: &mut Option<Block>, q: usize, out: &mut Vec<Op>| {
        if let Some(b) = slot.take() {
            if b.has_rotation {
                out.push(Op::U3(zyz_decompose(&b.matrix), q));
            } else {
                out.extend(b.ops);
            }
        }
    };
    for op in ops {
        match op {
            Op::Cx(c, t) => {
                if !(commute && pending[c].as_ref().map_or(true, Block::is_diagonal)) {
                    flush(&mut pending[c], c, &mut out);
                }
                if !(commute && pending[t].as_ref().map_or(true, Block::commutes_with_x)) {
                    flush(&mut pending[t], t, &mut out);
                }
                out.push(op);
            }
            _ => {
                let (q, _) = op.qubits();
                let m = op.matrix().expect("single-qubit op");
                let b = pending[q].get_or_insert_with(|| Block { matrix: Unitary2::IDENTITY, ops: Vec::new(), has_rotation: false });
                b.matrix = if reversed { b.matrix * m } else { m * b.matrix };
                b.ops.push(op);
                b.has_rotation |= op.is_nontrivial_rotation();
            }
        }
    }
    for (q, slot) in pending.iter_mut().enumerate() {
        flush(slot, q, &mut out);
    }
    out
}

/// Result of [`synthesize_circuit`].
#[derive(Debug, Clone)]
pub struct SynthesizedCircuit {
    /// Only cx, h, s, t, x, y and z gates.
    pub circuit: Circuit,
    /// Distance of each synthesized rotation, in circuit order.
    pub rotation_errors: Vec<f64>,
}

impl SynthesizedCircuit {
    /// Upper bound on the circuit-level distance.
    pub fn error_bound(&self) -> f64 {
        self.rotation_errors.iter().sum()
    }
}

/// Replaces every rotation by a minimum-T Clifford+T word within `epsilon`.
pub fn synthesize_circuit(
    circuit: &Circuit,
    synth: &Synthesizer,
    epsilon: f64,
    opts: &MinTOptions,
) -> Result<SynthesizedCircuit, CircuitError> {
    synthesize_circuit_with(circuit, |u| {
        let out = synth.synthesize_min_t(u, epsilon, opts)?;
        Ok((out.best.sequence.0, out.best.error))
    })
}

/// As [`synthesize_circuit`] with a caller-supplied single-qubit synthesizer returning
/// gates in time order and the achieved distance.
pub fn synthesize_circuit_with<F>(circuit: &Circuit, mut synth: F) -> Result<SynthesizedCircuit, CircuitError>
where
    F: FnMut(&Unitary2) -> Result<(Vec<GateId>, f64), SynthError>,
{
    let mut out = Circuit::new(circuit.num_qubits());
    let mut errors = Vec::new();
    for op in circuit.ops() {
        if !op.is_rotation() {
            out.ops.push(*op);
            continue;
        }
        let (q, _) = op.qubits();
        let (gates, err) = synth(&op.matrix().expect("rotation is single-qubit"))?;
        out.ops.extend(gates.into_iter().map(|g| Op::Fixed(g, q)));
        errors.push(err);
    }
    Ok(SynthesizedCircuit { circuit: out, rotation_errors: errors })
}

/// Rotations of `circuit` in order with their qubit.
pub fn rotations(circuit: &Circuit) -> Vec<(usize, Unitary2)> {
    circuit.ops().iter().filter(|op| op.is_rotation()).map(|op| (op.qubits().0, op.matrix().expect("single-qubit"))).collect()
}
