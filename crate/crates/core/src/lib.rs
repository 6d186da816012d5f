//! Clifford+T synthesis of single-qubit unitaries by sampling gate words from a matrix
//! product state built over tables of distinct Clifford+T unitaries.

pub mod circuit;
pub mod kdtree;
pub mod mps;
pub mod noise;
pub mod sampler;
pub mod synth;
pub mod tables;
pub mod unitary;

pub use unitary::{distance, matrix_of, trace_value, Cost, EulerAngles, GateId, GateSequence, Unitary2};
