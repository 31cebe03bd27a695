//! Sparse multi-register quantum state simulator.
//!
//! States map composite basis labels (one integer per register) to complex
//! amplitudes. Arithmetic registers stay in computational basis states, so
//! the number of stored amplitudes grows with the index registers only.

mod arith;
mod gates;
mod layout;
mod measure;
mod oracle;
mod pe;
mod qft;
mod reflect;
mod state;

pub use arith::{phase_angle, FixedOp};
pub use gates::Qubit;
pub use layout::{RegId, Register, RegisterKind, RegisterLayout, DEFAULT_MAX_QUBITS, MAX_REGISTER_WIDTH};
pub use oracle::{Direction, PreparationOracle};
pub use pe::{extract_dense, inverse_phase_estimate, phase_estimate, BranchUnitary, PowerStrategy, DENSE_QUBIT_LIMIT};
pub use reflect::{Axis, Preparation};
pub use state::{Controls, Diagnostics, Label, QState, PRUNE_THRESHOLD};
