//! Circuit synthesis for machines whose entangling primitive is a global
//! tunable gate: one layer of commuting `CZ^a` interactions over arbitrary
//! qubit pairs, with single-qubit gates treated as free.
//!
//! The crate provides
//!
//! * [`f2linalg`]: bit-packed GF(2) matrices, inversion, solving, and a
//!   certified commutator factorization of invertible matrices;
//! * [`circuit`]: the instruction set, GT-cost metric, text/JSON formats and
//!   the CNOT-layer merge pass;
//! * [`clifford_core`]: stabilizer tableaux and the layered
//!   `L-CX-CZ-L-CZ-L` normal form;
//! * [`clifford_synth`]: constant-cost Clifford synthesis with and without
//!   ancillae;
//! * [`mct_synth`]: OR / multiply-controlled gates, flat, recursive and
//!   measurement-based variants;
//! * [`simverify`]: dense statevector simulation with forced measurement
//!   outcomes and the contract checkers used to certify every circuit.

pub mod circuit;
pub mod clifford_core;
pub mod clifford_synth;
pub mod f2linalg;
pub mod mct_synth;
pub mod simverify;

pub use circuit::{Angle, Circuit, Instruction, SqGate};
pub use f2linalg::F2Matrix;
pub use clifford_core::{CliffordTableau, LayeredClifford};
pub use mct_synth::{MctMethod, MctPlan};
