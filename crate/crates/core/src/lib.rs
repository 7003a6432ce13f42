//! Simulation and verification toolkit for a two-leg spin ladder under a
//! four-step resonant/weak Floquet drive.
//!
//! Qubit `2i` hosts `S_i` (upper chain) and qubit `2i + 1` hosts `sigma_i`
//! (lower chain). `Z|0> = +|0>`; qubit 0 is the least significant bit.

pub mod dense;
pub mod error;
pub mod ladder;
pub mod observables;
pub mod pauli;
pub mod propagator;
pub mod protocol;
pub mod states;
pub mod symmetry;
pub mod vanvleck;

pub use error::{Error, Result};
pub use ladder::LadderConfig;
pub use observables::{OddObservable, OddSeries, Plateau, TrajectoryRecord};
pub use pauli::{
    apply_to_state, commutator, pauli_mul, to_dense, CompiledOperator, DMat, OperatorSum, Pauli,
    PauliString, StateVector,
};
pub use propagator::{evolve_protocol, evolve_segment, KrylovSettings, Sample};
pub use protocol::{DriveProtocol, Segment, SegmentKind};
pub use symmetry::{ObservableConditions, SymmetryElement, SymmetryKind, SymmetryReport};
pub use vanvleck::{build_dn, fourier_component, kick_operator, vv_effective_term, FourierTable};
