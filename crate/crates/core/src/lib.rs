//! Pulse-sequence synthesis for nonholonomic quantum control.
//!
//! Two fixed Hamiltonians applied in alternation generate the full unitary
//! group on generic systems; this crate finds the pulse timings realizing a
//! requested gate, checks controllability of the generator pair, models the
//! dipole-coupled Rydberg pair that serves as the demonstration system, and
//! independently verifies synthesized sequences.

pub mod control;
pub mod error;
pub mod linalg;
pub mod pulse;
pub mod rydberg;
pub mod verify;

pub use control::{ControllabilityReport, HamiltonianPair, KacOptions};
pub use error::{Error, Result};
pub use linalg::{
    gate_fidelity, CMat, CVec, CharPolyCoefficients, HermitianMatrix, Propagator, UnitaryMatrix,
};
pub use pulse::{
    build_identity_vector, find_identity_root, newton_refine, sequence_gradient, sequence_unitary,
    synthesize, ControlProblem, NewtonOptions, NewtonOutcome, PairPropagator, PulseLabel,
    PulseSequence, RootOptions, RootSeed, StageRecord, SubdivisionSchedule, SynthesisResult,
};
pub use rydberg::{DipoleSpec, RydbergParams, StarkCurvePoint};
pub use verify::{jitter_scan, verify, JitterPoint, VerificationReport};
