//! Multi-time quantum processes and instrument-specific Markov order.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense complex operators over named tensor factors.
//! - [`maps`]: CP maps in Choi form, instruments, testers and dual sets.
//! - [`process`]: process tensors, the multi-time Born rule and conditioning.
//! - [`classical`]: joint distributions, classical Markov order, CMI and recovery.
//! - [`markov`]: conditional history/future decomposition, quantum CMI and the
//!   tetrahedral example with its witness constructions.
//! - [`format`]: the JSON container used by the command-line tool.
//!
//! Conventions fixed across the crate:
//!
//! - The maximally entangled operator `Φ` is unnormalized, so the Choi
//!   operator of a CPTP map has trace equal to its input dimension.
//! - The Born rule pairs a tester element with a process tensor as
//!   `tr[Oᵀ Υ]`, where `O` is the Choi operator built by
//!   [`maps::choi_from_kraus`]. A POVM effect `E` therefore has Choi operator `Eᵀ`.
//! - Process-tensor factors are named `s{j}:i` (what the process hands to the
//!   experimenter at step `j`) and `s{j}:o` (what the experimenter hands back).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod format;
pub mod maps;
pub mod markov;
pub mod process;
pub mod random;
pub mod tensor;

pub use classical::{BlockPartition, JointDistribution, RecoveryMap};
pub use error::{Error, Result};
pub use maps::{CpMap, DualSet, Instrument, InstrumentReport, InstrumentSequence, TesterElement};
pub use markov::{MarkovOrderVerdict, OutcomeDecomposition, WitnessReport};
pub use process::{ConditionalProcess, ProcessReport, ProcessTensor};
pub use tensor::{FactorLabel, LabeledOperator, LogBase, Spectrum, C64};

/// Numerical tolerances shared by every module.
pub mod tol {
    /// Hermiticity check, entrywise.
    pub const HERM: f64 = 1e-9;
    /// Smallest eigenvalue still accepted as positive.
    pub const PSD: f64 = 1e-9;
    /// Trace normalisation checks.
    pub const TRACE: f64 = 1e-9;
    /// Eigenvalues below this are exact zeros for entropies.
    pub const EIG_FLOOR: f64 = 1e-12;
    /// Eigen-reconstruction error, max-norm.
    pub const EIG: f64 = 1e-10;
    /// Outcomes less likely than this cannot be conditioned on.
    pub const PROB_FLOOR: f64 = 1e-12;
    /// Classical conditional-independence checks.
    pub const COND: f64 = 1e-10;
    /// Trace distance below which a conditional is called a product.
    pub const FACTOR: f64 = 1e-9;
    /// Largest admissible condition number for dual-set Gram matrices.
    pub const GRAM_CONDITION: f64 = 1e12;
}
