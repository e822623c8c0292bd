//! Two-mode quantum optics toolkit for measuring quantum Stokes parameters.
//!
//! The pipeline is:
//!
//! 1. build a [`TwoModeState`] on a truncated Fock grid ([`fockspace`]),
//! 2. rotate the polarization modes with an SU(2) element, either the ideal
//!    matrix or a quarter/quarter/half wave-plate stack ([`optics`]),
//! 3. record intensities and intensity–intensity correlations of the rotated
//!    modes, exactly or by photon counting ([`measurement`]),
//! 4. invert the records back into the first- and second-order normally
//!    ordered field moments and assemble Stokes means, variances and
//!    correlations ([`reconstruct`], [`stokes`]).
//!
//! Every stage has an independent reference path (`stokes_oracle`,
//! `measure_exact_via_state`) so the reconstruction can be checked end to end.

pub mod error;
pub mod fockspace;
pub mod linalg;
pub mod measurement;
pub mod optics;
pub mod reconstruct;
pub mod stokes;

pub use error::{Error, Result};
pub use fockspace::{Ladder, Mode, MomentSpec, StateSpec, TruncationWarning, TwoModeState};
pub use measurement::{
    MeasurementPlan, MeasurementRecord, MeasurementSetting, PlanEntry, Realization, RecordMode, Role,
};
pub use optics::{GadgetSetting, PlateKind, Su2Element, WavePlateSetting};
pub use reconstruct::{IdentityCheck, ReconstructOptions, ReconstructionReport};
pub use stokes::{CorrelationSet, StokesSummary};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
