//! Simulation and estimation toolkit for PT-symmetric non-Hermitian quantum
//! systems: spectra and phase structure, biorthogonal Schrödinger dynamics,
//! Lindblad dynamics, Fisher-Rao metrics and quantum Fisher information, and
//! control fields that enhance estimation under dissipation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod lindblad;
pub mod metrology;
pub mod models;
pub mod operators;

pub use control::{ControlSchedule, OptimizationReport, OptimizeOptions};
pub use dynamics::{EvolutionResult, LeftStateVector, StateVector, Stepping, TimeGrid};
pub use error::{Error, Result};
pub use lindblad::{DensityMatrix, GammaPolicy, LindbladSpec};
pub use metrology::{DynamicsKind, MetricKind, MetricSeries, ParamPoint};
pub use models::{InitialState, Model, ModelSpec, Phase, PhaseLabel, TwoLevelPTParams, YangLeeParams};
pub use operators::{BiorthogonalEigensystem, Operator, PauliAxis, C64};
