//! Finite-dimensional rate-independent systems in the slow-loading regime.
//!
//! The crate is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the `f64` aliases at the crate root are what the CLI uses.

// `!(x > 0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvanalysis;
pub mod contact;
pub mod dissipation;
pub mod energy;
pub mod error;
pub mod extended;
pub mod jumpcost;
pub mod linalg;
pub mod operators;
pub mod pipeline;
pub mod presets;
pub mod scalar;
pub mod scheme;

pub use bvanalysis::{BvPath, Classification, JumpAnalysis, JumpRecord, PathSource, Verdict};
pub use contact::{ContactPotential, CostPotential, YosidaPotential};
pub use dissipation::{AugmentedPotential, Dissipation, DissipationKind};
pub use energy::{Anchor, EnergyKind, EnergyModel, LoadingCurve, Spring};
pub use error::{Error, Result};
pub use extended::Extended;
pub use jumpcost::{solve_cost, CostResult, Trajectory, TransitionProblem};
pub use operators::{Definiteness, KernelDecomposition, SymOperator};
pub use pipeline::{DeltaRule, SweepSpec, TauRule, VerdictSettings};
pub use scalar::Real;
pub use scheme::{rounded_tau, run_scheme, DiscreteEvolution, SchemeParams, System};

pub type Operator = SymOperator<f64>;
pub type Potential = Dissipation<f64>;
pub type Energy = EnergyModel<f64>;
