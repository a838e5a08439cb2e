// SPDX-License-Identifier: Apache-2.0

//! Process-fidelity bounds for quantum filters.
//!
//! A quantum filter is a probabilistic operation with a single Kraus operator
//! `K`. Given outcome statistics from probing an implemented channel with two
//! (or three) bases of pure states, this crate computes
//!
//! * analytical lower and upper bounds on the process fidelity with `K`
//!   (a generalization of Hofmann's bound for unitaries), see [`bounds`];
//! * the tightest bounds compatible with the same data, obtained from a pair
//!   of semidefinite programs solved by an in-crate interior-point method,
//!   see [`sdp`];
//! * numerical certificates for the operator inequalities behind the bounds,
//!   see [`certificates`].
//!
//! All numerical code is generic over the real scalar (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod bounds;
pub mod certificates;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod linalg;
pub mod probe;
pub mod quantum;
pub mod scalar;
pub mod sdp;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CMat = linalg::CMat<f64>;
pub type CVec = linalg::CVec<f64>;
pub type PureState = quantum::PureState<f64>;
pub type Basis = quantum::Basis<f64>;
pub type ChoiMatrix = quantum::ChoiMatrix<f64>;
pub type QuantumFilter = filters::QuantumFilter<f64>;
pub type MixtureChannel = filters::MixtureChannel<f64>;
pub type ProbeSet = probe::ProbeSet<f64>;
pub type ProbeEnsemble = probe::ProbeEnsemble<f64>;
pub type MeasurementRecord = probe::MeasurementRecord<f64>;
pub type ReducedStats = probe::ReducedStats<f64>;
pub type BoundsReport = bounds::BoundsReport<f64>;
pub type ConstraintSet = sdp::ConstraintSet<f64>;
pub type SdpSolution = sdp::SdpSolution<f64>;
pub type WitnessReport = certificates::WitnessReport<f64>;
