//! Ideal circle patterns on closed surfaces with spherical background
//! geometry, found by the combinatorial Calabi flow.
//!
//! A [`SurfaceComplex`] is a cellular decomposition with an intersection
//! angle `Phi in (0, pi/2]` on every edge. Each vertex carries a circle of
//! radius `r in (0, pi/2)`, parametrised by `K = ln cot r`. The total
//! geodesic curvature `L_v` of the circle boundary pieces cut out by the
//! neighbouring circles is computed in [`curvature`]; [`flow`] drives `L`
//! to a prescribed [`Prescription`], and [`feasibility`] decides whether a
//! prescription is attainable at all.

#![allow(
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod complex;
pub mod curvature;
pub mod error;
pub mod feasibility;
pub mod flow;
pub mod geometry;
pub mod instance;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod report;
pub mod scalar;

#[doc(hidden)]
pub mod cli;

pub use complex::{Prescription, SurfaceComplex, ValidationReport, Violation};
pub use curvature::{evaluate, potential, velocity_bound, CurvatureState, Evaluator};
pub use error::{Error, Result};
pub use feasibility::{check_bruteforce, check_mincut, FeasibilityVerdict, Method};
pub use flow::{
    fit_decay_rate, newton_solve, run, DecayFit, Divergence, FlowConfig, FlowMethod, FlowSample, FlowTrace,
    Integrator, Verdict,
};
pub use geometry::{k_to_r, r_to_k};
pub use linalg::DenseMatrix;
pub use scalar::Real;

pub type SurfaceComplex64 = SurfaceComplex<f64>;
pub type Prescription64 = Prescription<f64>;
pub type CurvatureState64 = CurvatureState<f64>;
pub type FlowConfig64 = FlowConfig<f64>;
pub type FlowTrace64 = FlowTrace<f64>;
pub type FeasibilityVerdict64 = FeasibilityVerdict<f64>;

pub type SurfaceComplex32 = SurfaceComplex<f32>;
pub type Prescription32 = Prescription<f32>;
pub type CurvatureState32 = CurvatureState<f32>;
pub type FlowConfig32 = FlowConfig<f32>;
pub type FlowTrace32 = FlowTrace<f32>;
pub type FeasibilityVerdict32 = FeasibilityVerdict<f32>;
