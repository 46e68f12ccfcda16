//! Numerical construction and verification of symplectic realizations.
//!
//! Given a Poisson bivector on a coordinate chart (optionally paired with a
//! Nijenhuis tensor, or given as a holomorphic Poisson structure), this crate
//! integrates the geodesic vector field of the cotangent algebroid connection
//! (the Poisson spray) and evaluates the realized two-forms
//!
//! ```text
//! w(u, v)   = int_0^1 (phi_t^* w_can)(u, v) dt
//! w_N(u, v) = int_0^1 [((tN)^{-1} o phi_t)^* w_can](u, v) dt
//! ```
//!
//! by Gauss-Legendre quadrature of flow pullbacks, inverts them to bivectors,
//! and checks the realization properties numerically.
//!
//! Module layout:
//!
//! * [`expr`] - coordinate expression parser and forward-mode jet evaluation;
//!   the sole source of derivatives in the crate.
//! * [`linalg`] - small dense matrices and rank-3 arrays.
//! * [`geometry`] - chart tensor calculus: bivectors, (1,1)-tensors, brackets,
//!   exterior derivatives, pullbacks.
//! * [`spray`] - the geodesic vector field on the cotangent chart and its
//!   adaptive flow with variational equations.
//! * [`realization`] - realized two-forms, bivector inversion, and the
//!   realization verification suite.
//! * [`nijenhuis`] - Poisson-Nijenhuis compatibility, complete lifts, twisted
//!   Lie-Poisson structures, and the twisted algebroid coboundary.
//! * [`holomorphic`] - splitting of holomorphic Poisson data and the
//!   holomorphic realization suite.
//! * [`catalog`] - built-in example structures.
//! * [`report`] - structured verification reports.
//! * [`tolerances`] - pinned residual thresholds used by the verification
//!   suites.

// index-style loops mirror the tensor index calculus throughout
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod expr;
pub mod geometry;
pub mod holomorphic;
pub mod linalg;
pub mod nijenhuis;
mod ode;
pub mod realization;
pub mod report;
pub mod rng;
pub mod spray;
pub mod tolerances;

pub use expr::{Expression, Jet, VarSet};
pub use geometry::{BivectorField, OneOneTensorField, TwoFormMatrix};
pub use realization::{QuadratureRule, RealizeOpts, RealizedForm};
pub use report::{CheckSummary, PointRecord, VerificationReport};

pub use spray::{ConnectionCoefficients, CotangentPoint, FlowOpts, FlowResult, Spray};
