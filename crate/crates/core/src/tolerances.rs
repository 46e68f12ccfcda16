//! Residual thresholds used by the verification suites.
//!
//! Everything is pinned here; no check invents its own magic number. The
//! grouping reflects how each bound is reached: exact linear algebra at
//! machine precision, quadrature/ODE-limited quantities around 1e-7..1e-10,
//! and finite-difference-limited quantities around 1e-5.

/// Zero-structure and constant-coefficient identities that reduce to exact
/// linear algebra plus a weighted quadrature sum.
pub const TOL_ZERO_STRUCTURE: f64 = 1e-12;

/// Closed-form realized form for a constant bivector with a flat connection.
pub const TOL_CONST_FORM: f64 = 1e-10;

/// Base-block comparison of the inverted realized form against a constant
/// bivector.
pub const TOL_CONST_REALIZATION: f64 = 1e-12;

/// Realization residual (base block of the inverted realized form against
/// the input bivector) for general catalog structures.
pub const TOL_REALIZATION: f64 = 1e-7;

/// Jacobi identity residual for input bivectors (exact jets, scaled data).
pub const TOL_JACOBI: f64 = 1e-8;

/// Closedness of realized forms under the default finite-difference scheme
/// (h = 1e-4, one Richardson step).
pub const TOL_CLOSED_FD: f64 = 1e-5;

/// Closedness under the refined scheme (h = 1e-3, one Richardson step),
/// where the larger step keeps ODE noise amplification below truncation.
pub const TOL_CLOSED_FD_FINE: f64 = 1e-7;

/// Base-block of realized forms at fiber-zero points (Lagrangian zero
/// section).
pub const TOL_LAGRANGIAN: f64 = 1e-9;

/// Pointwise `J^2 + Id` for the realized almost complex structure.
pub const TOL_ALMOST_COMPLEX: f64 = 1e-8;

/// Nijenhuis torsion of the realized complex structure, differentiated by
/// central differences over the chart.
pub const TOL_TORSION_FD: f64 = 1e-5;

/// Agreement of the two twisted-form quadratures (transpose-inverse
/// composition versus the complete-lift variant).
pub const TOL_TWISTED_AGREEMENT: f64 = 1e-7;

/// Twisted Lie-Poisson matrix composed with the canonical flat map against
/// the complete lift.
pub const TOL_COMPLETE_LIFT: f64 = 1e-8;

/// Factor-4 bookkeeping between the holomorphic bivector and the real
/// inversions of the realized forms.
pub const TOL_FACTOR4: f64 = 1e-7;

/// Fiber-scaling identity of the spray flow.
pub const TOL_HOMOGENEITY: f64 = 1e-7;

/// A-geodesic residual along integrated trajectories.
pub const TOL_A_GEODESIC: f64 = 1e-8;

/// Entrywise change of the realized form when the Gauss-Legendre node count
/// doubles.
pub const TOL_QUAD_SELF_CONVERGENCE: f64 = 1e-9;

/// Anticommutator of the twisted algebroid coboundary with the de Rham
/// differential on scalar test functions.
pub const TOL_COBOUNDARY: f64 = 1e-7;

/// Agreement of the two constructions of the real part of the holomorphic
/// realized form (minus-sign route versus inverse-transpose route).
pub const TOL_WR_CROSS_PATH: f64 = 1e-9;

/// Poisson-Nijenhuis compatibility residuals on exact-jet data.
pub const TOL_PN_COMPAT: f64 = 1e-8;

/// Holomorphicity (Cauchy-Riemann) residuals of holomorphic component
/// functions.
pub const TOL_CAUCHY_RIEMANN: f64 = 1e-9;

/// Type-(2,0) identity of the assembled holomorphic two-form.
pub const TOL_TYPE_20: f64 = 1e-8;

/// Base block of the realized complex structure at fiber-zero points
/// against the chart complex structure.
pub const TOL_J_BASE_BLOCK: f64 = 1e-7;

/// Nondegeneracy floor: |det| of realized forms must stay above this.
pub const NONDEGENERACY_FLOOR: f64 = 0.5;

/// Determinant floor below which a (1,1)-tensor is rejected as singular.
pub const DET_FLOOR_N: f64 = 1e-12;
