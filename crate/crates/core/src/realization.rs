//! Realized two-forms by Gauss-Legendre quadrature of flow pullbacks, their
//! inversion to bivectors, and the realization verification suite.
//!
//! The plain realized form at a cotangent point is the node-weighted sum of
//! `J_t^T W_can J_t` over the flow Jacobians `J_t`; the twisted form runs the
//! same quadrature with the canonical form replaced by its pullback along
//! the fiberwise map `(x, lambda) -> (x, tN(x)^{-1} lambda)` at the flowed
//! point. All nodes come from a single adaptive pass of the flow.

use std::cell::RefCell;
use std::collections::HashMap;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::{
    exterior_derivative_2form, jacobiator, omega_can, pullback_2form, BivectorField, CentralDiff,
    OneOneTensorField, TwoFormMatrix,
};
use crate::linalg::Mat;
use crate::nijenhuis::{complete_lift, fiberwise_transpose_map_jacobian, pi_n_jet};
use crate::report::{CheckRecord, MarginRecord, PointRecord, VerificationReport};
use crate::spray::{
    a_geodesic_residuals, build_spray, homogeneity_residual, ConnectionCoefficients,
    CotangentPoint, FlowOpts, Spray,
};
use crate::tolerances as tol;

/// Nodes and weights on [0, 1].
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Legendre rule mapped to [0, 1]; exact on polynomials of degree
    /// `2n - 1`, positive weights summing to one.
    pub fn gauss_legendre(n: usize) -> QuadratureRule {
        assert!(n >= 1, "at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev initial guess, then Newton on P_n
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(n, z);
                let dz = p / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(n, z);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        // map [-1, 1] -> [0, 1]
        for x in nodes.iter_mut() {
            *x = 0.5 * (*x + 1.0);
        }
        for w in weights.iter_mut() {
            *w *= 0.5;
        }
        QuadratureRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Options for realized-form evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RealizeOpts {
    pub quad_nodes: usize,
    pub flow: FlowOpts,
    /// Finite-difference scheme for closedness checks.
    pub fd: CentralDiff,
    /// Relative determinant floor for form inversion.
    pub det_floor: f64,
}

impl Default for RealizeOpts {
    fn default() -> Self {
        RealizeOpts {
            quad_nodes: 16,
            flow: FlowOpts::default(),
            fd: CentralDiff::default(),
            det_floor: 1e-12,
        }
    }
}

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error("start point left U: flow failed at t = {time}: {reason}")]
    OutsideU { time: f64, reason: String },
    #[error("(1,1)-tensor is numerically singular (|det| = {det:e})")]
    SingularTensor { det: f64 },
    #[error("realized form is numerically singular (|det| = {det:e}, floor {floor:e})")]
    SingularForm { det: f64, floor: f64 },
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Build(String),
}

/// Weighted quadrature of `J_t^T M(z_t) J_t` with a caller-supplied
/// congruence matrix per flowed point.
pub fn realized_form_with_congruence(
    spray: &Spray,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
    mut congruence: impl FnMut(&CotangentPoint) -> Result<Mat, RealizeError>,
) -> Result<Mat, RealizeError> {
    let rule = QuadratureRule::gauss_legendre(opts.quad_nodes);
    let (states, _, _) = spray
        .flow_to_nodes(p0, rule.nodes(), 1, &opts.flow)
        .map_err(|f| RealizeError::OutsideU {
            time: f.time,
            reason: f.reason,
        })?;
    let m = 2 * spray.dim();
    let mut acc = Mat::zeros(m, m);
    for (state, w) in states.iter().zip(rule.weights()) {
        let inner = congruence(&state.point)?;
        let jac = state.jacobian.as_ref().expect("jacobian requested");
        let term = pullback_2form(jac, &inner);
        acc = acc.add(&term.scale(*w));
    }
    // each exact term is antisymmetric; remove summation-order rounding
    Ok(acc.antisymmetrized())
}

/// The realized two-form `int_0^1 (phi_t^* w_can) dt` at `p0`.
pub fn realized_two_form(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<TwoFormMatrix, RealizeError> {
    let spray = build_spray(pi.clone(), conn.clone()).map_err(RealizeError::Build)?;
    realized_two_form_spray(&spray, p0, opts)
}

pub fn realized_two_form_spray(
    spray: &Spray,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<TwoFormMatrix, RealizeError> {
    let omega = omega_can(spray.dim());
    let mat = realized_form_with_congruence(spray, p0, opts, |_| Ok(omega.clone()))?;
    Ok(TwoFormMatrix {
        point: p0.flat_coords(),
        mat,
    })
}

/// The twisted realized form
/// `int_0^1 [((tN)^{-1} o phi_t)^* w_can] dt` at `p0`; requires `N`
/// invertible along the flowed base points.
pub fn realized_two_form_twisted(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    n: &OneOneTensorField,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<TwoFormMatrix, RealizeError> {
    let spray = build_spray(pi.clone(), conn.clone()).map_err(RealizeError::Build)?;
    realized_two_form_twisted_spray(&spray, n, p0, opts)
}

pub fn realized_two_form_twisted_spray(
    spray: &Spray,
    n: &OneOneTensorField,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<TwoFormMatrix, RealizeError> {
    let omega = omega_can(spray.dim());
    let mat = realized_form_with_congruence(spray, p0, opts, |z| {
        let det = n.matrix(&z.x)?.det();
        if det.abs() < tol::DET_FLOOR_N {
            return Err(RealizeError::SingularTensor { det: det.abs() });
        }
        let dg = fiberwise_transpose_map_jacobian(n, z, true)?;
        Ok(pullback_2form(&dg, &omega))
    })?;
    Ok(TwoFormMatrix {
        point: p0.flat_coords(),
        mat,
    })
}

/// The complete-lift variant of the twisted form: the quadrature of
/// `(phi_t)^* [w_can((N^c)^{-1} ., .)]` with the lift evaluated at the
/// flowed point inside the pullback. Pointwise this inner form equals the
/// pullback of the canonical form along the inverse fiberwise map, so the
/// result cross-checks [`realized_two_form_twisted`] through an independent
/// assembly (twisted-Liouville-form jets and a lift inversion instead of a
/// transported matrix inverse).
pub fn realized_two_form_twisted_via_lift(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    n: &OneOneTensorField,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<TwoFormMatrix, RealizeError> {
    let spray = build_spray(pi.clone(), conn.clone()).map_err(RealizeError::Build)?;
    let omega = omega_can(spray.dim());
    let mat = realized_form_with_congruence(&spray, p0, opts, |z| {
        let nc = complete_lift(n, z)?;
        let det = nc.det();
        if det.abs() < tol::DET_FLOOR_N {
            return Err(RealizeError::SingularTensor { det: det.abs() });
        }
        let nc_inv = nc
            .inverse()
            .ok_or(RealizeError::SingularTensor { det: det.abs() })?;
        Ok(nc_inv.transpose().matmul(&omega))
    })?;
    Ok(TwoFormMatrix {
        point: p0.flat_coords(),
        mat,
    })
}

/// Invert a realized form: returns the matrix `K` with `K w = Id` (for the
/// canonical form this is `[[0, -I], [I, 0]]`).
pub fn realization_bivector(w: &TwoFormMatrix, det_floor: f64) -> Result<Mat, RealizeError> {
    let m = w.mat.rows() as i32;
    let scale = w.mat.max_abs().max(1e-300);
    let floor = det_floor * scale.powi(m);
    let det = w.mat.det();
    if det.abs() <= floor {
        return Err(RealizeError::SingularForm {
            det: det.abs(),
            floor,
        });
    }
    w.mat.inverse().ok_or(RealizeError::SingularForm {
        det: det.abs(),
        floor,
    })
}

/// Coordinate-bracket matrix of a symplectic form, `B^{ab} = {z^a, z^b}`:
/// the transpose of [`realization_bivector`]. For the canonical form this is
/// `[[0, I], [-I, 0]]`; the orientation is pinned once by the requirement
/// that the base block of the realized bracket matrix reproduce the input
/// bivector (checked exactly by the constant-bivector oracle).
pub fn induced_poisson_matrix(w: &TwoFormMatrix, det_floor: f64) -> Result<Mat, RealizeError> {
    Ok(realization_bivector(w, det_floor)?.transpose())
}

/// Cache key from coordinate bit patterns.
fn point_key(z: &[f64]) -> Vec<u64> {
    z.iter().map(|v| v.to_bits()).collect()
}

/// Pointwise evaluator for a realized form with a per-point cache.
///
/// Holds a `RefCell` cache and is deliberately not `Sync`; parallel drivers
/// give each worker its own evaluator (partitioned caches).
pub struct RealizedForm {
    spray: Spray,
    twist: Option<OneOneTensorField>,
    opts: RealizeOpts,
    cache: RefCell<HashMap<Vec<u64>, Mat>>,
}

impl RealizedForm {
    pub fn new(
        pi: &BivectorField,
        conn: &ConnectionCoefficients,
        twist: Option<&OneOneTensorField>,
        opts: RealizeOpts,
    ) -> Result<RealizedForm, RealizeError> {
        let spray = build_spray(pi.clone(), conn.clone()).map_err(RealizeError::Build)?;
        if let Some(n) = twist {
            if n.dim() != spray.dim() {
                return Err(RealizeError::Build(format!(
                    "twist tensor dimension {} does not match chart dimension {}",
                    n.dim(),
                    spray.dim()
                )));
            }
        }
        Ok(RealizedForm {
            spray,
            twist: twist.cloned(),
            opts,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn opts(&self) -> &RealizeOpts {
        &self.opts
    }

    /// Evaluate at flat cotangent coordinates `(x .., lambda ..)`.
    pub fn eval(&self, z: &[f64]) -> Result<Mat, RealizeError> {
        let key = point_key(z);
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let p = CotangentPoint::from_flat(z);
        let w = match &self.twist {
            None => realized_two_form_spray(&self.spray, &p, &self.opts)?,
            Some(n) => realized_two_form_twisted_spray(&self.spray, n, &p, &self.opts)?,
        };
        self.cache.borrow_mut().insert(key, w.mat.clone());
        Ok(w.mat)
    }

    pub fn eval_point(&self, p: &CotangentPoint) -> Result<Mat, RealizeError> {
        self.eval(&p.flat_coords())
    }

    /// Largest component of the exterior derivative at `p`, by the
    /// configured central-difference scheme.
    pub fn closedness_residual(&self, p: &CotangentPoint) -> Result<f64, RealizeError> {
        let t = exterior_derivative_2form(|z| self.eval(z), &p.flat_coords(), self.opts.fd)
            .map_err(|e| e.source)?;
        Ok(t.max_abs())
    }
}

/// Closedness of the plain realized form through the second variational
/// equation: the t-integrand of each partial derivative of the form is
/// assembled from the flow Hessian, so no chart differencing is involved.
pub fn closedness_residual_second_variation(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<f64, RealizeError> {
    let spray = build_spray(pi.clone(), conn.clone()).map_err(RealizeError::Build)?;
    let rule = QuadratureRule::gauss_legendre(opts.quad_nodes);
    let (states, _, _) = spray
        .flow_to_nodes(p0, rule.nodes(), 2, &opts.flow)
        .map_err(|f| RealizeError::OutsideU {
            time: f.time,
            reason: f.reason,
        })?;
    let m = 2 * spray.dim();
    let omega = omega_can(spray.dim());
    let mut partials = vec![Mat::zeros(m, m); m];
    for (state, w) in states.iter().zip(rule.weights()) {
        let jac = state.jacobian.as_ref().unwrap();
        let ojac = omega.matmul(jac);
        for (e, partial) in partials.iter_mut().enumerate() {
            let he = &state.second.as_ref().unwrap()[e];
            // d_e (J^T W J) = H_e^T W J + J^T W H_e
            let term = he
                .transpose()
                .matmul(&ojac)
                .add(&jac.transpose().matmul(&omega).matmul(he));
            *partial = partial.add(&term.scale(*w));
        }
    }
    Ok(crate::geometry::d_two_form_from_partials(&partials).max_abs())
}

/// Entrywise change of the realized form when the node count doubles.
pub fn quadrature_self_convergence(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    twist: Option<&OneOneTensorField>,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<f64, RealizeError> {
    let mut doubled = *opts;
    doubled.quad_nodes = 2 * opts.quad_nodes;
    let eval = |o: &RealizeOpts| -> Result<Mat, RealizeError> {
        match twist {
            None => Ok(realized_two_form(pi, conn, p0, o)?.mat),
            Some(n) => Ok(realized_two_form_twisted(pi, conn, n, p0, o)?.mat),
        }
    };
    Ok(eval(opts)?.sub(&eval(&doubled)?).max_abs())
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

fn outside_record(index: usize, point: CotangentPoint, err: &RealizeError) -> PointRecord {
    PointRecord {
        index,
        point,
        inside_u: false,
        failure: Some(err.to_string()),
        checks: Vec::new(),
        margins: Vec::new(),
    }
}

/// Realization suite for a plain Poisson structure: per sample point, the
/// Jacobi residual of the input, the base-block comparison of the inverted
/// realized form against the input bivector, closedness, nondegeneracy,
/// the Lagrangian zero-section residual, and the flow identities.
pub fn verify_realization(
    pi: &BivectorField,
    conn: &ConnectionCoefficients,
    samples: &[CotangentPoint],
    opts: &RealizeOpts,
) -> VerificationReport {
    let mut points = Vec::new();
    let spray = match build_spray(pi.clone(), conn.clone()) {
        Ok(s) => s,
        Err(e) => {
            return VerificationReport::from_points(
                "poisson",
                samples
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(i, p)| outside_record(i, p, &RealizeError::Build(e.clone())))
                    .collect(),
            )
        }
    };
    let evaluator = RealizedForm {
        spray: spray.clone(),
        twist: None,
        opts: *opts,
        cache: RefCell::new(HashMap::new()),
    };
    for (index, p0) in samples.iter().enumerate() {
        points.push(verify_poisson_point(
            pi, &spray, &evaluator, index, p0, opts,
        ));
    }
    VerificationReport::from_points("poisson", points)
}

fn verify_poisson_point(
    pi: &BivectorField,
    spray: &Spray,
    evaluator: &RealizedForm,
    index: usize,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> PointRecord {
    let mut checks = Vec::new();
    let mut margins = Vec::new();
    let n = pi.dim();

    let jac_res = match jacobiator(pi, &p0.x) {
        Ok(t) => t.max_abs(),
        Err(e) => {
            return outside_record(index, p0.clone(), &RealizeError::Eval(e));
        }
    };
    checks.push(CheckRecord {
        name: "jacobiator",
        residual: jac_res,
        tolerance: tol::TOL_JACOBI,
    });

    let w = match realized_two_form_spray(spray, p0, opts) {
        Ok(w) => w,
        Err(e) => return outside_record(index, p0.clone(), &e),
    };
    checks.push(CheckRecord {
        name: "form_antisymmetry",
        residual: w.antisymmetry_defect(),
        tolerance: tol::TOL_ZERO_STRUCTURE,
    });
    margins.push(MarginRecord {
        name: "nondegeneracy",
        value: w.nondegeneracy_margin(),
        floor: tol::NONDEGENERACY_FLOOR,
    });

    match induced_poisson_matrix(&w, opts.det_floor) {
        Ok(bracket) => {
            let pmat = match pi.matrix(&p0.x) {
                Ok(m) => m,
                Err(e) => return outside_record(index, p0.clone(), &RealizeError::Eval(e)),
            };
            let res = bracket.block(0, 0, n).sub(&pmat).max_abs();
            checks.push(CheckRecord {
                name: "realization",
                residual: res,
                tolerance: tol::TOL_REALIZATION,
            });
        }
        Err(e) => {
            checks.push(CheckRecord {
                name: "realization",
                residual: f64::INFINITY,
                tolerance: tol::TOL_REALIZATION,
            });
            let _ = e;
        }
    }

    match evaluator.closedness_residual(p0) {
        Ok(r) => checks.push(CheckRecord {
            name: "closedness",
            residual: r,
            tolerance: tol::TOL_CLOSED_FD,
        }),
        Err(e) => return outside_record(index, p0.clone(), &e),
    }

    // Lagrangian zero section at the base point of this sample
    let zero_fiber = CotangentPoint {
        x: p0.x.clone(),
        lambda: vec![0.0; n],
    };
    match realized_two_form_spray(spray, &zero_fiber, opts) {
        Ok(w0) => checks.push(CheckRecord {
            name: "lagrangian_zero_section",
            residual: w0.mat.block(0, 0, n).max_abs(),
            tolerance: tol::TOL_LAGRANGIAN,
        }),
        Err(e) => return outside_record(index, p0.clone(), &e),
    }

    match homogeneity_residual(spray, p0, 1.0, 0.5, &opts.flow) {
        Ok(r) => checks.push(CheckRecord {
            name: "homogeneity",
            residual: r,
            tolerance: tol::TOL_HOMOGENEITY,
        }),
        Err(f) => {
            return outside_record(
                index,
                p0.clone(),
                &RealizeError::OutsideU {
                    time: f.time,
                    reason: f.reason,
                },
            )
        }
    }

    match a_geodesic_residuals(spray, p0, 20, &opts.flow) {
        Ok((_, fd)) => checks.push(CheckRecord {
            name: "a_geodesic",
            residual: fd,
            tolerance: tol::TOL_A_GEODESIC,
        }),
        Err(f) => {
            return outside_record(
                index,
                p0.clone(),
                &RealizeError::OutsideU {
                    time: f.time,
                    reason: f.reason,
                },
            )
        }
    }

    PointRecord {
        index,
        point: p0.clone(),
        inside_u: true,
        failure: None,
        checks,
        margins,
    }
}

/// Realization suite for a Poisson-Nijenhuis structure: the plain suite for
/// the base bivector plus compatibility residuals, the twisted form and its
/// agreement with the complete-lift variant, the twisted realization
/// property against `pi_N`, and the twisted-Lie-Poisson/complete-lift lemma.
pub fn verify_realization_pn(
    pi: &BivectorField,
    n: &OneOneTensorField,
    conn: &ConnectionCoefficients,
    samples: &[CotangentPoint],
    opts: &RealizeOpts,
) -> VerificationReport {
    let base = verify_realization(pi, conn, samples, opts);
    let mut points = base.points;
    let spray = match build_spray(pi.clone(), conn.clone()) {
        Ok(s) => s,
        Err(_) => return VerificationReport::from_points("poisson-nijenhuis", points),
    };
    let dim = pi.dim();
    let vars = pi.vars();
    for rec in points.iter_mut() {
        if !rec.inside_u {
            continue;
        }
        let p0 = rec.point.clone();
        let x = &p0.x;

        let cov = crate::nijenhuis::trial_covector_jets(
            dim,
            vars,
            x,
            3,
            crate::rng::seed_from_coords(1040, x),
        );
        let vecs = crate::nijenhuis::trial_vector_jets(
            dim,
            vars,
            x,
            3,
            crate::rng::seed_from_coords(2040, x),
        );
        match crate::nijenhuis::pn_compatibility(pi, n, x, &cov, &vecs) {
            Ok(rep) => {
                rec.checks.push(CheckRecord {
                    name: "pn_matrix_compat",
                    residual: rep.matrix_residual,
                    tolerance: tol::TOL_PN_COMPAT,
                });
                rec.checks.push(CheckRecord {
                    name: "pn_bracket_compat",
                    residual: rep.bracket_residual,
                    tolerance: tol::TOL_PN_COMPAT,
                });
                rec.checks.push(CheckRecord {
                    name: "n_torsion",
                    residual: rep.torsion_residual,
                    tolerance: tol::TOL_PN_COMPAT,
                });
            }
            Err(e) => {
                rec.inside_u = false;
                rec.failure = Some(e.to_string());
                continue;
            }
        }

        // Jacobi identity of the second structure
        match (pi.jet(x), n.jet(x)) {
            (Ok(pj), Ok(nj)) => {
                let pn = pi_n_jet(&pj, &nj);
                rec.checks.push(CheckRecord {
                    name: "pi_n_jacobiator",
                    residual: crate::geometry::jacobiator_from_jet(&pn).max_abs(),
                    tolerance: tol::TOL_JACOBI,
                });
                margins_push_det(rec, &nj.m);
            }
            _ => continue,
        }

        let twisted = match realized_two_form_twisted_spray(&spray, n, &p0, opts) {
            Ok(w) => w,
            Err(e) => {
                rec.inside_u = false;
                rec.failure = Some(e.to_string());
                continue;
            }
        };
        rec.checks.push(CheckRecord {
            name: "twisted_form_antisymmetry",
            residual: twisted.antisymmetry_defect(),
            tolerance: tol::TOL_ZERO_STRUCTURE,
        });

        if let Ok(pet) = realized_two_form_twisted_via_lift(pi, conn, n, &p0, opts) {
            rec.checks.push(CheckRecord {
                name: "twisted_vs_complete_lift",
                residual: twisted.mat.sub(&pet.mat).max_abs(),
                tolerance: tol::TOL_TWISTED_AGREEMENT,
            });
        }

        if let Ok(bracket) = induced_poisson_matrix(&twisted, opts.det_floor) {
            if let Ok(pn_mat) = crate::nijenhuis::PnStructure::new(pi.clone(), n.clone())
                .and_then(|s| s.pi_n_matrix(x).map_err(|e| e.to_string()))
            {
                rec.checks.push(CheckRecord {
                    name: "twisted_realization",
                    residual: bracket.block(0, 0, dim).sub(&pn_mat).max_abs(),
                    tolerance: tol::TOL_REALIZATION,
                });
            }
        }

        // Lagrangian zero section for the twisted form
        let zero_fiber = CotangentPoint {
            x: p0.x.clone(),
            lambda: vec![0.0; dim],
        };
        if let Ok(w0) = realized_two_form_twisted_spray(&spray, n, &zero_fiber, opts) {
            rec.checks.push(CheckRecord {
                name: "twisted_lagrangian",
                residual: w0.mat.block(0, 0, dim).max_abs(),
                tolerance: tol::TOL_LAGRANGIAN,
            });
        }

        // complete-lift lemma at this point
        match (
            crate::nijenhuis::twisted_lie_poisson(n, &p0),
            complete_lift(n, &p0),
        ) {
            (Ok(tp), Ok(nc)) => {
                rec.checks.push(CheckRecord {
                    name: "complete_lift_lemma",
                    residual: tp.matmul(&omega_can(dim)).sub(&nc).max_abs(),
                    tolerance: tol::TOL_COMPLETE_LIFT,
                });
            }
            _ => continue,
        }

        if let Ok((rb, rs)) = crate::nijenhuis::bialgebroid_morphism_check(pi, n, x, &cov) {
            rec.checks.push(CheckRecord {
                name: "bialgebroid_bracket",
                residual: rb,
                tolerance: tol::TOL_PN_COMPAT,
            });
            rec.checks.push(CheckRecord {
                name: "bialgebroid_sharp",
                residual: rs,
                tolerance: tol::TOL_PN_COMPAT,
            });
        }

        if let Ok(r) = coboundary_anticommutator_worst(n, vars, x) {
            rec.checks.push(CheckRecord {
                name: "coboundary_anticommutator",
                residual: r,
                tolerance: tol::TOL_COBOUNDARY,
            });
        }
    }
    VerificationReport::from_points("poisson-nijenhuis", points)
}

/// Worst `[delta, d_DR]` residual on a small family of polynomial test
/// functions built for the chart dimension.
pub fn coboundary_anticommutator_worst(
    n: &OneOneTensorField,
    vars: &std::sync::Arc<crate::expr::VarSet>,
    x: &[f64],
) -> Result<f64, EvalError> {
    let dim = n.dim();
    let mut worst = 0.0f64;
    for f in coboundary_test_functions(dim, vars) {
        worst = worst.max(crate::nijenhuis::coboundary_de_rham_anticommutator_residual(n, &f, x)?);
    }
    Ok(worst)
}

fn coboundary_test_functions(
    dim: usize,
    vars: &std::sync::Arc<crate::expr::VarSet>,
) -> Vec<crate::expr::Expression> {
    use crate::expr::Expression;
    // sum of squares, and a mixed cubic-ish polynomial
    let mut f1 = Expression::zero(vars);
    let mut f2 = Expression::number(1.0, vars);
    for i in 0..dim {
        let xi = Expression::variable(i, vars);
        f1 = Expression::sum(&f1, &Expression::product(&xi, &xi));
        let xj = Expression::variable((i + 1) % dim, vars);
        let mixed = Expression::product(&xi, &xj).scaled(0.5 + i as f64 * 0.25);
        f2 = Expression::sum(&f2, &mixed);
        f2 = Expression::sum(&f2, &xi.scaled(-0.3));
    }
    vec![f1, f2]
}

fn margins_push_det(rec: &mut PointRecord, n_mat: &Mat) {
    rec.margins.push(MarginRecord {
        name: "n_nondegeneracy",
        value: n_mat.det().abs(),
        floor: tol::DET_FLOOR_N,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expression, VarSet};
    use std::sync::Arc;

    fn flat(vars: &Arc<VarSet>, dim: usize) -> ConnectionCoefficients {
        ConnectionCoefficients::flat(dim, vars)
    }

    fn so3(vars: &Arc<VarSet>) -> BivectorField {
        let e = |s: &str| Expression::parse(s, vars).unwrap();
        BivectorField::from_upper(
            3,
            vars,
            &[(0, 1, e("x3")), (0, 2, e("-x2")), (1, 2, e("x1"))],
        )
        .unwrap()
    }

    #[test]
    fn gauss_legendre_rule_invariants() {
        for n in [1, 2, 4, 8, 16, 24] {
            let rule = QuadratureRule::gauss_legendre(n);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "n={n}: weight sum {sum}");
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            // exactness up to degree 2n-1 on [0, 1]
            for k in 0..2 * n {
                let got: f64 = rule
                    .nodes()
                    .iter()
                    .zip(rule.weights())
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (got - exact).abs() < 1e-13,
                    "n={n}, k={k}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn zero_bivector_realizes_canonical_form() {
        for dim in 1..=3 {
            let vars = VarSet::base(dim);
            let pi = BivectorField::zero(dim, &vars);
            let p0 = CotangentPoint::new(vec![0.2; dim], vec![0.3; dim]).unwrap();
            let w =
                realized_two_form(&pi, &flat(&vars, dim), &p0, &RealizeOpts::default()).unwrap();
            assert!(w.mat.sub(&omega_can(dim)).max_abs() < 1e-15, "dim {dim}");
        }
    }

    #[test]
    fn constant_bivector_realizes_shear_form() {
        // oracle: J_t = [[I, tP], [0, I]] gives w = [[0, I], [-I, -P]]
        let vars = VarSet::base(2);
        let e = Expression::number(0.8, &vars);
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e)]).unwrap();
        let p0 = CotangentPoint::new(vec![0.5, -0.3], vec![0.2, 0.7]).unwrap();
        let w = realized_two_form(&pi, &flat(&vars, 2), &p0, &RealizeOpts::default()).unwrap();
        let mut expected = omega_can(2);
        expected.set(2, 3, -0.8);
        expected.set(3, 2, 0.8);
        assert!(w.mat.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn realization_bivector_inverts_the_form() {
        let w = TwoFormMatrix {
            point: vec![0.0; 4],
            mat: omega_can(2),
        };
        let k = realization_bivector(&w, 1e-12).unwrap();
        let mut expected = Mat::zeros(4, 4);
        expected.set(0, 2, -1.0);
        expected.set(1, 3, -1.0);
        expected.set(2, 0, 1.0);
        expected.set(3, 1, 1.0);
        assert!(k.sub(&expected).max_abs() < 1e-15);
        assert!(k.matmul(&w.mat).sub(&Mat::identity(4)).max_abs() < 1e-15);

        // scaling: bivector of 2w is half the bivector of w
        let w2 = TwoFormMatrix {
            point: vec![0.0; 4],
            mat: w.mat.scale(2.0),
        };
        let k2 = realization_bivector(&w2, 1e-12).unwrap();
        assert!(k2.sub(&k.scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn shear_form_bivector_blocks() {
        // w = [[0, I], [-I, -P]] inverts to [[-P, -I], [I, 0]]
        let vars = VarSet::base(2);
        let e = Expression::number(1.3, &vars);
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e)]).unwrap();
        let p0 = CotangentPoint::new(vec![0.0, 0.0], vec![0.4, -0.2]).unwrap();
        let w = realized_two_form(&pi, &flat(&vars, 2), &p0, &RealizeOpts::default()).unwrap();
        let k = realization_bivector(&w, 1e-12).unwrap();
        let p = pi.matrix(&p0.x).unwrap();
        assert!(k.block(0, 0, 2).sub(&p.scale(-1.0)).max_abs() < 1e-12);
        assert!(k.matmul(&w.mat).sub(&Mat::identity(4)).max_abs() < 1e-12);
        // the bracket matrix carries the input bivector in its base block
        let bracket = induced_poisson_matrix(&w, 1e-12).unwrap();
        assert!(bracket.block(0, 0, 2).sub(&p).max_abs() < 1e-12);
    }

    #[test]
    fn so3_self_convergence_and_realization() {
        let vars = VarSet::base(3);
        let pi = so3(&vars);
        let conn = flat(&vars, 3);
        let p0 = CotangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.1, 0.0]).unwrap();
        let opts = RealizeOpts::default();

        let conv = quadrature_self_convergence(&pi, &conn, None, &p0, &opts).unwrap();
        assert!(
            conv < tol::TOL_QUAD_SELF_CONVERGENCE,
            "node doubling moved entries by {conv}"
        );

        // tighter solve with more nodes as an independent reference
        let mut fine = opts;
        fine.quad_nodes = 32;
        fine.flow.rtol = 1e-12;
        fine.flow.atol = 1e-14;
        let w = realized_two_form(&pi, &conn, &p0, &opts).unwrap();
        let wf = realized_two_form(&pi, &conn, &p0, &fine).unwrap();
        assert!(w.mat.sub(&wf.mat).max_abs() < 1e-8);

        let bracket = induced_poisson_matrix(&w, opts.det_floor).unwrap();
        let p = pi.matrix(&p0.x).unwrap();
        assert!(bracket.block(0, 0, 3).sub(&p).max_abs() < tol::TOL_REALIZATION);
    }

    #[test]
    fn twisted_form_with_identity_twist_matches_plain() {
        let vars = VarSet::base(3);
        let pi = so3(&vars);
        let conn = flat(&vars, 3);
        let n = OneOneTensorField::identity(3, &vars);
        let p0 = CotangentPoint::new(vec![0.9, 0.1, -0.2], vec![0.05, 0.1, 0.0]).unwrap();
        let opts = RealizeOpts::default();
        let plain = realized_two_form(&pi, &conn, &p0, &opts).unwrap();
        let twisted = realized_two_form_twisted(&pi, &conn, &n, &p0, &opts).unwrap();
        assert!(plain.mat.sub(&twisted.mat).max_abs() < 1e-13);
    }

    #[test]
    fn twisted_form_zero_bivector_is_single_congruence() {
        // identity flow: the integral collapses to one pullback of the
        // canonical form along the constant fiberwise map
        let vars = VarSet::base(2);
        let pi = BivectorField::zero(2, &vars);
        let conn = flat(&vars, 2);
        let nmat = Mat::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]);
        let n = OneOneTensorField::constant(&nmat, &vars);
        let p0 = CotangentPoint::new(vec![0.3, 0.4], vec![0.6, -0.1]).unwrap();
        let twisted =
            realized_two_form_twisted(&pi, &conn, &n, &p0, &RealizeOpts::default()).unwrap();
        let dg = fiberwise_transpose_map_jacobian(&n, &p0, true).unwrap();
        let oracle = pullback_2form(&dg, &omega_can(2));
        assert!(twisted.mat.sub(&oracle).max_abs() < 1e-14);
    }

    #[test]
    fn singular_twist_is_rejected() {
        let vars = VarSet::base(2);
        let pi = BivectorField::zero(2, &vars);
        let conn = flat(&vars, 2);
        let n = OneOneTensorField::constant(&Mat::zeros(2, 2), &vars);
        let p0 = CotangentPoint::new(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap();
        let err =
            realized_two_form_twisted(&pi, &conn, &n, &p0, &RealizeOpts::default()).unwrap_err();
        assert!(matches!(err, RealizeError::SingularTensor { .. }));
    }

    #[test]
    fn conformal_pn_pair_twisted_realization() {
        // pi canonical on R^2, N = a(x) Id is a genuine Poisson-Nijenhuis
        // pair; the twisted form must realize pi_N = a pi, and the two
        // twisted quadratures must agree.
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("1"))]).unwrap();
        let a = "1 + 0.3*x1 + 0.2*x2^2";
        let n = OneOneTensorField::from_components(2, vec![e(a), e("0"), e("0"), e(a)]).unwrap();
        let conn = flat(&vars, 2);
        let p0 = CotangentPoint::new(vec![0.2, -0.3], vec![0.15, 0.1]).unwrap();
        let opts = RealizeOpts::default();

        let twisted = realized_two_form_twisted(&pi, &conn, &n, &p0, &opts).unwrap();
        let pet = realized_two_form_twisted_via_lift(&pi, &conn, &n, &p0, &opts).unwrap();
        let agreement = twisted.mat.sub(&pet.mat).max_abs();
        assert!(
            agreement < tol::TOL_TWISTED_AGREEMENT,
            "variant agreement {agreement}"
        );

        let bracket = induced_poisson_matrix(&twisted, opts.det_floor).unwrap();
        let pn = crate::nijenhuis::PnStructure::new(pi, n).unwrap();
        let expected = pn.pi_n_matrix(&p0.x).unwrap();
        let res = bracket.block(0, 0, 2).sub(&expected).max_abs();
        assert!(
            res < tol::TOL_REALIZATION,
            "twisted realization residual {res}"
        );
    }

    #[test]
    fn closedness_by_differences_and_by_second_variation_agree() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("1 + 0.4*x1*x2"))]).unwrap();
        let conn = flat(&vars, 2);
        let p0 = CotangentPoint::new(vec![0.3, 0.2], vec![0.1, -0.2]).unwrap();
        let opts = RealizeOpts::default();

        let fd = RealizedForm::new(&pi, &conn, None, opts)
            .unwrap()
            .closedness_residual(&p0)
            .unwrap();
        let sv = closedness_residual_second_variation(&pi, &conn, &p0, &opts).unwrap();
        assert!(fd < tol::TOL_CLOSED_FD, "fd closedness {fd}");
        assert!(sv < 1e-9, "second-variation closedness {sv}");
    }

    #[test]
    fn verify_realization_passes_on_so3_and_locates_non_poisson_input() {
        let vars = VarSet::base(3);
        let conn = flat(&vars, 3);
        let samples: Vec<CotangentPoint> = (0..3)
            .map(|i| {
                let mut rng = crate::rng::Rng::new(500 + i);
                CotangentPoint::new(
                    (0..3).map(|_| rng.uniform(-0.5, 0.5)).collect(),
                    rng.in_ball(3, 0.2),
                )
                .unwrap()
            })
            .collect();
        let report = verify_realization(&so3(&vars), &conn, &samples, &RealizeOpts::default());
        assert!(
            report.passed(),
            "so3 verify failed: {:#?}",
            report.summaries
        );

        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let bad = BivectorField::from_upper(3, &vars, &[(0, 1, e("x1")), (0, 2, e("1"))]).unwrap();
        let report = verify_realization(&bad, &conn, &samples, &RealizeOpts::default());
        assert!(!report.passed());
        let (p, c) = report.first_failure().unwrap();
        assert_eq!(c.name, "jacobiator");
        assert!(p.point.x.len() == 3);
    }

    #[test]
    fn verify_realization_pn_passes_on_conformal_pair() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("1"))]).unwrap();
        let a = "1 + 0.25*x1 - 0.1*x2";
        let n = OneOneTensorField::from_components(2, vec![e(a), e("0"), e("0"), e(a)]).unwrap();
        let conn = flat(&vars, 2);
        let samples = vec![
            CotangentPoint::new(vec![0.1, 0.2], vec![0.1, -0.05]).unwrap(),
            CotangentPoint::new(vec![-0.2, 0.3], vec![0.0, 0.12]).unwrap(),
        ];
        let report = verify_realization_pn(&pi, &n, &conn, &samples, &RealizeOpts::default());
        assert!(report.passed(), "pn verify failed: {:#?}", report.summaries);
    }

    #[test]
    fn outside_u_points_are_flagged_not_fatal() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("exp(5*x1)"))]).unwrap();
        let conn = flat(&vars, 2);
        let good = CotangentPoint::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let bad = CotangentPoint::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        let report = verify_realization(&pi, &conn, &[good, bad], &RealizeOpts::default());
        assert_eq!(report.points_inside, 1);
        assert!(!report.points[1].inside_u);
        assert!(report.points[1].failure.is_some());
    }
}
