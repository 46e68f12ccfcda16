//! Holomorphic Poisson structures on a chart: splitting into real bivectors,
//! the realized pair of two-forms, the realized complex structure, the
//! holomorphic two-form, and the holomorphic verification suite.
//!
//! A holomorphic bivector `pi = sum_{j<k} f_jk dz_j ^ dz_k` on complex
//! dimension n is handled on the real chart `(x1..xn, y1..yn)` with
//! `z_j = x_j + i y_j` and the constant complex structure `J dx_j = dy_j`.
//! With `dz_j = (dx_j - i dy_j) / 2` each component `f = g + i h` expands to
//!
//! ```text
//! 4 Re(f dz_j ^ dz_k) =  g (xx - yy) + h (xy + yx)
//! 4 Im(f dz_j ^ dz_k) =  h (xx - yy) - g (xy + yx)
//! ```
//!
//! where `xx` abbreviates `dx_j ^ dx_k` and so on. The expansion is locked
//! by the sharp-composition check `pi_R = pi_I . tJ` below.

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expression, VarSet};
use crate::geometry::{
    jacobiator, omega_can, pullback_2form, BivectorField, MatJet, OneOneTensorField, TwoFormMatrix,
};
use crate::linalg::Mat;
use crate::nijenhuis::fiberwise_transpose_map_jacobian;
use crate::realization::{
    induced_poisson_matrix, realized_form_with_congruence, realized_two_form_spray,
    realized_two_form_twisted_spray, RealizeError, RealizeOpts,
};
use crate::report::{CheckRecord, MarginRecord, PointRecord, VerificationReport};
use crate::spray::{
    a_geodesic_residuals, build_spray, homogeneity_residual, ConnectionCoefficients,
    CotangentPoint, Spray,
};
use crate::tolerances as tol;

/// One holomorphic component `f_jk dz_j ^ dz_k` given by real and imaginary
/// part expressions in the real chart variables.
#[derive(Clone, Debug)]
pub struct HolComponent {
    pub j: usize,
    pub k: usize,
    pub re: Expression,
    pub im: Expression,
}

/// A holomorphic Poisson bivector in chart data.
#[derive(Clone, Debug)]
pub struct HolomorphicPoissonSpec {
    complex_dim: usize,
    vars: Arc<VarSet>,
    components: Vec<HolComponent>,
}

#[derive(Debug, Error)]
pub enum HolError {
    #[error(
        "Cauchy-Riemann residual {residual:e} of component ({j}, {k}) at {point:?} \
         exceeds {tolerance:e}"
    )]
    CauchyRiemann {
        j: usize,
        k: usize,
        point: Vec<f64>,
        residual: f64,
        tolerance: f64,
    },
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Build(String),
}

impl HolomorphicPoissonSpec {
    /// `components` are `(j, k, re, im)` with 0-based `j < k` over complex
    /// indices, parsed against [`VarSet::holomorphic`].
    pub fn new(
        complex_dim: usize,
        components: Vec<HolComponent>,
    ) -> Result<HolomorphicPoissonSpec, String> {
        let vars = VarSet::holomorphic(complex_dim);
        for c in &components {
            if c.j >= c.k || c.k >= complex_dim {
                return Err(format!(
                    "holomorphic component index ({}, {}) outside strict upper triangle",
                    c.j, c.k
                ));
            }
            if c.re.vars() != &vars || c.im.vars() != &vars {
                return Err("component parsed against a different chart".to_string());
            }
        }
        Ok(HolomorphicPoissonSpec {
            complex_dim,
            vars,
            components,
        })
    }

    pub fn complex_dim(&self) -> usize {
        self.complex_dim
    }

    /// Real chart dimension, `2 n`.
    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    /// Worst Cauchy-Riemann residual of all components at `point`.
    pub fn cauchy_riemann_residual(&self, point: &[f64]) -> Result<f64, EvalError> {
        let n = self.complex_dim;
        let mut worst = 0.0f64;
        for c in &self.components {
            let g = c.re.eval_jet(point, 1)?;
            let h = c.im.eval_jet(point, 1)?;
            for l in 0..n {
                worst = worst.max((g.d1(l) - h.d1(n + l)).abs());
                worst = worst.max((g.d1(n + l) + h.d1(l)).abs());
            }
        }
        Ok(worst)
    }
}

/// The standard constant complex structure `J dx_j = dy_j` on the real
/// chart, as a (1,1)-tensor field.
pub fn standard_complex_structure(complex_dim: usize, vars: &Arc<VarSet>) -> OneOneTensorField {
    let n = complex_dim;
    let z = Mat::zeros(n, n);
    let id = Mat::identity(n);
    OneOneTensorField::constant(&Mat::from_blocks(&z, &id.scale(-1.0), &id, &z), vars)
}

/// Matrix of the standard complex structure.
pub fn standard_j_matrix(complex_dim: usize) -> Mat {
    let n = complex_dim;
    let z = Mat::zeros(n, n);
    let id = Mat::identity(n);
    Mat::from_blocks(&z, &id.scale(-1.0), &id, &z)
}

/// The real and imaginary bivectors plus the chart complex structure.
#[derive(Clone, Debug)]
pub struct HolomorphicSplit {
    pub pi_r: BivectorField,
    pub pi_i: BivectorField,
    pub j: OneOneTensorField,
    pub complex_dim: usize,
}

/// Split a holomorphic bivector into its real parts, rejecting the spec if
/// any component fails the Cauchy-Riemann equations at a supplied sample
/// point.
pub fn split_holomorphic(
    spec: &HolomorphicPoissonSpec,
    cr_check_points: &[Vec<f64>],
) -> Result<HolomorphicSplit, HolError> {
    let n = spec.complex_dim;
    for p in cr_check_points {
        for c in &spec.components {
            let g = c.re.eval_jet(p, 1)?;
            let h = c.im.eval_jet(p, 1)?;
            let mut worst = 0.0f64;
            for l in 0..n {
                worst = worst.max((g.d1(l) - h.d1(n + l)).abs());
                worst = worst.max((g.d1(n + l) + h.d1(l)).abs());
            }
            if worst > tol::TOL_CAUCHY_RIEMANN {
                return Err(HolError::CauchyRiemann {
                    j: c.j,
                    k: c.k,
                    point: p.clone(),
                    residual: worst,
                    tolerance: tol::TOL_CAUCHY_RIEMANN,
                });
            }
        }
    }
    Ok(split_unchecked(spec))
}

/// The quarter-coefficient wedge expansion, without holomorphicity checks.
pub fn split_unchecked(spec: &HolomorphicPoissonSpec) -> HolomorphicSplit {
    let n = spec.complex_dim;
    let vars = &spec.vars;
    let mut r_entries: Vec<(usize, usize, Expression)> = Vec::new();
    let mut i_entries: Vec<(usize, usize, Expression)> = Vec::new();
    for c in &spec.components {
        let (j, k) = (c.j, c.k);
        let g4 = c.re.scaled(0.25);
        let h4 = c.im.scaled(0.25);
        // dx_j ^ dx_k and dy_j ^ dy_k
        r_entries.push((j, k, g4.clone()));
        r_entries.push((n + j, n + k, g4.negated()));
        i_entries.push((j, k, h4.clone()));
        i_entries.push((n + j, n + k, h4.negated()));
        // dx_j ^ dy_k and (upper-triangle form of) dy_j ^ dx_k
        r_entries.push((j, n + k, h4.clone()));
        r_entries.push((k, n + j, h4.negated()));
        i_entries.push((j, n + k, g4.negated()));
        i_entries.push((k, n + j, g4.clone()));
    }
    let pi_r = BivectorField::from_upper(2 * n, vars, &merge_entries(2 * n, r_entries, vars))
        .expect("valid upper triangle");
    let pi_i = BivectorField::from_upper(2 * n, vars, &merge_entries(2 * n, i_entries, vars))
        .expect("valid upper triangle");
    HolomorphicSplit {
        pi_r,
        pi_i,
        j: standard_complex_structure(n, vars),
        complex_dim: n,
    }
}

fn merge_entries(
    dim: usize,
    entries: Vec<(usize, usize, Expression)>,
    vars: &Arc<VarSet>,
) -> Vec<(usize, usize, Expression)> {
    let mut slots: Vec<Option<Expression>> = vec![None; dim * dim];
    for (i, j, e) in entries {
        let idx = i * dim + j;
        slots[idx] = Some(match slots[idx].take() {
            None => e,
            Some(prev) => Expression::sum(&prev, &e),
        });
    }
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            if let Some(e) = slots[i * dim + j].take() {
                out.push((i, j, e));
            }
        }
    }
    let _ = vars;
    out
}

/// Sharp-composition residual `max |(P_R - P_I tJ)_ij|` at `x`; locks the
/// wedge expansion conventions.
pub fn split_sharp_residual(split: &HolomorphicSplit, x: &[f64]) -> Result<f64, EvalError> {
    let pr = split.pi_r.matrix(x)?;
    let pi = split.pi_i.matrix(x)?;
    let jt = standard_j_matrix(split.complex_dim).transpose();
    Ok(pr.sub(&pi.matmul(&jt)).max_abs())
}

/// The realized pair `(w_R, w_I)` at `p0`: `w_I` is the plain realized form
/// of the spray of `pi_I`, and `w_R` is minus the quadrature of pullbacks of
/// the canonical form through the fiberwise `tJ` map composed after the
/// flow.
pub fn build_underline_forms(
    split: &HolomorphicSplit,
    conn: &ConnectionCoefficients,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<(TwoFormMatrix, TwoFormMatrix), RealizeError> {
    let spray = build_spray(split.pi_i.clone(), conn.clone()).map_err(RealizeError::Build)?;
    build_underline_forms_spray(split, &spray, p0, opts)
}

pub fn build_underline_forms_spray(
    split: &HolomorphicSplit,
    spray: &Spray,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<(TwoFormMatrix, TwoFormMatrix), RealizeError> {
    let wi = realized_two_form_spray(spray, p0, opts)?;
    let omega = omega_can(split.pi_i.dim());
    let wr_mat = realized_form_with_congruence(spray, p0, opts, |z| {
        let df = fiberwise_transpose_map_jacobian(&split.j, z, false)?;
        Ok(pullback_2form(&df, &omega))
    })?
    .scale(-1.0);
    Ok((
        TwoFormMatrix {
            point: p0.flat_coords(),
            mat: wr_mat,
        },
        wi,
    ))
}

/// The realized complex structure `(w_R flat)^{-1} (w_I flat)`.
pub fn build_underline_j(wr: &TwoFormMatrix, wi: &TwoFormMatrix) -> Result<Mat, RealizeError> {
    let det = wr.mat.det();
    let inv = wr.mat.inverse().ok_or(RealizeError::SingularForm {
        det: det.abs(),
        floor: 0.0,
    })?;
    Ok(inv.matmul(&wi.mat))
}

/// A complex-valued 2-form at a point.
#[derive(Clone, Debug)]
pub struct ComplexTwoForm {
    pub point: Vec<f64>,
    pub re: Mat,
    pub im: Mat,
}

/// The holomorphic two-form `(w_R - i w_I) / 4`.
pub fn build_holomorphic_omega(wr: &TwoFormMatrix, wi: &TwoFormMatrix) -> ComplexTwoForm {
    ComplexTwoForm {
        point: wr.point.clone(),
        re: wr.mat.scale(0.25),
        im: wi.mat.scale(-0.25),
    }
}

/// Type-(2,0) residual of the holomorphic form against a complex structure:
/// the defining relations are `tJ Re = -Im` and `tJ Im = Re`.
pub fn type_20_residual(omega: &ComplexTwoForm, j_real: &Mat) -> f64 {
    let jt = j_real.transpose();
    let r1 = jt.matmul(&omega.re).add(&omega.im).max_abs();
    let r2 = jt.matmul(&omega.im).sub(&omega.re).max_abs();
    r1.max(r2)
}

/// The holomorphic Poisson bivector assembled from the realization: the
/// type-(2,0) inverse of the holomorphic two-form, normalized so that the
/// coordinate-bracket matrices of `w_R` and `w_I` are `4 Re` and `-4 Im`
/// respectively. Only the real part of the holomorphic form and the complex
/// structure enter the assembly.
pub fn holomorphic_bivector(
    omega: &ComplexTwoForm,
    j_real: &Mat,
) -> Result<(Mat, Mat), RealizeError> {
    let a_inv = omega.re.inverse().ok_or(RealizeError::SingularForm {
        det: omega.re.det().abs(),
        floor: 0.0,
    })?;
    let re = a_inv.scale(-1.0 / 16.0);
    let im = j_real.matmul(&a_inv).scale(-1.0 / 16.0);
    Ok((re, im))
}

/// Nijenhuis torsion of the realized complex structure, with chart
/// derivatives of the field taken by Richardson-extrapolated central
/// differences, evaluated on coordinate frame pairs.
pub fn torsion_of_realized_j(
    mut j_field: impl FnMut(&[f64]) -> Result<Mat, RealizeError>,
    z0: &[f64],
    h: f64,
) -> Result<f64, RealizeError> {
    let m = z0.len();
    let value = j_field(z0)?;
    let mut dm = Vec::with_capacity(m);
    for dir in 0..m {
        let mut diff = |hh: f64| -> Result<Mat, RealizeError> {
            let mut zp = z0.to_vec();
            zp[dir] += hh;
            let mut zm = z0.to_vec();
            zm[dir] -= hh;
            Ok(j_field(&zp)?.sub(&j_field(&zm)?).scale(0.5 / hh))
        };
        let coarse = diff(h)?;
        let fine = diff(h / 2.0)?;
        dm.push(fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0)));
    }
    let jet = MatJet { m: value, dm };
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            let t = crate::geometry::nijenhuis_torsion_jets(
                &jet,
                &crate::geometry::VecJet::frame(a, m),
                &crate::geometry::VecJet::frame(b, m),
            );
            worst = worst.max(crate::linalg::max_abs(&t));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

fn outside(index: usize, point: CotangentPoint, reason: String) -> PointRecord {
    PointRecord {
        index,
        point,
        inside_u: false,
        failure: Some(reason),
        checks: Vec::new(),
        margins: Vec::new(),
    }
}

/// Holomorphic realization suite. Per sample point it checks
/// holomorphicity of the input, the split conventions, Jacobi identities of
/// both real parts, the realized pair (antisymmetry, cross-path agreement,
/// realization of `pi_I` and `pi_R`, closedness, Lagrangian zero section),
/// the realized complex structure (square, base block, torsion), the
/// type-(2,0) identity, and the factor-4 bookkeeping.
pub fn verify_holomorphic(
    spec: &HolomorphicPoissonSpec,
    conn: &ConnectionCoefficients,
    samples: &[CotangentPoint],
    opts: &RealizeOpts,
) -> VerificationReport {
    let split = split_unchecked(spec);
    let m = spec.real_dim();
    let spray = match build_spray(split.pi_i.clone(), conn.clone()) {
        Ok(s) => s,
        Err(e) => {
            return VerificationReport::from_points(
                "holomorphic",
                samples
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(i, p)| outside(i, p, e.clone()))
                    .collect(),
            )
        }
    };
    let jmat = standard_j_matrix(spec.complex_dim);
    let mut points = Vec::new();

    for (index, p0) in samples.iter().enumerate() {
        let mut checks = Vec::new();
        let mut margins = Vec::new();

        macro_rules! try_or_flag {
            ($expr:expr) => {
                match $expr {
                    Ok(v) => v,
                    Err(e) => {
                        points.push(outside(index, p0.clone(), e.to_string()));
                        continue;
                    }
                }
            };
        }

        let cr = try_or_flag!(spec.cauchy_riemann_residual(&p0.x));
        checks.push(CheckRecord {
            name: "cauchy_riemann",
            residual: cr,
            tolerance: tol::TOL_CAUCHY_RIEMANN,
        });
        let sharp = try_or_flag!(split_sharp_residual(&split, &p0.x));
        checks.push(CheckRecord {
            name: "split_sharp",
            residual: sharp,
            tolerance: tol::TOL_PN_COMPAT,
        });
        checks.push(CheckRecord {
            name: "jacobiator_pi_i",
            residual: try_or_flag!(jacobiator(&split.pi_i, &p0.x)).max_abs(),
            tolerance: tol::TOL_JACOBI,
        });
        checks.push(CheckRecord {
            name: "jacobiator_pi_r",
            residual: try_or_flag!(jacobiator(&split.pi_r, &p0.x)).max_abs(),
            tolerance: tol::TOL_JACOBI,
        });

        // (pi_I, J) is a Poisson-Nijenhuis pair
        let cov = crate::nijenhuis::trial_covector_jets(
            m,
            spec.vars(),
            &p0.x,
            3,
            crate::rng::seed_from_coords(4040, &p0.x),
        );
        let vecs = crate::nijenhuis::trial_vector_jets(
            m,
            spec.vars(),
            &p0.x,
            3,
            crate::rng::seed_from_coords(5050, &p0.x),
        );
        let pn = try_or_flag!(crate::nijenhuis::pn_compatibility(
            &split.pi_i,
            &split.j,
            &p0.x,
            &cov,
            &vecs
        ));
        checks.push(CheckRecord {
            name: "pn_matrix_compat",
            residual: pn.matrix_residual,
            tolerance: tol::TOL_PN_COMPAT,
        });
        checks.push(CheckRecord {
            name: "pn_bracket_compat",
            residual: pn.bracket_residual,
            tolerance: tol::TOL_PN_COMPAT,
        });
        checks.push(CheckRecord {
            name: "j_chart_torsion",
            residual: pn.torsion_residual,
            tolerance: tol::TOL_PN_COMPAT,
        });
        checks.push(CheckRecord {
            name: "coboundary_anticommutator",
            residual: try_or_flag!(crate::realization::coboundary_anticommutator_worst(
                &split.j,
                spec.vars(),
                &p0.x
            )),
            tolerance: tol::TOL_COBOUNDARY,
        });

        let (wr, wi) = try_or_flag!(build_underline_forms_spray(&split, &spray, p0, opts));
        checks.push(CheckRecord {
            name: "form_antisymmetry",
            residual: wr.antisymmetry_defect().max(wi.antisymmetry_defect()),
            tolerance: tol::TOL_ZERO_STRUCTURE,
        });
        margins.push(MarginRecord {
            name: "nondegeneracy_wr",
            value: wr.nondegeneracy_margin(),
            floor: tol::NONDEGENERACY_FLOOR,
        });
        margins.push(MarginRecord {
            name: "nondegeneracy_wi",
            value: wi.nondegeneracy_margin(),
            floor: tol::NONDEGENERACY_FLOOR,
        });

        // cross-path: w_R through the twisted quadrature with N = J
        let wr_twisted = try_or_flag!(realized_two_form_twisted_spray(&spray, &split.j, p0, opts));
        checks.push(CheckRecord {
            name: "wr_cross_path",
            residual: wr.mat.sub(&wr_twisted.mat).max_abs(),
            tolerance: tol::TOL_WR_CROSS_PATH,
        });

        // realization of both bivectors
        let pi_i_mat = try_or_flag!(split.pi_i.matrix(&p0.x));
        let pi_r_mat = try_or_flag!(split.pi_r.matrix(&p0.x));
        let bi = try_or_flag!(induced_poisson_matrix(&wi, opts.det_floor));
        let br = try_or_flag!(induced_poisson_matrix(&wr, opts.det_floor));
        checks.push(CheckRecord {
            name: "realization_pi_i",
            residual: bi.block(0, 0, m).sub(&pi_i_mat).max_abs(),
            tolerance: tol::TOL_REALIZATION,
        });
        checks.push(CheckRecord {
            name: "realization_pi_r",
            residual: br.block(0, 0, m).sub(&pi_r_mat).max_abs(),
            tolerance: tol::TOL_REALIZATION,
        });

        // realized complex structure
        let uj = try_or_flag!(build_underline_j(&wr, &wi));
        checks.push(CheckRecord {
            name: "j_squared",
            residual: uj.matmul(&uj).add(&Mat::identity(2 * m)).max_abs(),
            tolerance: tol::TOL_ALMOST_COMPLEX,
        });

        let omega = build_holomorphic_omega(&wr, &wi);
        checks.push(CheckRecord {
            name: "type_20",
            residual: type_20_residual(&omega, &uj),
            tolerance: tol::TOL_TYPE_20,
        });

        let (pre, pim) = try_or_flag!(holomorphic_bivector(&omega, &uj));
        checks.push(CheckRecord {
            name: "factor4_re",
            residual: br.sub(&pre.scale(4.0)).max_abs(),
            tolerance: tol::TOL_FACTOR4,
        });
        checks.push(CheckRecord {
            name: "factor4_im",
            residual: bi.add(&pim.scale(4.0)).max_abs(),
            tolerance: tol::TOL_FACTOR4,
        });
        // the projected holomorphic bivector reproduces the input parts
        checks.push(CheckRecord {
            name: "pn_map_re",
            residual: pre.scale(4.0).block(0, 0, m).sub(&pi_r_mat).max_abs(),
            tolerance: tol::TOL_REALIZATION,
        });
        checks.push(CheckRecord {
            name: "pn_map_im",
            residual: pim.scale(-4.0).block(0, 0, m).sub(&pi_i_mat).max_abs(),
            tolerance: tol::TOL_REALIZATION,
        });

        // closedness of both forms by the configured differences
        let closed_i = try_or_flag!(closedness_of(
            |z| {
                let p = CotangentPoint::from_flat(z);
                Ok(realized_two_form_spray(&spray, &p, opts)?.mat)
            },
            p0,
            opts
        ));
        let closed_r = try_or_flag!(closedness_of(
            |z| {
                let p = CotangentPoint::from_flat(z);
                Ok(build_underline_forms_spray(&split, &spray, &p, opts)?.0.mat)
            },
            p0,
            opts
        ));
        checks.push(CheckRecord {
            name: "closedness_wi",
            residual: closed_i,
            tolerance: tol::TOL_CLOSED_FD,
        });
        checks.push(CheckRecord {
            name: "closedness_wr",
            residual: closed_r,
            tolerance: tol::TOL_CLOSED_FD,
        });

        // fiber-zero behaviour: Lagrangian blocks and the base block of J
        let zero_fiber = CotangentPoint {
            x: p0.x.clone(),
            lambda: vec![0.0; m],
        };
        let (wr0, wi0) = try_or_flag!(build_underline_forms_spray(
            &split,
            &spray,
            &zero_fiber,
            opts
        ));
        checks.push(CheckRecord {
            name: "lagrangian_zero_section",
            residual: wr0
                .mat
                .block(0, 0, m)
                .max_abs()
                .max(wi0.mat.block(0, 0, m).max_abs()),
            tolerance: tol::TOL_LAGRANGIAN,
        });
        let uj0 = try_or_flag!(build_underline_j(&wr0, &wi0));
        checks.push(CheckRecord {
            name: "j_base_block",
            residual: uj0.block(0, 0, m).sub(&jmat).max_abs(),
            tolerance: tol::TOL_J_BASE_BLOCK,
        });

        // torsion of the realized complex structure over the chart
        let torsion = try_or_flag!(torsion_of_realized_j(
            |z| {
                let p = CotangentPoint::from_flat(z);
                let (wr, wi) = build_underline_forms_spray(&split, &spray, &p, opts)?;
                build_underline_j(&wr, &wi)
            },
            &p0.flat_coords(),
            1e-3
        ));
        checks.push(CheckRecord {
            name: "j_torsion",
            residual: torsion,
            tolerance: tol::TOL_TORSION_FD,
        });

        // flow identities of the driving spray
        match homogeneity_residual(&spray, p0, 1.0, 0.5, &opts.flow) {
            Ok(r) => checks.push(CheckRecord {
                name: "homogeneity",
                residual: r,
                tolerance: tol::TOL_HOMOGENEITY,
            }),
            Err(f) => {
                points.push(outside(index, p0.clone(), f.to_string()));
                continue;
            }
        }
        match a_geodesic_residuals(&spray, p0, 20, &opts.flow) {
            Ok((_, fd)) => checks.push(CheckRecord {
                name: "a_geodesic",
                residual: fd,
                tolerance: tol::TOL_A_GEODESIC,
            }),
            Err(f) => {
                points.push(outside(index, p0.clone(), f.to_string()));
                continue;
            }
        }

        points.push(PointRecord {
            index,
            point: p0.clone(),
            inside_u: true,
            failure: None,
            checks,
            margins,
        });
    }
    VerificationReport::from_points("holomorphic", points)
}

fn closedness_of(
    eval: impl FnMut(&[f64]) -> Result<Mat, RealizeError>,
    p0: &CotangentPoint,
    opts: &RealizeOpts,
) -> Result<f64, RealizeError> {
    let t = crate::geometry::exterior_derivative_2form(eval, &p0.flat_coords(), opts.fd)
        .map_err(|e| e.source)?;
    Ok(t.max_abs())
}
