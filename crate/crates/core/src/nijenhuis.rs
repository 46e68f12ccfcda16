//! Poisson-Nijenhuis machinery: compatibility residuals, the second Poisson
//! structure, complete lifts to the cotangent chart, the twisted Lie-Poisson
//! structure, twisted brackets, and the coboundary of the twisted tangent
//! algebroid.
//!
//! The complete lift is assembled definition-first: the twisted Liouville
//! form `theta_N = lambda_i N^i_j dx^j` is differentiated from jets of `N`,
//! and `N^c` is the solution of the defining pairing against the canonical
//! two-form, normalized so that the identity tensor lifts to the identity.

use std::sync::Arc;

use crate::expr::{EvalError, Expression, VarSet};
use crate::geometry::{
    koszul_bracket_jets, nijenhuis_torsion_jets, omega_can, vf_lie_bracket_jets, BivectorField,
    CovJet, MatJet, OneOneTensorField, VecJet,
};
use crate::linalg::{max_abs, Mat, Tensor3};
use crate::rng::Rng;
use crate::spray::CotangentPoint;

/// A bivector paired with a (1,1)-tensor; the derived second structure is
/// `pi_N = pi . transpose(N)` in component-matrix form.
#[derive(Clone, Debug)]
pub struct PnStructure {
    pub pi: BivectorField,
    pub n: OneOneTensorField,
}

impl PnStructure {
    pub fn new(pi: BivectorField, n: OneOneTensorField) -> Result<PnStructure, String> {
        if pi.dim() != n.dim() {
            return Err(format!(
                "bivector dimension {} does not match tensor dimension {}",
                pi.dim(),
                n.dim()
            ));
        }
        Ok(PnStructure { pi, n })
    }

    /// Component matrix of the second structure at `x`.
    pub fn pi_n_matrix(&self, x: &[f64]) -> Result<Mat, EvalError> {
        Ok(self.pi.matrix(x)?.matmul(&self.n.matrix(x)?.transpose()))
    }

    /// Value and first derivatives of the second structure at `x`.
    pub fn pi_n_jet(&self, x: &[f64]) -> Result<MatJet, EvalError> {
        Ok(pi_n_jet(&self.pi.jet(x)?, &self.n.jet(x)?))
    }

    /// Antisymmetry defect of `pi_N`; zero exactly when the matrix
    /// compatibility `N pi = pi tN` holds at `x`.
    pub fn pi_n_antisymmetry_defect(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.pi_n_matrix(x)?.antisymmetry_defect())
    }
}

/// `pi_N = P tN` with first derivatives by the product rule.
pub fn pi_n_jet(p: &MatJet, n: &MatJet) -> MatJet {
    let nt = n.m.transpose();
    let m = p.m.matmul(&nt);
    let dm =
        p.dm.iter()
            .zip(&n.dm)
            .map(|(dp, dn)| dp.matmul(&nt).add(&p.m.matmul(&dn.transpose())))
            .collect();
    MatJet { m, dm }
}

/// Residuals of the Poisson-Nijenhuis compatibility conditions at a point.
#[derive(Clone, Debug)]
pub struct PnCompatReport {
    /// `max |(N P - P tN)_ij|`
    pub matrix_residual: f64,
    /// worst bracket-condition residual over the supplied trial 1-forms
    pub bracket_residual: f64,
    /// worst Nijenhuis torsion component over the supplied trial fields
    pub torsion_residual: f64,
}

/// Evaluate the compatibility residuals on trial data.
pub fn pn_compatibility(
    pi: &BivectorField,
    n: &OneOneTensorField,
    x: &[f64],
    covector_trials: &[(CovJet, CovJet)],
    vector_trials: &[(VecJet, VecJet)],
) -> Result<PnCompatReport, EvalError> {
    let p = pi.jet(x)?;
    let nj = n.jet(x)?;

    let np = nj.m.matmul(&p.m);
    let pnt = p.m.matmul(&nj.m.transpose());
    let matrix_residual = np.sub(&pnt).max_abs();

    let pn = pi_n_jet(&p, &nj);
    let mut bracket_residual = 0.0f64;
    for (alpha, beta) in covector_trials {
        let lhs = koszul_bracket_jets(&pn, alpha, beta);
        let na = alpha.apply_tensor_transpose(&nj);
        let nb = beta.apply_tensor_transpose(&nj);
        let t1 = koszul_bracket_jets(&p, &na, beta);
        let t2 = koszul_bracket_jets(&p, alpha, &nb);
        let base = koszul_bracket_jets(&p, alpha, beta);
        let dim = lhs.len();
        for i in 0..dim {
            // tN applied to the bracket value
            let mut tn_base = 0.0;
            for k in 0..dim {
                tn_base += nj.m.get(k, i) * base[k];
            }
            let rhs = t1[i] + t2[i] - tn_base;
            bracket_residual = bracket_residual.max((lhs[i] - rhs).abs());
        }
    }

    let mut torsion_residual = 0.0f64;
    for (xv, yv) in vector_trials {
        torsion_residual = torsion_residual.max(max_abs(&nijenhuis_torsion_jets(&nj, xv, yv)));
    }

    Ok(PnCompatReport {
        matrix_residual,
        bracket_residual,
        torsion_residual,
    })
}

/// Twisted bracket `[X, Y]_N = [NX, Y] + [X, NY] - N [X, Y]` of the
/// algebroid `(TM)_N`.
pub fn twisted_bracket_jets(n: &MatJet, x: &VecJet, y: &VecJet) -> Vec<f64> {
    let nx = x.apply_tensor(n);
    let ny = y.apply_tensor(n);
    let t1 = vf_lie_bracket_jets(&nx, y);
    let t2 = vf_lie_bracket_jets(x, &ny);
    let t3 = n.m.matvec(&vf_lie_bracket_jets(x, y));
    (0..x.v.len()).map(|i| t1[i] + t2[i] - t3[i]).collect()
}

pub fn twisted_bracket(
    n: &OneOneTensorField,
    xf: &crate::geometry::VectorField,
    yf: &crate::geometry::VectorField,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    Ok(twisted_bracket_jets(&n.jet(x)?, &xf.jet(x)?, &yf.jet(x)?))
}

/// Complete lift `N^c` of a (1,1)-tensor to the cotangent chart at `p`,
/// computed from the exterior derivative of the twisted Liouville form.
pub fn complete_lift(n: &OneOneTensorField, p: &CotangentPoint) -> Result<Mat, EvalError> {
    let dim = n.dim();
    let nj = n.jet(&p.x)?;
    let m = 2 * dim;
    // theta components on the cotangent chart: theta_{x_j} = lambda_i N^i_j,
    // theta_{lambda} = 0. Partials assembled from jets of N; the lambda
    // dependence is linear and differentiates exactly.
    let mut dtheta = Mat::zeros(m, m);
    for a in 0..m {
        for b in 0..dim {
            // d_a theta_{x_b}
            let v = if a < dim {
                (0..dim)
                    .map(|i| p.lambda[i] * nj.dm[a].get(i, b))
                    .sum::<f64>()
            } else {
                nj.m.get(a - dim, b)
            };
            dtheta.add_to(a, b, v);
            dtheta.add_to(b, a, -v);
        }
    }
    // Pairing normalization: with omega_can = [[0, I], [-I, 0]] the identity
    // tensor must lift to the identity, which pins N^c = omega_can . dtheta.
    Ok(omega_can(dim).matmul(&dtheta))
}

/// Residual of the complete lift against the pullback characterization:
/// the pairing of `N^c` with the canonical form must equal the pullback of
/// the canonical form along the fiberwise map `(x, lambda) -> (x, tN(x) lambda)`,
/// whose differential includes base-derivative terms of `N`.
pub fn complete_lift_fiber_map_residual(
    n: &OneOneTensorField,
    p: &CotangentPoint,
) -> Result<f64, EvalError> {
    let dim = n.dim();
    let nc = complete_lift(n, p)?;
    let lhs = nc.transpose().matmul(&omega_can(dim));
    let df = fiberwise_transpose_map_jacobian(n, p, false)?;
    let rhs = df.transpose().matmul(&omega_can(dim)).matmul(&df);
    Ok(lhs.sub(&rhs).max_abs())
}

/// Jacobian of the fiberwise map `(x, lambda) -> (x, K(x) lambda)` where `K`
/// is `tN` (or its inverse when `invert` is set). The lower-left block
/// carries the base derivatives of `N`.
pub fn fiberwise_transpose_map_jacobian(
    n: &OneOneTensorField,
    p: &CotangentPoint,
    invert: bool,
) -> Result<Mat, EvalError> {
    let dim = n.dim();
    let nj = n.jet(&p.x)?;
    let nt = nj.m.transpose();
    let (k, dk): (Mat, Vec<Mat>) = if invert {
        let kinv = nt.inverse().unwrap_or_else(|| Mat::zeros(dim, dim));
        // d_j K^{-1} = -K^{-1} (d_j K) K^{-1}
        let dk = nj
            .dm
            .iter()
            .map(|dn| kinv.matmul(&dn.transpose()).matmul(&kinv).scale(-1.0))
            .collect();
        (kinv, dk)
    } else {
        (nt.clone(), nj.dm.iter().map(|dn| dn.transpose()).collect())
    };
    let mut jac = Mat::zeros(2 * dim, 2 * dim);
    for i in 0..dim {
        jac.set(i, i, 1.0);
        for j in 0..dim {
            jac.set(dim + i, dim + j, k.get(i, j));
            // d/dx_j of (K lambda)_i
            let mut v = 0.0;
            for l in 0..dim {
                v += dk[j].get(i, l) * p.lambda[l];
            }
            jac.set(dim + i, j, v);
        }
    }
    Ok(jac)
}

/// Twisted Lie-Poisson matrix on the cotangent chart for the algebroid
/// `(TM)_N`, assembled from its defining bracket families:
/// `{l_X, l_Y} = l_{[X,Y]_N}`, `{l_X, p*f} = (NX).f`, `{p*f, p*g} = 0`.
pub fn twisted_lie_poisson(n: &OneOneTensorField, p: &CotangentPoint) -> Result<Mat, EvalError> {
    let dim = n.dim();
    let nj = n.jet(&p.x)?;
    let m = 2 * dim;
    let mut out = Mat::zeros(m, m);
    for i in 0..dim {
        for j in 0..dim {
            // {x^i, lambda_j} = -{lambda_j, x^i} = -N^i_j
            out.set(i, dim + j, -nj.m.get(i, j));
            out.set(dim + j, i, nj.m.get(i, j));
        }
    }
    // {lambda_i, lambda_j} = l_{[e_i, e_j]_N}, through the bracket kernel
    for i in 0..dim {
        for j in i + 1..dim {
            let tb = twisted_bracket_jets(&nj, &VecJet::frame(i, dim), &VecJet::frame(j, dim));
            let v: f64 = (0..dim).map(|k| p.lambda[k] * tb[k]).sum();
            out.set(dim + i, dim + j, v);
            out.set(dim + j, dim + i, -v);
        }
    }
    Ok(out)
}

/// Worst deviation of a candidate twisted Lie-Poisson matrix from its three
/// defining bracket families, evaluated on fiberwise-linear functions of the
/// supplied vector fields and on pullbacks of the supplied base functions.
pub fn twisted_lie_poisson_family_residual(
    n: &OneOneTensorField,
    p: &CotangentPoint,
    matrix: &Mat,
    fields: &[VecJet],
    functions: &[crate::expr::Jet],
) -> Result<f64, EvalError> {
    let dim = n.dim();
    let nj = n.jet(&p.x)?;
    let m = 2 * dim;
    // gradient of l_X on the cotangent chart
    let grad_lin = |x: &VecJet| -> Vec<f64> {
        let mut g = vec![0.0; m];
        for j in 0..dim {
            g[j] = (0..dim).map(|k| p.lambda[k] * x.dv.get(k, j)).sum();
            g[dim + j] = x.v[j];
        }
        g
    };
    let grad_pull = |f: &crate::expr::Jet| -> Vec<f64> {
        let mut g = vec![0.0; m];
        for j in 0..dim {
            g[j] = f.d1(j);
        }
        g
    };
    let bracket = |ga: &[f64], gb: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                s += matrix.get(a, b) * ga[a] * gb[b];
            }
        }
        s
    };
    let mut worst = 0.0f64;
    for (xi, x) in fields.iter().enumerate() {
        let gx = grad_lin(x);
        for y in fields.iter().skip(xi + 1) {
            let tb = twisted_bracket_jets(&nj, x, y);
            let expected: f64 = (0..dim).map(|k| p.lambda[k] * tb[k]).sum();
            worst = worst.max((bracket(&gx, &grad_lin(y)) - expected).abs());
        }
        for f in functions {
            let nx = x.apply_tensor(&nj);
            let expected: f64 = (0..dim).map(|k| nx.v[k] * f.d1(k)).sum();
            worst = worst.max((bracket(&gx, &grad_pull(f)) - expected).abs());
        }
    }
    for (fi, f) in functions.iter().enumerate() {
        for g in functions.iter().skip(fi + 1) {
            worst = worst.max(bracket(&grad_pull(f), &grad_pull(g)).abs());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// coboundary of the twisted tangent algebroid
// ---------------------------------------------------------------------------

/// A 2-form field with full component storage (antisymmetry is the caller's
/// responsibility; only used as coboundary input).
#[derive(Clone, Debug)]
pub struct TwoFormField {
    dim: usize,
    comps: Vec<Expression>,
}

impl TwoFormField {
    pub fn from_components(dim: usize, comps: Vec<Expression>) -> Result<TwoFormField, String> {
        if comps.len() != dim * dim {
            return Err(format!(
                "expected {} components, got {}",
                dim * dim,
                comps.len()
            ));
        }
        Ok(TwoFormField { dim, comps })
    }

    fn jet(&self, x: &[f64]) -> Result<MatJet, EvalError> {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        let mut dm = vec![Mat::zeros(n, n); n];
        for i in 0..n {
            for j in 0..n {
                let jet = self.comps[i * n + j].eval_jet(x, 1)?;
                m.set(i, j, jet.value);
                for (l, d) in dm.iter_mut().enumerate() {
                    d.set(i, j, jet.d1(l));
                }
            }
        }
        Ok(MatJet { m, dm })
    }
}

/// Coboundary of a scalar: `(delta f)(X) = (NX).f`, i.e. `delta f = tN df`,
/// returned with its own first derivatives so it can be differentiated again.
pub fn coboundary_scalar_jet(
    n: &OneOneTensorField,
    f: &Expression,
    x: &[f64],
) -> Result<CovJet, EvalError> {
    let dim = n.dim();
    let nj = n.jet(x)?;
    let fj = f.eval_jet(x, 2)?;
    let mut a = vec![0.0; dim];
    let mut da = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a[i] += nj.m.get(j, i) * fj.d1(j);
        }
        for k in 0..dim {
            let mut v = 0.0;
            for j in 0..dim {
                v += nj.dm[k].get(j, i) * fj.d1(j) + nj.m.get(j, i) * fj.d2(j, k);
            }
            da.set(i, k, v);
        }
    }
    Ok(CovJet { a, da })
}

pub fn coboundary_scalar(
    n: &OneOneTensorField,
    f: &Expression,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    Ok(coboundary_scalar_jet(n, f, x)?.a)
}

/// Coboundary of a 1-form on coordinate frames:
/// `(delta a)(e_i, e_j) = (N e_i).a_j - (N e_j).a_i - a([e_i, e_j]_N)`.
pub fn coboundary_one_form_jets(nj: &MatJet, alpha: &CovJet) -> Mat {
    let dim = alpha.a.len();
    let mut out = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let mut v = 0.0;
            for l in 0..dim {
                v += nj.m.get(l, i) * alpha.da.get(j, l) - nj.m.get(l, j) * alpha.da.get(i, l);
            }
            let tb = twisted_bracket_jets(nj, &VecJet::frame(i, dim), &VecJet::frame(j, dim));
            for k in 0..dim {
                v -= alpha.a[k] * tb[k];
            }
            out.set(i, j, v);
            out.set(j, i, -v);
        }
    }
    out
}

pub fn coboundary_one_form(
    n: &OneOneTensorField,
    alpha: &crate::geometry::CovectorField,
    x: &[f64],
) -> Result<Mat, EvalError> {
    Ok(coboundary_one_form_jets(&n.jet(x)?, &alpha.jet(x)?))
}

/// Coboundary of a 2-form on coordinate frames (the alternating-sum formula
/// of the algebroid differential specialized to anchor `N`).
pub fn coboundary_two_form(
    n: &OneOneTensorField,
    w: &TwoFormField,
    x: &[f64],
) -> Result<Tensor3, EvalError> {
    let dim = n.dim();
    let nj = n.jet(x)?;
    let wj = w.jet(x)?;
    let mut out = Tensor3::zeros(dim);
    let frames: Vec<VecJet> = (0..dim).map(|i| VecJet::frame(i, dim)).collect();
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                let anchor_term = |a: usize, b: usize, c: usize, sign: f64| -> f64 {
                    let mut v = 0.0;
                    for l in 0..dim {
                        v += nj.m.get(l, a) * wj.dm[l].get(b, c);
                    }
                    sign * v
                };
                let bracket_term = |a: usize, b: usize, c: usize, sign: f64| -> f64 {
                    let tb = twisted_bracket_jets(&nj, &frames[a], &frames[b]);
                    let mut v = 0.0;
                    for l in 0..dim {
                        v += tb[l] * wj.m.get(l, c);
                    }
                    sign * v
                };
                let v = anchor_term(i, j, k, 1.0)
                    + anchor_term(j, i, k, -1.0)
                    + anchor_term(k, i, j, 1.0)
                    + bracket_term(i, j, k, -1.0)
                    + bracket_term(i, k, j, 1.0)
                    + bracket_term(j, k, i, -1.0);
                out.set(i, j, k, v);
            }
        }
    }
    Ok(out)
}

/// `max |delta(delta f)|` at `x`; zero whenever `(TM)_N` is a Lie algebroid
/// (torsion-free `N`).
pub fn coboundary_squared_scalar_residual(
    n: &OneOneTensorField,
    f: &Expression,
    x: &[f64],
) -> Result<f64, EvalError> {
    let df = coboundary_scalar_jet(n, f, x)?;
    Ok(coboundary_one_form_jets(&n.jet(x)?, &df).max_abs())
}

/// `max |(delta d + d delta) f|` at `x`: the graded commutator of the
/// twisted coboundary with the de Rham differential on a scalar.
pub fn coboundary_de_rham_anticommutator_residual(
    n: &OneOneTensorField,
    f: &Expression,
    x: &[f64],
) -> Result<f64, EvalError> {
    let dim = n.dim();
    let nj = n.jet(x)?;
    let fj = f.eval_jet(x, 2)?;
    // d f as a covector jet
    let mut grad = vec![0.0; dim];
    let mut dgrad = Mat::zeros(dim, dim);
    for i in 0..dim {
        grad[i] = fj.d1(i);
        for j in 0..dim {
            dgrad.set(i, j, fj.d2(i, j));
        }
    }
    let delta_df = coboundary_one_form_jets(&nj, &CovJet { a: grad, da: dgrad });
    // d (delta f)
    let c = coboundary_scalar_jet(n, f, x)?;
    let mut d_deltaf = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            d_deltaf.set(i, j, c.da.get(j, i) - c.da.get(i, j));
        }
    }
    Ok(delta_df.add(&d_deltaf).max_abs())
}

/// Bialgebroid morphism residuals for the pair `(tN, N)`:
/// `tN [a, b]_{pi_N} = [tN a, tN b]_pi` on the supplied trial forms, plus
/// the sharp-composition identity reported as the antisymmetry defect of
/// `P tN`.
pub fn bialgebroid_morphism_check(
    pi: &BivectorField,
    n: &OneOneTensorField,
    x: &[f64],
    covector_trials: &[(CovJet, CovJet)],
) -> Result<(f64, f64), EvalError> {
    let p = pi.jet(x)?;
    let nj = n.jet(x)?;
    let pn = pi_n_jet(&p, &nj);
    let dim = pi.dim();
    let mut bracket_residual = 0.0f64;
    for (alpha, beta) in covector_trials {
        let lhs_pre = koszul_bracket_jets(&pn, alpha, beta);
        let mut lhs = vec![0.0; dim];
        for i in 0..dim {
            for k in 0..dim {
                lhs[i] += nj.m.get(k, i) * lhs_pre[k];
            }
        }
        let rhs = koszul_bracket_jets(
            &p,
            &alpha.apply_tensor_transpose(&nj),
            &beta.apply_tensor_transpose(&nj),
        );
        for i in 0..dim {
            bracket_residual = bracket_residual.max((lhs[i] - rhs[i]).abs());
        }
    }
    let sharp_residual = pn.m.antisymmetry_defect();
    Ok((bracket_residual, sharp_residual))
}

/// Seeded trial data: coordinate frames plus random polynomial fields of
/// degree at most 2.
pub fn trial_vector_jets(
    dim: usize,
    vars: &Arc<VarSet>,
    x: &[f64],
    extra: usize,
    seed: u64,
) -> Vec<(VecJet, VecJet)> {
    let fields = random_polynomial_fields(dim, vars, 2 * extra, seed);
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            out.push((VecJet::frame(i, dim), VecJet::frame(j, dim)));
        }
    }
    for pair in fields.chunks(2) {
        if let [a, b] = pair {
            let aj = a
                .iter()
                .map(|e| e.eval_jet(x, 1).unwrap())
                .collect::<Vec<_>>();
            let bj = b
                .iter()
                .map(|e| e.eval_jet(x, 1).unwrap())
                .collect::<Vec<_>>();
            out.push((collect_vec_jet(&aj), collect_vec_jet(&bj)));
        }
    }
    out
}

pub fn trial_covector_jets(
    dim: usize,
    vars: &Arc<VarSet>,
    x: &[f64],
    extra: usize,
    seed: u64,
) -> Vec<(CovJet, CovJet)> {
    trial_vector_jets(dim, vars, x, extra, seed)
        .into_iter()
        .map(|(a, b)| (CovJet { a: a.v, da: a.dv }, CovJet { a: b.v, da: b.dv }))
        .collect()
}

fn collect_vec_jet(jets: &[crate::expr::Jet]) -> VecJet {
    let n = jets.len();
    let mut v = vec![0.0; n];
    let mut dv = Mat::zeros(n, n);
    for (i, j) in jets.iter().enumerate() {
        v[i] = j.value;
        for k in 0..n {
            dv.set(i, k, j.d1(k));
        }
    }
    VecJet { v, dv }
}

fn random_polynomial_fields(
    dim: usize,
    vars: &Arc<VarSet>,
    count: usize,
    seed: u64,
) -> Vec<Vec<Expression>> {
    let mut rng = Rng::new(seed);
    let coeff = |rng: &mut Rng| (rng.next_f64() * 2.0 - 1.0).clamp(-1.0, 1.0);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let mut e = Expression::number(coeff(&mut rng), vars);
                    for i in 0..dim {
                        let xi = Expression::variable(i, vars);
                        e = Expression::sum(&e, &xi.scaled(coeff(&mut rng)));
                        for j in i..dim {
                            let xj = Expression::variable(j, vars);
                            let quad = Expression::product(&xi, &xj).scaled(coeff(&mut rng));
                            e = Expression::sum(&e, &quad);
                        }
                    }
                    e
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use crate::linalg::max_abs_diff;

    fn canonical_r2(vars: &Arc<VarSet>) -> BivectorField {
        let one = Expression::number(1.0, vars);
        BivectorField::from_upper(2, vars, &[(0, 1, one)]).unwrap()
    }

    fn polynomial_n3(vars: &Arc<VarSet>) -> OneOneTensorField {
        let e = |s: &str| Expression::parse(s, vars).unwrap();
        OneOneTensorField::from_components(
            3,
            vec![
                e("1 + x1^2"),
                e("x2*x3"),
                e("0.5*x1"),
                e("-x3"),
                e("2"),
                e("x1*x2"),
                e("0.2"),
                e("x1 - x2"),
                e("1 + x3^2"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_tensor_is_fully_compatible() {
        let vars = VarSet::base(3);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(
            3,
            &vars,
            &[(0, 1, e("x3")), (0, 2, e("-x2")), (1, 2, e("x1"))],
        )
        .unwrap();
        let n = OneOneTensorField::identity(3, &vars);
        let x = [0.4, -0.2, 0.9];
        let cov = trial_covector_jets(3, &vars, &x, 5, 11);
        let vec = trial_vector_jets(3, &vars, &x, 5, 12);
        let rep = pn_compatibility(&pi, &n, &x, &cov, &vec).unwrap();
        assert!(rep.matrix_residual < 1e-14);
        assert!(rep.bracket_residual < 1e-12);
        assert!(rep.torsion_residual < 1e-12);
    }

    #[test]
    fn diagonal_tensor_breaks_matrix_compatibility_with_canonical_pi() {
        let vars = VarSet::base(2);
        let pi = canonical_r2(&vars);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n =
            OneOneTensorField::from_components(2, vec![e("1"), e("0"), e("0"), e("2")]).unwrap();
        let rep = pn_compatibility(&pi, &n, &[0.3, 0.7], &[], &[]).unwrap();
        assert!((rep.matrix_residual - 1.0).abs() < 1e-14);
        let pn = PnStructure::new(pi, n).unwrap();
        assert!(pn.pi_n_antisymmetry_defect(&[0.3, 0.7]).unwrap() > 0.5);
    }

    #[test]
    fn twisted_bracket_reduces_to_lie_bracket_for_identity() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n = OneOneTensorField::identity(2, &vars);
        let xf = VectorField {
            comps: vec![e("x1*x2"), e("sin(x1)")],
        };
        let yf = VectorField {
            comps: vec![e("x2^2"), e("-x1")],
        };
        let x = [0.35, -0.8];
        let tw = twisted_bracket(&n, &xf, &yf, &x).unwrap();
        let lie = crate::geometry::vf_lie_bracket(&xf, &yf, &x).unwrap();
        assert!(max_abs_diff(&tw, &lie) < 1e-14);
    }

    #[test]
    fn twisted_bracket_scaling_tensor_example() {
        // N = x1 Id on R^2, X = d1, Y = d2: [X, Y]_N = d2.
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n =
            OneOneTensorField::from_components(2, vec![e("x1"), e("0"), e("0"), e("x1")]).unwrap();
        let xf = VectorField {
            comps: vec![e("1"), e("0")],
        };
        let yf = VectorField {
            comps: vec![e("0"), e("1")],
        };
        let x = [0.6, -0.4];
        let got = twisted_bracket(&n, &xf, &yf, &x).unwrap();
        // independent term-by-term evaluation: [NX, Y] + [X, NY] - N[X, Y]
        // with constant frames reduces to d1(x1) e2 - d2(x1) e1 = e2.
        assert!(max_abs_diff(&got, &[0.0, 1.0]) < 1e-14);

        // constant N with constant fields gives zero
        let nc =
            OneOneTensorField::constant(&Mat::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]), &vars);
        let got = twisted_bracket(&nc, &xf, &yf, &x).unwrap();
        assert_eq!(max_abs(&got), 0.0);
    }

    #[test]
    fn complete_lift_of_identity_is_identity() {
        let vars = VarSet::base(3);
        let n = OneOneTensorField::identity(3, &vars);
        let p = CotangentPoint::new(vec![0.2, 0.4, -0.6], vec![0.3, -0.1, 0.7]).unwrap();
        let nc = complete_lift(&n, &p).unwrap();
        assert_eq!(nc.sub(&Mat::identity(6)).max_abs(), 0.0);
    }

    #[test]
    fn complete_lift_of_constant_tensor_is_block_diagonal() {
        let vars = VarSet::base(2);
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![-0.5, 3.0]]);
        let n = OneOneTensorField::constant(&m, &vars);
        let p = CotangentPoint::new(vec![0.1, 0.2], vec![0.5, -0.4]).unwrap();
        let nc = complete_lift(&n, &p).unwrap();
        let expected = Mat::from_blocks(&m, &Mat::zeros(2, 2), &Mat::zeros(2, 2), &m.transpose());
        assert!(nc.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn complete_lift_of_complex_structure_squares_to_minus_identity() {
        let vars = VarSet::base(4);
        let z = Mat::zeros(2, 2);
        let id = Mat::identity(2);
        let jmat = Mat::from_blocks(&z, &id.scale(-1.0), &id, &z);
        let j = OneOneTensorField::constant(&jmat, &vars);
        let p = CotangentPoint::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.6, 0.7, 0.8]).unwrap();
        let jc = complete_lift(&j, &p).unwrap();
        assert!(jc.matmul(&jc).add(&Mat::identity(8)).max_abs() < 1e-15);
        // (N^2)^c = (N^c)^2 holds for the constant complex structure
        let j2 = OneOneTensorField::constant(&jmat.matmul(&jmat), &vars);
        let j2c = complete_lift(&j2, &p).unwrap();
        assert!(j2c.sub(&jc.matmul(&jc)).max_abs() < 1e-15);
    }

    #[test]
    fn complete_lift_matches_fiberwise_pullback_for_variable_tensor() {
        let vars = VarSet::base(3);
        let n = polynomial_n3(&vars);
        let p = CotangentPoint::new(vec![0.3, -0.5, 0.2], vec![0.4, 0.1, -0.3]).unwrap();
        let r = complete_lift_fiber_map_residual(&n, &p).unwrap();
        assert!(r < 1e-13, "residual {r}");
    }

    #[test]
    fn complete_lift_preserves_vertical_subspace() {
        let vars = VarSet::base(3);
        let n = polynomial_n3(&vars);
        let p = CotangentPoint::new(vec![0.7, 0.1, -0.2], vec![0.2, 0.8, 0.5]).unwrap();
        let nc = complete_lift(&n, &p).unwrap();
        for i in 0..3 {
            for j in 3..6 {
                assert_eq!(nc.get(i, j), 0.0, "base-fiber block must vanish");
            }
        }
    }

    #[test]
    fn twisted_lie_poisson_of_identity_is_canonical() {
        let vars = VarSet::base(3);
        let n = OneOneTensorField::identity(3, &vars);
        let p = CotangentPoint::new(vec![0.5, -0.5, 0.25], vec![0.1, 0.2, 0.3]).unwrap();
        let tp = twisted_lie_poisson(&n, &p).unwrap();
        let expected = omega_can(3).inverse().unwrap();
        assert!(tp.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn twisted_lie_poisson_constant_diagonal_brackets() {
        // N = diag(c1, c2): {lambda_i, x^j} = c_i delta_i^j
        let vars = VarSet::base(2);
        let m = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, -3.0]]);
        let n = OneOneTensorField::constant(&m, &vars);
        let p = CotangentPoint::new(vec![0.3, 0.6], vec![0.4, -0.2]).unwrap();
        let tp = twisted_lie_poisson(&n, &p).unwrap();
        assert_eq!(tp.get(2, 0), 2.0);
        assert_eq!(tp.get(3, 1), -3.0);
        assert_eq!(tp.get(2, 1), 0.0);
        assert_eq!(tp.get(2, 3), 0.0);
        assert!(tp.antisymmetry_defect() == 0.0);
    }

    #[test]
    fn twisted_lie_poisson_reproduces_bracket_families() {
        let vars = VarSet::base(3);
        let n = polynomial_n3(&vars);
        let p = CotangentPoint::new(vec![0.25, -0.4, 0.55], vec![0.3, 0.2, -0.6]).unwrap();
        let tp = twisted_lie_poisson(&n, &p).unwrap();
        let fields: Vec<VecJet> = trial_vector_jets(3, &vars, &p.x, 4, 21)
            .into_iter()
            .map(|(a, _)| a)
            .collect();
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let funcs = vec![
            e("x1").eval_jet(&p.x, 1).unwrap(),
            e("x2*x3").eval_jet(&p.x, 1).unwrap(),
            e("x1^2 - x3").eval_jet(&p.x, 1).unwrap(),
        ];
        let r = twisted_lie_poisson_family_residual(&n, &p, &tp, &fields, &funcs).unwrap();
        assert!(r < 1e-9, "family residual {r}");
    }

    #[test]
    fn twisted_lie_poisson_composed_with_flat_map_is_complete_lift() {
        let vars = VarSet::base(3);
        let n = polynomial_n3(&vars);
        let p = CotangentPoint::new(vec![0.15, 0.35, -0.45], vec![0.5, -0.25, 0.1]).unwrap();
        let tp = twisted_lie_poisson(&n, &p).unwrap();
        let nc = complete_lift(&n, &p).unwrap();
        let r = tp.matmul(&omega_can(3)).sub(&nc).max_abs();
        assert!(r < 1e-13, "lemma residual {r}");
    }

    #[test]
    fn coboundary_of_scalar_for_identity_is_gradient() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n = OneOneTensorField::identity(2, &vars);
        let f = e("x1^2 * x2 + sin(x2)");
        let x = [0.7, -0.3];
        let df = coboundary_scalar(&n, &f, &x).unwrap();
        let fj = f.eval_jet(&x, 1).unwrap();
        assert!(max_abs_diff(&df, fj.gradient()) < 1e-15);
    }

    #[test]
    fn coboundary_squares_to_zero_for_torsion_free_tensors() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let f = e("1 + x1^3 - 2*x1*x2 + x2^2");
        let x = [0.45, -0.15];
        // constant tensor
        let nc =
            OneOneTensorField::constant(&Mat::from_rows(&[vec![1.5, 0.5], vec![-1.0, 2.0]]), &vars);
        assert!(coboundary_squared_scalar_residual(&nc, &f, &x).unwrap() < 1e-13);
        // variable torsion-free tensor diag(f1(x1), f2(x2))
        let nv =
            OneOneTensorField::from_components(2, vec![e("1 + x1^2"), e("0"), e("0"), e("2 - x2")])
                .unwrap();
        assert!(coboundary_squared_scalar_residual(&nv, &f, &x).unwrap() < 1e-13);
    }

    #[test]
    fn coboundary_anticommutes_with_de_rham_for_nijenhuis_tensors() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let f = e("x1^2*x2 - x2^3 + 0.5*x1");
        let x = [0.3, 0.8];
        let nv = OneOneTensorField::from_components(
            2,
            vec![e("1 + x1^2"), e("0"), e("0"), e("2 - x2^2")],
        )
        .unwrap();
        let r = coboundary_de_rham_anticommutator_residual(&nv, &f, &x).unwrap();
        assert!(r < 1e-13, "anticommutator residual {r}");
    }

    #[test]
    fn coboundary_two_form_of_identity_matches_de_rham() {
        // w_12 = x3: de Rham gives (dw)_{123} = 1
        let vars = VarSet::base(3);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n = OneOneTensorField::identity(3, &vars);
        let w = TwoFormField::from_components(
            3,
            vec![
                e("0"),
                e("x3"),
                e("0"),
                e("-x3"),
                e("0"),
                e("0"),
                e("0"),
                e("0"),
                e("0"),
            ],
        )
        .unwrap();
        let t = coboundary_two_form(&n, &w, &[0.2, 0.4, 0.6]).unwrap();
        assert!((t.get(0, 1, 2) - 1.0).abs() < 1e-15);
        assert!(t.antisymmetry_defect() < 1e-15);
    }

    #[test]
    fn bialgebroid_morphism_holds_for_compatible_pair_and_fails_otherwise() {
        let vars = VarSet::base(2);
        let pi = canonical_r2(&vars);
        let x = [0.25, -0.65];
        let cov = trial_covector_jets(2, &vars, &x, 5, 33);

        let id = OneOneTensorField::identity(2, &vars);
        let (rb, rs) = bialgebroid_morphism_check(&pi, &id, &x, &cov).unwrap();
        assert!(rb < 1e-12 && rs < 1e-15);

        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let bad =
            OneOneTensorField::from_components(2, vec![e("1"), e("0"), e("0"), e("2")]).unwrap();
        let (_, rs_bad) = bialgebroid_morphism_check(&pi, &bad, &x, &cov).unwrap();
        assert!(rs_bad > 0.5, "incompatible pair must be flagged");
    }
}
