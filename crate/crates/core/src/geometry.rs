//! Tensor calculus on a single coordinate chart.
//!
//! Conventions used across the crate (one coherent set, locked by the
//! constant-bivector and `so(3)` oracles in the tests):
//!
//! * bivector components are the coordinate brackets, `{x^i, x^j} = pi^{ij}`;
//! * the sharp map is `(pi# a)^i = pi^{ij} a_j`, i.e. left action of the
//!   component matrix;
//! * the canonical two-form on a cotangent chart ordered `(x, lambda)` is the
//!   block matrix `[[0, I], [-I, 0]]`;
//! * the flat map is `(w_flat v)_a = w_ab v^b`;
//! * inside the Koszul bracket the cotangent-algebroid anchor acts as
//!   `a -> (transpose pi) a`, which is what makes `[df, dg] = d{f, g}` hold
//!   with the bracket convention above.

use std::sync::Arc;

use crate::expr::{EvalError, Expression, VarSet};
use crate::linalg::{Mat, Tensor3};

/// Antisymmetric bivector field; only the strict upper triangle is stored,
/// so antisymmetry is exact by construction.
#[derive(Clone, Debug)]
pub struct BivectorField {
    dim: usize,
    vars: Arc<VarSet>,
    upper: Vec<Expression>,
}

/// A (1,1)-tensor field `N^i_j(x)` with full component storage.
#[derive(Clone, Debug)]
pub struct OneOneTensorField {
    dim: usize,
    comps: Vec<Expression>,
}

/// Vector field given by component expressions.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: Vec<Expression>,
}

/// Covector (1-form) field given by component expressions.
#[derive(Clone, Debug)]
pub struct CovectorField {
    pub comps: Vec<Expression>,
}

/// A 2-form evaluated at a point of some chart.
#[derive(Clone, Debug)]
pub struct TwoFormMatrix {
    pub point: Vec<f64>,
    pub mat: Mat,
}

impl TwoFormMatrix {
    pub fn antisymmetry_defect(&self) -> f64 {
        self.mat.antisymmetry_defect()
    }

    /// |det| as a nondegeneracy margin.
    pub fn nondegeneracy_margin(&self) -> f64 {
        self.mat.det().abs()
    }
}

/// Pointwise value and first derivatives of a matrix-valued field.
#[derive(Clone, Debug)]
pub struct MatJet {
    pub m: Mat,
    /// dm[l] holds the partial derivatives of every entry along `x^l`.
    pub dm: Vec<Mat>,
}

/// Pointwise value and first derivatives of a vector field.
#[derive(Clone, Debug)]
pub struct VecJet {
    pub v: Vec<f64>,
    /// dv(i, j) = d v^i / d x^j
    pub dv: Mat,
}

/// Pointwise value and first derivatives of a covector field.
#[derive(Clone, Debug)]
pub struct CovJet {
    pub a: Vec<f64>,
    /// da(i, j) = d a_i / d x^j
    pub da: Mat,
}

fn upper_len(n: usize) -> usize {
    n * (n - 1) / 2
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl BivectorField {
    /// Build from strict upper-triangle entries `(i, j, expr)` with
    /// 0-based `i < j`; missing entries are zero.
    pub fn from_upper(
        dim: usize,
        vars: &Arc<VarSet>,
        entries: &[(usize, usize, Expression)],
    ) -> Result<BivectorField, String> {
        if vars.len() != dim {
            return Err(format!(
                "variable set has {} names but chart dimension is {dim}",
                vars.len()
            ));
        }
        let mut upper: Vec<Expression> = (0..upper_len(dim))
            .map(|_| Expression::zero(vars))
            .collect();
        for (i, j, e) in entries {
            if *i >= *j || *j >= dim {
                return Err(format!(
                    "bivector index ({i}, {j}) outside strict upper triangle"
                ));
            }
            if e.vars() != vars {
                return Err("bivector component parsed against a different chart".to_string());
            }
            upper[upper_index(dim, *i, *j)] = e.clone();
        }
        Ok(BivectorField {
            dim,
            vars: Arc::clone(vars),
            upper,
        })
    }

    pub fn zero(dim: usize, vars: &Arc<VarSet>) -> BivectorField {
        BivectorField::from_upper(dim, vars, &[]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn upper_components(&self) -> impl Iterator<Item = (usize, usize, &Expression)> {
        let n = self.dim;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .map(move |(i, j)| (i, j, &self.upper[upper_index(n, i, j)]))
    }

    /// Component matrix at `x`.
    pub fn matrix(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        for (i, j, e) in self.upper_components() {
            let v = e.eval(x)?;
            m.set(i, j, v);
            m.set(j, i, -v);
        }
        Ok(m)
    }

    /// Component matrix and its first derivatives at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<MatJet, EvalError> {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        let mut dm = vec![Mat::zeros(n, n); n];
        for (i, j, e) in self.upper_components() {
            let jet = e.eval_jet(x, 1)?;
            m.set(i, j, jet.value);
            m.set(j, i, -jet.value);
            for (l, d) in dm.iter_mut().enumerate() {
                d.set(i, j, jet.d1(l));
                d.set(j, i, -jet.d1(l));
            }
        }
        Ok(MatJet { m, dm })
    }

    /// As [`jet`](Self::jet) plus second derivatives, indexed `(l, p)` row-major.
    pub fn jet2(&self, x: &[f64]) -> Result<(MatJet, Vec<Mat>), EvalError> {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        let mut dm = vec![Mat::zeros(n, n); n];
        let mut d2m = vec![Mat::zeros(n, n); n * n];
        for (i, j, e) in self.upper_components() {
            let jet = e.eval_jet(x, 2)?;
            m.set(i, j, jet.value);
            m.set(j, i, -jet.value);
            for l in 0..n {
                dm[l].set(i, j, jet.d1(l));
                dm[l].set(j, i, -jet.d1(l));
                for p in 0..n {
                    d2m[l * n + p].set(i, j, jet.d2(l, p));
                    d2m[l * n + p].set(j, i, -jet.d2(l, p));
                }
            }
        }
        Ok((MatJet { m, dm }, d2m))
    }
}

impl OneOneTensorField {
    /// Build from row-major components `N^i_j` (row `i`, column `j`).
    pub fn from_components(
        dim: usize,
        comps: Vec<Expression>,
    ) -> Result<OneOneTensorField, String> {
        if comps.len() != dim * dim {
            return Err(format!(
                "expected {} components, got {}",
                dim * dim,
                comps.len()
            ));
        }
        Ok(OneOneTensorField { dim, comps })
    }

    pub fn identity(dim: usize, vars: &Arc<VarSet>) -> OneOneTensorField {
        let comps = (0..dim * dim)
            .map(|k| Expression::number(if k % (dim + 1) == 0 { 1.0 } else { 0.0 }, vars))
            .collect();
        OneOneTensorField { dim, comps }
    }

    /// Constant tensor from a matrix of numbers.
    pub fn constant(m: &Mat, vars: &Arc<VarSet>) -> OneOneTensorField {
        let dim = m.rows();
        let comps = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| Expression::number(m.get(i, j), vars))
            .collect();
        OneOneTensorField { dim, comps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.comps[i * self.dim + j]
    }

    pub fn matrix(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.comps[i * n + j].eval(x)?);
            }
        }
        Ok(m)
    }

    pub fn jet(&self, x: &[f64]) -> Result<MatJet, EvalError> {
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

impl VectorField {
    pub fn jet(&self, x: &[f64]) -> Result<VecJet, EvalError> {
        let n = self.comps.len();
        let mut v = vec![0.0; n];
        let mut dv = Mat::zeros(n, n);
        for (i, e) in self.comps.iter().enumerate() {
            let jet = e.eval_jet(x, 1)?;
            v[i] = jet.value;
            for j in 0..n {
                dv.set(i, j, jet.d1(j));
            }
        }
        Ok(VecJet { v, dv })
    }
}

impl CovectorField {
    pub fn jet(&self, x: &[f64]) -> Result<CovJet, EvalError> {
        let n = self.comps.len();
        let mut a = vec![0.0; n];
        let mut da = Mat::zeros(n, n);
        for (i, e) in self.comps.iter().enumerate() {
            let jet = e.eval_jet(x, 1)?;
            a[i] = jet.value;
            for j in 0..n {
                da.set(i, j, jet.d1(j));
            }
        }
        Ok(CovJet { a, da })
    }
}

impl VecJet {
    /// Coordinate frame field `d/dx^i` (constant).
    pub fn frame(i: usize, n: usize) -> VecJet {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        VecJet {
            v,
            dv: Mat::zeros(n, n),
        }
    }

    /// Apply a (1,1)-tensor: `(N X)^i = N^i_j X^j`, with derivatives.
    pub fn apply_tensor(&self, n: &MatJet) -> VecJet {
        let d = self.v.len();
        let v = n.m.matvec(&self.v);
        let mut dv = Mat::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += n.dm[k].get(i, j) * self.v[j] + n.m.get(i, j) * self.dv.get(j, k);
                }
                dv.set(i, k, s);
            }
        }
        VecJet { v, dv }
    }

    /// Multiply by a scalar field with known gradient: `(f X)`, derivatives
    /// by the product rule.
    pub fn scaled_by(&self, f: f64, grad_f: &[f64]) -> VecJet {
        let d = self.v.len();
        let v: Vec<f64> = self.v.iter().map(|x| f * x).collect();
        let mut dv = Mat::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                dv.set(i, k, f * self.dv.get(i, k) + grad_f[k] * self.v[i]);
            }
        }
        VecJet { v, dv }
    }
}

impl CovJet {
    pub fn coframe(i: usize, n: usize) -> CovJet {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        CovJet {
            a,
            da: Mat::zeros(n, n),
        }
    }

    /// Apply the transpose of the (1,1)-tensor: `(tN a)_i = N^k_i a_k`.
    pub fn apply_tensor_transpose(&self, n: &MatJet) -> CovJet {
        let d = self.a.len();
        let mut a = vec![0.0; d];
        let mut da = Mat::zeros(d, d);
        for i in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += n.m.get(k, i) * self.a[k];
            }
            a[i] = s;
            for l in 0..d {
                let mut t = 0.0;
                for k in 0..d {
                    t += n.dm[l].get(k, i) * self.a[k] + n.m.get(k, i) * self.da.get(k, l);
                }
                da.set(i, l, t);
            }
        }
        CovJet { a, da }
    }

    pub fn scaled_by(&self, f: f64, grad_f: &[f64]) -> CovJet {
        let d = self.a.len();
        let a: Vec<f64> = self.a.iter().map(|x| f * x).collect();
        let mut da = Mat::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                da.set(i, k, f * self.da.get(i, k) + grad_f[k] * self.a[i]);
            }
        }
        CovJet { a, da }
    }
}

// ---------------------------------------------------------------------------
// bracket kernels
// ---------------------------------------------------------------------------

/// Schouten Jacobiator of a bivector at a point:
/// `J^{ijk} = pi^{il} d_l pi^{jk} + pi^{jl} d_l pi^{ki} + pi^{kl} d_l pi^{ij}`.
/// Zero at every point iff the bivector is Poisson there.
pub fn jacobiator(pi: &BivectorField, x: &[f64]) -> Result<Tensor3, EvalError> {
    Ok(jacobiator_from_jet(&pi.jet(x)?))
}

pub fn jacobiator_from_jet(p: &MatJet) -> Tensor3 {
    let n = p.m.rows();
    let mut t = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += p.m.get(i, l) * p.dm[l].get(j, k)
                        + p.m.get(j, l) * p.dm[l].get(k, i)
                        + p.m.get(k, l) * p.dm[l].get(i, j);
                }
                t.set(i, j, k, s);
            }
        }
    }
    t
}

/// Koszul bracket of 1-forms induced by a Poisson bivector,
/// `[a, b]_pi = L_{V_a} b - L_{V_b} a - d(pi(a, b))`
/// with `V_a = (transpose pi) a` and `pi(a, b) = a_k pi^{kl} b_l`.
/// For exact forms this returns `d{f, g}` on the nose.
pub fn koszul_bracket_jets(p: &MatJet, alpha: &CovJet, beta: &CovJet) -> Vec<f64> {
    let n = p.m.rows();
    // V^j = pi^{kj} a_k and its derivatives
    let anchor = |a: &CovJet| -> VecJet {
        let mut v = vec![0.0; n];
        let mut dv = Mat::zeros(n, n);
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += p.m.get(k, j) * a.a[k];
            }
            v[j] = s;
            for i in 0..n {
                let mut t = 0.0;
                for k in 0..n {
                    t += p.dm[i].get(k, j) * a.a[k] + p.m.get(k, j) * a.da.get(k, i);
                }
                dv.set(j, i, t);
            }
        }
        VecJet { v, dv }
    };
    let va = anchor(alpha);
    let vb = anchor(beta);
    let lie_deriv = |v: &VecJet, b: &CovJet, i: usize| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            s += v.v[j] * b.da.get(i, j) + b.a[j] * v.dv.get(j, i);
        }
        s
    };
    let mut out = vec![0.0; n];
    for i in 0..n {
        // d_i of the pairing a_k pi^{kl} b_l
        let mut dpair = 0.0;
        for k in 0..n {
            for l in 0..n {
                dpair += alpha.da.get(k, i) * p.m.get(k, l) * beta.a[l]
                    + alpha.a[k] * p.dm[i].get(k, l) * beta.a[l]
                    + alpha.a[k] * p.m.get(k, l) * beta.da.get(l, i);
            }
        }
        out[i] = lie_deriv(&va, beta, i) - lie_deriv(&vb, alpha, i) - dpair;
    }
    out
}

pub fn koszul_bracket(
    pi: &BivectorField,
    alpha: &CovectorField,
    beta: &CovectorField,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    Ok(koszul_bracket_jets(
        &pi.jet(x)?,
        &alpha.jet(x)?,
        &beta.jet(x)?,
    ))
}

/// Lie bracket of vector fields: `[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`.
pub fn vf_lie_bracket_jets(x: &VecJet, y: &VecJet) -> Vec<f64> {
    let n = x.v.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += x.v[j] * y.dv.get(i, j) - y.v[j] * x.dv.get(i, j);
        }
        out[i] = s;
    }
    out
}

pub fn vf_lie_bracket(
    xf: &VectorField,
    yf: &VectorField,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    Ok(vf_lie_bracket_jets(&xf.jet(x)?, &yf.jet(x)?))
}

/// Nijenhuis torsion
/// `T_N(X, Y) = [NX, NY] - N([NX, Y] + [X, NY]) + N^2 [X, Y]`.
pub fn nijenhuis_torsion_jets(n: &MatJet, x: &VecJet, y: &VecJet) -> Vec<f64> {
    let nx = x.apply_tensor(n);
    let ny = y.apply_tensor(n);
    let t1 = vf_lie_bracket_jets(&nx, &ny);
    let t2 = vf_lie_bracket_jets(&nx, y);
    let t3 = vf_lie_bracket_jets(x, &ny);
    let t4 = vf_lie_bracket_jets(x, y);
    let d = x.v.len();
    let mut out = vec![0.0; d];
    let inner: Vec<f64> = (0..d).map(|i| t2[i] + t3[i]).collect();
    let n_inner = n.m.matvec(&inner);
    let nn_t4 = n.m.matvec(&n.m.matvec(&t4));
    for i in 0..d {
        out[i] = t1[i] - n_inner[i] + nn_t4[i];
    }
    out
}

pub fn nijenhuis_torsion(
    nt: &OneOneTensorField,
    xf: &VectorField,
    yf: &VectorField,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    Ok(nijenhuis_torsion_jets(
        &nt.jet(x)?,
        &xf.jet(x)?,
        &yf.jet(x)?,
    ))
}

// ---------------------------------------------------------------------------
// exterior derivative and pullback
// ---------------------------------------------------------------------------

/// Differencing scheme for [`exterior_derivative_2form`].
#[derive(Clone, Copy, Debug)]
pub struct CentralDiff {
    pub h: f64,
    /// One Richardson extrapolation step (h and h/2), giving O(h^4).
    pub richardson: bool,
}

impl Default for CentralDiff {
    fn default() -> Self {
        CentralDiff {
            h: 1e-4,
            richardson: true,
        }
    }
}

/// Evaluation failure at a finite-difference stencil point.
#[derive(Debug)]
pub struct StencilError<E> {
    pub direction: usize,
    pub offset: f64,
    pub source: E,
}

impl<E: std::fmt::Display> std::fmt::Display for StencilError<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "2-form evaluation failed at stencil offset {:+e} along direction {}: {}",
            self.offset, self.direction, self.source
        )
    }
}

impl<E: std::error::Error + 'static> std::error::Error for StencilError<E> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Exterior derivative of a 2-form available only through pointwise
/// evaluation, by central differences of the component matrix.
pub fn exterior_derivative_2form<E>(
    mut eval: impl FnMut(&[f64]) -> Result<Mat, E>,
    point: &[f64],
    scheme: CentralDiff,
) -> Result<Tensor3, StencilError<E>> {
    let m = point.len();
    let mut sample = |dir: usize, off: f64| -> Result<Mat, StencilError<E>> {
        let mut p = point.to_vec();
        p[dir] += off;
        eval(&p).map_err(|source| StencilError {
            direction: dir,
            offset: off,
            source,
        })
    };
    let mut partials = Vec::with_capacity(m);
    for a in 0..m {
        let diff = |s: &mut dyn FnMut(usize, f64) -> Result<Mat, StencilError<E>>,
                    h: f64|
         -> Result<Mat, StencilError<E>> {
            let plus = s(a, h)?;
            let minus = s(a, -h)?;
            Ok(plus.sub(&minus).scale(0.5 / h))
        };
        let d = if scheme.richardson {
            let coarse = diff(&mut sample, scheme.h)?;
            let fine = diff(&mut sample, scheme.h / 2.0)?;
            fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0))
        } else {
            diff(&mut sample, scheme.h)?
        };
        partials.push(d);
    }
    Ok(d_two_form_from_partials(&partials))
}

/// Assemble `(dw)_{abc} = d_a w_{bc} - d_b w_{ac} + d_c w_{ab}` from the
/// partial-derivative matrices of the 2-form components.
pub fn d_two_form_from_partials(partials: &[Mat]) -> Tensor3 {
    let m = partials.len();
    let mut t = Tensor3::zeros(m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let v = partials[a].get(b, c) - partials[b].get(a, c) + partials[c].get(a, b);
                t.set(a, b, c, v);
            }
        }
    }
    t
}

/// Pullback of a 2-form along a linear map: `J^T w J`. `jac` maps tangent
/// vectors at the source point to the image point, so it is
/// (image dim) x (source dim).
pub fn pullback_2form(jac: &Mat, w_img: &Mat) -> Mat {
    jac.transpose().matmul(w_img).matmul(jac)
}

/// Canonical symplectic matrix `[[0, I], [-I, 0]]` on a 2n-dimensional
/// cotangent chart ordered `(x, lambda)`.
pub fn omega_can(n: usize) -> Mat {
    let z = Mat::zeros(n, n);
    let id = Mat::identity(n);
    Mat::from_blocks(&z, &id, &id.scale(-1.0), &z)
}
