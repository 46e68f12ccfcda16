//! The geodesic vector field of the cotangent-algebroid connection (Poisson
//! spray) and its adaptive flow with variational equations.
//!
//! On the cotangent chart with coordinates `(x, lambda)` the spray is
//!
//! ```text
//! dx^j/dt      = pi^{jk}(x) lambda_k
//! dlambda_i/dt = Gamma^k_{ji}(x) dx^j/dt lambda_k
//! ```
//!
//! The fiber equation is parallel transport for the dual connection
//! `(nabla_X a)_i = X^j (d_j a_i - Gamma^k_{ji} a_k)`, so integrated
//! trajectories are exactly the A-geodesics of the induced algebroid
//! connection. The base equation is the A-path condition: base velocity
//! equals the anchor applied to the fiber.

use std::sync::Arc;

use crate::expr::{EvalError, Expression, VarSet};
use crate::geometry::BivectorField;
use crate::linalg::Mat;
use crate::ode::{integrate_to, OdeFailureKind, OdeOpts};

/// Christoffel symbols `Gamma^k_{ij}(x)` of an affine connection on the base
/// chart. Torsionful connections are allowed; nothing here symmetrizes.
#[derive(Clone, Debug)]
pub struct ConnectionCoefficients {
    dim: usize,
    flat: bool,
    /// gamma[(k*n + i)*n + j] = Gamma^k_{ij}
    gamma: Vec<Expression>,
}

impl ConnectionCoefficients {
    pub fn flat(dim: usize, vars: &Arc<VarSet>) -> ConnectionCoefficients {
        let gamma = (0..dim * dim * dim)
            .map(|_| Expression::zero(vars))
            .collect();
        ConnectionCoefficients {
            dim,
            flat: true,
            gamma,
        }
    }

    /// Build from sparse entries `(k, i, j, expr)` for `Gamma^k_{ij}`,
    /// 0-based; missing entries are zero.
    pub fn from_entries(
        dim: usize,
        vars: &Arc<VarSet>,
        entries: &[(usize, usize, usize, Expression)],
    ) -> Result<ConnectionCoefficients, String> {
        let mut gamma: Vec<Expression> = (0..dim * dim * dim)
            .map(|_| Expression::zero(vars))
            .collect();
        let mut any = false;
        for (k, i, j, e) in entries {
            if *k >= dim || *i >= dim || *j >= dim {
                return Err(format!(
                    "connection index ({k}, {i}, {j}) out of range for dim {dim}"
                ));
            }
            any = true;
            gamma[(*k * dim + *i) * dim + *j] = e.clone();
        }
        Ok(ConnectionCoefficients {
            dim,
            flat: !any,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn component(&self, k: usize, i: usize, j: usize) -> &Expression {
        &self.gamma[(k * self.dim + i) * self.dim + j]
    }

    fn eval(&self, x: &[f64], order: usize) -> Result<GammaJet, EvalError> {
        let n = self.dim;
        let mut g = vec![0.0; n * n * n];
        let mut dg = if order >= 1 {
            vec![0.0; n * n * n * n]
        } else {
            Vec::new()
        };
        let mut d2g = if order >= 2 {
            vec![0.0; n * n * n * n * n]
        } else {
            Vec::new()
        };
        if !self.flat {
            for idx in 0..n * n * n {
                let jet = self.gamma[idx].eval_jet(x, order)?;
                g[idx] = jet.value;
                if order >= 1 {
                    for m in 0..n {
                        dg[idx * n + m] = jet.d1(m);
                    }
                }
                if order >= 2 {
                    for m in 0..n {
                        for p in 0..n {
                            d2g[(idx * n + m) * n + p] = jet.d2(m, p);
                        }
                    }
                }
            }
        }
        Ok(GammaJet { n, g, dg, d2g })
    }
}

struct GammaJet {
    n: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
    d2g: Vec<f64>,
}

impl GammaJet {
    #[inline]
    fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.g[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn d(&self, k: usize, i: usize, j: usize, m: usize) -> f64 {
        self.dg[((k * self.n + i) * self.n + j) * self.n + m]
    }

    #[inline]
    fn d2(&self, k: usize, i: usize, j: usize, m: usize, p: usize) -> f64 {
        self.d2g[(((k * self.n + i) * self.n + j) * self.n + m) * self.n + p]
    }
}

/// A point `(x, lambda)` of the cotangent chart.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(x: Vec<f64>, lambda: Vec<f64>) -> Result<CotangentPoint, String> {
        if x.len() != lambda.len() {
            return Err(format!(
                "base has dimension {} but fiber has dimension {}",
                x.len(),
                lambda.len()
            ));
        }
        if !x.iter().chain(&lambda).all(|v| v.is_finite()) {
            return Err("cotangent point has non-finite entries".to_string());
        }
        Ok(CotangentPoint { x, lambda })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn flat_coords(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.lambda);
        z
    }

    pub fn from_flat(z: &[f64]) -> CotangentPoint {
        let n = z.len() / 2;
        CotangentPoint {
            x: z[..n].to_vec(),
            lambda: z[n..].to_vec(),
        }
    }
}

/// Tolerances for the adaptive flow.
#[derive(Clone, Copy, Debug)]
pub struct FlowOpts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for FlowOpts {
    fn default() -> Self {
        FlowOpts {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
        }
    }
}

impl FlowOpts {
    fn ode(&self) -> OdeOpts {
        OdeOpts {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
        }
    }
}

/// Outcome of a flow request. Failure to reach the requested time is not an
/// error: it is the numerical detection that the start point lies outside
/// the neighborhood U on which the time-1 flow exists.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub inside_u: bool,
    pub endpoint: Option<CotangentPoint>,
    pub jacobian: Option<Mat>,
    pub steps: usize,
    pub error_estimate: f64,
    pub failure_time: Option<f64>,
    pub failure_reason: Option<String>,
}

/// Flow failure, with the time at which the integrator gave up.
#[derive(Clone, Debug)]
pub struct FlowFailure {
    pub time: f64,
    pub reason: String,
}

impl std::fmt::Display for FlowFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "flow failed at t = {}: {}", self.time, self.reason)
    }
}

impl std::error::Error for FlowFailure {}

/// State at one requested flow time.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub t: f64,
    pub point: CotangentPoint,
    pub jacobian: Option<Mat>,
    /// Second variation dJ/dz0^e for each initial coordinate, when requested.
    pub second: Option<Vec<Mat>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variation {
    None,
    First,
    Second,
}

/// The geodesic vector field built from a bivector and a base connection.
#[derive(Clone, Debug)]
pub struct Spray {
    pi: BivectorField,
    conn: ConnectionCoefficients,
}

/// Build the spray, checking chart dimensions agree.
pub fn build_spray(pi: BivectorField, conn: ConnectionCoefficients) -> Result<Spray, String> {
    if pi.dim() != conn.dim() {
        return Err(format!(
            "bivector dimension {} does not match connection dimension {}",
            pi.dim(),
            conn.dim()
        ));
    }
    Ok(Spray { pi, conn })
}

impl Spray {
    pub fn dim(&self) -> usize {
        self.pi.dim()
    }

    pub fn pi(&self) -> &BivectorField {
        &self.pi
    }

    pub fn connection(&self) -> &ConnectionCoefficients {
        &self.conn
    }

    /// Spray value at a cotangent point, `(dx/dt, dlambda/dt)`.
    pub fn value(&self, p: &CotangentPoint) -> Result<Vec<f64>, EvalError> {
        let n = self.dim();
        let pmat = self.pi.matrix(&p.x)?;
        let gamma = self.conn.eval(&p.x, 0)?;
        let xdot = pmat.matvec(&p.lambda);
        let mut out = vec![0.0; 2 * n];
        out[..n].copy_from_slice(&xdot);
        if !self.conn.is_flat() {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += gamma.at(k, j, i) * xdot[j] * p.lambda[k];
                    }
                }
                out[n + i] = s;
            }
        }
        Ok(out)
    }

    /// Right-hand side of the combined flow/variational system. The state is
    /// `[x, lambda]`, then the Jacobian rows, then the second-variation
    /// matrices, depending on `variation`.
    fn rhs(&self, variation: Variation, state: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let n = self.dim();
        let m = 2 * n;
        let x = &state[..n];
        let lambda = &state[n..m];

        let jet_order = match variation {
            Variation::None => 0,
            Variation::First => 1,
            Variation::Second => 2,
        };
        let (pjet, d2p) = if jet_order >= 2 {
            let (j, d2) = self.pi.jet2(x)?;
            (j, Some(d2))
        } else if jet_order == 1 {
            (self.pi.jet(x)?, None)
        } else {
            let pm = self.pi.matrix(x)?;
            (
                crate::geometry::MatJet {
                    m: pm,
                    dm: Vec::new(),
                },
                None,
            )
        };
        let gamma = self.conn.eval(x, jet_order)?;
        let flat = self.conn.is_flat();

        let xdot = pjet.m.matvec(lambda);
        out[..n].copy_from_slice(&xdot);
        for i in 0..n {
            let mut s = 0.0;
            if !flat {
                for j in 0..n {
                    for k in 0..n {
                        s += gamma.at(k, j, i) * xdot[j] * lambda[k];
                    }
                }
            }
            out[n + i] = s;
        }
        if variation == Variation::None {
            return Ok(());
        }

        // Jacobian of the spray at the current state: D[a][b], a,b in 0..2n.
        // dPl[m] = (d_m P) lambda, reused throughout.
        let dpl: Vec<Vec<f64>> = (0..n).map(|mm| pjet.dm[mm].matvec(lambda)).collect();
        let mut dxi = Mat::zeros(m, m);
        for j in 0..n {
            for mm in 0..n {
                dxi.set(j, mm, dpl[mm][j]);
                dxi.set(j, n + mm, pjet.m.get(j, mm));
            }
        }
        if !flat {
            for i in 0..n {
                for mm in 0..n {
                    let mut cx = 0.0;
                    let mut cl = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            cx += (gamma.d(k, j, i, mm) * xdot[j] + gamma.at(k, j, i) * dpl[mm][j])
                                * lambda[k];
                            cl += gamma.at(k, j, i) * pjet.m.get(j, mm) * lambda[k];
                        }
                        cl += 0.0;
                    }
                    let mut cl2 = 0.0;
                    for j in 0..n {
                        cl2 += gamma.at(mm, j, i) * xdot[j];
                    }
                    dxi.set(n + i, mm, cx);
                    dxi.set(n + i, n + mm, cl + cl2);
                }
            }
        }

        // dJ/dt = Dxi J
        let jac_off = m;
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for d in 0..m {
                    s += dxi.get(a, d) * state[jac_off + d * m + b];
                }
                out[jac_off + a * m + b] = s;
            }
        }
        if variation == Variation::First {
            return Ok(());
        }

        // Second derivatives of the spray, T2[a][d][e], assembled on demand.
        let d2p = d2p.expect("second-order bivector jet");
        let t2 = |a: usize, d: usize, e: usize| -> f64 {
            let (d_base, d_idx) = (d < n, if d < n { d } else { d - n });
            let (e_base, e_idx) = (e < n, if e < n { e } else { e - n });
            if a < n {
                let j = a;
                match (d_base, e_base) {
                    (true, true) => {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += d2p[d_idx * n + e_idx].get(j, k) * lambda[k];
                        }
                        s
                    }
                    (true, false) => pjet.dm[d_idx].get(j, e_idx),
                    (false, true) => pjet.dm[e_idx].get(j, d_idx),
                    (false, false) => 0.0,
                }
            } else {
                if flat {
                    return 0.0;
                }
                let i = a - n;
                match (d_base, e_base) {
                    (true, true) => {
                        let (mm, pp) = (d_idx, e_idx);
                        let mut s = 0.0;
                        for j in 0..n {
                            for k in 0..n {
                                let d2pl = d2p[mm * n + pp].matvec(lambda);
                                s += (gamma.d2(k, j, i, mm, pp) * xdot[j]
                                    + gamma.d(k, j, i, mm) * dpl[pp][j]
                                    + gamma.d(k, j, i, pp) * dpl[mm][j]
                                    + gamma.at(k, j, i) * d2pl[j])
                                    * lambda[k];
                            }
                        }
                        s
                    }
                    (true, false) | (false, true) => {
                        let (mm, q) = if d_base {
                            (d_idx, e_idx)
                        } else {
                            (e_idx, d_idx)
                        };
                        let mut s = 0.0;
                        for j in 0..n {
                            for k in 0..n {
                                s += gamma.d(k, j, i, mm) * pjet.m.get(j, q) * lambda[k]
                                    + gamma.at(k, j, i) * pjet.dm[mm].get(j, q) * lambda[k];
                            }
                            s += gamma.d(q, j, i, mm) * xdot[j] + gamma.at(q, j, i) * dpl[mm][j];
                        }
                        s
                    }
                    (false, false) => {
                        let (q, r) = (d_idx, e_idx);
                        let mut s = 0.0;
                        for j in 0..n {
                            s += gamma.at(r, j, i) * pjet.m.get(j, q)
                                + gamma.at(q, j, i) * pjet.m.get(j, r);
                        }
                        s
                    }
                }
            }
        };

        // dH_e/dt = Dxi H_e + T2(J, J_col_e)
        let h_off = jac_off + m * m;
        for e in 0..m {
            let base = h_off + e * m * m;
            for a in 0..m {
                for b in 0..m {
                    let mut s = 0.0;
                    for d in 0..m {
                        s += dxi.get(a, d) * state[base + d * m + b];
                    }
                    for d in 0..m {
                        let jdb = state[jac_off + d * m + b];
                        if jdb == 0.0 {
                            continue;
                        }
                        for f in 0..m {
                            let t = t2(a, d, f);
                            if t != 0.0 {
                                s += t * jdb * state[jac_off + f * m + e];
                            }
                        }
                    }
                    out[base + a * m + b] = s;
                }
            }
        }
        Ok(())
    }

    /// Flow to each of the ascending `times` in a single adaptive pass,
    /// landing on each time exactly.
    pub fn flow_to_nodes(
        &self,
        p0: &CotangentPoint,
        times: &[f64],
        variation_order: usize,
        opts: &FlowOpts,
    ) -> Result<(Vec<NodeState>, usize, f64), FlowFailure> {
        let n = self.dim();
        assert_eq!(p0.dim(), n, "point dimension mismatch");
        let m = 2 * n;
        let variation = match variation_order {
            0 => Variation::None,
            1 => Variation::First,
            _ => Variation::Second,
        };
        let state_len = match variation {
            Variation::None => m,
            Variation::First => m + m * m,
            Variation::Second => m + m * m + m * m * m,
        };
        let mut y0 = vec![0.0; state_len];
        y0[..n].copy_from_slice(&p0.x);
        y0[n..m].copy_from_slice(&p0.lambda);
        if variation != Variation::None {
            for a in 0..m {
                y0[m + a * m + a] = 1.0;
            }
        }

        let mut nodes: Vec<NodeState> = Vec::with_capacity(times.len());
        let stats = integrate_to(
            |_t, y, dy| self.rhs(variation, y, dy),
            0.0,
            &y0,
            times,
            &opts.ode(),
            |idx, y| {
                let point = CotangentPoint::from_flat(&y[..m]);
                let jacobian = if variation != Variation::None {
                    let mut j = Mat::zeros(m, m);
                    for a in 0..m {
                        for b in 0..m {
                            j.set(a, b, y[m + a * m + b]);
                        }
                    }
                    Some(j)
                } else {
                    None
                };
                let second = if variation == Variation::Second {
                    let h_off = m + m * m;
                    let mut hs = Vec::with_capacity(m);
                    for e in 0..m {
                        let mut h = Mat::zeros(m, m);
                        for a in 0..m {
                            for b in 0..m {
                                h.set(a, b, y[h_off + (e * m + a) * m + b]);
                            }
                        }
                        hs.push(h);
                    }
                    Some(hs)
                } else {
                    None
                };
                nodes.push(NodeState {
                    t: times[idx],
                    point,
                    jacobian,
                    second,
                });
            },
        )
        .map_err(|fail| FlowFailure {
            time: fail.time,
            reason: match fail.kind {
                OdeFailureKind::StepUnderflow => "step size underflow".to_string(),
                OdeFailureKind::MaxSteps => "step budget exhausted".to_string(),
                OdeFailureKind::NonFinite => "state diverged to non-finite values".to_string(),
                OdeFailureKind::Rhs(e) => format!("spray evaluation failed: {e}"),
            },
        })?;
        Ok((nodes, stats.steps, stats.error_estimate))
    }

    /// Flow for time `t` in [0, 1]. Failure to reach `t` is encoded in
    /// `inside_u`, not thrown.
    pub fn flow(&self, p0: &CotangentPoint, t: f64, opts: &FlowOpts) -> FlowResult {
        self.flow_impl(p0, t, 0, opts)
    }

    /// Flow with the first variational equation integrated alongside.
    pub fn flow_with_jacobian(&self, p0: &CotangentPoint, t: f64, opts: &FlowOpts) -> FlowResult {
        self.flow_impl(p0, t, 1, opts)
    }

    fn flow_impl(
        &self,
        p0: &CotangentPoint,
        t: f64,
        variation_order: usize,
        opts: &FlowOpts,
    ) -> FlowResult {
        match self.flow_to_nodes(p0, &[t], variation_order, opts) {
            Ok((mut nodes, steps, err)) => {
                let node = nodes.pop().expect("one node requested");
                FlowResult {
                    inside_u: true,
                    endpoint: Some(node.point),
                    jacobian: node.jacobian,
                    steps,
                    error_estimate: err,
                    failure_time: None,
                    failure_reason: None,
                }
            }
            Err(fail) => FlowResult {
                inside_u: false,
                endpoint: None,
                jacobian: None,
                steps: 0,
                error_estimate: f64::INFINITY,
                failure_time: Some(fail.time),
                failure_reason: Some(fail.reason),
            },
        }
    }
}

/// Residual of the fiber-scaling identity `s phi_{ts}(x, lambda) =
/// phi_t(x, s lambda)`: the flow of a fiberwise-quadratic field commutes
/// with fiber dilation up to time rescaling.
pub fn homogeneity_residual(
    spray: &Spray,
    p0: &CotangentPoint,
    t: f64,
    s: f64,
    opts: &FlowOpts,
) -> Result<f64, FlowFailure> {
    let (lhs_nodes, _, _) = spray.flow_to_nodes(p0, &[t * s], 0, opts)?;
    let lhs = &lhs_nodes[0].point;
    let scaled_start = CotangentPoint {
        x: p0.x.clone(),
        lambda: p0.lambda.iter().map(|v| s * v).collect(),
    };
    let (rhs_nodes, _, _) = spray.flow_to_nodes(&scaled_start, &[t], 0, opts)?;
    let rhs = &rhs_nodes[0].point;
    let mut r = 0.0f64;
    for i in 0..p0.dim() {
        r = r.max((lhs.x[i] - rhs.x[i]).abs());
        r = r.max((s * lhs.lambda[i] - rhs.lambda[i]).abs());
    }
    Ok(r)
}

/// A-geodesic residuals along the trajectory from `p0`.
///
/// Returns `(assembly, fd)` where `assembly` re-evaluates
/// `dlambda_i/dt - Gamma^k_{ji} dx^j/dt lambda_k` from fresh expression
/// evaluations with independent loop order (exposes index bugs in the fused
/// right-hand side), and `fd` replaces the trajectory derivatives by
/// Richardson-extrapolated central differences of the integrated path (fully
/// independent of the right-hand-side code).
pub fn a_geodesic_residuals(
    spray: &Spray,
    p0: &CotangentPoint,
    n_samples: usize,
    opts: &FlowOpts,
) -> Result<(f64, f64), FlowFailure> {
    let n = spray.dim();
    let delta = 1e-4;
    let mut times = Vec::new();
    for s in 0..n_samples {
        let t = (s as f64 + 0.5) / n_samples as f64;
        for off in [-delta, -delta / 2.0, 0.0, delta / 2.0, delta] {
            times.push(t + off);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (nodes, _, _) = spray.flow_to_nodes(p0, &times, 0, opts)?;

    let mut assembly = 0.0f64;
    let mut fd = 0.0f64;
    for chunk in nodes.chunks(5) {
        let center = &chunk[2].point;
        let pmat = spray.pi.matrix(&center.x).map_err(|e| FlowFailure {
            time: chunk[2].t,
            reason: e.to_string(),
        })?;
        let gamma = spray.conn.eval(&center.x, 0).map_err(|e| FlowFailure {
            time: chunk[2].t,
            reason: e.to_string(),
        })?;
        // independent assembly: loop (i, k, j) instead of the RHS (i, j, k)
        let mut xdot = vec![0.0; n];
        for j in 0..n {
            for k in 0..n {
                xdot[j] += pmat.get(j, k) * center.lambda[k];
            }
        }
        let lambda_dot_rhs = &spray.value(center).map_err(|e| FlowFailure {
            time: chunk[2].t,
            reason: e.to_string(),
        })?[n..2 * n];
        for i in 0..n {
            let mut transport = 0.0;
            for k in 0..n {
                for j in 0..n {
                    transport += gamma.at(k, j, i) * xdot[j] * center.lambda[k];
                }
            }
            assembly = assembly.max((lambda_dot_rhs[i] - transport).abs());

            // Richardson central difference of lambda along the path
            let d_h = (chunk[4].point.lambda[i] - chunk[0].point.lambda[i]) / (2.0 * delta);
            let d_h2 = (chunk[3].point.lambda[i] - chunk[1].point.lambda[i]) / delta;
            let lambda_dot_fd = (4.0 * d_h2 - d_h) / 3.0;
            fd = fd.max((lambda_dot_fd - transport).abs());
        }
    }
    Ok((assembly, fd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::geometry::omega_can;
    use crate::linalg::max_abs_diff;

    fn so3_spray() -> Spray {
        let vars = VarSet::base(3);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(
            3,
            &vars,
            &[(0, 1, e("x3")), (0, 2, e("-x2")), (1, 2, e("x1"))],
        )
        .unwrap();
        build_spray(pi, ConnectionCoefficients::flat(3, &vars)).unwrap()
    }

    fn constant_spray_2d(p12: f64) -> Spray {
        let vars = VarSet::base(2);
        let e = Expression::number(p12, &vars);
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e)]).unwrap();
        build_spray(pi, ConnectionCoefficients::flat(2, &vars)).unwrap()
    }

    #[test]
    fn zero_bivector_flow_is_identity() {
        let vars = VarSet::base(2);
        let pi = BivectorField::zero(2, &vars);
        let spray = build_spray(pi, ConnectionCoefficients::flat(2, &vars)).unwrap();
        let p0 = CotangentPoint::new(vec![0.3, -0.7], vec![0.2, 0.9]).unwrap();
        let res = spray.flow_with_jacobian(&p0, 1.0, &FlowOpts::default());
        assert!(res.inside_u);
        assert_eq!(res.endpoint.unwrap(), p0);
        assert!(res.jacobian.unwrap().sub(&Mat::identity(4)).max_abs() == 0.0);
    }

    #[test]
    fn constant_bivector_flow_matches_closed_form() {
        // pi^{12} = 1, start ((0,0),(1,0)), t = 1: endpoint ((0,-1),(1,0)).
        let spray = constant_spray_2d(1.0);
        let p0 = CotangentPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let res = spray.flow(&p0, 1.0, &FlowOpts::default());
        let end = res.endpoint.unwrap();
        assert!(max_abs_diff(&end.x, &[0.0, -1.0]) < 1e-12);
        assert!(max_abs_diff(&end.lambda, &[1.0, 0.0]) < 1e-14);
    }

    #[test]
    fn constant_bivector_jacobian_is_shear_block() {
        let spray = constant_spray_2d(0.75);
        let p0 = CotangentPoint::new(vec![0.4, -0.1], vec![0.3, 0.8]).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let res = spray.flow_with_jacobian(&p0, t, &FlowOpts::default());
            let jac = res.jacobian.unwrap();
            let mut expected = Mat::identity(4);
            expected.set(0, 3, t * 0.75);
            expected.set(1, 2, -t * 0.75);
            assert!(jac.sub(&expected).max_abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn so3_base_velocity_is_sharp_of_fiber() {
        let spray = so3_spray();
        let p = CotangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
        let v = spray.value(&p).unwrap();
        assert!(max_abs_diff(&v[..3], &[0.0, 0.0, -1.0]) < 1e-15);
        assert!(max_abs_diff(&v[3..], &[0.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn so3_flow_preserves_casimir() {
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
        let (nodes, _, _) = spray
            .flow_to_nodes(&p0, &[0.25, 0.5, 0.75, 1.0], 0, &FlowOpts::default())
            .unwrap();
        for node in nodes {
            let r2: f64 = node.point.x.iter().map(|v| v * v).sum();
            assert!((r2 - 1.0).abs() < 1e-10, "t = {}", node.t);
        }
    }

    #[test]
    fn homogeneity_identity_holds() {
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![0.9, -0.2, 0.4], vec![0.1, 0.15, -0.05]).unwrap();
        for s in [0.25, 0.5, 2.0] {
            let r = homogeneity_residual(&spray, &p0, 1.0f64.min(1.0 / s), s, &FlowOpts::default())
                .unwrap();
            assert!(r < 1e-8, "s = {s}: residual {r}");
        }
    }

    #[test]
    fn zero_section_is_fixed_and_keeps_fiber_rows_zero() {
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![0.3, 1.1, -0.6], vec![0.0, 0.0, 0.0]).unwrap();
        let res = spray.flow_with_jacobian(&p0, 1.0, &FlowOpts::default());
        let end = res.endpoint.unwrap();
        assert!(max_abs_diff(&end.x, &p0.x) < 1e-12);
        assert!(max_abs_diff(&end.lambda, &[0.0; 3]) < 1e-14);
        let jac = res.jacobian.unwrap();
        for i in 3..6 {
            for j in 0..3 {
                assert!(
                    jac.get(i, j).abs() < 1e-10,
                    "fiber-base block entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn jacobian_satisfies_cocycle_property() {
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![1.0, 0.3, -0.5], vec![0.08, -0.12, 0.05]).unwrap();
        let opts = FlowOpts::default();
        let (s, t) = (0.4, 0.35);
        let first = spray.flow_with_jacobian(&p0, s, &opts);
        let mid = first.endpoint.unwrap();
        let js = first.jacobian.unwrap();
        let second = spray.flow_with_jacobian(&mid, t, &opts);
        let jt = second.jacobian.unwrap();
        let full = spray
            .flow_with_jacobian(&p0, s + t, &opts)
            .jacobian
            .unwrap();
        assert!(jt.matmul(&js).sub(&full).max_abs() < 1e-8);
    }

    #[test]
    fn a_geodesic_residuals_with_curved_connection() {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("1 + x1^2 + x2^2"))]).unwrap();
        let conn = ConnectionCoefficients::from_entries(
            2,
            &vars,
            &[
                (0, 0, 0, e("x2")),
                (0, 0, 1, e("0.3")),
                (1, 1, 0, e("-x1")),
                (1, 0, 1, e("x1*x2")),
            ],
        )
        .unwrap();
        let spray = build_spray(pi, conn).unwrap();
        let p0 = CotangentPoint::new(vec![0.2, -0.1], vec![0.15, 0.1]).unwrap();
        let (assembly, fd) = a_geodesic_residuals(&spray, &p0, 20, &FlowOpts::default()).unwrap();
        assert!(assembly < 1e-8, "assembly residual {assembly}");
        assert!(fd < 1e-8, "finite-difference residual {fd}");
    }

    #[test]
    fn blowup_is_reported_as_outside_u() {
        // dx1/dt = exp(5 x1) lambda_2 blows up before t = 1 for lambda_2 = 1.
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(2, &vars, &[(0, 1, e("exp(5*x1)"))]).unwrap();
        let spray = build_spray(pi, ConnectionCoefficients::flat(2, &vars)).unwrap();
        let p0 = CotangentPoint::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        let res = spray.flow(&p0, 1.0, &FlowOpts::default());
        assert!(!res.inside_u);
        assert!(res.endpoint.is_none());
        assert!(res.jacobian.is_none());
        let tf = res.failure_time.unwrap();
        assert!(tf > 0.05 && tf < 1.0, "failure time {tf}");
    }

    #[test]
    fn second_variation_matches_divided_difference_of_jacobian() {
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![1.0, 0.2, -0.3], vec![0.1, -0.05, 0.08]).unwrap();
        let opts = FlowOpts {
            rtol: 1e-12,
            atol: 1e-14,
            ..FlowOpts::default()
        };
        let (nodes, _, _) = spray.flow_to_nodes(&p0, &[1.0], 2, &opts).unwrap();
        let second = nodes[0].second.as_ref().unwrap();

        let h = 1e-5;
        for e_dir in [0usize, 4] {
            let mut zp = p0.flat_coords();
            zp[e_dir] += h;
            let mut zm = p0.flat_coords();
            zm[e_dir] -= h;
            let jp = spray
                .flow_with_jacobian(&CotangentPoint::from_flat(&zp), 1.0, &opts)
                .jacobian
                .unwrap();
            let jm = spray
                .flow_with_jacobian(&CotangentPoint::from_flat(&zm), 1.0, &opts)
                .jacobian
                .unwrap();
            let fd = jp.sub(&jm).scale(0.5 / h);
            assert!(
                fd.sub(&second[e_dir]).max_abs() < 1e-6,
                "direction {e_dir}: {}",
                fd.sub(&second[e_dir]).max_abs()
            );
        }
    }

    #[test]
    fn plain_flow_pullback_at_zero_gives_canonical_form() {
        // at t = 0 the Jacobian is the identity, so the pullback is omega_can
        let spray = so3_spray();
        let p0 = CotangentPoint::new(vec![0.5, 0.5, 0.5], vec![0.01, 0.02, 0.03]).unwrap();
        let res = spray.flow_with_jacobian(&p0, 0.0, &FlowOpts::default());
        let j = res.jacobian.unwrap();
        let w = crate::geometry::pullback_2form(&j, &omega_can(3));
        assert!(w.sub(&omega_can(3)).max_abs() == 0.0);
    }
}
