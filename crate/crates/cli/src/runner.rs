//! Command implementations: sampling, parallel verification, report
//! serialization, and the realize/spray exports.

use std::io::Write;

use anyhow::{anyhow, Context, Result};
use serde_json::{json, Map, Value};

use symreal::catalog::ManifoldData;
use symreal::holomorphic::{
    build_holomorphic_omega, build_underline_forms, build_underline_j, holomorphic_bivector,
    split_unchecked, verify_holomorphic,
};
use symreal::linalg::Mat;
use symreal::realization::{
    realization_bivector, realized_two_form, realized_two_form_twisted, verify_realization,
    verify_realization_pn, RealizeOpts,
};
use symreal::report::{PointRecord, VerificationReport};
use symreal::rng::Rng;
use symreal::spray::{build_spray, CotangentPoint, Spray};

use crate::jsonout::{csv_float, fval};

/// Solver options shared by the commands, mirroring the CLI flags.
#[derive(Clone, Copy, Debug)]
pub struct RunOpts {
    pub points: usize,
    pub seed: u64,
    pub radius: f64,
    pub realize: RealizeOpts,
}

impl RunOpts {
    pub fn options_json(&self) -> Value {
        json!({
            "points": self.points,
            "seed": self.seed,
            "radius": fval(self.radius),
            "quad_nodes": self.realize.quad_nodes,
            "tol_ode_rel": fval(self.realize.flow.rtol),
            "tol_ode_abs": fval(self.realize.flow.atol),
            "fd_h": fval(self.realize.fd.h),
            "fd_richardson": self.realize.fd.richardson,
        })
    }
}

/// Seeded sample points: base uniform in [-0.5, 0.5]^n, fiber uniform in the
/// ball of the configured radius.
pub fn sample_points(dim: usize, opts: &RunOpts) -> Vec<CotangentPoint> {
    let mut rng = Rng::new(opts.seed);
    (0..opts.points)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let lambda = rng.in_ball(dim, opts.radius);
            CotangentPoint::new(x, lambda).expect("finite sample")
        })
        .collect()
}

fn verify_slice(
    data: &ManifoldData,
    samples: &[CotangentPoint],
    opts: &RealizeOpts,
) -> VerificationReport {
    match data {
        ManifoldData::Poisson { pi, conn, .. } => verify_realization(pi, conn, samples, opts),
        ManifoldData::PoissonNijenhuis { pi, n, conn, .. } => {
            verify_realization_pn(pi, n, conn, samples, opts)
        }
        ManifoldData::Holomorphic { spec, conn } => verify_holomorphic(spec, conn, samples, opts),
    }
}

/// Worker cap: `REALIZE_THREADS` when set, otherwise the available
/// parallelism. Results do not depend on the chosen value.
pub fn thread_cap(points: usize) -> usize {
    let env = std::env::var("REALIZE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    env.unwrap_or(hw).clamp(1, points.max(1))
}

/// Verify all samples, chunked over worker threads; per-point records are
/// reassembled in sample order, so the report is identical for any thread
/// count.
pub fn run_verify(
    data: &ManifoldData,
    samples: &[CotangentPoint],
    opts: &RunOpts,
) -> VerificationReport {
    let threads = thread_cap(samples.len());
    let kind = data.kind();
    if threads <= 1 || samples.len() <= 1 {
        return verify_slice(data, samples, &opts.realize);
    }
    let chunk_len = samples.len().div_ceil(threads);
    let chunks: Vec<&[CotangentPoint]> = samples.chunks(chunk_len).collect();
    let mut merged: Vec<PointRecord> = Vec::with_capacity(samples.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| scope.spawn(|| verify_slice(data, chunk, &opts.realize).points))
            .collect();
        for handle in handles {
            merged.extend(handle.join().expect("verify worker"));
        }
    });
    for (i, rec) in merged.iter_mut().enumerate() {
        rec.index = i;
    }
    VerificationReport::from_points(kind, merged)
}

/// Report document; all content is deterministic for fixed inputs.
pub fn report_json(report: &VerificationReport, spec_hash: &str, opts: &RunOpts) -> Value {
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| {
            let mut residuals = Map::new();
            for c in &p.checks {
                residuals.insert(c.name.to_string(), fval(c.residual));
            }
            let mut margins = Map::new();
            for m in &p.margins {
                margins.insert(m.name.to_string(), fval(m.value));
            }
            json!({
                "index": p.index,
                "x": p.point.x.iter().map(|v| fval(*v)).collect::<Vec<_>>(),
                "lambda": p.point.lambda.iter().map(|v| fval(*v)).collect::<Vec<_>>(),
                "inside_u": p.inside_u,
                "failure": p.failure.clone().map(Value::from).unwrap_or(Value::Null),
                "residuals": Value::Object(residuals),
                "margins": Value::Object(margins),
            })
        })
        .collect();
    let checks: Vec<Value> = report
        .summaries
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "max_residual": fval(s.max_residual),
                "tolerance": fval(s.tolerance),
                "points": s.points,
                "pass": s.pass,
            })
        })
        .collect();
    let margins: Vec<Value> = report
        .margin_summaries
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "min_value": fval(s.min_value),
                "floor": fval(s.floor),
                "points": s.points,
                "pass": s.pass,
            })
        })
        .collect();
    json!({
        "spec_hash": spec_hash,
        "kind": report.kind,
        "options": opts.options_json(),
        "points": points,
        "aggregate": {
            "pass": report.passed(),
            "points_inside": report.points_inside,
            "checks": checks,
            "margins": margins,
        },
    })
}

// ---------------------------------------------------------------------------
// realize: matrix export
// ---------------------------------------------------------------------------

fn matrix_headers(prefix: &str, m: usize, out: &mut Vec<String>) {
    for i in 1..=m {
        for j in 1..=m {
            out.push(format!("{prefix}_{i}_{j}"));
        }
    }
}

fn push_matrix(row: &mut Vec<String>, mat: Option<&Mat>, m: usize) {
    match mat {
        Some(mat) => {
            for i in 0..m {
                for j in 0..m {
                    row.push(csv_float(mat.get(i, j)));
                }
            }
        }
        None => row.extend(std::iter::repeat_n(String::new(), m * m)),
    }
}

/// Evaluate the realized matrices at the given points and write one CSV row
/// per point (outside-U rows are flagged and left empty).
pub fn run_realize(
    data: &ManifoldData,
    points: &[CotangentPoint],
    opts: &RunOpts,
    writer: &mut impl Write,
) -> Result<usize> {
    let dim = data.base_dim();
    let m = 2 * dim;
    let mut header: Vec<String> = Vec::new();
    for i in 1..=dim {
        header.push(format!("x{i}"));
    }
    for i in 1..=dim {
        header.push(format!("l{i}"));
    }
    match data {
        ManifoldData::Poisson { .. } => {
            matrix_headers("w", m, &mut header);
            matrix_headers("pi", m, &mut header);
        }
        ManifoldData::PoissonNijenhuis { .. } => {
            matrix_headers("w", m, &mut header);
            matrix_headers("wn", m, &mut header);
            matrix_headers("pi", m, &mut header);
            matrix_headers("pin", m, &mut header);
        }
        ManifoldData::Holomorphic { .. } => {
            matrix_headers("wr", m, &mut header);
            matrix_headers("wi", m, &mut header);
            matrix_headers("pire", m, &mut header);
            matrix_headers("piim", m, &mut header);
            matrix_headers("j", m, &mut header);
        }
    }
    header.push("inside_u".to_string());
    writeln!(writer, "{}", header.join(","))?;

    let mut inside = 0usize;
    for p in points {
        let mut row: Vec<String> = Vec::new();
        for v in p.x.iter().chain(&p.lambda) {
            row.push(csv_float(*v));
        }
        let ok = write_matrices_for_point(data, p, opts, m, &mut row);
        row.push(if ok { "1".to_string() } else { "0".to_string() });
        writeln!(writer, "{}", row.join(","))?;
        if ok {
            inside += 1;
        }
    }
    Ok(inside)
}

fn write_matrices_for_point(
    data: &ManifoldData,
    p: &CotangentPoint,
    opts: &RunOpts,
    m: usize,
    row: &mut Vec<String>,
) -> bool {
    let ropts = &opts.realize;
    match data {
        ManifoldData::Poisson { pi, conn, .. } => match realized_two_form(pi, conn, p, ropts) {
            Ok(w) => {
                let biv = realization_bivector(&w, ropts.det_floor).ok();
                push_matrix(row, Some(&w.mat), m);
                push_matrix(row, biv.as_ref(), m);
                true
            }
            Err(_) => {
                push_matrix(row, None, m);
                push_matrix(row, None, m);
                false
            }
        },
        ManifoldData::PoissonNijenhuis { pi, n, conn, .. } => {
            let plain = realized_two_form(pi, conn, p, ropts);
            let twisted = realized_two_form_twisted(pi, conn, n, p, ropts);
            match (plain, twisted) {
                (Ok(w), Ok(wn)) => {
                    let biv = realization_bivector(&w, ropts.det_floor).ok();
                    let bivn = realization_bivector(&wn, ropts.det_floor).ok();
                    push_matrix(row, Some(&w.mat), m);
                    push_matrix(row, Some(&wn.mat), m);
                    push_matrix(row, biv.as_ref(), m);
                    push_matrix(row, bivn.as_ref(), m);
                    true
                }
                _ => {
                    for _ in 0..4 {
                        push_matrix(row, None, m);
                    }
                    false
                }
            }
        }
        ManifoldData::Holomorphic { spec, conn } => {
            let split = split_unchecked(spec);
            match build_underline_forms(&split, conn, p, ropts) {
                Ok((wr, wi)) => {
                    let uj = build_underline_j(&wr, &wi).ok();
                    let omega = build_holomorphic_omega(&wr, &wi);
                    let biv = uj
                        .as_ref()
                        .and_then(|j| holomorphic_bivector(&omega, j).ok());
                    push_matrix(row, Some(&wr.mat), m);
                    push_matrix(row, Some(&wi.mat), m);
                    push_matrix(row, biv.as_ref().map(|(re, _)| re), m);
                    push_matrix(row, biv.as_ref().map(|(_, im)| im), m);
                    push_matrix(row, uj.as_ref(), m);
                    true
                }
                Err(_) => {
                    for _ in 0..5 {
                        push_matrix(row, None, m);
                    }
                    false
                }
            }
        }
    }
}

/// Lattice of base points over `[-half, half]^dim` with a fixed fiber.
pub fn grid_points(
    dim: usize,
    per_axis: usize,
    half: f64,
    lambda: &[f64],
) -> Result<Vec<CotangentPoint>> {
    if lambda.len() != dim {
        return Err(anyhow!(
            "--lambda needs {dim} components for this chart, got {}",
            lambda.len()
        ));
    }
    if per_axis < 1 {
        return Err(anyhow!("--grid needs at least one point per axis"));
    }
    let coords = |i: usize| -> f64 {
        if per_axis == 1 {
            0.0
        } else {
            -half + 2.0 * half * (i as f64) / (per_axis as f64 - 1.0)
        }
    };
    let mut out = Vec::new();
    let total = per_axis.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; dim];
        for slot in x.iter_mut() {
            *slot = coords(rem % per_axis);
            rem /= per_axis;
        }
        out.push(CotangentPoint::new(x, lambda.to_vec()).map_err(|e| anyhow!(e))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// spray
// ---------------------------------------------------------------------------

pub fn build_spray_for(data: &ManifoldData) -> Result<Spray> {
    match data {
        ManifoldData::Poisson { pi, conn, .. }
        | ManifoldData::PoissonNijenhuis { pi, conn, .. } => {
            build_spray(pi.clone(), conn.clone()).map_err(|e| anyhow!(e))
        }
        ManifoldData::Holomorphic { spec, conn } => {
            let split = split_unchecked(spec);
            build_spray(split.pi_i, conn.clone()).map_err(|e| anyhow!(e))
        }
    }
}

/// Integrate the trajectory and write `t, x .., lambda ..` rows.
pub fn run_spray(
    spray: &Spray,
    p0: &CotangentPoint,
    t_end: f64,
    samples: usize,
    opts: &RunOpts,
    writer: &mut impl Write,
) -> Result<()> {
    let dim = spray.dim();
    let times: Vec<f64> = (0..=samples)
        .map(|i| t_end * i as f64 / samples.max(1) as f64)
        .collect();
    let (nodes, _, _) = spray
        .flow_to_nodes(p0, &times, 0, &opts.realize.flow)
        .map_err(|f| anyhow!("{f}"))?;
    let mut header = vec!["t".to_string()];
    for i in 1..=dim {
        header.push(format!("x{i}"));
    }
    for i in 1..=dim {
        header.push(format!("l{i}"));
    }
    writeln!(writer, "{}", header.join(",")).context("write trajectory")?;
    for node in nodes {
        let mut row = vec![csv_float(node.t)];
        for v in node.point.x.iter().chain(&node.point.lambda) {
            row.push(csv_float(*v));
        }
        writeln!(writer, "{}", row.join(",")).context("write trajectory")?;
    }
    Ok(())
}
