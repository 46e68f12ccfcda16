//! Command-line front end: load manifold specs, run verification suites,
//! export realized structures and spray trajectories.
//!
//! Exit codes for `verify`: 0 all checks pass, 1 a check failed, 2 the spec
//! could not be loaded, 3 every sample point fell outside U.

mod jsonout;
mod runner;
mod specfile;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use symreal::catalog::{self, ManifoldData};
use symreal::geometry::CentralDiff;
use symreal::realization::RealizeOpts;
use symreal::spray::{homogeneity_residual, CotangentPoint, FlowOpts};

use runner::RunOpts;

#[derive(Parser)]
#[command(
    name = "symreal",
    version,
    about = "Symplectic realizations of Poisson, Poisson-Nijenhuis and holomorphic Poisson structures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite for a spec and write a JSON report.
    Verify(VerifyArgs),
    /// Evaluate realized forms and bivectors at points; write a CSV table.
    Realize(RealizeArgs),
    /// Integrate the geodesic vector field from a start point; dump the trajectory.
    Spray(SprayArgs),
    /// List the built-in structures.
    Catalog,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative ODE tolerance of the adaptive flow.
    #[arg(long, default_value_t = 1e-10)]
    tol_ode_rel: f64,
    /// Absolute ODE tolerance of the adaptive flow.
    #[arg(long, default_value_t = 1e-12)]
    tol_ode_abs: f64,
    /// Gauss-Legendre node count for the t-quadrature.
    #[arg(long, default_value_t = 16)]
    quad_nodes: usize,
    /// Step for the central-difference closedness scheme.
    #[arg(long, default_value_t = 1e-4)]
    fd_h: f64,
    /// Disable the Richardson extrapolation step of the difference scheme.
    #[arg(long, default_value_t = false)]
    fd_no_richardson: bool,
    /// Fiber sampling radius.
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    /// Number of sample points.
    #[arg(long, default_value_t = 10)]
    points: usize,
    /// Sampling seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Complex dimension override for `catalog:zero`.
    #[arg(long)]
    dim: Option<usize>,
}

impl SolverArgs {
    fn run_opts(&self) -> RunOpts {
        RunOpts {
            points: self.points,
            seed: self.seed,
            radius: self.radius,
            realize: RealizeOpts {
                quad_nodes: self.quad_nodes,
                flow: FlowOpts {
                    rtol: self.tol_ode_rel,
                    atol: self.tol_ode_abs,
                    ..FlowOpts::default()
                },
                fd: CentralDiff {
                    h: self.fd_h,
                    richardson: !self.fd_no_richardson,
                },
                ..RealizeOpts::default()
            },
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Spec file path, or `catalog:<name>`.
    spec: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report output path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RealizeArgs {
    /// Spec file path, or `catalog:<name>`.
    spec: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Base-lattice export: this many points per axis instead of random sampling.
    #[arg(long)]
    grid: Option<usize>,
    /// Half-width of the base lattice box.
    #[arg(long, default_value_t = 0.5)]
    grid_box: f64,
    /// Fixed fiber for grid export, comma-separated (default 0.05 in every slot).
    #[arg(long)]
    lambda: Option<String>,
    /// Table output path.
    #[arg(long, default_value = "realize.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SprayArgs {
    /// Spec file path, or `catalog:<name>`.
    spec: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Base coordinates of the start point, comma-separated.
    #[arg(long)]
    x: String,
    /// Fiber coordinates of the start point, comma-separated.
    #[arg(long)]
    lambda: String,
    /// Flow time.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Number of output samples along [0, t].
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Also check the fiber-scaling identity for this factor and print the residual.
    #[arg(long)]
    check_homogeneity: Option<f64>,
    /// Trajectory output path.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Realize(args) => cmd_realize(args),
        Command::Spray(args) => cmd_spray(args),
        Command::Catalog => cmd_catalog(),
    }
}

/// Load a spec argument: `catalog:<name>` or a JSON file path. Returns the
/// structure and its provenance hash.
fn load_spec(arg: &str, dim: Option<usize>) -> Result<(ManifoldData, String)> {
    if let Some(name) = arg.strip_prefix("catalog:") {
        let data = catalog::build(name, dim).map_err(|e| anyhow!(e))?;
        let tag = match dim {
            Some(d) => format!("catalog:{name}:dim={d}"),
            None => format!("catalog:{name}"),
        };
        Ok((data, specfile::spec_hash(tag.as_bytes())))
    } else {
        if dim.is_some() {
            return Err(anyhow!("--dim only applies to catalog:zero"));
        }
        let bytes = fs::read(arg).with_context(|| format!("reading spec file `{arg}`"))?;
        let text = String::from_utf8(bytes.clone()).context("spec file is not UTF-8")?;
        let data = specfile::parse_spec(&text)?;
        Ok((data, specfile::spec_hash(&bytes)))
    }
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let (data, hash) = match load_spec(&args.spec, args.solver.dim) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("spec error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let opts = args.solver.run_opts();
    let samples = runner::sample_points(data.base_dim(), &opts);
    let started = Instant::now();
    let report = runner::run_verify(&data, &samples, &opts);
    let elapsed = started.elapsed();

    let doc = runner::report_json(&report, &hash, &opts);
    if let Err(e) = fs::write(&args.out, jsonout::to_bytes(&doc)) {
        eprintln!("cannot write report {}: {e}", args.out.display());
        return ExitCode::from(2);
    }

    eprintln!(
        "verified {} ({} points, {} inside U) in {:.2}s; report: {}",
        args.spec,
        report.points.len(),
        report.points_inside,
        elapsed.as_secs_f64(),
        args.out.display()
    );
    for s in &report.summaries {
        eprintln!(
            "  [{}] {:<28} max {:>12.3e}  tol {:>8.1e}",
            if s.pass { "pass" } else { "FAIL" },
            s.name,
            s.max_residual,
            s.tolerance
        );
    }
    for m in &report.margin_summaries {
        eprintln!(
            "  [{}] {:<28} min {:>12.3e}  floor {:>6.1e}",
            if m.pass { "pass" } else { "FAIL" },
            m.name,
            m.min_value,
            m.floor
        );
    }

    if report.all_points_outside() {
        eprintln!("all sample points fell outside U");
        return ExitCode::from(3);
    }
    if !report.passed() {
        if let Some((p, c)) = report.first_failure() {
            eprintln!(
                "check `{}` failed at point {} (x = {:?}, lambda = {:?}): residual {:.3e} > {:.1e}",
                c.name, p.index, p.point.x, p.point.lambda, c.residual, c.tolerance
            );
        }
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn cmd_realize(args: RealizeArgs) -> ExitCode {
    let (data, _) = match load_spec(&args.spec, args.solver.dim) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("spec error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let opts = args.solver.run_opts();
    let dim = data.base_dim();
    let points = match args.grid {
        None => runner::sample_points(dim, &opts),
        Some(per_axis) => {
            let lambda = match parse_coords_opt(args.lambda.as_deref(), dim, 0.05) {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("spec error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            match runner::grid_points(dim, per_axis, args.grid_box, &lambda) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("spec error: {e:#}");
                    return ExitCode::from(2);
                }
            }
        }
    };
    let mut out: Vec<u8> = Vec::new();
    let inside = match runner::run_realize(&data, &points, &opts, &mut out) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("realize failed: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = fs::write(&args.out, out) {
        eprintln!("cannot write table {}: {e}", args.out.display());
        return ExitCode::from(2);
    }
    eprintln!(
        "realized {} points ({} inside U); table: {}",
        points.len(),
        inside,
        args.out.display()
    );
    if inside == 0 && !points.is_empty() {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}

fn cmd_spray(args: SprayArgs) -> ExitCode {
    let (data, _) = match load_spec(&args.spec, args.solver.dim) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("spec error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let opts = args.solver.run_opts();
    let dim = data.base_dim();
    let run = || -> Result<ExitCode> {
        let x = parse_coords(&args.x, dim).context("--x")?;
        let lambda = parse_coords(&args.lambda, dim).context("--lambda")?;
        let p0 = CotangentPoint::new(x, lambda).map_err(|e| anyhow!(e))?;
        let spray = runner::build_spray_for(&data)?;
        let mut out: Vec<u8> = Vec::new();
        if let Err(e) = runner::run_spray(&spray, &p0, args.t, args.samples, &opts, &mut out) {
            eprintln!("flow failed: {e:#}");
            return Ok(ExitCode::from(3));
        }
        fs::write(&args.out, out)
            .with_context(|| format!("cannot write trajectory {}", args.out.display()))?;
        eprintln!("trajectory written to {}", args.out.display());
        if let Some(s) = args.check_homogeneity {
            match homogeneity_residual(&spray, &p0, args.t, s, &opts.realize.flow) {
                Ok(r) => println!("homogeneity residual (s = {s}): {r:.3e}"),
                Err(f) => {
                    eprintln!("homogeneity check failed: {f}");
                    return Ok(ExitCode::from(3));
                }
            }
        }
        Ok(ExitCode::SUCCESS)
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("spec error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_catalog() -> ExitCode {
    let entries = catalog::entries();
    println!("{} built-in structures:", entries.len());
    for e in entries {
        println!("  {:<18} {:<18} {}", e.name, e.kind, e.summary);
    }
    println!("use them as `symreal verify catalog:<name>`");
    ExitCode::SUCCESS
}

fn parse_coords(text: &str, dim: usize) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.context("expected comma-separated numbers")?;
    if vals.len() != dim {
        return Err(anyhow!("expected {dim} coordinates, got {}", vals.len()));
    }
    Ok(vals)
}

fn parse_coords_opt(text: Option<&str>, dim: usize, fill: f64) -> Result<Vec<f64>> {
    match text {
        None => Ok(vec![fill; dim]),
        Some(t) => parse_coords(t, dim),
    }
}
