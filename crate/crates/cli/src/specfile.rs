//! JSON manifold spec files.
//!
//! A spec is a single JSON document; expressions are strings in the chart
//! grammar, indices are 1-based in the file. Examples:
//!
//! ```json
//! { "kind": "poisson", "dim": 3,
//!   "pi": [[1, 2, "x3"], [1, 3, "-x2"], [2, 3, "x1"]],
//!   "connection": "flat" }
//! ```
//!
//! ```json
//! { "kind": "poisson-nijenhuis", "dim": 2,
//!   "pi": [[1, 2, "1"]],
//!   "n": [["1 + 0.3*x1", "0"], ["0", "1 + 0.3*x1"]],
//!   "connection": { "gamma": [[1, 1, 2, "x2"]] } }
//! ```
//!
//! ```json
//! { "kind": "holomorphic", "complex_dim": 2,
//!   "f": [[1, 2, { "re": "x1*x2 - y1*y2", "im": "x1*y2 + x2*y1" }]],
//!   "connection": "flat" }
//! ```

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use symreal::catalog::ManifoldData;
use symreal::expr::{Expression, VarSet};
use symreal::geometry::{BivectorField, OneOneTensorField};
use symreal::holomorphic::{HolComponent, HolomorphicPoissonSpec};
use symreal::spray::ConnectionCoefficients;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    complex_dim: Option<usize>,
    #[serde(default)]
    pi: Vec<(usize, usize, String)>,
    #[serde(default)]
    n: Option<Vec<Vec<String>>>,
    #[serde(default)]
    f: Vec<(usize, usize, ReIm)>,
    #[serde(default = "default_connection")]
    connection: RawConnection,
}

#[derive(Deserialize)]
struct ReIm {
    re: String,
    im: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawConnection {
    Flat(String),
    Gamma {
        gamma: Vec<(usize, usize, usize, String)>,
    },
}

fn default_connection() -> RawConnection {
    RawConnection::Flat("flat".to_string())
}

/// Parse a spec document into a manifold structure.
pub fn parse_spec(text: &str) -> Result<ManifoldData> {
    let raw: RawSpec = serde_json::from_str(text).context("spec is not valid JSON")?;
    match raw.kind.as_str() {
        "poisson" | "poisson-nijenhuis" => {
            let dim = raw
                .dim
                .ok_or_else(|| anyhow!("`dim` is required for kind {}", raw.kind))?;
            if dim == 0 {
                bail!("`dim` must be at least 1");
            }
            let vars = VarSet::base(dim);
            let pi = parse_bivector(dim, &vars, &raw.pi)?;
            let conn = parse_connection(dim, &vars, &raw.connection)?;
            if raw.kind == "poisson" {
                if raw.n.is_some() {
                    bail!("kind `poisson` does not take an `n` tensor");
                }
                Ok(ManifoldData::Poisson { dim, pi, conn })
            } else {
                let rows = raw
                    .n
                    .ok_or_else(|| anyhow!("kind `poisson-nijenhuis` requires an `n` matrix"))?;
                let n = parse_tensor(dim, &vars, &rows)?;
                Ok(ManifoldData::PoissonNijenhuis { dim, pi, n, conn })
            }
        }
        "holomorphic" => {
            let n = raw
                .complex_dim
                .ok_or_else(|| anyhow!("`complex_dim` is required for kind holomorphic"))?;
            if n == 0 {
                bail!("`complex_dim` must be at least 1");
            }
            let vars = VarSet::holomorphic(n);
            let mut components = Vec::new();
            for (j, k, reim) in &raw.f {
                let (j0, k0) = to_zero_based_pair(*j, *k, n, "f")?;
                components.push(HolComponent {
                    j: j0,
                    k: k0,
                    re: parse_expr(&reim.re, &vars)?,
                    im: parse_expr(&reim.im, &vars)?,
                });
            }
            let spec = HolomorphicPoissonSpec::new(n, components).map_err(|e| anyhow!(e))?;
            let conn = parse_connection(2 * n, &vars, &raw.connection)?;
            Ok(ManifoldData::Holomorphic { spec, conn })
        }
        other => {
            bail!("unknown kind `{other}` (expected poisson, poisson-nijenhuis or holomorphic)")
        }
    }
}

fn parse_expr(text: &str, vars: &Arc<VarSet>) -> Result<Expression> {
    Expression::parse(text, vars).map_err(|e| anyhow!("in `{text}`: {e}"))
}

fn to_zero_based_pair(i: usize, j: usize, dim: usize, what: &str) -> Result<(usize, usize)> {
    if i == 0 || j == 0 || i > dim || j > dim {
        bail!("{what} index ({i}, {j}) out of range 1..={dim}");
    }
    if i >= j {
        bail!("{what} index ({i}, {j}) must have i < j (strict upper triangle)");
    }
    Ok((i - 1, j - 1))
}

fn parse_bivector(
    dim: usize,
    vars: &Arc<VarSet>,
    entries: &[(usize, usize, String)],
) -> Result<BivectorField> {
    let mut parsed = Vec::new();
    for (i, j, text) in entries {
        let (i0, j0) = to_zero_based_pair(*i, *j, dim, "pi")?;
        parsed.push((i0, j0, parse_expr(text, vars)?));
    }
    BivectorField::from_upper(dim, vars, &parsed).map_err(|e| anyhow!(e))
}

fn parse_tensor(dim: usize, vars: &Arc<VarSet>, rows: &[Vec<String>]) -> Result<OneOneTensorField> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        bail!("`n` must be a {dim}x{dim} matrix of expressions");
    }
    let mut comps = Vec::with_capacity(dim * dim);
    for row in rows {
        for text in row {
            comps.push(parse_expr(text, vars)?);
        }
    }
    OneOneTensorField::from_components(dim, comps).map_err(|e| anyhow!(e))
}

fn parse_connection(
    dim: usize,
    vars: &Arc<VarSet>,
    raw: &RawConnection,
) -> Result<ConnectionCoefficients> {
    match raw {
        RawConnection::Flat(tag) => {
            if tag != "flat" {
                bail!("connection must be \"flat\" or an object with `gamma`");
            }
            Ok(ConnectionCoefficients::flat(dim, vars))
        }
        RawConnection::Gamma { gamma } => {
            let mut entries = Vec::new();
            for (k, i, j, text) in gamma {
                if *k == 0 || *i == 0 || *j == 0 || *k > dim || *i > dim || *j > dim {
                    bail!("gamma index ({k}, {i}, {j}) out of range 1..={dim}");
                }
                entries.push((k - 1, i - 1, j - 1, parse_expr(text, vars)?));
            }
            ConnectionCoefficients::from_entries(dim, vars, &entries).map_err(|e| anyhow!(e))
        }
    }
}

/// FNV-1a 64 hash of the spec source, for report provenance.
pub fn spec_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("fnv1a:{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_poisson_spec() {
        let data = parse_spec(
            r#"{"kind":"poisson","dim":3,
                "pi":[[1,2,"x3"],[1,3,"-x2"],[2,3,"x1"]],
                "connection":"flat"}"#,
        )
        .unwrap();
        assert_eq!(data.kind(), "poisson");
        assert_eq!(data.base_dim(), 3);
    }

    #[test]
    fn parses_holomorphic_spec_with_gamma() {
        let data = parse_spec(
            r#"{"kind":"holomorphic","complex_dim":1,
                "f":[],
                "connection":{"gamma":[[1,1,2,"x1"],[2,2,2,"y1"]]}}"#,
        )
        .unwrap();
        assert_eq!(data.kind(), "holomorphic");
        assert_eq!(data.base_dim(), 2);
    }

    #[test]
    fn rejects_bad_indices_and_bad_expressions() {
        assert!(parse_spec(r#"{"kind":"poisson","dim":2,"pi":[[2,1,"1"]]}"#).is_err());
        assert!(parse_spec(r#"{"kind":"poisson","dim":2,"pi":[[1,3,"1"]]}"#).is_err());
        assert!(parse_spec(r#"{"kind":"poisson","dim":2,"pi":[[1,2,"x9"]]}"#).is_err());
        assert!(parse_spec(r#"{"kind":"nope","dim":2}"#).is_err());
        assert!(parse_spec("not json").is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(spec_hash(b"abc"), spec_hash(b"abc"));
        assert_ne!(spec_hash(b"abc"), spec_hash(b"abd"));
    }
}
