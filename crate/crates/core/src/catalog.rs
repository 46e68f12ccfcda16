//! Built-in example structures used by the CLI and the acceptance suite.

use std::sync::Arc;

use crate::expr::{Expression, VarSet};
use crate::geometry::{BivectorField, OneOneTensorField};
use crate::holomorphic::{HolComponent, HolomorphicPoissonSpec};
use crate::spray::ConnectionCoefficients;

/// A fully specified chart structure ready for verification.
#[derive(Clone, Debug)]
pub enum ManifoldData {
    Poisson {
        dim: usize,
        pi: BivectorField,
        conn: ConnectionCoefficients,
    },
    PoissonNijenhuis {
        dim: usize,
        pi: BivectorField,
        n: OneOneTensorField,
        conn: ConnectionCoefficients,
    },
    Holomorphic {
        spec: HolomorphicPoissonSpec,
        conn: ConnectionCoefficients,
    },
}

impl ManifoldData {
    /// Dimension of the cotangent chart everything is realized on.
    pub fn cotangent_dim(&self) -> usize {
        2 * self.base_dim()
    }

    /// Dimension of the base chart (real dimension for holomorphic entries).
    pub fn base_dim(&self) -> usize {
        match self {
            ManifoldData::Poisson { dim, .. } => *dim,
            ManifoldData::PoissonNijenhuis { dim, .. } => *dim,
            ManifoldData::Holomorphic { spec, .. } => spec.real_dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ManifoldData::Poisson { .. } => "poisson",
            ManifoldData::PoissonNijenhuis { .. } => "poisson-nijenhuis",
            ManifoldData::Holomorphic { .. } => "holomorphic",
        }
    }
}

pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: &'static str,
    pub summary: &'static str,
}

/// Names and one-line summaries of the built-in structures.
pub fn entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "zero",
            kind: "holomorphic",
            summary:
                "zero bivector (any complex dimension, default 2); realizes the standard model",
        },
        CatalogEntry {
            name: "const-c2",
            kind: "holomorphic",
            summary: "constant bivector (0.8 + 0.6i) dz1^dz2 on C^2",
        },
        CatalogEntry {
            name: "so3",
            kind: "poisson",
            summary: "Lie-Poisson structure of so(3) on R^3, pi^{ij} = eps_{ijk} x_k",
        },
        CatalogEntry {
            name: "sl2",
            kind: "holomorphic",
            summary: "linear Lie-Poisson structure of sl(2, C) on C^3",
        },
        CatalogEntry {
            name: "quad-c2",
            kind: "holomorphic",
            summary: "quadratic bivector z1 z2 dz1^dz2 on C^2",
        },
        CatalogEntry {
            name: "log-canonical-c2",
            kind: "holomorphic",
            summary: "log-canonical bivector (1 - 0.5i) z1 z2 dz1^dz2 on C^2",
        },
    ]
}

/// Build a catalog structure by name. `dim` overrides the complex dimension
/// of the `zero` entry and is rejected elsewhere.
pub fn build(name: &str, dim: Option<usize>) -> Result<ManifoldData, String> {
    if dim.is_some() && name != "zero" {
        return Err(format!("catalog entry `{name}` has a fixed dimension"));
    }
    match name {
        "zero" => {
            let n = dim.unwrap_or(2);
            if n == 0 {
                return Err("zero entry needs complex dimension at least 1".to_string());
            }
            let spec = HolomorphicPoissonSpec::new(n, vec![])?;
            let vars = Arc::clone(spec.vars());
            Ok(ManifoldData::Holomorphic {
                spec,
                conn: ConnectionCoefficients::flat(2 * n, &vars),
            })
        }
        "const-c2" => holomorphic_entry(2, |vars| {
            vec![HolComponent {
                j: 0,
                k: 1,
                re: Expression::number(0.8, vars),
                im: Expression::number(0.6, vars),
            }]
        }),
        "so3" => {
            let vars = VarSet::base(3);
            let e = |s: &str| Expression::parse(s, &vars).expect("catalog expression");
            let pi = BivectorField::from_upper(
                3,
                &vars,
                &[(0, 1, e("x3")), (0, 2, e("-x2")), (1, 2, e("x1"))],
            )?;
            Ok(ManifoldData::Poisson {
                dim: 3,
                pi,
                conn: ConnectionCoefficients::flat(3, &vars),
            })
        }
        "sl2" => holomorphic_entry(3, |vars| {
            // basis (e, f, h): {z1, z2} = z3, {z1, z3} = -2 z1, {z2, z3} = 2 z2
            let e = |s: &str| Expression::parse(s, vars).expect("catalog expression");
            vec![
                HolComponent {
                    j: 0,
                    k: 1,
                    re: e("x3"),
                    im: e("y3"),
                },
                HolComponent {
                    j: 0,
                    k: 2,
                    re: e("-2*x1"),
                    im: e("-2*y1"),
                },
                HolComponent {
                    j: 1,
                    k: 2,
                    re: e("2*x2"),
                    im: e("2*y2"),
                },
            ]
        }),
        "quad-c2" => holomorphic_entry(2, |vars| {
            let e = |s: &str| Expression::parse(s, vars).expect("catalog expression");
            vec![HolComponent {
                j: 0,
                k: 1,
                re: e("x1*x2 - y1*y2"),
                im: e("x1*y2 + x2*y1"),
            }]
        }),
        "log-canonical-c2" => holomorphic_entry(2, |vars| {
            // (1 - 0.5 i) z1 z2
            let e = |s: &str| Expression::parse(s, vars).expect("catalog expression");
            vec![HolComponent {
                j: 0,
                k: 1,
                re: e("x1*x2 - y1*y2 + 0.5*(x1*y2 + x2*y1)"),
                im: e("x1*y2 + x2*y1 - 0.5*(x1*x2 - y1*y2)"),
            }]
        }),
        other => Err(format!("unknown catalog entry `{other}`")),
    }
}

fn holomorphic_entry(
    n: usize,
    make: impl Fn(&Arc<VarSet>) -> Vec<HolComponent>,
) -> Result<ManifoldData, String> {
    let vars = VarSet::holomorphic(n);
    let spec = HolomorphicPoissonSpec::new(n, make(&vars))?;
    Ok(ManifoldData::Holomorphic {
        spec,
        conn: ConnectionCoefficients::flat(2 * n, &vars),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::jacobiator;
    use crate::holomorphic::{split_sharp_residual, split_unchecked};

    #[test]
    fn listing_has_all_entries_and_they_build() {
        let list = entries();
        assert!(list.len() >= 6);
        for entry in &list {
            let built = build(entry.name, None).unwrap();
            assert_eq!(built.kind(), entry.kind, "{}", entry.name);
        }
    }

    #[test]
    fn zero_accepts_dimension_override() {
        for n in 1..=3 {
            let data = build("zero", Some(n)).unwrap();
            assert_eq!(data.base_dim(), 2 * n);
        }
        assert!(build("so3", Some(2)).is_err());
        assert!(build("nope", None).is_err());
    }

    #[test]
    fn catalog_bivectors_satisfy_jacobi_and_split_conventions() {
        let mut rng = crate::rng::Rng::new(77);
        for entry in entries() {
            let data = build(entry.name, None).unwrap();
            match data {
                ManifoldData::Poisson { pi, dim, .. } => {
                    for _ in 0..5 {
                        let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
                        assert!(
                            jacobiator(&pi, &x).unwrap().max_abs() < 1e-12,
                            "{}",
                            entry.name
                        );
                    }
                }
                ManifoldData::Holomorphic { spec, .. } => {
                    let split = split_unchecked(&spec);
                    for _ in 0..5 {
                        let x: Vec<f64> = (0..spec.real_dim())
                            .map(|_| rng.uniform(-1.0, 1.0))
                            .collect();
                        assert!(spec.cauchy_riemann_residual(&x).unwrap() < 1e-12);
                        assert!(split_sharp_residual(&split, &x).unwrap() < 1e-12);
                        assert!(jacobiator(&split.pi_i, &x).unwrap().max_abs() < 1e-11);
                        assert!(jacobiator(&split.pi_r, &x).unwrap().max_abs() < 1e-11);
                    }
                }
                ManifoldData::PoissonNijenhuis { .. } => {}
            }
        }
    }
}
