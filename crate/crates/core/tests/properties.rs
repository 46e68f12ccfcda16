//! Property-based invariants: parser totality and round-tripping, jet
//! derivatives against central differences, and the bilinearity/antisymmetry
//! properties of the bracket operations on random polynomial data.

use proptest::prelude::*;

use symreal::expr::{Expression, VarSet};
use symreal::geometry::{
    jacobiator, koszul_bracket_jets, nijenhuis_torsion_jets, pullback_2form, BivectorField,
    OneOneTensorField,
};
use symreal::linalg::Mat;

/// Monomial-sum polynomials of degree <= 4 in `nvars` variables, as source
/// text plus a closure-free description for independent evaluation.
fn polynomial_text(nvars: usize) -> impl Strategy<Value = String> {
    let term = (
        -2.0f64..2.0,
        proptest::collection::vec(0usize..3, nvars)
            .prop_filter("degree cap", |exps| exps.iter().sum::<usize>() <= 4),
    );
    proptest::collection::vec(term, 1..5).prop_map(move |terms| {
        let mut out = String::new();
        for (i, (c, exps)) in terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            out.push_str(&format!("({c:.6})"));
            for (v, e) in exps.iter().enumerate() {
                if *e > 0 {
                    out.push_str(&format!("*x{}^{}", v + 1, e));
                }
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parser_never_panics_on_arbitrary_input(text in "\\PC{0,60}") {
        let vars = VarSet::base(3);
        let _ = Expression::parse(&text, &vars);
    }

    #[test]
    fn valid_expressions_round_trip_structurally(text in polynomial_text(3)) {
        let vars = VarSet::base(3);
        let e = Expression::parse(&text, &vars).unwrap();
        let round = Expression::parse(&e.to_string(), &vars).unwrap();
        prop_assert_eq!(e, round);
    }

    #[test]
    fn jet_gradient_matches_central_differences(
        text in polynomial_text(3),
        px in -1.0f64..1.0,
        py in -1.0f64..1.0,
        pz in -1.0f64..1.0,
    ) {
        let vars = VarSet::base(3);
        let e = Expression::parse(&text, &vars).unwrap();
        let p = [px, py, pz];
        let jet = e.eval_jet(&p, 1).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut pp = p;
            pp[i] += h;
            let mut pm = p;
            pm[i] -= h;
            let fd = (e.eval(&pp).unwrap() - e.eval(&pm).unwrap()) / (2.0 * h);
            let denom = jet.d1(i).abs().max(1.0);
            prop_assert!(
                (jet.d1(i) - fd).abs() / denom <= 1e-8,
                "partial {i}: jet {} vs fd {fd}", jet.d1(i)
            );
        }
    }

    #[test]
    fn jacobiator_is_fully_antisymmetric(
        t12 in polynomial_text(3),
        t13 in polynomial_text(3),
        t23 in polynomial_text(3),
        px in -1.0f64..1.0,
        py in -1.0f64..1.0,
        pz in -1.0f64..1.0,
    ) {
        let vars = VarSet::base(3);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(
            3,
            &vars,
            &[(0, 1, e(&t12)), (0, 2, e(&t13)), (1, 2, e(&t23))],
        )
        .unwrap();
        let t = jacobiator(&pi, &[px, py, pz]).unwrap();
        prop_assert!(t.antisymmetry_defect() <= 1e-9 * (1.0 + t.max_abs()));
    }

    #[test]
    fn koszul_bracket_satisfies_leibniz_anchor_identity(
        t12 in polynomial_text(3),
        f_text in polynomial_text(3),
        px in -0.8f64..0.8,
        py in -0.8f64..0.8,
        pz in -0.8f64..0.8,
    ) {
        let vars = VarSet::base(3);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let pi = BivectorField::from_upper(
            3,
            &vars,
            &[(0, 1, e(&t12)), (1, 2, e("x1 - x3"))],
        )
        .unwrap();
        let x = [px, py, pz];
        let p = pi.jet(&x).unwrap();
        let alpha = symreal::geometry::CovectorField {
            comps: vec![e("x2"), e("1 + x3"), e("x1*x1")],
        }
        .jet(&x)
        .unwrap();
        let beta = symreal::geometry::CovectorField {
            comps: vec![e("x3^2"), e("-1"), e("x2")],
        }
        .jet(&x)
        .unwrap();
        let fj = e(&f_text).eval_jet(&x, 1).unwrap();
        let fbeta = beta.scaled_by(fj.value, fj.gradient());

        let lhs = koszul_bracket_jets(&p, &alpha, &fbeta);
        let base = koszul_bracket_jets(&p, &alpha, &beta);
        let mut anchor_f = 0.0;
        for j in 0..3 {
            let mut vj = 0.0;
            for k in 0..3 {
                vj += p.m.get(k, j) * alpha.a[k];
            }
            anchor_f += vj * fj.d1(j);
        }
        let scale = 1.0 + lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            let rhs = fj.value * base[i] + anchor_f * beta.a[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn torsion_is_bilinear_over_functions(
        f_text in polynomial_text(2),
        px in -0.8f64..0.8,
        py in -0.8f64..0.8,
    ) {
        let vars = VarSet::base(2);
        let e = |s: &str| Expression::parse(s, &vars).unwrap();
        let n = OneOneTensorField::from_components(
            2,
            vec![e("1 + x1*x2"), e("x2^2"), e("-x1"), e("2 - x2")],
        )
        .unwrap();
        let x = [px, py];
        let nj = n.jet(&x).unwrap();
        let xf = symreal::geometry::VectorField { comps: vec![e("x2"), e("x1^2")] }
            .jet(&x)
            .unwrap();
        let yf = symreal::geometry::VectorField { comps: vec![e("1"), e("x1*x2")] }
            .jet(&x)
            .unwrap();
        let fj = e(&f_text).eval_jet(&x, 1).unwrap();
        let fx = xf.scaled_by(fj.value, fj.gradient());

        let lhs = nijenhuis_torsion_jets(&nj, &fx, &yf);
        let base = nijenhuis_torsion_jets(&nj, &xf, &yf);
        let scale = 1.0 + lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 {
            prop_assert!((lhs[i] - fj.value * base[i]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn pullback_is_contravariantly_functorial(
        entries1 in proptest::collection::vec(-2.0f64..2.0, 16),
        entries2 in proptest::collection::vec(-2.0f64..2.0, 16),
    ) {
        let j1 = Mat::from_rows(&entries1.chunks(4).map(|r| r.to_vec()).collect::<Vec<_>>());
        let j2 = Mat::from_rows(&entries2.chunks(4).map(|r| r.to_vec()).collect::<Vec<_>>());
        let w = symreal::geometry::omega_can(2);
        let composed = pullback_2form(&j1.matmul(&j2), &w);
        let nested = pullback_2form(&j2, &pullback_2form(&j1, &w));
        prop_assert!(composed.sub(&nested).max_abs() <= 1e-12 * (1.0 + composed.max_abs()));
    }
}
