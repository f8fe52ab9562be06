use latticeflow::funcspace::{self, GridSpec, LatticeKind, PiecewiseAffineFunction, RealFunction};
use latticeflow::semigroups;
use latticeflow::tolerances::TOL_ARITH;
use proptest::prelude::*;

fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
    GridSpec::new(lo, hi, n).unwrap()
}

#[test]
fn sup_of_hats_against_brute_force() {
    let f = RealFunction::from(PiecewiseAffineFunction::hat(-1.0, 1.0, 1.0).unwrap());
    let g = RealFunction::from(PiecewiseAffineFunction::hat(1.0, 1.0, 1.0).unwrap());
    let fine = grid(-3.0, 3.0, 10_001);
    let w = funcspace::lattice_op(LatticeKind::Sup, &f, Some(&g), None, &fine).unwrap();
    let pa = w.as_pa().expect("PA operands keep an exact result");
    assert_eq!(pa.knots(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert!(w.eval(0.0).abs() < TOL_ARITH);
    for x in fine.points() {
        let brute = (1.0 - (x + 1.0).abs()).max(0.0).max((1.0 - (x - 1.0).abs()).max(0.0));
        assert!((w.eval(x) - brute).abs() < TOL_ARITH, "x = {x}");
    }
}

#[test]
fn json_documents_round_trip() {
    let docs = [
        r#""hat(0,1,1)""#,
        r#"{"repr":"closed","expr":"gauss(2)"}"#,
        r#"{"repr":"pa","knots":[-1,0,1],"slopes":[0,1,-1,0],"intercepts":[0,1,1,0]}"#,
        r#"{"repr":"sampled","grid":{"x_lo":0,"x_hi":1,"n":3},"values":[0,2,1]}"#,
        r#"{"repr":"smoothed","knots":[-1,0,1],"slopes":[0,1,-1,0],"intercepts":[0,1,1,0],"variance":0.5}"#,
    ];
    let g = grid(-2.0, 2.0, 41);
    for d in docs {
        let f: RealFunction = serde_json::from_str(d).unwrap();
        let back: RealFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(f.sample(&g).unwrap(), back.sample(&g).unwrap(), "{d}");
    }
}

#[test]
fn heat_of_a_hat_stays_exact() {
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let f = RealFunction::parse("hat(0,1,1)").unwrap();
    let once = heat.apply(0.3, &heat.apply(0.2, &f).unwrap()).unwrap();
    let sp = once.as_smoothed().expect("hat input takes the exact path");
    assert!((sp.variance() - 1.0).abs() < 1e-15);
    let doc = serde_json::to_string(&once).unwrap();
    assert!(doc.contains(r#""repr":"smoothed""#));
    assert!(serde_json::from_str::<RealFunction>(
        r#"{"repr":"smoothed","knots":[0,1],"slopes":[0,1,0],"intercepts":[0,0,1],"variance":-1}"#
    )
    .is_err());
}

#[test]
fn discontinuous_pa_is_rejected() {
    let doc = r#"{"repr":"pa","knots":[0,1],"slopes":[0,0,0],"intercepts":[0,1,0]}"#;
    assert!(serde_json::from_str::<RealFunction>(doc).is_err());
}

#[test]
fn evaluators_do_not_serialize() {
    let f = RealFunction::evaluator("opaque", |x| x.sin());
    assert!(serde_json::to_string(&f).is_err());
}

#[test]
fn dominance_oracles() {
    let sq = RealFunction::parse("x^2").unwrap();
    let d = funcspace::dominates(&sq, &RealFunction::identity(), &grid(0.0, 2.0, 201), 0.0).unwrap();
    assert!(!d.holds);
    assert!((d.worst_violation - 2.0).abs() < 1e-12);
    let s = funcspace::dominates(
        &RealFunction::parse("sin(x)").unwrap(),
        &RealFunction::constant(1.0),
        &grid(-10.0, 10.0, 2001),
        0.0,
    )
    .unwrap();
    assert!(s.holds);
}

#[test]
fn norm_rejects_nonpositive_unit() {
    let r = funcspace::order_unit_norm(&RealFunction::identity(), &RealFunction::identity(), &grid(-1.0, 1.0, 11));
    assert!(r.is_err());
}

fn closed() -> impl Strategy<Value = RealFunction> {
    (-3.0f64..3.0, 0.2f64..3.0, -2.0f64..2.0, prop::sample::select(vec!["sin", "hat", "gauss"])).prop_map(
        |(c, w, h, kind)| {
            let src = match kind {
                "sin" => format!("({h})*sin(x/{w}+({c}))"),
                "hat" => format!("hat({c},{w},{h})"),
                _ => format!("({h})*gauss({w})"),
            };
            RealFunction::parse(&src).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_homogeneous_and_subadditive(f in closed(), g in closed(), lam in -5.0f64..5.0) {
        let gr = grid(-10.0, 10.0, 401);
        let u = RealFunction::parse("1+|x|").unwrap();
        let nf = funcspace::order_unit_norm(&f, &u, &gr).unwrap();
        let ng = funcspace::order_unit_norm(&g, &u, &gr).unwrap();
        let scaled = funcspace::order_unit_norm(&f.scale(lam), &u, &gr).unwrap();
        prop_assert!((scaled - lam.abs() * nf).abs() <= TOL_ARITH * (1.0 + nf));
        let sum = funcspace::lattice_op(LatticeKind::Add, &f, Some(&g), None, &gr).unwrap();
        prop_assert!(funcspace::order_unit_norm(&sum, &u, &gr).unwrap() <= nf + ng + TOL_ARITH);
    }

    #[test]
    fn abs_is_sup_with_negation(f in closed()) {
        let gr = grid(-8.0, 8.0, 321);
        let a = funcspace::lattice_op(LatticeKind::Abs, &f, None, None, &gr).unwrap();
        let neg = funcspace::lattice_op(LatticeKind::Scale, &f, None, Some(-1.0), &gr).unwrap();
        let s = funcspace::lattice_op(LatticeKind::Sup, &f, Some(&neg), None, &gr).unwrap();
        for (x, y) in a.sample(&gr).unwrap().iter().zip(s.sample(&gr).unwrap()) {
            prop_assert!((x - y).abs() <= TOL_ARITH * (1.0 + x.abs()), "{x} vs {y}");
        }
    }
}
