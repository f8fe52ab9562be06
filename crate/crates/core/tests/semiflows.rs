use latticeflow::funcspace::{GridSpec, PiecewiseAffineFunction, RealFunction};
use latticeflow::semiflows::{self, make_koopman, FlowKind, Semiflow, LAW_TIMES};
use latticeflow::semigroups::make_translation;
use latticeflow::tolerances::TOL_ARITH;

fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
    GridSpec::new(lo, hi, n).unwrap()
}

#[test]
fn shift_koopman_is_translation() {
    let k = make_koopman(&Semiflow::shift()).unwrap();
    let tr = make_translation();
    let g = grid(-6.0, 6.0, 241);
    for f in ["hat(0,1,1)", "sin(x)", "x^2", "gauss(0.5)"] {
        let f = RealFunction::parse(f).unwrap();
        for t in [0.0, 0.3, 1.7] {
            let a = k.apply(t, &f).unwrap().sample(&g).unwrap();
            let b = tr.apply(t, &f).unwrap().sample(&g).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() <= TOL_ARITH));
        }
    }
}

#[test]
fn decay_koopman_composition_oracle() {
    let k = make_koopman(&Semiflow::decay(1.0)).unwrap();
    let g = grid(-5.0, 5.0, 101);
    let t = 0.7;
    let out = k.apply(t, &RealFunction::parse("x^2").unwrap()).unwrap();
    for x in g.points() {
        assert!((out.eval(x) - (-2.0 * t).exp() * x * x).abs() < 1e-12);
    }
}

#[test]
fn multiplicative_map_breaks_identity_law() {
    let phi = Semiflow::custom("t*x", |t, x| t * x);
    let g = grid(-3.0, 3.0, 61);
    let r = semiflows::check_semiflow_laws(&phi, &g, &LAW_TIMES).unwrap();
    assert!(!r.pass);
    assert!((r.identity_defect - 3.0).abs() < 1e-12);
    assert!(make_koopman(&phi).is_err());
}

#[test]
fn flow_registry_strings() {
    for s in ["shift", "decay(1)", "poly_drift(2)", "compose(shift,decay(0.5))"] {
        let k: FlowKind = s.parse().unwrap();
        assert_eq!(k.to_string(), s);
    }
    assert!("warp(1)".parse::<FlowKind>().is_err());
    let phi: Semiflow = serde_json::from_str(r#"{"flow":"decay(2)","horizon":3}"#).unwrap();
    assert!((phi.phi(1.0, 1.0) - (-2.0f64).exp()).abs() < 1e-15);
}

#[test]
fn orbit_maximum_of_shifted_hat() {
    let g = grid(-3.0, 3.0, 601);
    let m = semiflows::max_over_orbit(&Semiflow::shift(), &RealFunction::hat(0.0, 1.0, 1.0), 1.0, &g, 101).unwrap();
    assert!((m.eval(-1.5) - 0.5).abs() < 1e-9);
    assert!((m.eval(-0.5) - 1.0).abs() < 1e-9);
    assert!(m.eval(1.5).abs() < 1e-9);
}

#[test]
fn lpa_trace_constants_are_admissible() {
    let f = PiecewiseAffineFunction::from_points(&[-2.0, -1.0, 0.0, 1.5, 2.0], &[0.0, 1.0, -1.0, 2.0, 0.0], 0.0, 0.0)
        .unwrap();
    let g = grid(-4.0, 4.0, 801);
    let t =
        semiflows::build_lpa_regulator(&Semiflow::shift(), &f, &RealFunction::constant(1.0), &[0.5, 0.1], &g).unwrap();
    assert!(t.pass);
    for s in &t.segments {
        assert!(s.delta > 0.0 && s.m >= 0.0 && s.s > 0.0 && s.d >= 0.0, "{s:?}");
    }
    assert!(t.checks.iter().all(|c| c.pass && c.measured_delta.is_some_and(|m| m >= c.guaranteed_delta)));
    let v = serde_json::to_value(&t).unwrap();
    assert!(v["segments"][0]["c"].is_number());
}

#[test]
fn lpa_regulator_requires_room_past_unit_time() {
    let f = PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).unwrap();
    let short = Semiflow::shift().with_horizon(1.0).unwrap();
    let g = grid(-3.0, 3.0, 301);
    assert!(semiflows::build_lpa_regulator(&short, &f, &RealFunction::constant(1.0), &[0.5], &g).is_err());
}
