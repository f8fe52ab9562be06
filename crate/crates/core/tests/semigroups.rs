use latticeflow::funcspace::{GridSpec, RealFunction};
use latticeflow::semiflows::{make_koopman, Semiflow};
use latticeflow::semigroups::{self, SemigroupOperator};
use latticeflow::tolerances::{LAW_TOL, TOL_ARITH};
use proptest::prelude::*;

fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
    GridSpec::new(lo, hi, n).unwrap()
}

fn operators() -> Vec<SemigroupOperator> {
    vec![
        semigroups::make_translation(),
        semigroups::make_heat(8.0, 513).unwrap(),
        make_koopman(&Semiflow::decay(1.0)).unwrap(),
    ]
}

fn sup_diff(a: &RealFunction, b: &RealFunction, g: &GridSpec) -> f64 {
    let (x, y) = (a.sample(g).unwrap(), b.sample(g).unwrap());
    x.iter().zip(&y).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}

#[test]
fn heat_first_moment_and_constants() {
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let g = grid(-10.0, 10.0, 201);
    for t in [0.01, 0.5, 3.0] {
        assert!(sup_diff(&heat.apply(t, &RealFunction::identity()).unwrap(), &RealFunction::identity(), &g) < 1e-8);
    }
    assert!(semigroups::make_heat(3.0, 513).is_err());
    assert!(semigroups::make_heat(8.0, 15).is_err());
    assert!(heat.apply(-1.0, &RealFunction::identity()).is_err());
}

#[test]
fn gaussian_variance_adds_under_heat() {
    // gauss(σ) is exp(−x²/(2σ²)); T(t) adds 2t to the variance and rescales the peak
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let g = grid(-8.0, 8.0, 321);
    let t = 0.3;
    let out = heat.apply(t, &RealFunction::parse("gauss(1)").unwrap()).unwrap();
    let var = 1.0 + 2.0 * t;
    let oracle = RealFunction::evaluator("oracle", move |x: f64| (-x * x / (2.0 * var)).exp() / var.sqrt());
    assert!(sup_diff(&out, &oracle, &g) < LAW_TOL);
}

#[test]
fn identity_law_for_every_operator() {
    let g = grid(-5.0, 5.0, 101);
    let f = RealFunction::parse("sin(x)+gauss(2)").unwrap();
    for op in operators() {
        let r = semigroups::check_semigroup_law(&op, &f, &[(0.0, 0.4), (0.4, 0.0)], &g).unwrap();
        assert!(r.max_defect <= TOL_ARITH, "{op}: {}", r.max_defect);
        assert!(r.to_csv().starts_with("s,t,defect\n"));
    }
}

#[test]
fn zero_vector_is_regulated_by_first_candidate() {
    let g = grid(-5.0, 5.0, 101);
    let cands = [RealFunction::parse("1+|x|").unwrap(), RealFunction::constant(1.0)];
    for op in operators() {
        let (u, r) =
            semigroups::regulator_search(&op, &RealFunction::constant(0.0), &cands, &[0.1], &g).unwrap().unwrap();
        assert_eq!(u.label(), cands[0].label());
        assert!(r.eps_schedule[0].saturated);
    }
}

#[test]
fn lp_probe_rejects_degenerate_input() {
    let grids = [semigroups::lp_probe_grid(1000).unwrap()];
    assert!(semigroups::lp_counterexample_probe(1.0, 0.0, &grids).is_err());
    assert!(semigroups::lp_counterexample_probe(1.0, 0.6, &grids).is_err());
    assert!(semigroups::lp_counterexample_probe(0.0, 0.25, &grids).is_err());
    assert!(semigroups::lp_probe_grid(1001).is_err());
}

#[test]
fn lp_probe_half_has_unit_exponent() {
    let grids: Vec<_> = [1000, 10_000, 100_000].iter().map(|&n| semigroups::lp_probe_grid(n).unwrap()).collect();
    let t = semigroups::lp_counterexample_probe(0.5, 0.25, &grids).unwrap();
    assert!(t.diverges);
    for r in &t.ratios {
        assert!((r - 10.0).abs() < 0.5, "ratio {r}");
    }
    assert!(t.to_csv().starts_with("grid_n,max_value\n1000,"));
}

fn test_fn() -> impl Strategy<Value = RealFunction> {
    (-2.0f64..2.0, 0.3f64..2.0, -2.0f64..2.0)
        .prop_map(|(c, w, h)| RealFunction::parse(&format!("{h}*gauss({w})+atan(x-{c})")).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operators_are_linear(f in test_fn(), g in test_fn(), a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..1.5) {
        let gr = grid(-5.0, 5.0, 81);
        let combo = f.scale(a).add_lazy(&g.scale(b)).unwrap();
        for op in operators() {
            let lhs = op.apply(t, &combo).unwrap();
            let rhs = op.apply(t, &f).unwrap().scale(a).add_lazy(&op.apply(t, &g).unwrap().scale(b)).unwrap();
            let scale = 1.0 + a.abs() + b.abs();
            prop_assert!(sup_diff(&lhs, &rhs, &gr) <= 1e-9 * scale * 10.0, "{}", op);
        }
    }

    #[test]
    fn operators_are_monotone(f in test_fn(), bump in 0.0f64..2.0, t in 0.0f64..1.5) {
        let gr = grid(-5.0, 5.0, 81);
        let g = f.add_lazy(&RealFunction::parse(&format!("{bump}*gauss(1)")).unwrap()).unwrap();
        for op in operators() {
            let (x, y) = (op.apply(t, &f).unwrap().sample(&gr).unwrap(), op.apply(t, &g).unwrap().sample(&gr).unwrap());
            prop_assert!(x.iter().zip(&y).all(|(p, q)| *p <= q + TOL_ARITH), "{}", op);
        }
    }
}
