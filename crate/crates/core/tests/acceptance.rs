//! Acceptance suite. Each test prints one `ACCEPTANCE` line with its verdict
//! and then asserts it. Tests hold a shared lock so wall-clock budgets are
//! measured without competing test threads.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use latticeflow::cli::{run_job, Job};
use latticeflow::constructions::{self, condition_r_witness, ConditionR, LatticeIso};
use latticeflow::funcspace::{ConeFlag, GridSpec, PiecewiseAffineFunction, RealFunction};
use latticeflow::ru_conv::{self, FunctionFamily};
use latticeflow::semiflows::{self, make_koopman, Semiflow};
use latticeflow::semigroups::{self, SemigroupOperator};
use latticeflow::tolerances::LAW_TOL;

static SERIAL: Mutex<()> = Mutex::new(());

fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
    GridSpec::new(lo, hi, n).unwrap()
}

/// Prints the verdict line and fails the test when the criterion does not hold.
fn verdict(id: u32, name: &str, ok: bool, detail: &str, start: Instant, budget_s: f64) {
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < budget_s;
    let pass = ok && in_time;
    let line = format!(
        "ACCEPTANCE {id:>2} {} {name}: {detail} [{secs:.3}s, budget {budget_s}s]\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // the stdout handle bypasses the harness capture, so passing lines show too
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {id} ({name}) does not hold: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded its budget: {secs:.3}s");
}

fn sup_diff(a: &RealFunction, b: &RealFunction, g: &GridSpec) -> f64 {
    let (x, y) = (a.sample(g).unwrap(), b.sample(g).unwrap());
    x.iter().zip(&y).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}

#[test]
fn criterion_01_heat_constants() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let sp = std::f64::consts::PI.sqrt();
    let c1 = semigroups::gamma_constant(1).unwrap();
    let c2 = semigroups::gamma_constant(2).unwrap();
    let e1 = (c1 - 2.0 / sp).abs();
    let e2 = (c2 - sp).abs();
    verdict(
        1,
        "heat kernel constants",
        e1 <= 1e-10 && e2 <= 1e-10,
        &format!("|C1-2/sqrt(pi)|={e1:.1e} |C2-sqrt(pi)|={e2:.1e}"),
        start,
        1e-3,
    );
}

#[test]
fn criterion_02_heat_moments() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let g = grid(-10.0, 10.0, 201);
    let (one, sq) = (RealFunction::constant(1.0), RealFunction::parse("x^2").unwrap());
    let (mut mass, mut second) = (0.0f64, 0.0f64);
    for t in [0.01, 0.1, 1.0] {
        mass = mass.max(sup_diff(&heat.apply(t, &one).unwrap(), &one, &g));
        let oracle = RealFunction::parse(&format!("x^2+{}", 2.0 * t)).unwrap();
        second = second.max(sup_diff(&heat.apply(t, &sq).unwrap(), &oracle, &g));
    }
    verdict(
        2,
        "heat moments",
        mass <= 1e-8 && second <= 1e-6,
        &format!("mass defect {mass:.1e}, second moment defect {second:.1e}"),
        start,
        1.0,
    );
}

#[test]
fn criterion_03_heat_ruc_at_zero() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let g = grid(-50.0, 50.0, 1001);
    let f = RealFunction::parse("clip(1+|x|)").unwrap();
    let eps = [0.5, 0.1, 0.05];
    let r = semigroups::test_ruc_at_zero(&heat, &f, &RealFunction::constant(1.0), &eps, &g).unwrap();
    // f has Lipschitz constant 1, so |f(x+y) − f(x)| ≤ ε/2 once |y| ≤ ε/2
    let c1 = 2.0 / std::f64::consts::PI.sqrt();
    let mut ok = r.converged;
    let mut detail = Vec::new();
    for row in &r.eps_schedule {
        let delta_mod = row.eps / 2.0;
        let bound = (delta_mod / c1).powi(2);
        let got = row.threshold.map_or(0.0, |t| t.value());
        ok &= got >= bound;
        detail.push(format!("eps={} delta={got:.4e}>= {bound:.4e}", row.eps));
    }
    verdict(3, "heat ru-continuity at zero", ok, &detail.join(", "), start, 10.0);
}

#[test]
fn criterion_04_translation_on_cc() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = grid(-10.0, 10.0, 2001);
    let eps = [0.5, 0.1];
    let one = RealFunction::constant(1.0);
    let hats: Vec<RealFunction> = constructions::standard_corpus().into_iter().take(3).collect();
    let supports = [[-1.0, 1.0], [1.0, 2.0], [-3.0, 0.0]];
    let mut ok = true;
    for (f, support) in hats.iter().zip(supports) {
        let inside = f.detected_support(&g).unwrap().expect("corpus hat has compact support");
        assert!(inside[0] >= support[0] && inside[1] <= support[1]);
        let f = f.clone().with_cone(ConeFlag::supported_on(support[0], support[1]));
        let fam = {
            let f = f.clone();
            FunctionFamily::continuum("T(h)f", 0.0, 1.0, 256, move |h| {
                let s = f.shift(h)?;
                Ok(s.with_cone(ConeFlag::supported_on(support[0] - h, support[1] - h)))
            })
        };
        let conv = ru_conv::verify_ru_convergence(&fam, &f, &one, &eps, &g, Default::default()).unwrap();
        let cc = ru_conv::check_cc_characterization(&fam, &f, &g, &eps, Default::default()).unwrap();
        ok &= conv.converged && cc.verdict;
    }
    let widening = FunctionFamily::sequence("hat(0,n,1/n)", 200, |n| {
        let n = n as f64;
        Ok(RealFunction::hat(0.0, n, 1.0 / n).with_cone(ConeFlag::supported_on(-n, n)))
    });
    let w = ru_conv::check_cc_characterization(
        &widening,
        &RealFunction::constant(0.0),
        &grid(-50.0, 50.0, 2001),
        &ru_conv::CC_EPS,
        Default::default(),
    )
    .unwrap();
    ok &= w.uniform_conv && w.common_support.is_none() && !w.verdict;
    let detail = format!(
        "{} hats converge with regulator 1; widening family uniform {}, common support {:?}, verdict {}",
        hats.len(),
        w.uniform_conv,
        w.common_support,
        w.verdict
    );
    verdict(4, "translation on C_c", ok, &detail, start, 5.0);
}

#[test]
fn criterion_05_lp_counterexample() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let grids: Vec<GridSpec> = [1000, 10_000, 100_000].iter().map(|&n| semigroups::lp_probe_grid(n).unwrap()).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [0.5, 1.0, 2.0] {
        let t = semigroups::lp_counterexample_probe(p, 0.25, &grids).unwrap();
        ok &= t.diverges;
        let ratios: Vec<String> = t.ratios.iter().map(|r| format!("{r:.3}")).collect();
        detail.push(format!("p={p} ratios [{}] {}", ratios.join(", "), if t.diverges { "ok" } else { "below 2" }));
    }
    verdict(5, "L^p counterexample divergence", ok, &detail.join("; "), start, 30.0);
}

#[test]
fn criterion_06_orbit_order_bound() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = grid(-5.0, 5.0, 401);
    let one = RealFunction::constant(1.0);
    let cases: Vec<(&str, SemigroupOperator, RealFunction, f64, f64)> = vec![
        ("translation", semigroups::make_translation(), RealFunction::hat(0.0, 1.0, 1.0), 2.0, 0.5),
        ("heat", semigroups::make_heat(8.0, 513).unwrap(), RealFunction::parse("gauss(1)").unwrap(), 1.0, 0.25),
        (
            "koopman decay",
            make_koopman(&Semiflow::decay(1.0)).unwrap(),
            RealFunction::parse("1/(1+x^2)").unwrap(),
            1.0,
            0.25,
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, op, x, s, delta) in cases {
        match semigroups::orbit_order_bound(&op, &x, &one, s, delta, &g) {
            Ok(b) => {
                ok &= b.violations == 0 && b.times.len() == 64 && b.slack == 1e-8;
                detail.push(format!("{name}: n0={} violations={} worst={:.2e}", b.n0, b.violations, b.worst_violation));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(6, "orbit order bound", ok, &detail.join("; "), start, 10.0);
}

#[test]
fn criterion_07_constructions() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = grid(-5.0, 5.0, 101);
    let pairs = [(0.1, 0.2), (0.5, 0.25)];
    let heat = semigroups::make_heat(8.0, 513).unwrap();
    let tr = semigroups::make_translation();
    let decay = make_koopman(&Semiflow::decay(1.0)).unwrap();
    let built = vec![
        constructions::similar(&tr, &LatticeIso::reparam(0.5, 0.0).unwrap()).unwrap(),
        constructions::similar(&decay, &LatticeIso::scale(2.0).unwrap()).unwrap(),
        constructions::rescale(&heat, 0.5, 2.0).unwrap(),
        constructions::rescale(&tr, -1.0, 0.5).unwrap(),
        constructions::product(&heat, &tr, &constructions::DEFAULT_COMMUTE_PAIRS, &g).unwrap(),
    ];
    let corpus = constructions::standard_corpus();
    let times: Vec<f64> = pairs.iter().map(|(s, t)| s + t).collect();
    let mut worst_law = 0.0f64;
    let mut positive = true;
    for op in &built {
        for f in &corpus {
            worst_law = worst_law.max(semigroups::check_semigroup_law(op, f, &pairs, &g).unwrap().max_defect);
        }
        positive &= semigroups::check_positivity(op, &corpus, &times, &g).unwrap().pass;
    }
    let mut corpus_x = corpus.clone();
    corpus_x.push(RealFunction::identity());
    let commute =
        constructions::commutation_report(&heat, &tr, &corpus_x, &constructions::DEFAULT_COMMUTE_PAIRS, &g).unwrap();
    let noncommute = constructions::commutation_defect(&tr, &decay, &RealFunction::identity(), 1.0, 1.0, &g).unwrap();
    let ok = worst_law <= LAW_TOL && positive && commute.max_defect <= 1e-6 && noncommute > 0.1;
    let detail = format!(
        "{} constructions: law defect {worst_law:.1e}, positive {positive}; heat/translation commutation {:.1e}; shift/dilation defect {noncommute:.3}",
        built.len(),
        commute.max_defect
    );
    verdict(7, "semigroup constructions", ok, &detail, start, 30.0);
}

#[test]
fn criterion_08_semiflow_criteria() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let eps = [0.5, 0.1, 0.01];
    let g = grid(-50.0, 50.0, 1001);
    let shift = Semiflow::shift();
    let lattice = ru_conv::time_lattice(0.0, semigroups::RUC_HORIZON, ru_conv::DEFAULT_TIME_SAMPLES);
    let step_at = |t: f64| {
        let i = lattice.partition_point(|&s| s < t).clamp(1, lattice.len() - 1);
        lattice[i] - lattice[i - 1]
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, r) in [
        ("C", semiflows::check_criterion_C(&shift, &RealFunction::constant(1.0), &eps, &g).unwrap()),
        ("LipUC", semiflows::check_criterion_LipUC(&shift, &eps, &g).unwrap()),
    ] {
        for row in &r.eps_schedule {
            let d = row.threshold.map_or(f64::NAN, |t| t.value());
            ok &= (d - row.eps).abs() <= step_at(row.eps);
        }
        detail.push(format!("shift/{name} δ {:?}", r.time_thresholds()));
    }
    let decay = Semiflow::decay(1.0);
    let dc = semiflows::check_criterion_C(&decay, &RealFunction::parse("1+|x|").unwrap(), &eps, &g).unwrap();
    let dl = semiflows::check_criterion_LipUC(&decay, &eps, &g).unwrap();
    ok &= dc.converged && dl.converged;
    detail.push(format!("decay converged {} {}", dc.converged, dl.converged));
    let mut prev: Option<f64> = None;
    let mut ds = Vec::new();
    for r in [50.0, 100.0, 200.0, 400.0] {
        let rep = semiflows::check_criterion_LipUC(&Semiflow::poly_drift(2.0), &[0.1], &grid(-r, r, 2001)).unwrap();
        let d = rep.eps_schedule[0].threshold.map_or(0.0, |t| t.value());
        if let Some(p) = prev {
            ok &= d < 0.5 * p;
        }
        prev = Some(d);
        ds.push(format!("{d:.3e}"));
    }
    detail.push(format!("poly_drift δ(0.1) on windows 50..400: {}", ds.join(" ")));
    verdict(8, "semiflow criteria", ok, &detail.join("; "), start, 10.0);
}

#[test]
fn criterion_09_lpa_regulator() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = grid(-5.0, 5.0, 1001);
    let corpus = [
        PiecewiseAffineFunction::from_points(&[-2.0, -1.0, 1.0, 2.0], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.0).unwrap(),
        PiecewiseAffineFunction::from_points(&[-1.5, -0.5, 0.5, 1.5], &[0.0, 2.0, -1.0, 0.0], 0.0, 0.0).unwrap(),
        PiecewiseAffineFunction::from_points(&[-3.0, 0.0, 0.5, 2.0], &[1.0, -1.0, 0.5, 0.0], 0.5, -0.25).unwrap(),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for f in &corpus {
        assert_eq!(f.slopes().len(), 5);
        let t = semiflows::build_lpa_regulator(&Semiflow::shift(), f, &RealFunction::constant(1.0), &[0.5, 0.1], &g)
            .unwrap();
        ok &= t.pass && t.cross_check.converged && t.checks.iter().all(|c| c.pass && c.worst_slack <= 0.0);
        let deltas: Vec<String> = t.checks.iter().map(|c| format!("{:.3e}", c.guaranteed_delta)).collect();
        detail.push(format!("δ [{}]", deltas.join(", ")));
    }
    verdict(9, "LPA regulator construction", ok, &detail.join("; "), start, 10.0);
}

#[test]
fn criterion_10_condition_r() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = grid(-50.0, 50.0, 10_001);
    let plateaus: Vec<RealFunction> = (1..=10)
        .map(|n| {
            let n = n as f64;
            RealFunction::parse(&format!("plateau({n})")).unwrap().with_cone(ConeFlag::supported_on(-n - 1.0, n + 1.0))
        })
        .collect();
    let failure = match condition_r_witness(&plateaus, &g, None).unwrap() {
        ConditionR::Failure { evidence, .. } => evidence.len(),
        ConditionR::Witness { .. } => 0,
    };
    let constants: Vec<RealFunction> = (1..=10).map(|n| RealFunction::constant(n as f64)).collect();
    let witness = match condition_r_witness(&constants, &g, Some(&RealFunction::constant(1.0))).unwrap() {
        ConditionR::Witness { lambdas, verified, .. } => {
            verified && lambdas.iter().enumerate().all(|(i, l)| (l - 1.0 / (i + 1) as f64).abs() < 1e-12)
        }
        ConditionR::Failure { .. } => false,
    };
    verdict(
        10,
        "condition (R)",
        failure > 0 && witness,
        &format!("plateau evidence rows {failure}, scaled constants witness {witness}"),
        start,
        1.0,
    );
}

fn run_twice(bin: &Path, dir: &Path, job: &str, tag: &str) -> bool {
    let job_path = dir.join(format!("{tag}.json"));
    std::fs::write(&job_path, job).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("{tag}_{k}"));
        let st = Command::new(bin).args(["run", "--job"]).arg(&job_path).arg("--out").arg(&out).output().unwrap();
        assert!(st.status.code().is_some());
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        outputs.push(
            files.iter().map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap())).collect::<Vec<_>>(),
        );
    }
    outputs[0] == outputs[1]
}

#[test]
fn criterion_11_determinism() {
    let _l = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let bin = Path::new(env!("CARGO_BIN_EXE_latticeflow"));
    let jobs = [
        ("laws", r#"{"prop":"semiflow_laws","flow":"decay(1.0)"}"#),
        ("probe", r#"{"prop":"lp_probe","p":1,"δ":0.25,"grids":[1e3,1e4,1e5]}"#),
        (
            "cc",
            r#"{"prop":"cc_characterization","family":{"member":"hat(0,n,1/n)","n_max":30,"support":["-n","n"]},"expect":false}"#,
        ),
        ("lpa", r#"{"prop":"lpa_regulator"}"#),
        ("orbit", r#"{"prop":"orbit_bound","semigroup":"heat","x":"gauss(1)","s":1,"delta":0.25}"#),
    ];
    let mut same = 0;
    for (tag, job) in jobs {
        same += run_twice(bin, dir.path(), job, tag) as usize;
    }
    let in_process = {
        let j = Job::from_json(jobs[3].1).unwrap();
        run_job(&j).unwrap().report_text() == run_job(&j).unwrap().report_text()
    };
    verdict(
        11,
        "determinism",
        same == jobs.len() && in_process,
        &format!("{same}/{} jobs byte-identical across runs", jobs.len()),
        start,
        60.0,
    );
}
