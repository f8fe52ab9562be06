//! Verification jobs: a JSON job names a registered check and its inputs,
//! and running it yields a deterministic `report.json` plus CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::constructions::{self, condition_r_witness, ConditionR, SemigroupSpec};
use crate::error::{Error, Result};
use crate::funcspace::{self, ConeFlag, Expr, GridSpec, LatticeKind, PiecewiseAffineFunction, RealFunction};
use crate::ru_conv::{
    self, ConvergenceOptions, FunctionFamily, RegulatorReport, DEFAULT_REFINE_STEPS, DEFAULT_TIME_SAMPLES,
};
use crate::semiflows::{self, Semiflow, LAW_TIMES};
use crate::semigroups::{self, SemigroupOperator};
use crate::tolerances::*;

/// A registered check: id, the statement it exercises, and the CSV it emits.
pub struct Prop {
    pub id: &'static str,
    pub anchor: &'static str,
    pub csv: &'static str,
}

pub const PROPS: &[Prop] = &[
    Prop { id: "order_unit_norm", anchor: "‖f‖_u = inf{λ > 0 : |f| ≤ λu}", csv: "" },
    Prop { id: "lattice_ops", anchor: "f∨g + f∧g = f + g and |f| = f∨(−f)", csv: "" },
    Prop {
        id: "ru_convergence", anchor: "|x_α − x| ≤ ε·u from some index on", csv: "schedule.csv: eps,threshold"
    },
    Prop {
        id: "cc_characterization",
        anchor: "ru-convergence in C_c(ℝ) = uniform convergence + one compact K with f_α = 0 off K",
        csv: "schedule.csv: eps,threshold",
    },
    Prop {
        id: "lpa_density",
        anchor: "piecewise affine interpolants approximate f uniformly on the window",
        csv: "lpa.csv: knot_budget,max_error",
    },
    Prop { id: "heat_constants", anchor: "C_N = 2·Γ((N+1)/2)/Γ(N/2)", csv: "constants.csv: n,c_n" },
    Prop {
        id: "heat_moments",
        anchor: "T(t)1 = 1 and T(t)x² = x² + 2t",
        csv: "moments.csv: t,mass_defect,second_moment_defect",
    },
    Prop {
        id: "heat_ruc",
        anchor: "heat semigroup: |T(h)f − f| ≤ ε·u for h ∈ [0, C_N^{-2}·δ²]",
        csv: "schedule.csv: eps,threshold",
    },
    Prop {
        id: "translation_ruc",
        anchor: "translation semigroup is relatively uniformly continuous on C_c(ℝ)",
        csv: "schedule.csv: eps,threshold",
    },
    Prop {
        id: "lp_probe",
        anchor: "translation on L^p: sup_t T(t)f unbounded for f = |x − 1/2|^{−1/(2p)}",
        csv: "divergence.csv: grid_n,max_value",
    },
    Prop {
        id: "orbit_bound",
        anchor: "{|T(t)x| : 0 ≤ t ≤ s} ≤ v = ⋁_{k≤n0} T(δ)^k(|x| + u)",
        csv: "orbit_bound.csv: x,v",
    },
    Prop {
        id: "ruc_search",
        anchor: "T(h)x → x relatively uniformly as h ↘ 0 for positive x",
        csv: "schedule.csv: eps,threshold",
    },
    Prop { id: "semigroup_law", anchor: "T(0) = I and T(s+t) = T(t)T(s), positivity", csv: "law.csv: s,t,defect" },
    Prop {
        id: "commutation",
        anchor: "T(t)S(s) = S(s)T(t) before forming t ↦ T(t)S(t)",
        csv: "commutation.csv: function,s,t,defect",
    },
    Prop {
        id: "condition_r",
        anchor: "positive scalars λ_n with (λ_n u_n) order bounded",
        csv: "condition_r.csv: index,lambda",
    },
    Prop { id: "semiflow_laws", anchor: "φ(0,x) = x and φ(t+s,x) = φ(t,φ(s,x))", csv: "" },
    Prop { id: "criterion_c", anchor: "|φ(h,x) − x| ≤ ε·u(x) for small h", csv: "schedule.csv: eps,threshold" },
    Prop {
        id: "criterion_lipuc", anchor: "|φ(h,x) − x| ≤ ε·(1+|x|) for small h", csv: "schedule.csv: eps,threshold"
    },
    Prop { id: "max_over_orbit", anchor: "g_{f,s}(x) = max_{t∈[0,s]} |f(φ(t,x))|", csv: "orbit_max.csv: x,g" },
    Prop {
        id: "lpa_regulator",
        anchor: "the piecewise affine v built from (δ_n, M_n, s_n, c_n, d_n) regulates T_φ(h)f → f",
        csv: "lpa_segments.csv: j_lo,j_hi,slope,delta,m,s,c,d",
    },
];

pub fn find_prop(id: &str) -> Option<&'static Prop> {
    PROPS.iter().find(|p| p.id == id)
}

/// One line per registered check: `id — statement`.
pub fn list_props() -> String {
    PROPS.iter().map(|p| format!("{} — {}\n", p.id, p.anchor)).collect()
}

/// Text for `--help` listing the CSV columns written by each check.
pub fn csv_help() -> String {
    let mut s = String::from("CSV outputs (written next to report.json):\n");
    for p in PROPS.iter().filter(|p| !p.csv.is_empty()) {
        s.push_str(&format!("  {:<20} {}\n", p.id, p.csv));
    }
    s.push_str("Empty threshold cells mark ε rows with no admissible threshold.\n");
    s
}

fn grid_from_value<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<GridSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum G {
        Text(String),
        Spec(GridSpec),
    }
    Ok(match Option::<G>::deserialize(d)? {
        None => None,
        Some(G::Spec(g)) => Some(g),
        Some(G::Text(t)) => Some(t.parse().map_err(serde::de::Error::custom)?),
    })
}

/// A verification job as read from JSON.
#[derive(Debug, Clone, Deserialize)]
pub struct Job {
    pub prop: Option<String>,
    #[serde(default, deserialize_with = "grid_from_value")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl Job {
    pub fn from_json(text: &str) -> Result<Job> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn for_prop(prop: &str) -> Job {
        Job { prop: Some(prop.to_string()), grid: None, eps: None, params: Map::new() }
    }
}

/// Result of a job: verdict, full report and CSV tables.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub report: Value,
    pub csv: Vec<(String, String)>,
}

impl Outcome {
    pub fn report_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report is valid JSON");
        s.push('\n');
        s
    }

    /// Writes `report.json` and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = vec![dir.join("report.json")];
        fs::write(&written[0], self.report_text())?;
        for (name, body) in &self.csv {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

struct Ctx {
    grid: Option<GridSpec>,
    eps: Option<Vec<f64>>,
}

impl Ctx {
    fn grid(&self, lo: f64, hi: f64, n: usize) -> Result<GridSpec> {
        self.grid.map_or_else(|| GridSpec::new(lo, hi, n), Ok)
    }

    fn eps(&self, default: &[f64]) -> Vec<f64> {
        self.eps.clone().unwrap_or_else(|| default.to_vec())
    }
}

struct PropOutput {
    pass: bool,
    params: Value,
    grid: Option<GridSpec>,
    eps: Option<Vec<f64>>,
    result: Value,
    csv: Vec<(String, String)>,
}

impl PropOutput {
    fn new(pass: bool, params: impl Serialize, result: impl Serialize) -> Result<Self> {
        Ok(PropOutput {
            pass,
            params: serde_json::to_value(params).map_err(|e| Error::NotSerializable(e.to_string()))?,
            grid: None,
            eps: None,
            result: serde_json::to_value(result).map_err(|e| Error::NotSerializable(e.to_string()))?,
            csv: Vec::new(),
        })
    }

    fn grid(mut self, g: GridSpec) -> Self {
        self.grid = Some(g);
        self
    }

    fn eps(mut self, e: &[f64]) -> Self {
        self.eps = Some(e.to_vec());
        self
    }

    fn csv(mut self, name: &str, body: String) -> Self {
        self.csv.push((name.to_string(), body));
        self
    }
}

fn params<T: DeserializeOwned>(map: &Map<String, Value>) -> Result<T> {
    Ok(serde_json::from_value(Value::Object(map.clone()))?)
}

fn tolerance_table() -> Value {
    json!({
        "tol_arith": TOL_ARITH,
        "tol_knot": TOL_KNOT,
        "tol_zero": TOL_ZERO,
        "law_tol": LAW_TOL,
        "quad_tol": QUAD_TOL,
        "flow_tol": FLOW_TOL,
    })
}

/// Runs a job. Failed checks give `pass = false`; malformed input and
/// violated preconditions are errors.
pub fn run_job(job: &Job) -> Result<Outcome> {
    let id = job.prop.as_deref().ok_or_else(|| Error::Parse("job has no 'prop'".into()))?;
    let prop = find_prop(id).ok_or_else(|| Error::Parse(format!("unknown prop '{id}' (see list-props)")))?;
    if let Some(e) = &job.eps {
        ru_conv::validate_eps(e)?;
    }
    let ctx = Ctx { grid: job.grid, eps: job.eps.clone() };
    let p = &job.params;
    let out = match prop.id {
        "order_unit_norm" => order_unit_norm(&ctx, p),
        "lattice_ops" => lattice_ops(&ctx, p),
        "ru_convergence" => ru_convergence(&ctx, p),
        "cc_characterization" => cc_characterization(&ctx, p),
        "lpa_density" => lpa_density(&ctx, p),
        "heat_constants" => heat_constants(p),
        "heat_moments" => heat_moments(&ctx, p),
        "heat_ruc" => heat_ruc(&ctx, p),
        "translation_ruc" => translation_ruc(&ctx, p),
        "lp_probe" => lp_probe(p),
        "orbit_bound" => orbit_bound(&ctx, p),
        "ruc_search" => ruc_search(&ctx, p),
        "semigroup_law" => semigroup_law(&ctx, p),
        "commutation" => commutation(&ctx, p),
        "condition_r" => condition_r(&ctx, p),
        "semiflow_laws" => semiflow_laws(&ctx, p),
        "criterion_c" => criterion_c(&ctx, p, false),
        "criterion_lipuc" => criterion_c(&ctx, p, true),
        "max_over_orbit" => max_over_orbit(&ctx, p),
        "lpa_regulator" => lpa_regulator(&ctx, p),
        other => unreachable!("prop {other} registered without a handler"),
    };
    let (out, failure) = match out {
        Ok(o) => (o, None),
        // a check that reports failure through an error still yields a report
        Err(Error::CheckFailed(msg)) => (PropOutput::new(false, Value::Object(p.clone()), Value::Null)?, Some(msg)),
        Err(e) => return Err(e),
    };
    let mut config = Map::new();
    config.insert("params".into(), out.params);
    config.insert("grid".into(), serde_json::to_value(out.grid.or(job.grid)).expect("grid serializes"));
    config.insert("eps".into(), json!(out.eps.or_else(|| job.eps.clone())));
    config.insert("tolerances".into(), tolerance_table());
    config.insert(
        "sampling".into(),
        json!({
            "time_samples": DEFAULT_TIME_SAMPLES,
            "time_dynamic_range": ru_conv::TIME_DYNAMIC_RANGE,
            "refine_steps": DEFAULT_REFINE_STEPS,
            "orbit_samples": semigroups::ORBIT_SAMPLES,
            "heat_t_min": semigroups::HeatParams::default().t_min,
            "rng_seed": Value::Null,
        }),
    );
    let mut report = Map::new();
    report.insert("prop".into(), json!(prop.id));
    report.insert("statement".into(), json!(prop.anchor));
    report.insert("verdict".into(), json!(if out.pass { "pass" } else { "fail" }));
    report.insert("config".into(), Value::Object(config));
    report.insert("result".into(), out.result);
    if let Some(msg) = failure {
        report.insert("failure".into(), json!(msg));
    }
    Ok(Outcome { pass: out.pass, report: Value::Object(report), csv: out.csv })
}

/// Parses a JSON job, applies overrides, runs it and writes the outputs.
pub fn run_job_json(text: &str, out_dir: &Path) -> Result<Outcome> {
    let job = Job::from_json(text)?;
    let outcome = run_job(&job)?;
    outcome.write(out_dir)?;
    Ok(outcome)
}

fn f(src: &str) -> RealFunction {
    RealFunction::parse(src).expect("built-in default function")
}

// ---------------------------------------------------------------- families

/// Replaces the identifier `var` in `template` by `value`.
fn instantiate(template: &str, var: &str, value: f64) -> String {
    let mut out = String::with_capacity(template.len() + 8);
    let mut ident = String::new();
    let flush = |ident: &mut String, out: &mut String| {
        if ident == var {
            out.push_str(&format!("({value})"));
        } else {
            out.push_str(ident);
        }
        ident.clear();
    };
    for c in template.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            if ident.is_empty() && c.is_ascii_digit() {
                out.push(c);
            } else {
                ident.push(c);
            }
        } else {
            flush(&mut ident, &mut out);
            out.push(c);
        }
    }
    flush(&mut ident, &mut out);
    out
}

/// JSON family: `member` is an expression in `x` and the index variable
/// (`n` for sequences, `h` for continuum families).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyArg {
    member: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    /// Support interval `[lo, hi]` as expressions in the index variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<[String; 2]>,
}

impl FamilyArg {
    fn seq(member: &str, n_max: usize, support: Option<[&str; 2]>) -> Self {
        FamilyArg {
            member: member.into(),
            n_max: Some(n_max),
            t_lo: None,
            t_hi: None,
            n_samples: None,
            support: support.map(|[a, b]| [a.into(), b.into()]),
        }
    }

    fn var(&self) -> &'static str {
        if self.n_max.is_some() {
            "n"
        } else {
            "h"
        }
    }

    fn member_at(&self, at: f64) -> Result<RealFunction> {
        let var = self.var();
        let g = RealFunction::parse(&instantiate(&self.member, var, at))?;
        Ok(match &self.support {
            None => g,
            Some([lo, hi]) => {
                let ev = |s: &str| Expr::parse(&instantiate(s, var, at)).map(|e| e.eval(0.0));
                g.with_cone(ConeFlag::supported_on(ev(lo)?, ev(hi)?))
            }
        })
    }

    fn build(&self) -> Result<FunctionFamily> {
        let spec = self.clone();
        let fam = match (self.n_max, self.t_hi) {
            (Some(n_max), None) => {
                FunctionFamily::sequence(self.member.clone(), n_max, move |n| spec.member_at(n as f64))
            }
            (None, Some(t_hi)) => FunctionFamily::continuum(
                self.member.clone(),
                self.t_lo.unwrap_or(0.0),
                t_hi,
                self.n_samples.unwrap_or(DEFAULT_TIME_SAMPLES),
                move |h| spec.member_at(h),
            ),
            _ => return Err(Error::Parse("family needs exactly one of 'n_max' or 't_hi'".into())),
        };
        // surface template errors before any checking starts
        let first = match self.n_max {
            Some(_) => 1.0,
            None => self.t_lo.unwrap_or(0.0),
        };
        self.member_at(first)?;
        Ok(fam)
    }
}

// ---------------------------------------------------------------- handlers

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NormArgs {
    f: RealFunction,
    u: RealFunction,
}

impl Default for NormArgs {
    fn default() -> Self {
        NormArgs { f: RealFunction::identity(), u: f("1+|x|") }
    }
}

fn order_unit_norm(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: NormArgs = params(p)?;
    let g = ctx.grid(-100.0, 100.0, 20001)?;
    let norm = funcspace::order_unit_norm(&a.f, &a.u, &g)?;
    Ok(PropOutput::new(norm.is_finite(), &a, json!({ "norm": norm }))?.grid(g))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PairArgs {
    f: RealFunction,
    g: RealFunction,
}

impl Default for PairArgs {
    fn default() -> Self {
        PairArgs { f: RealFunction::hat(-1.0, 1.0, 1.0), g: RealFunction::hat(1.0, 1.0, 1.0) }
    }
}

fn lattice_ops(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: PairArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 1001)?;
    let op = |k, x: &RealFunction, y: Option<&RealFunction>, l| funcspace::lattice_op(k, x, y, l, &g);
    let sup = op(LatticeKind::Sup, &a.f, Some(&a.g), None)?;
    let inf = op(LatticeKind::Inf, &a.f, Some(&a.g), None)?;
    let sum = op(LatticeKind::Add, &a.f, Some(&a.g), None)?;
    let lhs = op(LatticeKind::Add, &sup, Some(&inf), None)?;
    let sum_defect = funcspace::sup_distance(&lhs, &sum, &g)?;
    let abs = op(LatticeKind::Abs, &a.f, None, None)?;
    let neg = op(LatticeKind::Scale, &a.f, None, Some(-1.0))?;
    let abs_defect = funcspace::sup_distance(&abs, &op(LatticeKind::Sup, &a.f, Some(&neg), None)?, &g)?;
    let result = json!({
        "sup": serde_json::to_value(&sup).ok(),
        "sup_plus_inf_defect": sum_defect,
        "abs_defect": abs_defect,
    });
    Ok(PropOutput::new(sum_defect <= TOL_ARITH && abs_defect <= TOL_ARITH, &a, result)?.grid(g))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvArgs {
    family: FamilyArg,
    limit: RealFunction,
    regulator: RealFunction,
    slack: f64,
}

impl Default for ConvArgs {
    fn default() -> Self {
        ConvArgs {
            family: FamilyArg::seq("(1+x^2)/n", 1000, None),
            limit: RealFunction::constant(0.0),
            regulator: f("1+x^2"),
            slack: TOL_ARITH,
        }
    }
}

fn schedule_output(pass: bool, args: impl Serialize, report: &RegulatorReport, extra: Value) -> Result<PropOutput> {
    let mut result = serde_json::to_value(report).map_err(|e| Error::NotSerializable(e.to_string()))?;
    if let (Value::Object(m), Value::Object(x)) = (&mut result, extra) {
        m.extend(x);
    }
    let eps: Vec<f64> = report.eps_schedule.iter().map(|r| r.eps).collect();
    Ok(PropOutput::new(pass, args, result)?.grid(report.grid).eps(&eps).csv("schedule.csv", report.to_csv()))
}

fn ru_convergence(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: ConvArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 1001)?;
    let eps = ctx.eps(&[1.0, 0.1, 0.01]);
    let opts = ConvergenceOptions { slack: a.slack, ..Default::default() };
    let r = ru_conv::verify_ru_convergence(&a.family.build()?, &a.limit, &a.regulator, &eps, &g, opts)?;
    schedule_output(r.converged, &a, &r, json!({}))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CcArgs {
    family: FamilyArg,
    limit: RealFunction,
    expect: bool,
}

impl Default for CcArgs {
    fn default() -> Self {
        CcArgs {
            family: FamilyArg::seq("hat(0,1,1)/n", 200, Some(["-1", "1"])),
            limit: RealFunction::constant(0.0),
            expect: true,
        }
    }
}

fn cc_characterization(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: CcArgs = params(p)?;
    let g = ctx.grid(-50.0, 50.0, 2001)?;
    let eps = ctx.eps(&ru_conv::CC_EPS);
    let fam = a.family.build()?;
    let v = ru_conv::check_cc_characterization(&fam, &a.limit, &g, &eps, Default::default())?;
    let cross = match v.common_support {
        Some(k) => {
            let u = ru_conv::cc_regulator(k, 1.0)?;
            Some(ru_conv::verify_ru_convergence(&fam, &a.limit, &u, &eps, &g, Default::default())?.converged)
        }
        None => None,
    };
    let result = json!({
        "uniform_conv": v.uniform_conv,
        "common_support": v.common_support,
        "supports_grow": v.supports_grow,
        "verdict": v.verdict,
        "plateau_regulator_converges": cross,
        "uniform_report": serde_json::to_value(&v.uniform_report).map_err(|e| Error::NotSerializable(e.to_string()))?,
    });
    let consistent = cross.is_none_or(|c| c == v.verdict);
    Ok(PropOutput::new(v.verdict == a.expect && consistent, &a, result)?
        .grid(g)
        .eps(&eps)
        .csv("schedule.csv", v.uniform_report.to_csv()))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LpaArgs {
    f: RealFunction,
    budgets: Vec<usize>,
}

impl Default for LpaArgs {
    fn default() -> Self {
        LpaArgs { f: f("sin(x)"), budgets: vec![5, 9, 17, 33, 65] }
    }
}

fn lipschitz_estimate(v: &[f64], h: f64) -> f64 {
    v.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / h))
}

fn lpa_density(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: LpaArgs = params(p)?;
    let g = ctx.grid(-3.0, 3.0, 3001)?;
    let lip = lipschitz_estimate(&a.f.sample(&g)?, g.spacing());
    let mut rows = Vec::new();
    let mut csv = String::from("knot_budget,max_error\n");
    for &b in &a.budgets {
        let r = ru_conv::lpa_approximate(&a.f, b, &g)?;
        csv.push_str(&format!("{b},{}\n", r.max_error));
        rows.push(json!({ "knot_budget": b, "max_error": r.max_error, "lipschitz_bound": lip * g.width() / (b as f64 - 1.0) }));
    }
    let errs: Vec<f64> = rows.iter().map(|r| r["max_error"].as_f64().unwrap_or(f64::NAN)).collect();
    let bounded = rows.iter().all(|r| r["max_error"].as_f64() <= r["lipschitz_bound"].as_f64().map(|b| b + TOL_ARITH));
    let pass = bounded && errs.windows(2).all(|w| w[1] <= w[0] + TOL_ARITH);
    Ok(PropOutput::new(pass, &a, json!({ "lipschitz_estimate": lip, "rows": rows }))?.grid(g).csv("lpa.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConstArgs {
    dims: Vec<u32>,
}

impl Default for ConstArgs {
    fn default() -> Self {
        ConstArgs { dims: vec![1, 2, 3, 4] }
    }
}

/// `Γ(m/2)` for positive integers `m` from the factorial formulas.
fn half_integer_gamma(m: u32) -> f64 {
    if m.is_multiple_of(2) {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (m - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..k {
            v *= i as f64 + 0.5;
        }
        v
    }
}

fn heat_constants(p: &Map<String, Value>) -> Result<PropOutput> {
    let a: ConstArgs = params(p)?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,c_n\n");
    let mut pass = true;
    for &n in &a.dims {
        let c = semigroups::gamma_constant(n)?;
        let oracle = 2.0 * half_integer_gamma(n + 1) / half_integer_gamma(n);
        pass &= (c - oracle).abs() <= 1e-10 * oracle.max(1.0);
        csv.push_str(&format!("{n},{c}\n"));
        rows.push(json!({ "n": n, "c_n": c, "factorial_form": oracle }));
    }
    Ok(PropOutput::new(pass, &a, rows)?.csv("constants.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MomentArgs {
    times: Vec<f64>,
    halfwidth_sigmas: f64,
    points: usize,
}

impl Default for MomentArgs {
    fn default() -> Self {
        MomentArgs { times: vec![0.01, 0.1, 1.0], halfwidth_sigmas: 8.0, points: 513 }
    }
}

fn heat_moments(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: MomentArgs = params(p)?;
    let g = ctx.grid(-10.0, 10.0, 201)?;
    let heat = semigroups::make_heat(a.halfwidth_sigmas, a.points)?;
    let (one, sq) = (RealFunction::constant(1.0), f("x^2"));
    let mut rows = Vec::new();
    let mut csv = String::from("t,mass_defect,second_moment_defect\n");
    let mut pass = true;
    for &t in &a.times {
        let m = heat.apply(t, &one)?.sample(&g)?;
        let s = heat.apply(t, &sq)?.sample(&g)?;
        let mass = m.iter().fold(0.0f64, |acc, v| acc.max((v - 1.0).abs()));
        let second = g.points().iter().zip(&s).fold(0.0f64, |acc, (x, v)| acc.max((v - x * x - 2.0 * t).abs()));
        pass &= mass <= QUAD_TOL && second <= LAW_TOL;
        csv.push_str(&format!("{t},{mass},{second}\n"));
        rows.push(json!({ "t": t, "mass_defect": mass, "second_moment_defect": second }));
    }
    Ok(PropOutput::new(pass, &a, rows)?.grid(g).csv("moments.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HeatRucArgs {
    f: RealFunction,
    regulator: RealFunction,
    t_hi: f64,
}

impl Default for HeatRucArgs {
    fn default() -> Self {
        HeatRucArgs { f: f("clip(1+|x|)"), regulator: RealFunction::constant(1.0), t_hi: 1.0 }
    }
}

fn heat_ruc(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: HeatRucArgs = params(p)?;
    let g = ctx.grid(-50.0, 50.0, 1001)?;
    let eps = ctx.eps(&[0.5, 0.1, 0.05]);
    let heat = semigroups::make_heat(8.0, 513)?;
    let r = semigroups::test_ruc_at_zero_until(&heat, &a.f, &a.regulator, &eps, &g, a.t_hi)?;
    let lip = lipschitz_estimate(&a.f.sample(&g)?, g.spacing());
    let c1 = semigroups::gamma_constant(1)?;
    let mut bounds = Vec::new();
    let mut pass = r.converged;
    for row in &r.eps_schedule {
        let delta_mod = row.eps / (2.0 * lip);
        let guaranteed = (delta_mod / c1).powi(2);
        let measured = row.threshold.map(|t| t.value());
        pass &= measured.is_some_and(|d| d >= guaranteed);
        bounds.push(json!({ "eps": row.eps, "delta_mod": delta_mod, "guaranteed": guaranteed, "measured": measured }));
    }
    schedule_output(pass, &a, &r, json!({ "lipschitz_estimate": lip, "c_1": c1, "bounds": bounds }))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TransArgs {
    f: RealFunction,
    t_hi: f64,
}

impl Default for TransArgs {
    fn default() -> Self {
        TransArgs { f: RealFunction::hat(0.0, 1.0, 1.0), t_hi: 1.0 }
    }
}

fn translation_ruc(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: TransArgs = params(p)?;
    let g = ctx.grid(-10.0, 10.0, 2001)?;
    let eps = ctx.eps(&[0.5, 0.1]);
    let tr = semigroups::make_translation();
    let r = semigroups::test_ruc_at_zero_until(&tr, &a.f, &RealFunction::constant(1.0), &eps, &g, a.t_hi)?;
    let fam = {
        let x = a.f.clone();
        FunctionFamily::continuum("T(h)f", 0.0, a.t_hi, DEFAULT_TIME_SAMPLES, move |h| x.shift(h))
    };
    let cc = ru_conv::check_cc_characterization(&fam, &a.f, &g, &eps, Default::default())?;
    let extra = json!({ "cc_verdict": cc.verdict, "common_support": cc.common_support });
    schedule_output(r.converged && cc.verdict, &a, &r, extra)
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProbeArgs {
    p: f64,
    #[serde(alias = "δ")]
    delta: f64,
    grids: Vec<f64>,
}

impl Default for ProbeArgs {
    fn default() -> Self {
        ProbeArgs { p: 1.0, delta: 0.25, grids: vec![1e3, 1e4, 1e5] }
    }
}

fn lp_probe(p: &Map<String, Value>) -> Result<PropOutput> {
    let a: ProbeArgs = params(p)?;
    let grids: Vec<GridSpec> = a
        .grids
        .iter()
        .map(|&n| {
            if n.fract() != 0.0 || n < 2.0 {
                return Err(Error::Parse(format!("grid size {n} is not an integer >= 2")));
            }
            semigroups::lp_probe_grid(n as usize)
        })
        .collect::<Result<_>>()?;
    let t = semigroups::lp_counterexample_probe(a.p, a.delta, &grids)?;
    Ok(PropOutput::new(t.diverges, &a, &t)?.csv("divergence.csv", t.to_csv()))
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OpArg {
    Name(String),
    Spec(SemigroupSpec),
}

impl OpArg {
    fn build(&self) -> Result<SemigroupOperator> {
        match self {
            OpArg::Name(n) => serde_json::from_value::<SemigroupSpec>(json!({ "op": n }))?.build(),
            OpArg::Spec(s) => s.build(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OrbitArgs {
    semigroup: OpArg,
    x: RealFunction,
    u: RealFunction,
    s: f64,
    delta: f64,
}

impl Default for OrbitArgs {
    fn default() -> Self {
        OrbitArgs {
            semigroup: OpArg::Name("translation".into()),
            x: RealFunction::hat(0.0, 1.0, 1.0),
            u: RealFunction::constant(1.0),
            s: 2.0,
            delta: 0.5,
        }
    }
}

fn orbit_bound(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: OrbitArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 401)?;
    let b = semigroups::orbit_order_bound(&a.semigroup.build()?, &a.x, &a.u, a.s, a.delta, &g)?;
    let vals = b.v.sample(&g)?;
    let csv: String = std::iter::once("x,v\n".to_string())
        .chain(g.points().iter().zip(&vals).map(|(x, v)| format!("{x},{v}\n")))
        .collect();
    Ok(PropOutput::new(b.violations == 0, &a, &b)?.grid(g).csv("orbit_bound.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SearchArgs {
    semigroup: OpArg,
    x: RealFunction,
    candidates: Vec<RealFunction>,
}

impl Default for SearchArgs {
    fn default() -> Self {
        SearchArgs {
            semigroup: OpArg::Name("translation".into()),
            x: RealFunction::hat(0.0, 1.0, 1.0),
            candidates: vec![RealFunction::constant(1.0), f("1+|x|")],
        }
    }
}

fn ruc_search(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: SearchArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 1001)?;
    let eps = ctx.eps(&[0.5, 0.1]);
    match semigroups::regulator_search(&a.semigroup.build()?, &a.x, &a.candidates, &eps, &g)? {
        Some((u, r)) => schedule_output(true, &a, &r, json!({ "found": u.label() })),
        None => Ok(PropOutput::new(false, &a, json!({ "found": Value::Null }))?.grid(g).eps(&eps)),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LawArgs {
    semigroup: OpArg,
    f: RealFunction,
    pairs: Vec<(f64, f64)>,
}

impl Default for LawArgs {
    fn default() -> Self {
        LawArgs {
            semigroup: OpArg::Name("translation".into()),
            f: RealFunction::hat(0.0, 1.0, 1.0),
            pairs: vec![(0.0, 0.3), (0.1, 0.2), (0.5, 0.25)],
        }
    }
}

fn semigroup_law(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: LawArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 101)?;
    let op = a.semigroup.build()?;
    let law = semigroups::check_semigroup_law(&op, &a.f, &a.pairs, &g)?;
    let times: Vec<f64> = a.pairs.iter().map(|(s, t)| s + t).collect();
    let pos = if a.f.sample(&g)?.iter().all(|v| *v >= -TOL_ZERO) {
        Some(semigroups::check_positivity(&op, std::slice::from_ref(&a.f), &times, &g)?)
    } else {
        None
    };
    let pass = law.pass && pos.as_ref().is_none_or(|r| r.pass);
    let csv = law.to_csv();
    Ok(PropOutput::new(pass, &a, json!({ "law": law, "positivity": pos }))?.grid(g).csv("law.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CommuteArgs {
    left: OpArg,
    right: OpArg,
    pairs: Vec<(f64, f64)>,
}

impl Default for CommuteArgs {
    fn default() -> Self {
        CommuteArgs {
            left: OpArg::Name("heat".into()),
            right: OpArg::Name("translation".into()),
            pairs: constructions::DEFAULT_COMMUTE_PAIRS.to_vec(),
        }
    }
}

fn commutation(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: CommuteArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 101)?;
    let mut corpus = constructions::standard_corpus();
    corpus.push(RealFunction::identity());
    let r = constructions::commutation_report(&a.left.build()?, &a.right.build()?, &corpus, &a.pairs, &g)?;
    let csv: String = std::iter::once("function,s,t,defect\n".to_string())
        .chain(
            r.rows
                .iter()
                .map(|row| format!("\"{}\",{},{},{}\n", row.function.replace('"', "\"\""), row.s, row.t, row.defect)),
        )
        .collect();
    Ok(PropOutput::new(r.pass, &a, &r)?.grid(g).csv("commutation.csv", csv))
}

#[derive(Serialize, Deserialize, PartialEq, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum Expect {
    Witness,
    Failure,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CondRArgs {
    family: FamilyArg,
    candidate: Option<RealFunction>,
    expect: Expect,
}

impl Default for CondRArgs {
    fn default() -> Self {
        CondRArgs {
            family: FamilyArg::seq("plateau(n)", 10, Some(["-n-1", "n+1"])),
            candidate: None,
            expect: Expect::Failure,
        }
    }
}

fn condition_r(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: CondRArgs = params(p)?;
    let g = ctx.grid(-50.0, 50.0, 10001)?;
    let n_max = a.family.n_max.ok_or_else(|| Error::Parse("condition_r needs a sequence family ('n_max')".into()))?;
    let members: Vec<RealFunction> = (1..=n_max).map(|n| a.family.member_at(n as f64)).collect::<Result<_>>()?;
    let r = condition_r_witness(&members, &g, a.candidate.as_ref())?;
    let (got, csv) = match &r {
        ConditionR::Witness { lambdas, verified, .. } => {
            let body: String = std::iter::once("index,lambda\n".to_string())
                .chain(lambdas.iter().enumerate().map(|(i, l)| format!("{},{l}\n", i + 1)))
                .collect();
            (if *verified { Some(Expect::Witness) } else { None }, body)
        }
        ConditionR::Failure { .. } => (Some(Expect::Failure), "index,lambda\n".to_string()),
    };
    Ok(PropOutput::new(got == Some(a.expect), &a, &r)?.grid(g).csv("condition_r.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlowArgs {
    flow: Semiflow,
    times: Vec<f64>,
}

impl Default for FlowArgs {
    fn default() -> Self {
        FlowArgs { flow: Semiflow::shift(), times: LAW_TIMES.to_vec() }
    }
}

fn semiflow_laws(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: FlowArgs = params(p)?;
    let g = ctx.grid(-10.0, 10.0, 201)?;
    let r = semiflows::check_semiflow_laws(&a.flow, &g, &a.times)?;
    Ok(PropOutput::new(r.pass, &a, &r)?.grid(g))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CritArgs {
    flow: Semiflow,
    u: Option<RealFunction>,
}

impl Default for CritArgs {
    fn default() -> Self {
        CritArgs { flow: Semiflow::shift(), u: None }
    }
}

fn criterion_c(ctx: &Ctx, p: &Map<String, Value>, lipuc: bool) -> Result<PropOutput> {
    let a: CritArgs = params(p)?;
    let g = ctx.grid(-50.0, 50.0, 1001)?;
    let eps = ctx.eps(&[0.5, 0.1, 0.01]);
    let r = match (&a.u, lipuc) {
        (Some(_), true) => return Err(Error::Parse("criterion_lipuc fixes u = 1+|x|; drop 'u'".into())),
        (_, true) => semiflows::check_criterion_LipUC(&a.flow, &eps, &g)?,
        (u, false) => {
            semiflows::check_criterion_C(&a.flow, &u.clone().unwrap_or_else(|| RealFunction::constant(1.0)), &eps, &g)?
        }
    };
    schedule_output(r.converged, &a, &r, json!({}))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OrbitMaxArgs {
    flow: Semiflow,
    f: RealFunction,
    s: f64,
    t_samples: usize,
}

impl Default for OrbitMaxArgs {
    fn default() -> Self {
        OrbitMaxArgs { flow: Semiflow::shift(), f: RealFunction::hat(0.0, 1.0, 1.0), s: 1.0, t_samples: 65 }
    }
}

fn max_over_orbit(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: OrbitMaxArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 1001)?;
    let m = semiflows::max_over_orbit(&a.flow, &a.f, a.s, &g, a.t_samples)?;
    let mv = m.sample(&g)?;
    let mut worst = f64::NEG_INFINITY;
    let n = a.t_samples.max(1);
    for k in 0..n {
        let t = if n == 1 { 0.0 } else { a.s * k as f64 / (n - 1) as f64 };
        let o = a.flow.pull_back(&a.f, t)?.sample(&g)?;
        worst = o.iter().zip(&mv).fold(worst, |w, (x, y)| w.max(x.abs() - y));
    }
    let csv: String = std::iter::once("x,g\n".to_string())
        .chain(g.points().iter().zip(&mv).map(|(x, v)| format!("{x},{v}\n")))
        .collect();
    Ok(PropOutput::new(worst <= TOL_ARITH, &a, json!({ "g": m, "worst_excess": worst }))?
        .grid(g)
        .csv("orbit_max.csv", csv))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LpaRegArgs {
    flow: Semiflow,
    f: RealFunction,
    u: RealFunction,
}

impl Default for LpaRegArgs {
    fn default() -> Self {
        LpaRegArgs {
            flow: Semiflow::shift(),
            f: RealFunction::from(PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).expect("static hat")),
            u: RealFunction::constant(1.0),
        }
    }
}

fn lpa_regulator(ctx: &Ctx, p: &Map<String, Value>) -> Result<PropOutput> {
    let a: LpaRegArgs = params(p)?;
    let g = ctx.grid(-5.0, 5.0, 1001)?;
    let eps = ctx.eps(&[0.5, 0.1]);
    let pa =
        a.f.as_pa().ok_or_else(|| Error::pre("lpa_regulator needs a piecewise affine f ({\"repr\":\"pa\",...})"))?;
    let t = semiflows::build_lpa_regulator(&a.flow, pa, &a.u, &eps, &g)?;
    let csv: String = std::iter::once("j_lo,j_hi,slope,delta,m,s,c,d\n".to_string())
        .chain(
            t.segments
                .iter()
                .map(|s| format!("{},{},{},{},{},{},{},{}\n", s.j_lo, s.j_hi, s.slope, s.delta, s.m, s.s, s.c, s.d)),
        )
        .collect();
    Ok(PropOutput::new(t.pass, &a, &t)?.grid(g).eps(&eps).csv("lpa_segments.csv", csv))
}

/// Exit status for an error: 2 for unreadable input, 3 for violated
/// preconditions, 1 for failed checks.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) => 2,
        Error::CheckFailed(_) => 1,
        Error::Precondition(_) | Error::NonFinite { .. } | Error::MissingOperand(_) | Error::NotSerializable(_) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_substitution_respects_identifiers() {
        assert_eq!(instantiate("hat(n,1,1)/n", "n", 3.0), "hat((3),1,1)/(3)");
        assert_eq!(instantiate("sin(x)+n2", "n", 1.0), "sin(x)+n2");
        assert_eq!(instantiate("-n-1", "n", -2.5), "-(-2.5)-1");
        assert_eq!(instantiate("x+h", "h", 0.5), "x+(0.5)");
    }

    #[test]
    fn registry_has_unique_ids() {
        assert!(PROPS.len() >= 12);
        let mut ids: Vec<_> = PROPS.iter().map(|p| p.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), PROPS.len());
        assert!(list_props().contains("cc_characterization — "));
        assert!(list_props().contains("lpa_regulator — "));
    }

    #[test]
    fn half_integer_gamma_values() {
        let sp = std::f64::consts::PI.sqrt();
        assert_eq!(half_integer_gamma(2), 1.0);
        assert_eq!(half_integer_gamma(8), 6.0);
        assert!((half_integer_gamma(1) - sp).abs() < 1e-15);
        assert!((half_integer_gamma(5) - 0.75 * sp).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let job = Job::from_json(r#"{"prop":"semiflow_laws","flw":"shift"}"#).unwrap();
        assert!(matches!(run_job(&job), Err(Error::Parse(_))));
        let job = Job::from_json(r#"{"prop":"nope"}"#).unwrap();
        assert!(matches!(run_job(&job), Err(Error::Parse(_))));
    }

    #[test]
    fn defaults_run() {
        for id in ["order_unit_norm", "lattice_ops", "heat_constants", "semiflow_laws", "condition_r", "lp_probe"] {
            let o = run_job(&Job::for_prop(id)).unwrap();
            assert!(o.pass, "{id}: {}", o.report_text());
        }
    }
}
