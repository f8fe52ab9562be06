//! Semiflows on the real line and the Koopman semigroups they induce.
//!
//! A semiflow `φ(t, x)` satisfies `φ(0, x) = x` and
//! `φ(t + s, x) = φ(t, φ(s, x))`. Registry flows are closed-form:
//! `shift(c)`, `decay(r)`, `poly_drift(k)` and `compose(a, b)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{BinOp, Expr, Func, GridSpec, PiecewiseAffineFunction, RealFunction};
use crate::ru_conv::{self, ConvergenceOptions, FunctionFamily, RegulatorReport, DEFAULT_TIME_SAMPLES};
use crate::semigroups::SemigroupOperator;
use crate::tolerances::{FLOW_TOL, TOL_ARITH};

pub const DEFAULT_HORIZON: f64 = 2.0;

type FlowFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FlowKind {
    /// `x + speed·t`
    Shift {
        speed: f64,
    },
    /// `e^{−rate·t}·x`
    Decay {
        rate: f64,
    },
    /// `x + t·(1 + |x|^k)`. Not a semiflow for `k > 0`; used to exhibit
    /// failures of the Koopman continuity criteria.
    PolyDrift {
        k: f64,
    },
    /// `a(t, b(t, x))`
    Compose(Box<FlowKind>, Box<FlowKind>),
    Custom {
        label: String,
        phi: FlowFn,
    },
}

impl fmt::Debug for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKind::Shift { speed } if *speed == 1.0 => write!(f, "shift"),
            FlowKind::Shift { speed } => write!(f, "shift({speed})"),
            FlowKind::Decay { rate } => write!(f, "decay({rate})"),
            FlowKind::PolyDrift { k } => write!(f, "poly_drift({k})"),
            FlowKind::Compose(a, b) => write!(f, "compose({a},{b})"),
            FlowKind::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

impl FlowKind {
    pub fn phi(&self, t: f64, x: f64) -> f64 {
        match self {
            FlowKind::Shift { speed } => x + speed * t,
            FlowKind::Decay { rate } => (-rate * t).exp() * x,
            FlowKind::PolyDrift { k } => x + t * (1.0 + x.abs().powf(*k)),
            FlowKind::Compose(a, b) => a.phi(t, b.phi(t, x)),
            FlowKind::Custom { phi, .. } => phi(t, x),
        }
    }

    /// `(α, β)` with `φ(t, x) = α·x + β`, when the flow is affine in `x`.
    fn affine_form(&self, t: f64) -> Option<(f64, f64)> {
        match self {
            FlowKind::Shift { speed } => Some((1.0, speed * t)),
            FlowKind::Decay { rate } => Some(((-rate * t).exp(), 0.0)),
            FlowKind::Compose(a, b) => {
                let (aa, ab) = a.affine_form(t)?;
                let (ba, bb) = b.affine_form(t)?;
                Some((aa * ba, aa * bb + ab))
            }
            _ => None,
        }
    }

    /// `φ(t, ·)` as an expression in `x`.
    fn expr(&self, t: f64) -> Option<Expr> {
        match self {
            FlowKind::Shift { .. } | FlowKind::Decay { .. } => {
                let (a, b) = self.affine_form(t)?;
                let ax = if a == 1.0 { Expr::X } else { Expr::bin(BinOp::Mul, Expr::Num(a), Expr::X) };
                Some(if b == 0.0 { ax } else { Expr::bin(BinOp::Add, ax, Expr::Num(b)) })
            }
            FlowKind::PolyDrift { k } => {
                let growth = Expr::bin(
                    BinOp::Add,
                    Expr::Num(1.0),
                    Expr::bin(BinOp::Pow, Expr::Call(Func::Abs, vec![Expr::X]), Expr::Num(*k)),
                );
                Some(Expr::bin(BinOp::Add, Expr::X, Expr::bin(BinOp::Mul, Expr::Num(t), growth)))
            }
            FlowKind::Compose(a, b) => Some(a.expr(t)?.compose(&b.expr(t)?)),
            FlowKind::Custom { .. } => None,
        }
    }
}

fn split_args(s: &str) -> Vec<&str> {
    let (mut depth, mut start, mut out) = (0i32, 0, Vec::new());
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

impl FromStr for FlowKind {
    type Err = Error;
    fn from_str(src: &str) -> Result<Self> {
        let s = src.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (s[..i].trim(), split_args(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(Error::Parse(format!("unbalanced flow spec '{src}'"))),
            None => (s, Vec::new()),
        };
        let num = |a: &str| a.parse::<f64>().map_err(|_| Error::Parse(format!("bad flow parameter '{a}' in '{src}'")));
        let one = |args: &[&str]| -> Result<f64> {
            match args {
                [a] => num(a),
                _ => Err(Error::Parse(format!("'{name}' takes one parameter, got '{src}'"))),
            }
        };
        match name {
            "shift" if args.is_empty() => Ok(FlowKind::Shift { speed: 1.0 }),
            "shift" => Ok(FlowKind::Shift { speed: one(&args)? }),
            "decay" => Ok(FlowKind::Decay { rate: one(&args)? }),
            "poly_drift" => Ok(FlowKind::PolyDrift { k: one(&args)? }),
            "compose" => match args.as_slice() {
                [a, b] => Ok(FlowKind::Compose(Box::new(a.parse()?), Box::new(b.parse()?))),
                _ => Err(Error::Parse(format!("compose takes two flows, got '{src}'"))),
            },
            _ => Err(Error::Parse(format!("unknown flow '{src}'"))),
        }
    }
}

/// A semiflow together with the largest time used in checks.
#[derive(Clone, Debug)]
pub struct Semiflow {
    pub kind: FlowKind,
    pub horizon: f64,
}

impl fmt::Display for Semiflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

impl Semiflow {
    pub fn new(kind: FlowKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::pre(format!("semiflow horizon must be positive, got {horizon}")));
        }
        Ok(Semiflow { kind, horizon })
    }

    pub fn shift() -> Self {
        Semiflow { kind: FlowKind::Shift { speed: 1.0 }, horizon: DEFAULT_HORIZON }
    }

    pub fn decay(rate: f64) -> Self {
        Semiflow { kind: FlowKind::Decay { rate }, horizon: DEFAULT_HORIZON }
    }

    pub fn poly_drift(k: f64) -> Self {
        Semiflow { kind: FlowKind::PolyDrift { k }, horizon: DEFAULT_HORIZON }
    }

    pub fn custom(label: impl Into<String>, phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Semiflow { kind: FlowKind::Custom { label: label.into(), phi: Arc::new(phi) }, horizon: DEFAULT_HORIZON }
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Semiflow::new(self.kind, horizon)
    }

    pub fn phi(&self, t: f64, x: f64) -> f64 {
        self.kind.phi(t, x)
    }

    /// `φ(t, ·)` as a function of `x`.
    pub fn at_time(&self, t: f64) -> RealFunction {
        match self.kind.expr(t) {
            Some(e) => RealFunction::closed(e),
            None => {
                let k = self.kind.clone();
                RealFunction::evaluator(format!("{}({t},x)", self.kind), move |x| k.phi(t, x))
            }
        }
    }

    /// `f ∘ φ(t, ·)`: exact for affine flows, symbolic for closed forms.
    pub fn pull_back(&self, f: &RealFunction, t: f64) -> Result<RealFunction> {
        if t == 0.0 {
            return Ok(f.clone());
        }
        if let Some((a, b)) = self.kind.affine_form(t) {
            return f.compose_affine(a, b);
        }
        if let (Some(e), Some(p)) = (f.as_expr(), self.kind.expr(t)) {
            return Ok(RealFunction::closed(e.compose(&p)));
        }
        let (g, k) = (f.clone(), self.kind.clone());
        Ok(RealFunction::evaluator(format!("{}∘{}({t})", f.label(), self.kind), move |x| g.eval(k.phi(t, x))))
    }
}

impl Serialize for Semiflow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if let FlowKind::Custom { label, .. } = &self.kind {
            return Err(serde::ser::Error::custom(format!("custom flow '{label}' has no registry form")));
        }
        #[derive(Serialize)]
        struct Out {
            flow: String,
            horizon: f64,
        }
        Out { flow: self.kind.to_string(), horizon: self.horizon }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Semiflow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum In {
            Name(String),
            Full {
                flow: String,
                #[serde(default = "default_horizon")]
                horizon: f64,
            },
        }
        fn default_horizon() -> f64 {
            DEFAULT_HORIZON
        }
        let (name, horizon) = match In::deserialize(d)? {
            In::Name(n) => (n, DEFAULT_HORIZON),
            In::Full { flow, horizon } => (flow, horizon),
        };
        let kind = name.parse().map_err(serde::de::Error::custom)?;
        Semiflow::new(kind, horizon).map_err(serde::de::Error::custom)
    }
}

/// Time samples used when validating a flow for Koopman composition.
pub const LAW_TIMES: [f64; 6] = [0.0, 0.05, 0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct SemiflowLawReport {
    pub flow: String,
    pub identity_defect: f64,
    pub composition_defect: f64,
    /// `(t, s, x)` where the composition defect is largest.
    pub worst_at: Option<[f64; 3]>,
    pub tolerance: f64,
    pub grid: GridSpec,
    pub time_samples: Vec<f64>,
    pub pass: bool,
}

fn finite(label: &str, x: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { label: label.to_string(), x, value: v })
    }
}

/// Largest identity-law and composition-law defects over grid × samples,
/// using every pair `(t, s)` with `t + s` within the horizon.
pub fn check_semiflow_laws(phi: &Semiflow, grid: &GridSpec, time_samples: &[f64]) -> Result<SemiflowLawReport> {
    if let Some(t) = time_samples.iter().find(|t| !(**t >= 0.0 && **t <= phi.horizon)) {
        return Err(Error::pre(format!("time sample {t} outside [0, {}]", phi.horizon)));
    }
    let label = phi.to_string();
    let xs = grid.points();
    let mut identity_defect = 0.0f64;
    for &x in &xs {
        identity_defect = identity_defect.max((finite(&label, x, phi.phi(0.0, x))? - x).abs());
    }
    let (mut composition_defect, mut worst_at) = (0.0f64, None);
    for &t in time_samples {
        for &s in time_samples {
            if t + s > phi.horizon * (1.0 + TOL_ARITH) {
                continue;
            }
            for &x in &xs {
                let direct = finite(&label, x, phi.phi(t + s, x))?;
                let stepped = finite(&label, x, phi.phi(t, phi.phi(s, x)))?;
                let d = (direct - stepped).abs();
                if d > composition_defect || worst_at.is_none() {
                    composition_defect = composition_defect.max(d);
                    worst_at = Some([t, s, x]);
                }
            }
        }
    }
    Ok(SemiflowLawReport {
        flow: label,
        identity_defect,
        composition_defect,
        worst_at,
        tolerance: FLOW_TOL,
        grid: *grid,
        time_samples: time_samples.to_vec(),
        pass: identity_defect <= FLOW_TOL && composition_defect <= FLOW_TOL,
    })
}

fn flow_family(phi: &Semiflow) -> FunctionFamily {
    let p = phi.clone();
    FunctionFamily::continuum(format!("{phi}(h,·)"), 0.0, phi.horizon, DEFAULT_TIME_SAMPLES, move |h| Ok(p.at_time(h)))
}

/// Schedule of `δ(ε)` with `|φ(h, x) − x| ≤ ε·u(x)` for all sampled `h ≤ δ`.
#[allow(non_snake_case)]
pub fn check_criterion_C(
    phi: &Semiflow,
    u: &RealFunction,
    eps_list: &[f64],
    grid: &GridSpec,
) -> Result<RegulatorReport> {
    let uv = u.sample(grid)?;
    if let Some(i) = uv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::pre(format!(
            "regulator {} is {} at x = {}, must be positive",
            u.label(),
            uv[i],
            grid.point(i)
        )));
    }
    ru_conv::verify_ru_convergence(
        &flow_family(phi),
        &RealFunction::identity(),
        u,
        eps_list,
        grid,
        ConvergenceOptions::default(),
    )
}

/// Criterion C with the fixed regulator `1 + |x|`.
#[allow(non_snake_case)]
pub fn check_criterion_LipUC(phi: &Semiflow, eps_list: &[f64], grid: &GridSpec) -> Result<RegulatorReport> {
    check_criterion_C(phi, &RealFunction::parse("1+|x|")?, eps_list, grid)
}

/// Koopman semigroup `T(t)f = f ∘ φ(t, ·)`, after checking the semiflow laws
/// on `[−10, 10]`.
pub fn make_koopman(phi: &Semiflow) -> Result<SemigroupOperator> {
    let times: Vec<f64> = LAW_TIMES.iter().copied().filter(|t| 2.0 * t <= phi.horizon).collect();
    let report = check_semiflow_laws(phi, &GridSpec::symmetric(10.0, 201)?, &times)?;
    if !report.pass {
        return Err(Error::pre(format!(
            "{phi} is not a semiflow: identity defect {:e}, composition defect {:e}",
            report.identity_defect, report.composition_defect
        )));
    }
    Ok(SemigroupOperator::Koopman(phi.clone()))
}

fn uniform_times(s: f64, samples: usize) -> Vec<f64> {
    if s == 0.0 || samples < 2 {
        return vec![0.0];
    }
    (0..samples).map(|k| if k + 1 == samples { s } else { s * k as f64 / (samples - 1) as f64 }).collect()
}

/// `g(x) = max_{t} |f(φ(t, x))|` over `t_samples` uniform times in `[0, s]`.
pub fn max_over_orbit(
    phi: &Semiflow,
    f: &RealFunction,
    s: f64,
    grid: &GridSpec,
    t_samples: usize,
) -> Result<RealFunction> {
    if !(s >= 0.0 && s <= phi.horizon) {
        return Err(Error::pre(format!("orbit length {s} outside [0, {}]", phi.horizon)));
    }
    if t_samples == 0 || (s > 0.0 && t_samples < 2) {
        return Err(Error::pre("need at least two time samples for a positive orbit length"));
    }
    let times = uniform_times(s, t_samples);
    let mut g = vec![0.0f64; grid.n];
    for (i, gi) in g.iter_mut().enumerate() {
        let x = grid.point(i);
        for &t in &times {
            *gi = gi.max(f.eval(phi.phi(t, x)).abs());
        }
    }
    Ok(RealFunction::sampled(*grid, g)?.with_label(format!("max_orbit({}, {phi}, {s})", f.label())))
}

/// Per-segment constants of the regulator construction.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentRecord {
    pub j_lo: f64,
    pub j_hi: f64,
    pub slope: f64,
    pub delta: f64,
    pub m: f64,
    pub s: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpaCheckRow {
    pub eps: f64,
    /// `min(δ(ε/4), ε/2)` from criterion C.
    pub guaranteed_delta: f64,
    /// Threshold found by the independent convergence check with regulator `v`.
    pub measured_delta: Option<f64>,
    /// `max (|f(φ(h,x)) − f(x)| − ε·v(x))` over the grid and sampled `h ≤ guaranteed_delta`.
    pub worst_slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpaRegulatorTrace {
    pub flow: Semiflow,
    pub f: PiecewiseAffineFunction,
    pub u: RealFunction,
    pub segments: Vec<SegmentRecord>,
    pub v: PiecewiseAffineFunction,
    pub criterion_c: RegulatorReport,
    pub cross_check: RegulatorReport,
    pub checks: Vec<LpaCheckRow>,
    pub grid: GridSpec,
    pub slack: f64,
    pub pass: bool,
}

const S_PROBES: usize = 32;
const S_BISECT: usize = 20;
const C_TIME_SAMPLES: usize = 64;
const H_SAMPLES: usize = 64;

/// Builds the piecewise affine regulator `v` of `T_φ(h)f → f` from the
/// criterion-C certificate `u`, then checks `|T_φ(h)f − f| ≤ ε·v` on the grid.
pub fn build_lpa_regulator(
    phi: &Semiflow,
    f: &PiecewiseAffineFunction,
    u: &RealFunction,
    eps_list: &[f64],
    grid: &GridSpec,
) -> Result<LpaRegulatorTrace> {
    ru_conv::validate_eps(eps_list)?;
    if eps_list[0] >= 1.0 {
        return Err(Error::pre("the construction needs every ε < 1"));
    }
    if phi.horizon <= 1.0 {
        return Err(Error::pre(format!("horizon {} must exceed 1 + s_n", phi.horizon)));
    }
    let quarter: Vec<f64> = eps_list.iter().map(|e| e / 4.0).collect();
    let criterion_c = check_criterion_C(phi, u, &quarter, grid)?;
    if !criterion_c.converged {
        return Err(Error::pre(format!("criterion C does not hold with regulator {} at ε/4", u.label())));
    }

    // segment boundaries: window ends plus the knots strictly inside
    let mut j = vec![grid.x_lo];
    j.extend(f.knots().iter().copied().filter(|k| *k > grid.x_lo && *k < grid.x_hi));
    j.push(grid.x_hi);
    let nseg = j.len() - 1;
    let xs = grid.points();
    let seg_points = |k: usize| -> Vec<f64> {
        let mut p = vec![j[k]];
        p.extend(xs.iter().copied().filter(|x| *x > j[k] && *x < j[k + 1]));
        p.push(j[k + 1]);
        p
    };
    let gaps: Vec<f64> = j.windows(2).map(|w| w[1] - w[0]).collect();
    let slopes: Vec<f64> = (0..nseg).map(|k| f.slopes()[f.segment_of(0.5 * (j[k] + j[k + 1]))]).collect();
    // outside the window the neighbours are copies of the edge segments
    let nb = |k: usize| [k.saturating_sub(1), k, (k + 1).min(nseg - 1)];
    let s_max = (phi.horizon - 1.0).min(1.0);

    let mut segments = Vec::with_capacity(nseg);
    for k in 0..nseg {
        let pts = seg_points(k);
        let delta = nb(k).iter().map(|&i| gaps[i]).fold(f64::INFINITY, f64::min) / 2.0;
        let m = pts.iter().map(|&x| u.eval(x)).fold(0.0f64, f64::max);
        let bound = delta / m.max(1.0);
        let holds = |t: f64| pts.iter().all(|&x| (phi.phi(t, x) - x).abs() <= bound * u.eval(x));
        let probes: Vec<f64> =
            (0..S_PROBES).map(|i| s_max * 1e-6f64.powf(1.0 - i as f64 / (S_PROBES - 1) as f64)).collect();
        let s = match probes.iter().position(|&t| !holds(t)) {
            None => s_max,
            Some(i) => {
                let (mut lo, mut hi) = (if i == 0 { 0.0 } else { probes[i - 1] }, probes[i]);
                for _ in 0..S_BISECT {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        };
        if !(s > 0.0) {
            return Err(Error::pre(format!("no positive s_n on segment [{}, {}]", j[k], j[k + 1])));
        }
        let mut sup = 0.0f64;
        for &x in &pts {
            let base = f.eval(phi.phi(s, x));
            for i in 0..C_TIME_SAMPLES {
                let t = i as f64 / (C_TIME_SAMPLES - 1) as f64;
                sup = sup.max((f.eval(phi.phi(s + t, x)) - base).abs());
            }
        }
        segments.push(SegmentRecord { j_lo: j[k], j_hi: j[k + 1], slope: slopes[k], delta, m, s, c: sup / s, d: 0.0 });
    }
    for k in 0..nseg {
        let an = segments[k].slope;
        let inner = nb(k).iter().fold(0.0f64, |acc, &i| {
            let ai = segments[i].slope;
            acc.max(ai.abs()).max((ai - an).abs()).max(segments[i].c)
        });
        segments[k].d = segments[k].m.max(1.0) * inner;
    }
    let mut dv: Vec<f64> = segments.iter().map(|r| r.d).collect();
    dv.push(segments[nseg - 1].d);
    let v = PiecewiseAffineFunction::from_points(&j, &dv, 0.0, 0.0)?;

    let opts = ConvergenceOptions::default();
    let vf = RealFunction::piecewise_affine(v.clone()).with_label("v");
    let ff = RealFunction::piecewise_affine(f.clone());
    let koop = {
        let (p, g) = (phi.clone(), ff.clone());
        FunctionFamily::continuum("T_φ(h)f", 0.0, phi.horizon, DEFAULT_TIME_SAMPLES, move |h| p.pull_back(&g, h))
    };
    let cross_check = ru_conv::verify_ru_convergence(&koop, &ff, &vf, eps_list, grid, opts)?;

    let fv = ff.sample(grid)?;
    let vv = vf.sample(grid)?;
    let mut checks = Vec::with_capacity(eps_list.len());
    for (r, &eps) in eps_list.iter().enumerate() {
        let cert = criterion_c.eps_schedule[r].threshold.and_then(|t| t.time()).unwrap_or(0.0);
        let guaranteed_delta = cert.min(eps / 2.0);
        let mut worst = f64::NEG_INFINITY;
        for h in uniform_times(guaranteed_delta, H_SAMPLES) {
            for (i, &x) in xs.iter().enumerate() {
                worst = worst.max((f.eval(phi.phi(h, x)) - fv[i]).abs() - eps * vv[i] - opts.slack);
            }
        }
        let measured_delta = cross_check.eps_schedule[r].threshold.and_then(|t| t.time());
        let pass = worst <= 0.0 && measured_delta.is_some_and(|d| d >= guaranteed_delta);
        checks.push(LpaCheckRow { eps, guaranteed_delta, measured_delta, worst_slack: worst, pass });
    }

    Ok(LpaRegulatorTrace {
        flow: phi.clone(),
        f: f.clone(),
        u: ru_conv::portable(u, grid)?,
        pass: checks.iter().all(|c| c.pass),
        segments,
        v,
        criterion_c,
        cross_check,
        checks,
        grid: *grid,
        slack: opts.slack,
    })
}
