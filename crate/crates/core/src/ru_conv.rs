//! Relative uniform convergence with an explicit regulator.
//!
//! A family `x_n → x` (or `x_t → x` as `t ↘ t_lo`) converges relatively
//! uniformly with regulator `u ≥ 0` when for every `ε` the bound
//! `|x_n − x| ≤ ε·u` holds from some index on. Infinite index sets are
//! truncated: sequences are checked up to `n_max`, continuum families on a
//! lattice of sample times, and every report states the range it checked.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{GridSpec, PiecewiseAffineFunction, RealFunction, Repr};
use crate::tolerances::TOL_ARITH;

/// Default number of sample times of a continuum family.
pub const DEFAULT_TIME_SAMPLES: usize = 256;
/// Ratio between the smallest positive sample time and the range length.
pub const TIME_DYNAMIC_RANGE: f64 = 1e-6;
/// Bisection steps refining a continuum threshold between lattice neighbours.
pub const DEFAULT_REFINE_STEPS: usize = 20;

type MemberFn = Arc<dyn Fn(f64) -> Result<RealFunction> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyIndex {
    /// Members `x_1, ..., x_{n_max}`.
    Sequence { n_max: usize },
    /// Members `x_t`, `t ∈ [t_lo, t_hi]`, converging as `t ↘ t_lo`.
    Continuum { t_lo: f64, t_hi: f64, n_samples: usize },
}

/// An indexed family of functions.
#[derive(Clone)]
pub struct FunctionFamily {
    pub index: FamilyIndex,
    pub label: String,
    member: MemberFn,
}

impl std::fmt::Debug for FunctionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionFamily").field("index", &self.index).field("label", &self.label).finish()
    }
}

impl FunctionFamily {
    pub fn sequence(
        label: impl Into<String>,
        n_max: usize,
        member: impl Fn(usize) -> Result<RealFunction> + Send + Sync + 'static,
    ) -> Self {
        FunctionFamily {
            index: FamilyIndex::Sequence { n_max },
            label: label.into(),
            member: Arc::new(move |n| member(n as usize)),
        }
    }

    pub fn continuum(
        label: impl Into<String>,
        t_lo: f64,
        t_hi: f64,
        n_samples: usize,
        member: impl Fn(f64) -> Result<RealFunction> + Send + Sync + 'static,
    ) -> Self {
        FunctionFamily {
            index: FamilyIndex::Continuum { t_lo, t_hi, n_samples },
            label: label.into(),
            member: Arc::new(member),
        }
    }

    pub fn member(&self, at: f64) -> Result<RealFunction> {
        (self.member)(at)
    }

    /// Sampled index values ordered toward the limit: `1..=n_max` for
    /// sequences, and for continuum families the time lattice from `t_hi`
    /// down to `t_lo`.
    pub fn indices_toward_limit(&self) -> Vec<f64> {
        match self.index {
            FamilyIndex::Sequence { n_max } => (1..=n_max).map(|n| n as f64).collect(),
            FamilyIndex::Continuum { t_lo, t_hi, n_samples } => {
                let mut t = time_lattice(t_lo, t_hi, n_samples);
                t.reverse();
                t
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self.index {
            FamilyIndex::Sequence { n_max } if n_max >= 1 => Ok(()),
            FamilyIndex::Continuum { t_lo, t_hi, n_samples }
                if t_lo.is_finite() && t_hi.is_finite() && t_lo < t_hi && n_samples >= 3 =>
            {
                Ok(())
            }
            idx => Err(Error::pre(format!("invalid family index {idx:?}"))),
        }
    }
}

/// `t_lo` followed by `n − 1` geometrically spaced times ending at `t_hi`,
/// the smallest positive offset being `TIME_DYNAMIC_RANGE·(t_hi − t_lo)`.
pub fn time_lattice(t_lo: f64, t_hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 3 && t_hi > t_lo);
    let span = t_hi - t_lo;
    let ratio = TIME_DYNAMIC_RANGE.powf(1.0 / (n - 2) as f64);
    let mut out = Vec::with_capacity(n);
    out.push(t_lo);
    for k in 1..n {
        let e = (n - 1 - k) as i32;
        out.push(if e == 0 { t_hi } else { t_lo + span * ratio.powi(e) });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Smallest index from which every checked member satisfies the bound.
    Index(usize),
    /// Largest time up to which every checked member satisfies the bound.
    Time(f64),
}

impl Threshold {
    pub fn value(&self) -> f64 {
        match self {
            Threshold::Index(n) => *n as f64,
            Threshold::Time(t) => *t,
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            Threshold::Time(t) => Some(*t),
            Threshold::Index(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub eps: f64,
    pub threshold: Option<Threshold>,
    /// `max (|x_α − x| − ε·u − slack)` over the grid and the accepted members.
    pub worst_slack: f64,
    /// No member in the checked range violated the bound.
    pub saturated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegulatorReport {
    pub converged: bool,
    pub family: String,
    pub index: FamilyIndex,
    pub regulator: RealFunction,
    pub eps_schedule: Vec<ScheduleRow>,
    pub grid: GridSpec,
    pub slack: f64,
    /// Number of members evaluated (early exit stops once every row failed).
    pub members_checked: usize,
}

impl RegulatorReport {
    pub fn row(&self, eps: f64) -> Option<&ScheduleRow> {
        self.eps_schedule.iter().find(|r| r.eps == eps)
    }

    pub fn time_thresholds(&self) -> Vec<Option<f64>> {
        self.eps_schedule.iter().map(|r| r.threshold.and_then(|t| t.time())).collect()
    }

    /// Two-column `eps,threshold` table; failed rows leave the threshold empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,threshold\n");
        for r in &self.eps_schedule {
            match r.threshold {
                Some(t) => writeln!(s, "{},{}", r.eps, t.value()).unwrap(),
                None => writeln!(s, "{},", r.eps).unwrap(),
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub slack: f64,
    pub refine_steps: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { slack: TOL_ARITH, refine_steps: DEFAULT_REFINE_STEPS }
    }
}

pub(crate) fn validate_eps(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::pre("eps list is empty"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::pre("eps values must be positive and finite"));
    }
    if eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::pre("eps list must be strictly decreasing"));
    }
    Ok(())
}

/// Stores functions that cannot be serialized as grid samples.
pub(crate) fn portable(f: &RealFunction, grid: &GridSpec) -> Result<RealFunction> {
    match f.repr() {
        Repr::Evaluator(_) => f.to_sampled(grid),
        _ => Ok(f.clone()),
    }
}

struct Evaluation<'a> {
    family: &'a FunctionFamily,
    limit: Vec<f64>,
    reg: Vec<f64>,
    grid: &'a GridSpec,
    eps: &'a [f64],
    slack: f64,
}

impl Evaluation<'_> {
    /// Per-ε excess `max (|x_α − x| − ε·u − slack)`; the bound holds iff ≤ 0.
    fn excess(&self, at: f64) -> Result<Vec<f64>> {
        let m = self.family.member(at)?.sample(self.grid)?;
        let mut out = vec![f64::NEG_INFINITY; self.eps.len()];
        for ((a, b), u) in m.iter().zip(&self.limit).zip(&self.reg) {
            let d = (a - b).abs() - self.slack;
            for (o, e) in out.iter_mut().zip(self.eps) {
                *o = o.max(d - e * u);
            }
        }
        Ok(out)
    }
}

/// Determines, for each `ε`, the threshold from which `|x_α − x| ≤ ε·u`.
pub fn verify_ru_convergence(
    family: &FunctionFamily,
    limit: &RealFunction,
    regulator: &RealFunction,
    eps_list: &[f64],
    grid: &GridSpec,
    opts: ConvergenceOptions,
) -> Result<RegulatorReport> {
    family.validate()?;
    validate_eps(eps_list)?;
    let reg = regulator.sample(grid)?;
    if let Some(i) = reg.iter().position(|u| *u < 0.0) {
        return Err(Error::pre(format!(
            "regulator {} is negative ({}) at x = {}",
            regulator.label(),
            reg[i],
            grid.point(i)
        )));
    }
    let ev = Evaluation { family, limit: limit.sample(grid)?, reg, grid, eps: eps_list, slack: opts.slack };

    let k = eps_list.len();
    let mut failed_at: Vec<Option<usize>> = vec![None; k];
    let mut worst = vec![f64::NEG_INFINITY; k];
    let mut members_checked = 0;

    let rows: Vec<ScheduleRow> = match family.index {
        FamilyIndex::Sequence { n_max } => {
            // scan from the tail so each row's last failure is found first
            for n in (1..=n_max).rev() {
                let ex = ev.excess(n as f64)?;
                members_checked += 1;
                for r in 0..k {
                    if failed_at[r].is_none() {
                        if ex[r] > 0.0 {
                            failed_at[r] = Some(n);
                            if n == n_max {
                                worst[r] = ex[r];
                            }
                        } else {
                            worst[r] = worst[r].max(ex[r]);
                        }
                    }
                }
                if failed_at.iter().all(Option::is_some) {
                    break;
                }
            }
            (0..k)
                .map(|r| {
                    let threshold = match failed_at[r] {
                        None => Some(Threshold::Index(1)),
                        Some(n) if n < n_max => Some(Threshold::Index(n + 1)),
                        Some(_) => None,
                    };
                    ScheduleRow {
                        eps: eps_list[r],
                        threshold,
                        worst_slack: worst[r],
                        saturated: failed_at[r].is_none(),
                    }
                })
                .collect()
        }
        FamilyIndex::Continuum { t_lo, t_hi, n_samples } => {
            let times = time_lattice(t_lo, t_hi, n_samples);
            for (i, &t) in times.iter().enumerate() {
                let ex = ev.excess(t)?;
                members_checked += 1;
                for r in 0..k {
                    if failed_at[r].is_none() {
                        if ex[r] > 0.0 {
                            failed_at[r] = Some(i);
                            if i == 0 {
                                worst[r] = ex[r];
                            }
                        } else {
                            worst[r] = worst[r].max(ex[r]);
                        }
                    }
                }
                if failed_at.iter().all(Option::is_some) {
                    break;
                }
            }
            let mut rows = Vec::with_capacity(k);
            for r in 0..k {
                let threshold = match failed_at[r] {
                    None => Some(Threshold::Time(t_hi)),
                    Some(0) => None,
                    Some(i) => {
                        let (mut lo, mut hi) = (times[i - 1], times[i]);
                        for _ in 0..opts.refine_steps {
                            let mid = 0.5 * (lo + hi);
                            let ex = ev.excess(mid)?[r];
                            members_checked += 1;
                            if ex > 0.0 {
                                hi = mid;
                            } else {
                                worst[r] = worst[r].max(ex);
                                lo = mid;
                            }
                        }
                        (lo > t_lo).then_some(Threshold::Time(lo))
                    }
                };
                rows.push(ScheduleRow {
                    eps: eps_list[r],
                    threshold,
                    worst_slack: worst[r],
                    saturated: failed_at[r].is_none(),
                });
            }
            rows
        }
    };

    Ok(RegulatorReport {
        converged: rows.iter().all(|r| r.threshold.is_some()),
        family: family.label.clone(),
        index: family.index,
        regulator: portable(regulator, grid)?,
        eps_schedule: rows,
        grid: *grid,
        slack: opts.slack,
        members_checked,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CcVerdict {
    pub uniform_conv: bool,
    pub common_support: Option<[f64; 2]>,
    pub verdict: bool,
    /// Whether the supports of the tail members keep growing toward the limit.
    pub supports_grow: bool,
    pub uniform_report: RegulatorReport,
}

/// Default ε schedule used to decide uniform convergence on the window.
pub const CC_EPS: [f64; 2] = [0.1, 0.01];

/// Relative uniform convergence in `C_c(ℝ)`: uniform convergence together
/// with one compact set containing the supports of all members from some
/// index on.
pub fn check_cc_characterization(
    family: &FunctionFamily,
    limit: &RealFunction,
    grid: &GridSpec,
    eps_list: &[f64],
    opts: ConvergenceOptions,
) -> Result<CcVerdict> {
    let one = RealFunction::constant(1.0);
    let uniform = verify_ru_convergence(family, limit, &one, eps_list, grid, opts)?;

    // tail: members beyond the threshold of the finest ε, ordered toward the limit
    let all = family.indices_toward_limit();
    let tail: Vec<f64> = match uniform.eps_schedule.last().and_then(|r| r.threshold) {
        Some(Threshold::Index(n0)) => all.into_iter().filter(|&n| n >= n0 as f64).collect(),
        Some(Threshold::Time(d)) => all.into_iter().filter(|&t| t <= d).collect(),
        None => all,
    };

    let mut radii = Vec::with_capacity(tail.len());
    let mut hull: Option<[f64; 2]> = None;
    let absorb = |s: [f64; 2], hull: &mut Option<[f64; 2]>| {
        *hull = Some(match *hull {
            None => s,
            Some([a, b]) => [a.min(s[0]), b.max(s[1])],
        });
    };
    for &at in &tail {
        let m = family.member(at)?;
        let support = m
            .cone()
            .and_then(|c| c.compact_support)
            .ok_or_else(|| Error::pre(format!("member {} of {} lacks a compact-support flag", at, family.label)))?;
        m.verify_cone(grid)?;
        radii.push(support[0].abs().max(support[1].abs()));
        absorb(support, &mut hull);
    }
    let limit_support = match limit.cone().and_then(|c| c.compact_support) {
        Some(s) => {
            limit.verify_cone(grid)?;
            Some(s)
        }
        None => match limit.detected_support(grid)? {
            None => None,
            Some(_) => return Err(Error::pre("limit has nonzero values but no compact-support flag")),
        },
    };
    if let Some(s) = limit_support {
        absorb(s, &mut hull);
    }

    let q = (radii.len() / 4).max(1);
    let head_max = radii.iter().take(q).fold(0.0f64, |m, r| m.max(*r));
    let end_max = radii.iter().rev().take(q).fold(0.0f64, |m, r| m.max(*r));
    let supports_grow = radii.len() >= 2 && end_max > head_max + grid.spacing();

    let inside = |s: &[f64; 2]| s[0] >= grid.x_lo && s[1] <= grid.x_hi;
    let common_support = match hull {
        Some(h) if !supports_grow && inside(&h) => Some(h),
        None if !supports_grow => Some([0.0, 0.0]),
        _ => None,
    };
    let uniform_conv = uniform.converged;
    Ok(CcVerdict {
        uniform_conv,
        common_support,
        verdict: uniform_conv && common_support.is_some(),
        supports_grow,
        uniform_report: uniform,
    })
}

/// Positive compactly supported regulator equal to 1 on `support`, with
/// linear ramps of width `ramp` on both sides.
pub fn cc_regulator(support: [f64; 2], ramp: f64) -> Result<RealFunction> {
    let [a, b] = support;
    let pa = if b > a {
        PiecewiseAffineFunction::from_points(&[a - ramp, a, b, b + ramp], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.0)?
    } else {
        PiecewiseAffineFunction::from_points(&[a - ramp, a, a + ramp], &[0.0, 1.0, 0.0], 0.0, 0.0)?
    };
    Ok(RealFunction::piecewise_affine(pa)
        .with_cone(crate::funcspace::ConeFlag::supported_on(a - ramp, b + ramp))
        .with_label(format!("plateau[{a},{b}]")))
}

#[derive(Debug, Clone, Serialize)]
pub struct LpaApproximation {
    pub pa: PiecewiseAffineFunction,
    /// `max |f − pa|` over the grid.
    pub max_error: f64,
}

/// Interpolates `f` at `knot_budget` equally spaced knots spanning the window.
pub fn lpa_approximate(f: &RealFunction, knot_budget: usize, grid: &GridSpec) -> Result<LpaApproximation> {
    if knot_budget < 2 {
        return Err(Error::pre(format!("knot budget must be >= 2, got {knot_budget}")));
    }
    let knots = GridSpec::new(grid.x_lo, grid.x_hi, knot_budget)?.points();
    let values: Vec<f64> = knots.iter().map(|&x| f.eval(x)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { label: f.label().to_string(), x: knots[i], value: values[i] });
    }
    let m = knots.len();
    let left = (values[1] - values[0]) / (knots[1] - knots[0]);
    let right = (values[m - 1] - values[m - 2]) / (knots[m - 1] - knots[m - 2]);
    let pa = PiecewiseAffineFunction::from_points(&knots, &values, left, right)?;
    let fv = f.sample(grid)?;
    let max_error = grid.points().iter().zip(&fv).fold(0.0f64, |e, (&x, y)| e.max((pa.eval(x) - y).abs()));
    Ok(LpaApproximation { pa, max_error })
}
