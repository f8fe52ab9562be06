//! Positive one-parameter semigroups acting on real functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constructions::{CommutationReport, LatticeIso};
use crate::error::{Error, Result};
use crate::funcspace::{ConeFlag, GridSpec, RealFunction, SmoothedPa};
use crate::ru_conv::{self, ConvergenceOptions, FunctionFamily, RegulatorReport, DEFAULT_TIME_SAMPLES};
use crate::semiflows::Semiflow;
use crate::tolerances::{LAW_TOL, TOL_ARITH, TOL_ZERO};

/// Quadrature settings of the heat semigroup in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    /// Truncation of the kernel in units of its standard deviation `√(2t)`.
    pub halfwidth_sigmas: f64,
    /// Simpson nodes; an even count is raised to the next odd one.
    pub points: usize,
    /// Below this time `T(t)` is replaced by the identity.
    pub t_min: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams { halfwidth_sigmas: 8.0, points: 513, t_min: 1e-6 }
    }
}

impl HeatParams {
    /// Node offsets and normalised weights of the Gaussian kernel at time `t`.
    pub fn nodes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.points | 1;
        let half = (m - 1) / 2;
        let sigma = (2.0 * t).sqrt();
        let h = self.halfwidth_sigmas * sigma / half as f64;
        let mut xs = Vec::with_capacity(m);
        let mut ws = Vec::with_capacity(m);
        for k in 0..m {
            // integer offsets keep the node set exactly symmetric
            let x = (k as f64 - half as f64) * h;
            let simpson = if k == 0 || k == m - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            xs.push(x);
            ws.push(simpson * (-x * x / (4.0 * t)).exp());
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        (xs, ws)
    }

    fn apply(&self, t: f64, f: &RealFunction) -> RealFunction {
        if t < self.t_min {
            return f.clone();
        }
        let label = format!("heat({t})[{}]", f.label());
        // piecewise affine inputs have an exact Gaussian convolution
        let exact = match f.as_smoothed() {
            Some(sp) => sp.smooth(2.0 * t).ok(),
            None => f.exact_pa().and_then(|pa| SmoothedPa::new(pa, 2.0 * t).ok()),
        };
        let out = match exact {
            Some(sp) => RealFunction::smoothed(sp).with_label(label),
            None => {
                let (xs, ws) = self.nodes(t);
                let g = f.clone();
                RealFunction::evaluator(label, move |y| xs.iter().zip(&ws).map(|(x, w)| w * g.eval(y + x)).sum())
            }
        };
        match f.cone() {
            Some(c) if c.positive => out.with_cone(ConeFlag { positive: true, compact_support: None }),
            _ => out,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SemigroupOperator {
    /// `(T(t)f)(x) = f(x + t)`
    Translation,
    /// Gaussian convolution with variance `2t`.
    Heat(HeatParams),
    /// `(T(t)f)(x) = f(φ(t, x))`
    Koopman(Semiflow),
    /// `V⁻¹ T(t) V`
    Similar { inner: Box<SemigroupOperator>, iso: LatticeIso },
    /// `e^{μt} T(αt)`
    Rescaled { inner: Box<SemigroupOperator>, mu: f64, alpha: f64 },
    /// `T(t) S(t)` for commuting `T`, `S`.
    Product { left: Box<SemigroupOperator>, right: Box<SemigroupOperator>, commutation: Option<Arc<CommutationReport>> },
}

impl fmt::Display for SemigroupOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemigroupOperator::Translation => write!(f, "translation"),
            SemigroupOperator::Heat(p) => write!(f, "heat({},{})", p.halfwidth_sigmas, p.points),
            SemigroupOperator::Koopman(phi) => write!(f, "koopman({phi})"),
            SemigroupOperator::Similar { inner, iso } => write!(f, "similar({inner},{iso})"),
            SemigroupOperator::Rescaled { inner, mu, alpha } => write!(f, "rescale({inner},{mu},{alpha})"),
            SemigroupOperator::Product { left, right, .. } => write!(f, "product({left},{right})"),
        }
    }
}

pub fn make_translation() -> SemigroupOperator {
    SemigroupOperator::Translation
}

pub fn make_heat(quad_halfwidth_sigmas: f64, quad_points: usize) -> Result<SemigroupOperator> {
    if !(quad_halfwidth_sigmas >= 4.0 && quad_halfwidth_sigmas.is_finite()) {
        return Err(Error::pre(format!("heat quadrature halfwidth must be >= 4 sigmas, got {quad_halfwidth_sigmas}")));
    }
    if quad_points < 16 {
        return Err(Error::pre(format!("heat quadrature needs >= 16 points, got {quad_points}")));
    }
    Ok(SemigroupOperator::Heat(HeatParams {
        halfwidth_sigmas: quad_halfwidth_sigmas,
        points: quad_points,
        ..Default::default()
    }))
}

/// `C_N = 2·Γ((N+1)/2) / Γ(N/2)`, the mean of `‖x‖` under the standard
/// Gaussian on `ℝ^N` scaled by `√2`.
pub fn gamma_constant(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::pre("dimension must be >= 1"));
    }
    let n = n as f64;
    Ok(2.0 * libm::tgamma((n + 1.0) / 2.0) / libm::tgamma(n / 2.0))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::pre(format!("time must be finite and >= 0, got {t}")))
    }
}

impl SemigroupOperator {
    /// `T(t)f`, lazily where possible.
    pub fn apply(&self, t: f64, f: &RealFunction) -> Result<RealFunction> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        match self {
            SemigroupOperator::Translation => f.shift(t),
            SemigroupOperator::Heat(p) => Ok(p.apply(t, f)),
            SemigroupOperator::Koopman(phi) => phi.pull_back(f, t),
            SemigroupOperator::Similar { inner, iso } => iso.inverse(&inner.apply(t, &iso.forward(f)?)?),
            SemigroupOperator::Rescaled { inner, mu, alpha } => {
                let g = inner.apply(alpha * t, f)?;
                Ok(if *mu == 0.0 { g } else { g.scale((mu * t).exp()) })
            }
            SemigroupOperator::Product { left, right, .. } => left.apply(t, &right.apply(t, f)?),
        }
    }

    /// `T(t)f` sampled on `grid`.
    pub fn apply_on(&self, t: f64, f: &RealFunction, grid: &GridSpec) -> Result<RealFunction> {
        self.apply(t, f)?.to_sampled(grid)
    }

    pub fn contains_heat(&self) -> bool {
        match self {
            SemigroupOperator::Heat(_) => true,
            SemigroupOperator::Translation | SemigroupOperator::Koopman(_) => false,
            SemigroupOperator::Similar { inner, .. } | SemigroupOperator::Rescaled { inner, .. } => {
                inner.contains_heat()
            }
            SemigroupOperator::Product { left, right, .. } => left.contains_heat() || right.contains_heat(),
        }
    }

    /// Bound on `|y − x|` over the points `y` at which `T(t)f` reads `f` to
    /// produce its value at `x ∈ grid`; `None` when unknown.
    pub fn reach(&self, t: f64, grid: &GridSpec) -> Option<f64> {
        match self {
            SemigroupOperator::Translation => Some(t),
            SemigroupOperator::Heat(p) => Some(p.halfwidth_sigmas * (2.0 * t).sqrt()),
            SemigroupOperator::Koopman(phi) => {
                Some(grid.points().iter().fold(0.0f64, |m, &x| m.max((phi.phi(t, x) - x).abs())))
            }
            SemigroupOperator::Similar { inner, iso } => Some(iso.stretch()? * inner.reach(t, grid)?),
            SemigroupOperator::Rescaled { inner, alpha, .. } => inner.reach(alpha * t, grid),
            SemigroupOperator::Product { left, right, .. } => Some(left.reach(t, grid)? + right.reach(t, grid)?),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LawRow {
    pub s: f64,
    pub t: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawReport {
    pub operator: String,
    pub function: String,
    pub rows: Vec<LawRow>,
    pub max_defect: f64,
    pub tolerance: f64,
    pub grid: GridSpec,
    pub pass: bool,
}

impl LawReport {
    /// `s,t,defect` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,defect\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.s, r.t, r.defect));
        }
        out
    }
}

/// `max |T(s+t)f − T(t)T(s)f|` over the grid for each pair `(s, t)`.
pub fn check_semigroup_law(
    op: &SemigroupOperator,
    f: &RealFunction,
    pairs: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<LawReport> {
    let mut rows = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        check_time(s)?;
        check_time(t)?;
        let once = op.apply(s + t, f)?.sample(grid)?;
        let twice = op.apply(t, &op.apply(s, f)?)?.sample(grid)?;
        let defect = once.iter().zip(&twice).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(LawRow { s, t, defect });
    }
    let max_defect = rows.iter().fold(0.0f64, |m, r| m.max(r.defect));
    Ok(LawReport {
        operator: op.to_string(),
        function: f.label().to_string(),
        rows,
        max_defect,
        tolerance: LAW_TOL,
        grid: *grid,
        pass: max_defect <= LAW_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub operator: String,
    /// Smallest value of `T(t)f` over corpus, times and grid.
    pub min_value: f64,
    pub worst: Option<(String, f64, f64)>,
    pub pass: bool,
}

/// Checks `T(t)f ≥ −tol_arith` for nonnegative corpus functions.
pub fn check_positivity(
    op: &SemigroupOperator,
    corpus: &[RealFunction],
    times: &[f64],
    grid: &GridSpec,
) -> Result<PositivityReport> {
    let (mut min_value, mut worst) = (f64::INFINITY, None);
    for f in corpus {
        let fv = f.sample(grid)?;
        if let Some(i) = fv.iter().position(|v| *v < -TOL_ZERO) {
            return Err(Error::pre(format!("{} is negative at x = {}", f.label(), grid.point(i))));
        }
        for &t in times {
            let g = op.apply(t, f)?.sample(grid)?;
            for (i, v) in g.iter().enumerate() {
                if *v < min_value {
                    min_value = *v;
                    worst = Some((f.label().to_string(), t, grid.point(i)));
                }
            }
        }
    }
    Ok(PositivityReport { operator: op.to_string(), min_value, worst, pass: min_value >= -TOL_ARITH })
}

/// Number of uniformly spaced orbit times checked against the bound.
pub const ORBIT_SAMPLES: usize = 64;
pub const ORBIT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct OrbitBound {
    pub x: String,
    pub s: f64,
    pub delta: f64,
    pub u: String,
    pub n0: usize,
    /// `⋁_{k=0}^{n0} T(δ)^k(|x| + u)`
    pub v: RealFunction,
    pub times: Vec<f64>,
    pub worst_violation: f64,
    pub violations: usize,
    pub slack: f64,
    pub grid: GridSpec,
}

/// Order bound of the orbit `{|T(t)x| : 0 ≤ t ≤ s}` assembled from the
/// ru-continuity certificate `(u, δ)`.
pub fn orbit_order_bound(
    op: &SemigroupOperator,
    x: &RealFunction,
    u: &RealFunction,
    s: f64,
    delta: f64,
    grid: &GridSpec,
) -> Result<OrbitBound> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::pre(format!("step δ must be positive, got {delta}")));
    }
    check_time(s)?;
    if let Some(i) = u.sample(grid)?.iter().position(|v| *v < 0.0) {
        return Err(Error::pre(format!("regulator {} is negative at x = {}", u.label(), grid.point(i))));
    }
    let n0 = if s == 0.0 { 0 } else { ((s / delta) * (1.0 - 1e-12)).ceil() as usize };
    let base = x.abs_lazy()?.add_lazy(u)?;

    let mut vals = base.sample(grid)?;
    if op.contains_heat() {
        // repeated convolution: iterate on a widened grid in sampled form
        let reach = op.reach(delta, grid).ok_or_else(|| Error::pre(format!("cannot bound the reach of {op}")))?;
        let work = grid.widened(n0 as f64 * reach)?;
        let offset = ((grid.x_lo - work.x_lo) / work.spacing()).round() as usize;
        let mut w = base.to_sampled(&work)?;
        for _ in 0..n0 {
            w = op.apply_on(delta, &w, &work)?;
            let wv = w.sample(&work)?;
            for (i, v) in vals.iter_mut().enumerate() {
                *v = v.max(wv[offset + i]);
            }
        }
    } else {
        let mut w = base;
        for _ in 0..n0 {
            w = op.apply(delta, &w)?;
            for (v, wv) in vals.iter_mut().zip(w.sample(grid)?) {
                *v = v.max(wv);
            }
        }
    }
    let v = RealFunction::sampled(*grid, vals.clone())?.with_label("orbit bound");

    let times: Vec<f64> = if s == 0.0 {
        vec![0.0]
    } else {
        (0..ORBIT_SAMPLES).map(|k| s * k as f64 / (ORBIT_SAMPLES - 1) as f64).collect()
    };
    let (mut worst, mut violations) = (f64::NEG_INFINITY, 0);
    for &t in &times {
        let o = op.apply(t, x)?.sample(grid)?;
        for (a, b) in o.iter().zip(&vals) {
            let d = a.abs() - b;
            worst = worst.max(d);
            if d > ORBIT_SLACK {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        return Err(Error::CheckFailed(format!(
            "orbit bound of {} under {op} violated at {violations} sampled points (worst excess {worst:e}); (u, δ) is not a certificate at this resolution",
            x.label()
        )));
    }
    Ok(OrbitBound {
        x: x.label().to_string(),
        s,
        delta,
        u: u.label().to_string(),
        n0,
        v,
        times,
        worst_violation: worst,
        violations,
        slack: ORBIT_SLACK,
        grid: *grid,
    })
}

/// Time range `[0, t]` scanned by [`test_ruc_at_zero`].
pub const RUC_HORIZON: f64 = 1.0;

/// Checks `T(h)x → x` relatively uniformly as `h ↘ 0` with the given regulator.
pub fn test_ruc_at_zero(
    op: &SemigroupOperator,
    x_positive: &RealFunction,
    regulator: &RealFunction,
    eps_list: &[f64],
    grid: &GridSpec,
) -> Result<RegulatorReport> {
    test_ruc_at_zero_until(op, x_positive, regulator, eps_list, grid, RUC_HORIZON)
}

pub fn test_ruc_at_zero_until(
    op: &SemigroupOperator,
    x_positive: &RealFunction,
    regulator: &RealFunction,
    eps_list: &[f64],
    grid: &GridSpec,
    t_hi: f64,
) -> Result<RegulatorReport> {
    if let Some(i) = x_positive.sample(grid)?.iter().position(|v| *v < -TOL_ZERO) {
        return Err(Error::pre(format!("{} is negative at x = {}", x_positive.label(), grid.point(i))));
    }
    let (o, x) = (op.clone(), x_positive.clone());
    let family = FunctionFamily::continuum(
        format!("{op}(h){}", x_positive.label()),
        0.0,
        t_hi,
        DEFAULT_TIME_SAMPLES,
        move |h| o.apply(h, &x),
    );
    ru_conv::verify_ru_convergence(&family, x_positive, regulator, eps_list, grid, ConvergenceOptions::default())
}

/// First candidate regulating `T(h)x → x`, with its report.
pub fn regulator_search(
    op: &SemigroupOperator,
    x: &RealFunction,
    candidates: &[RealFunction],
    eps_list: &[f64],
    grid: &GridSpec,
) -> Result<Option<(RealFunction, RegulatorReport)>> {
    if candidates.is_empty() {
        return Err(Error::pre("no candidate regulators"));
    }
    for c in candidates {
        let r = test_ruc_at_zero(op, x, c, eps_list, grid)?;
        if r.converged {
            return Ok(Some((c.clone(), r)));
        }
    }
    Ok(None)
}

/// The `n` cell centres of `[0, 1]`. For even `n` the point `1/2` is a cell
/// boundary and is never sampled.
pub fn lp_probe_grid(n: usize) -> Result<GridSpec> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::pre(format!("probe grids need an even cell count, got {n}")));
    }
    let h = 1.0 / n as f64;
    GridSpec::new(0.5 * h, 1.0 - 0.5 * h, n)
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRow {
    pub grid_n: usize,
    pub max_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceTable {
    pub p: f64,
    pub delta: f64,
    pub rows: Vec<DivergenceRow>,
    /// `max_value[i+1] / max_value[i]`
    pub ratios: Vec<f64>,
    /// Maxima strictly increase and at least double at every refinement.
    pub diverges: bool,
}

impl DivergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid_n,max_value\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.grid_n, r.max_value));
        }
        out
    }
}

/// Maxima of `g(x) = sup_{t} f(x + t)` for `f = |x − 1/2|^{−1/(2p)}` under
/// grid refinement. The sampled shifts are the multiples of the spacing in
/// `[0, δ]`, so every shifted point stays on the grid lattice.
pub fn lp_counterexample_probe(p: f64, delta: f64, grids: &[GridSpec]) -> Result<DivergenceTable> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::pre(format!("p must be positive, got {p}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::pre(format!("δ must lie in (0, 1/2), got {delta}")));
    }
    if grids.is_empty() {
        return Err(Error::pre("no grids given"));
    }
    let expo = -1.0 / (2.0 * p);
    let mut rows = Vec::with_capacity(grids.len());
    for g in grids {
        let h = g.spacing();
        let k = (delta / h * (1.0 + 1e-12)).floor() as usize;
        // every lattice point up to x_hi + kh is the shifted image of some grid
        // point, so the max of g is the max over that extended lattice
        let mut max_value = 0.0f64;
        for j in 0..g.n + k {
            let x = g.x_lo + j as f64 * h;
            let d = (x - 0.5).abs();
            if d <= TOL_ZERO {
                return Err(Error::pre(format!("grid {g} hits the singularity at x = 1/2")));
            }
            max_value = max_value.max(d.powf(expo));
        }
        rows.push(DivergenceRow { grid_n: g.n, max_value });
    }
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].max_value / w[0].max_value).collect();
    let diverges = rows.len() >= 2 && ratios.iter().all(|r| *r >= 2.0);
    Ok(DivergenceTable { p, delta, rows, ratios, diverges })
}
