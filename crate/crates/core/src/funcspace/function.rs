use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expr::{BinOp, Expr, Func};
use super::grid::GridSpec;
use super::pa::PiecewiseAffineFunction;
use super::smoothed::SmoothedPa;
use crate::error::{Error, Result};
use crate::tolerances::TOL_ZERO;

/// Grids at least this large are evaluated in parallel.
const PAR_THRESHOLD: usize = 4096;

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Values on a uniform grid, read off-grid by linear interpolation and
/// extended by the edge values outside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::pre(format!("grid has {} points but {} values were given", grid.n, values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { label: "sampled values".into(), x: grid.point(i), value: values[i] });
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.x_lo {
            return self.values[0];
        }
        if x >= g.x_hi {
            return self.values[g.n - 1];
        }
        let s = (x - g.x_lo) / g.spacing();
        let i = (s.floor() as usize).min(g.n - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Positivity and compact-support claims attached to a function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ConeFlag {
    pub positive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compact_support: Option<[f64; 2]>,
}

impl ConeFlag {
    pub fn supported_on(lo: f64, hi: f64) -> Self {
        ConeFlag { positive: true, compact_support: Some([lo, hi]) }
    }

    fn shifted(self, by: f64) -> Self {
        ConeFlag { compact_support: self.compact_support.map(|[a, b]| [a + by, b + by]), ..self }
    }
}

#[derive(Clone)]
pub enum Repr {
    Closed(Expr),
    Evaluator(Evaluator),
    Sampled(SampledFunction),
    PiecewiseAffine(PiecewiseAffineFunction),
    Smoothed(SmoothedPa),
}

impl fmt::Debug for Repr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repr::Closed(e) => write!(f, "Closed({e})"),
            Repr::Evaluator(_) => write!(f, "Evaluator(..)"),
            Repr::Sampled(s) => write!(f, "Sampled({} points)", s.values.len()),
            Repr::PiecewiseAffine(p) => write!(f, "PiecewiseAffine({} knots)", p.knots().len()),
            Repr::Smoothed(p) => write!(f, "Smoothed({} knots, var {})", p.pa().knots().len(), p.variance()),
        }
    }
}

/// A real function of one real variable.
#[derive(Debug, Clone)]
pub struct RealFunction {
    repr: Repr,
    label: String,
    cone: Option<ConeFlag>,
}

impl RealFunction {
    pub fn closed(expr: Expr) -> Self {
        let label = expr.to_string();
        RealFunction { repr: Repr::Closed(expr), label, cone: None }
    }

    /// Parses a registry expression such as `"hat(0,1,1)"` or `"1+|x|"`.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::closed(Expr::parse(src)?))
    }

    pub fn evaluator(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RealFunction { repr: Repr::Evaluator(Arc::new(f)), label: label.into(), cone: None }
    }

    pub fn sampled(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Ok(RealFunction {
            repr: Repr::Sampled(SampledFunction::new(grid, values)?),
            label: format!("sampled[{grid}]"),
            cone: None,
        })
    }

    pub fn piecewise_affine(pa: PiecewiseAffineFunction) -> Self {
        let label = format!("pa[{} knots]", pa.knots().len());
        RealFunction { repr: Repr::PiecewiseAffine(pa), label, cone: None }
    }

    pub fn smoothed(sp: SmoothedPa) -> Self {
        let label = format!("smoothed[{} knots, var {}]", sp.pa().knots().len(), sp.variance());
        RealFunction { repr: Repr::Smoothed(sp), label, cone: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::closed(Expr::Num(c))
    }

    pub fn identity() -> Self {
        Self::closed(Expr::X)
    }

    pub fn hat(center: f64, halfwidth: f64, height: f64) -> Self {
        Self::closed(Expr::hat(center, halfwidth, height))
            .with_cone(ConeFlag::supported_on(center - halfwidth, center + halfwidth))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_cone(mut self, cone: ConeFlag) -> Self {
        self.cone = Some(cone);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn cone(&self) -> Option<ConeFlag> {
        self.cone
    }

    pub fn as_pa(&self) -> Option<&PiecewiseAffineFunction> {
        match &self.repr {
            Repr::PiecewiseAffine(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_smoothed(&self) -> Option<&SmoothedPa> {
        match &self.repr {
            Repr::Smoothed(p) => Some(p),
            _ => None,
        }
    }

    /// Exact piecewise affine form: the stored one, or the closed form's
    /// expansion when the expression is built from affine pieces.
    pub fn exact_pa(&self) -> Option<PiecewiseAffineFunction> {
        match &self.repr {
            Repr::PiecewiseAffine(p) => Some(p.clone()),
            Repr::Closed(e) => PiecewiseAffineFunction::from_expr(e),
            _ => None,
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match &self.repr {
            Repr::Closed(e) => Some(e),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Closed(e) => e.eval(x),
            Repr::Evaluator(f) => f(x),
            Repr::Sampled(s) => s.eval(x),
            Repr::PiecewiseAffine(p) => p.eval(x),
            Repr::Smoothed(p) => p.eval(x),
        }
    }

    /// Evaluates at every grid point, rejecting non-finite values.
    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let values: Vec<f64> = if grid.n >= PAR_THRESHOLD {
            (0..grid.n).into_par_iter().map(|i| self.eval(grid.point(i))).collect()
        } else {
            (0..grid.n).map(|i| self.eval(grid.point(i))).collect()
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { label: self.label.clone(), x: grid.point(i), value: values[i] });
        }
        Ok(values)
    }

    /// Materialises the function as grid samples.
    pub fn to_sampled(&self, grid: &GridSpec) -> Result<Self> {
        let mut s = Self::sampled(*grid, self.sample(grid)?)?;
        s.label = self.label.clone();
        s.cone = self.cone;
        Ok(s)
    }

    /// `x ↦ f(alpha * x + beta)`: exact for closed forms and piecewise affine
    /// functions, lazy otherwise.
    pub fn compose_affine(&self, alpha: f64, beta: f64) -> Result<Self> {
        let inner = Expr::bin(
            BinOp::Add,
            if alpha == 1.0 { Expr::X } else { Expr::bin(BinOp::Mul, Expr::Num(alpha), Expr::X) },
            Expr::Num(beta),
        );
        let label = format!("({})∘({inner})", self.label);
        let out = match &self.repr {
            Repr::Closed(e) => Self::closed(e.compose(&inner)),
            Repr::PiecewiseAffine(p) => Self::piecewise_affine(p.compose_affine(alpha, beta)?),
            Repr::Smoothed(p) if alpha != 0.0 => Self::smoothed(p.compose_affine(alpha, beta)?),
            _ => {
                let f = self.clone();
                Self::evaluator(label, move |x| f.eval(alpha * x + beta))
            }
        };
        let cone = self.cone.map(|c| {
            let mapped = c.compact_support.map(|[a, b]| {
                let (p, q) = ((a - beta) / alpha, (b - beta) / alpha);
                [p.min(q), p.max(q)]
            });
            ConeFlag { compact_support: mapped, ..c }
        });
        Ok(Self { cone, ..out })
    }

    /// `x ↦ f(x + t)`. Sampled functions stay on their grid.
    pub fn shift(&self, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Ok(self.clone());
        }
        if let Repr::Sampled(s) = &self.repr {
            let values = s.grid.points().iter().map(|&x| s.eval(x + t)).collect();
            let mut out = Self::sampled(s.grid, values)?;
            out.label = format!("shift({}, {t})", self.label);
            out.cone = self.cone.map(|c| c.shifted(-t));
            return Ok(out);
        }
        let mut out = self.compose_affine(1.0, t)?;
        out.cone = self.cone.map(|c| c.shifted(-t));
        Ok(out)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        let label = format!("{lambda}*({})", self.label);
        let mut out = match &self.repr {
            Repr::Closed(e) => Self::closed(Expr::bin(BinOp::Mul, Expr::Num(lambda), e.clone())),
            Repr::PiecewiseAffine(p) => Self::piecewise_affine(p.scale(lambda)),
            Repr::Smoothed(p) => Self::smoothed(p.scale(lambda)),
            Repr::Sampled(s) => RealFunction {
                repr: Repr::Sampled(SampledFunction {
                    grid: s.grid,
                    values: s.values.iter().map(|v| v * lambda).collect(),
                }),
                label: label.clone(),
                cone: None,
            },
            Repr::Evaluator(f) => {
                let f = f.clone();
                Self::evaluator(label, move |x| lambda * f(x))
            }
        };
        out.cone = self.cone.map(|c| ConeFlag { positive: c.positive && lambda >= 0.0, ..c });
        out
    }

    /// Lazy pointwise combination: closed forms stay closed, piecewise affine
    /// pairs stay exact, anything else becomes an evaluator.
    fn zip(&self, other: &Self, op: Pointwise) -> Result<Self> {
        if let (Repr::Closed(a), Repr::Closed(b)) = (&self.repr, &other.repr) {
            let e = match op {
                Pointwise::Add => Expr::bin(BinOp::Add, a.clone(), b.clone()),
                Pointwise::Max => Expr::Call(Func::Max, vec![a.clone(), b.clone()]),
                Pointwise::Min => Expr::Call(Func::Min, vec![a.clone(), b.clone()]),
            };
            return Ok(Self::closed(e));
        }
        if let (Repr::PiecewiseAffine(a), Repr::PiecewiseAffine(b)) = (&self.repr, &other.repr) {
            let p = match op {
                Pointwise::Add => a.add(b)?,
                Pointwise::Max => a.sup(b)?,
                Pointwise::Min => a.inf(b)?,
            };
            return Ok(Self::piecewise_affine(p));
        }
        let (f, g) = (self.clone(), other.clone());
        let label = format!("{}({}, {})", op.name(), self.label, other.label);
        Ok(Self::evaluator(label, move |x| op.apply(f.eval(x), g.eval(x))))
    }

    pub fn add_lazy(&self, other: &Self) -> Result<Self> {
        self.zip(other, Pointwise::Add)
    }

    pub fn sup_lazy(&self, other: &Self) -> Result<Self> {
        self.zip(other, Pointwise::Max)
    }

    pub fn inf_lazy(&self, other: &Self) -> Result<Self> {
        self.zip(other, Pointwise::Min)
    }

    pub fn abs_lazy(&self) -> Result<Self> {
        match &self.repr {
            Repr::Closed(e) => Ok(Self::closed(Expr::Call(Func::Abs, vec![e.clone()]))),
            _ => self.sup_lazy(&self.scale(-1.0)),
        }
    }

    /// Grid-detected support `[min, max]` of `{x : |f(x)| > TOL_ZERO}`.
    pub fn detected_support(&self, grid: &GridSpec) -> Result<Option<[f64; 2]>> {
        let v = self.sample(grid)?;
        let first = v.iter().position(|y| y.abs() > TOL_ZERO);
        let last = v.iter().rposition(|y| y.abs() > TOL_ZERO);
        Ok(first.zip(last).map(|(a, b)| [grid.point(a), grid.point(b)]))
    }

    /// Checks the attached cone flag on the grid.
    pub fn verify_cone(&self, grid: &GridSpec) -> Result<()> {
        let Some(flag) = self.cone else { return Ok(()) };
        let v = self.sample(grid)?;
        for (i, y) in v.iter().enumerate() {
            let x = grid.point(i);
            if flag.positive && *y < -TOL_ZERO {
                return Err(Error::CheckFailed(format!("{} is negative ({y}) at {x}", self.label)));
            }
            if let Some([lo, hi]) = flag.compact_support {
                if (x < lo || x > hi) && y.abs() > TOL_ZERO {
                    return Err(Error::CheckFailed(format!(
                        "{} is {y} at {x}, outside its declared support [{lo}, {hi}]",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Pointwise {
    Add,
    Max,
    Min,
}

impl Pointwise {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Pointwise::Add => a + b,
            Pointwise::Max => a.max(b),
            Pointwise::Min => a.min(b),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Pointwise::Add => "add",
            Pointwise::Max => "max",
            Pointwise::Min => "min",
        }
    }
}

impl From<Expr> for RealFunction {
    fn from(e: Expr) -> Self {
        RealFunction::closed(e)
    }
}

impl From<PiecewiseAffineFunction> for RealFunction {
    fn from(p: PiecewiseAffineFunction) -> Self {
        RealFunction::piecewise_affine(p)
    }
}

// JSON form: {"repr": "pa"|"smoothed"|"sampled"|"closed", ...} or a bare registry string.

#[derive(Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "lowercase")]
enum Body {
    Pa {
        knots: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
    },
    Smoothed {
        knots: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
        variance: f64,
    },
    Sampled {
        grid: GridSpec,
        values: Vec<f64>,
    },
    Closed {
        #[serde(alias = "name")]
        expr: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Doc {
    #[serde(flatten)]
    body: Body,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cone: Option<ConeFlag>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DocOrName {
    Name(String),
    Doc(Doc),
}

impl Serialize for RealFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let body = match &self.repr {
            Repr::Closed(e) => Body::Closed { expr: e.to_string() },
            Repr::PiecewiseAffine(p) => {
                Body::Pa { knots: p.knots().to_vec(), slopes: p.slopes().to_vec(), intercepts: p.intercepts().to_vec() }
            }
            Repr::Smoothed(sp) => Body::Smoothed {
                knots: sp.pa().knots().to_vec(),
                slopes: sp.pa().slopes().to_vec(),
                intercepts: sp.pa().intercepts().to_vec(),
                variance: sp.variance(),
            },
            Repr::Sampled(sf) => Body::Sampled { grid: sf.grid, values: sf.values.clone() },
            Repr::Evaluator(_) => {
                return Err(serde::ser::Error::custom(Error::NotSerializable(self.label.clone()).to_string()))
            }
        };
        Doc { body, label: Some(self.label.clone()), cone: self.cone }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = match DocOrName::deserialize(d)? {
            DocOrName::Name(s) => return RealFunction::parse(&s).map_err(D::Error::custom),
            DocOrName::Doc(doc) => doc,
        };
        let mut f = match doc.body {
            Body::Closed { expr } => RealFunction::parse(&expr),
            Body::Pa { knots, slopes, intercepts } => {
                PiecewiseAffineFunction::new(knots, slopes, intercepts).map(RealFunction::piecewise_affine)
            }
            Body::Smoothed { knots, slopes, intercepts, variance } => {
                PiecewiseAffineFunction::new(knots, slopes, intercepts)
                    .and_then(|p| SmoothedPa::new(p, variance))
                    .map(RealFunction::smoothed)
            }
            Body::Sampled { grid, values } => RealFunction::sampled(grid, values),
        }
        .map_err(D::Error::custom)?;
        if let Some(l) = doc.label {
            f.label = l;
        }
        f.cone = doc.cone;
        Ok(f)
    }
}
