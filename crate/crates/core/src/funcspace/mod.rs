//! Functions on a truncated real line and their vector-lattice structure.

mod expr;
mod function;
mod grid;
mod pa;
mod smoothed;

pub use expr::{BinOp, Expr, Func};
pub use function::{ConeFlag, Evaluator, RealFunction, Repr, SampledFunction};
pub use grid::GridSpec;
pub use pa::PiecewiseAffineFunction;
pub use smoothed::SmoothedPa;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Sup,
    Inf,
    Abs,
    Add,
    Scale,
}

/// Pointwise lattice/vector operation.
///
/// Piecewise affine operands give an exact piecewise affine result with
/// breakpoints inserted at crossings; any other operand mix is sampled on
/// `grid`.
pub fn lattice_op(
    kind: LatticeKind,
    f: &RealFunction,
    g: Option<&RealFunction>,
    lambda: Option<f64>,
    grid: &GridSpec,
) -> Result<RealFunction> {
    let need_g = || g.ok_or(Error::MissingOperand("second function"));
    if let Some(pf) = f.as_pa() {
        let exact = match kind {
            LatticeKind::Abs => Some(pf.abs()?),
            LatticeKind::Scale => Some(pf.scale(lambda.ok_or(Error::MissingOperand("scalar"))?)),
            _ => match need_g()?.as_pa() {
                Some(pg) => Some(match kind {
                    LatticeKind::Sup => pf.sup(pg)?,
                    LatticeKind::Inf => pf.inf(pg)?,
                    _ => pf.add(pg)?,
                }),
                None => None,
            },
        };
        if let Some(p) = exact {
            return Ok(RealFunction::piecewise_affine(p));
        }
    }

    let fv = f.sample(grid)?;
    let values: Vec<f64> = match kind {
        LatticeKind::Abs => fv.iter().map(|v| v.abs()).collect(),
        LatticeKind::Scale => {
            let l = lambda.ok_or(Error::MissingOperand("scalar"))?;
            fv.iter().map(|v| l * v).collect()
        }
        LatticeKind::Sup | LatticeKind::Inf | LatticeKind::Add => {
            let gv = need_g()?.sample(grid)?;
            let op: fn(f64, f64) -> f64 = match kind {
                LatticeKind::Sup => f64::max,
                LatticeKind::Inf => f64::min,
                _ => |a, b| a + b,
            };
            fv.iter().zip(&gv).map(|(&a, &b)| op(a, b)).collect()
        }
    };
    RealFunction::sampled(*grid, values)
}

/// Grid approximation of `‖f‖_u = inf{λ > 0 : |f| ≤ λu}`, i.e. `max |f|/u`.
pub fn order_unit_norm(f: &RealFunction, u: &RealFunction, grid: &GridSpec) -> Result<f64> {
    let fv = f.sample(grid)?;
    let uv = u.sample(grid)?;
    let mut norm = 0.0f64;
    for (i, (a, b)) in fv.iter().zip(&uv).enumerate() {
        if !(*b > 0.0) {
            return Err(Error::pre(format!(
                "order unit {} is {b} at x = {}, must be positive",
                u.label(),
                grid.point(i)
            )));
        }
        norm = norm.max(a.abs() / b);
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub holds: bool,
    /// `max (f - g)` over the grid.
    pub worst_violation: f64,
    /// Grid point where the worst violation occurs.
    pub at: f64,
}

/// `f ≤ g + slack` at every grid point.
pub fn dominates(f: &RealFunction, g: &RealFunction, grid: &GridSpec, slack: f64) -> Result<Domination> {
    if !(slack >= 0.0) {
        return Err(Error::pre("slack must be nonnegative"));
    }
    let fv = f.sample(grid)?;
    let gv = g.sample(grid)?;
    Ok(dominates_values(&fv, &gv, grid, slack))
}

pub(crate) fn dominates_values(fv: &[f64], gv: &[f64], grid: &GridSpec, slack: f64) -> Domination {
    let (mut worst, mut at) = (f64::NEG_INFINITY, grid.x_lo);
    for (i, (a, b)) in fv.iter().zip(gv).enumerate() {
        let d = a - b;
        if d > worst {
            worst = d;
            at = grid.point(i);
        }
    }
    Domination { holds: worst <= slack, worst_violation: worst, at }
}

/// `max |f - g|` over the grid.
pub fn sup_distance(f: &RealFunction, g: &RealFunction, grid: &GridSpec) -> Result<f64> {
    let fv = f.sample(grid)?;
    let gv = g.sample(grid)?;
    Ok(fv.iter().zip(&gv).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}
