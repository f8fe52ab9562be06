//! Continuous piecewise affine functions with finitely many knots.
//!
//! Segment `i` of a function with knots `j_0 < ... < j_{m-1}` covers
//! `[j_{i-1}, j_i]`, with segment `0` running to `-inf` and segment `m` to
//! `+inf`. On segment `i` the function is `a_i * x + b_i`, and continuity at
//! knot `j_i` reads `b_i - b_{i+1} = (a_{i+1} - a_i) * j_i`.

use serde::{Deserialize, Serialize};

use super::expr::{BinOp, Expr, Func};
use crate::error::{Error, Result};
use crate::tolerances::TOL_KNOT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPa")]
pub struct PiecewiseAffineFunction {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPa {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl TryFrom<RawPa> for PiecewiseAffineFunction {
    type Error = Error;
    fn try_from(r: RawPa) -> Result<Self> {
        PiecewiseAffineFunction::new(r.knots, r.slopes, r.intercepts)
    }
}

/// An affine piece `slope * x + intercept` valid on `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    slope: f64,
    intercept: f64,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// An interior point, also for the unbounded end pieces.
    fn probe(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (false, true) => self.hi - 1.0,
            (true, false) => self.lo + 1.0,
            (false, false) => 0.0,
        }
    }
}

impl PiecewiseAffineFunction {
    /// Validating constructor.
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        let m = knots.len();
        if m < 2 {
            return Err(Error::pre(format!("piecewise affine function needs >= 2 knots, got {m}")));
        }
        if slopes.len() != m + 1 || intercepts.len() != m + 1 {
            return Err(Error::pre(format!(
                "{m} knots need {} slopes and intercepts, got {} and {}",
                m + 1,
                slopes.len(),
                intercepts.len()
            )));
        }
        if knots.iter().chain(&slopes).chain(&intercepts).any(|v| !v.is_finite()) {
            return Err(Error::pre("piecewise affine data must be finite"));
        }
        if let Some(w) = knots.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::pre(format!("knots must increase strictly: {} >= {}", w[0], w[1])));
        }
        for (i, &j) in knots.iter().enumerate() {
            let jump = (slopes[i + 1] - slopes[i]) * j;
            let defect = (intercepts[i] - intercepts[i + 1]) - jump;
            // absolute below magnitude 1, relative to the terms above it
            let scale = 1f64.max(intercepts[i].abs()).max(intercepts[i + 1].abs()).max(jump.abs());
            if defect.abs() > TOL_KNOT * scale {
                return Err(Error::pre(format!("discontinuity {defect:e} at knot {j} exceeds {TOL_KNOT:e}")));
            }
        }
        Ok(PiecewiseAffineFunction { knots, slopes, intercepts })
    }

    /// Builds the continuous function with the given knots and slopes whose
    /// leftmost piece has intercept `b0`.
    pub fn from_slopes(knots: Vec<f64>, slopes: Vec<f64>, b0: f64) -> Result<Self> {
        if slopes.len() != knots.len() + 1 {
            return Err(Error::pre("need one more slope than knots"));
        }
        let mut intercepts = Vec::with_capacity(slopes.len());
        intercepts.push(b0);
        for (i, &j) in knots.iter().enumerate() {
            let prev = intercepts[i];
            intercepts.push(prev - (slopes[i + 1] - slopes[i]) * j);
        }
        Self::new(knots, slopes, intercepts)
    }

    /// Interpolates `(xs[i], ys[i])` and extends with the given end slopes.
    pub fn from_points(xs: &[f64], ys: &[f64], left_slope: f64, right_slope: f64) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::pre("xs and ys differ in length"));
        }
        if xs.len() < 2 {
            return Err(Error::pre("need at least two interpolation points"));
        }
        let mut slopes = Vec::with_capacity(xs.len() + 1);
        slopes.push(left_slope);
        for i in 0..xs.len() - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        slopes.push(right_slope);
        let b0 = ys[0] - left_slope * xs[0];
        Self::from_slopes(xs.to_vec(), slopes, b0)
    }

    /// `height * max(0, 1 - |x - center| / halfwidth)`.
    pub fn hat(center: f64, halfwidth: f64, height: f64) -> Result<Self> {
        if !(halfwidth > 0.0) {
            return Err(Error::pre("hat halfwidth must be positive"));
        }
        Self::from_points(&[center - halfwidth, center, center + halfwidth], &[0.0, height, 0.0], 0.0, 0.0)
    }

    /// The affine function `slope * x + intercept`, carried on two knots.
    pub fn affine(slope: f64, intercept: f64, knots: [f64; 2]) -> Result<Self> {
        Self::from_slopes(knots.to_vec(), vec![slope; 3], intercept)
    }

    /// Exact form of a closed expression assembled from affine pieces: `x`,
    /// constants, sums, scalar products and quotients, `abs`, `min`, `max`,
    /// `clamp`, and `hat`/`plateau` of affine arguments. `None` otherwise.
    pub fn from_expr(e: &Expr) -> Option<Self> {
        let unit = [0.0, 1.0];
        match e {
            Expr::Num(c) => Self::affine(0.0, *c, unit).ok(),
            Expr::X => Self::affine(1.0, 0.0, unit).ok(),
            Expr::Neg(a) => Some(Self::from_expr(a)?.scale(-1.0)),
            Expr::Bin(op, a, b) => {
                let (p, q) = (Self::from_expr(a)?, Self::from_expr(b)?);
                match op {
                    BinOp::Add => p.add(&q).ok(),
                    BinOp::Sub => p.add(&q.scale(-1.0)).ok(),
                    BinOp::Mul => match (p.constant(), q.constant()) {
                        (Some(c), _) => Some(q.scale(c)),
                        (_, Some(c)) => Some(p.scale(c)),
                        _ => None,
                    },
                    BinOp::Div => q.constant().filter(|c| *c != 0.0).map(|c| p.scale(1.0 / c)),
                    BinOp::Pow => None,
                }
            }
            Expr::Call(f, args) => {
                let arg = |i: usize| Self::from_expr(&args[i]);
                let num = |i: usize| arg(i)?.constant();
                match f {
                    Func::Abs => arg(0)?.abs().ok(),
                    Func::Min => arg(0)?.inf(&arg(1)?).ok(),
                    Func::Max => arg(0)?.sup(&arg(1)?).ok(),
                    Func::Clamp => arg(0)?.sup(&arg(1)?).ok()?.inf(&arg(2)?).ok(),
                    Func::Hat => Self::hat(num(0)?, num(1)?, num(2)?).ok()?.after(&arg(3)?),
                    Func::Plateau => {
                        let n = num(0)?;
                        let p = Self::from_points(&[-n - 1.0, -n, n, n + 1.0], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.0).ok()?;
                        p.after(&arg(1)?)
                    }
                    _ => None,
                }
            }
        }
    }

    /// The value when every piece is the same constant.
    fn constant(&self) -> Option<f64> {
        let c = self.intercepts[0];
        (self.slopes.iter().all(|a| *a == 0.0)
            && self.intercepts.iter().all(|b| (b - c).abs() <= TOL_KNOT * (1.0 + c.abs())))
        .then_some(c)
    }

    /// `self ∘ inner` when `inner` is affine.
    fn after(&self, inner: &Self) -> Option<Self> {
        let (a, b) = (inner.slopes[0], inner.intercepts[0]);
        let affine = inner.slopes.iter().all(|s| (s - a).abs() <= TOL_KNOT * (1.0 + a.abs()))
            && inner.intercepts.iter().all(|c| (c - b).abs() <= TOL_KNOT * (1.0 + b.abs()));
        if !affine {
            return None;
        }
        if a == 0.0 {
            return Self::affine(0.0, self.eval(b), [0.0, 1.0]).ok();
        }
        self.compose_affine(a, b).ok()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Index of the segment containing `x` (left-closed at knots).
    pub fn segment_of(&self, x: f64) -> usize {
        self.knots.partition_point(|&j| j <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment_of(x);
        self.slopes[i] * x + self.intercepts[i]
    }

    /// Largest absolute slope, i.e. the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    fn pieces(&self) -> Vec<Piece> {
        let m = self.knots.len();
        (0..=m)
            .map(|i| Piece {
                lo: if i == 0 { f64::NEG_INFINITY } else { self.knots[i - 1] },
                hi: if i == m { f64::INFINITY } else { self.knots[i] },
                slope: self.slopes[i],
                intercept: self.intercepts[i],
            })
            .collect()
    }

    /// `x ↦ f(alpha * x + beta)` for `alpha != 0`.
    pub fn compose_affine(&self, alpha: f64, beta: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::pre("affine reparametrisation needs finite alpha != 0"));
        }
        let mut knots: Vec<f64> = self.knots.iter().map(|j| (j - beta) / alpha).collect();
        let mut slopes: Vec<f64> = self.slopes.iter().map(|a| a * alpha).collect();
        let mut intercepts: Vec<f64> = self.slopes.iter().zip(&self.intercepts).map(|(a, b)| a * beta + b).collect();
        if alpha < 0.0 {
            knots.reverse();
            slopes.reverse();
            intercepts.reverse();
        }
        let b0 = intercepts[0];
        Self::from_slopes(knots, slopes, b0)
    }

    /// `x ↦ f(x + t)`.
    pub fn shift(&self, t: f64) -> Result<Self> {
        self.compose_affine(1.0, t)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        PiecewiseAffineFunction {
            knots: self.knots.clone(),
            slopes: self.slopes.iter().map(|a| a * lambda).collect(),
            intercepts: self.intercepts.iter().map(|b| b * lambda).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, Combine::Add)
    }

    pub fn sup(&self, other: &Self) -> Result<Self> {
        self.combine(other, Combine::Sup)
    }

    pub fn inf(&self, other: &Self) -> Result<Self> {
        self.combine(other, Combine::Inf)
    }

    pub fn abs(&self) -> Result<Self> {
        self.sup(&self.scale(-1.0))
    }

    fn combine(&self, other: &Self, op: Combine) -> Result<Self> {
        let mut cuts: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut pieces: Vec<Piece> = Vec::new();
        let bounds: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
            .chain(cuts.iter().copied())
            .chain(std::iter::once(f64::INFINITY))
            .collect();
        let fp = self.pieces();
        let gp = other.pieces();
        for w in bounds.windows(2) {
            let cell = Piece { lo: w[0], hi: w[1], slope: 0.0, intercept: 0.0 };
            let probe = cell.probe();
            let f = fp[self.segment_of(probe)];
            let g = gp[other.segment_of(probe)];
            match op {
                Combine::Add => {
                    pieces.push(Piece { slope: f.slope + g.slope, intercept: f.intercept + g.intercept, ..cell })
                }
                Combine::Sup | Combine::Inf => {
                    let mut sub = vec![w[0]];
                    let ds = f.slope - g.slope;
                    if ds != 0.0 {
                        let xc = (g.intercept - f.intercept) / ds;
                        let margin = 1e-12 * (1.0 + xc.abs());
                        if xc > w[0] + margin && xc < w[1] - margin {
                            sub.push(xc);
                        }
                    }
                    sub.push(w[1]);
                    for s in sub.windows(2) {
                        let part = Piece { lo: s[0], hi: s[1], ..cell };
                        let x = part.probe();
                        let take_f = match op {
                            Combine::Sup => f.eval(x) >= g.eval(x),
                            _ => f.eval(x) <= g.eval(x),
                        };
                        let src = if take_f { f } else { g };
                        pieces.push(Piece { slope: src.slope, intercept: src.intercept, ..part });
                    }
                }
            }
        }
        Self::from_pieces(pieces)
    }

    /// Rebuilds a function from consecutive pieces, dropping knots between
    /// pieces with identical slope while at least two knots remain.
    fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        let mut merged: Vec<Piece> = Vec::with_capacity(pieces.len());
        let redundant = pieces.windows(2).filter(|w| w[0].slope == w[1].slope).count();
        let mut removable = (pieces.len() - 1).saturating_sub(2).min(redundant);
        for p in pieces {
            match merged.last_mut() {
                Some(last) if removable > 0 && last.slope == p.slope => {
                    last.hi = p.hi;
                    removable -= 1;
                }
                _ => merged.push(p),
            }
        }
        let knots: Vec<f64> = merged.iter().skip(1).map(|p| p.lo).collect();
        let slopes: Vec<f64> = merged.iter().map(|p| p.slope).collect();
        Self::from_slopes(knots, slopes, merged[0].intercept)
    }
}

#[derive(Clone, Copy)]
enum Combine {
    Add,
    Sup,
    Inf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn expressions_expand_exactly() {
        for src in [
            "hat(0,1,1)",
            "1+|x|",
            "clamp(x,-1,2)-0.5*x",
            "plateau(2, 3*x-1)",
            "max(hat(1,0.5,2), x/4)",
            "hat(0,2,1)*3",
        ] {
            let e = Expr::parse(src).unwrap();
            let p = PiecewiseAffineFunction::from_expr(&e).unwrap_or_else(|| panic!("{src}"));
            for i in 0..=400 {
                let x = -5.0 + i as f64 * 0.025;
                assert!((p.eval(x) - e.eval(x)).abs() < 1e-12, "{src} at {x}");
            }
        }
        for src in ["gauss(1)", "x*x", "hat(0,x,1)", "1/x", "sin(x)"] {
            assert!(PiecewiseAffineFunction::from_expr(&Expr::parse(src).unwrap()).is_none(), "{src}");
        }
    }

    fn identity() -> PiecewiseAffineFunction {
        PiecewiseAffineFunction::affine(1.0, 0.0, [-1.0, 1.0]).unwrap()
    }

    #[test]
    fn validates_invariants() {
        assert!(PiecewiseAffineFunction::new(vec![0.0], vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(PiecewiseAffineFunction::new(vec![1.0, 0.0], vec![0.0; 3], vec![0.0; 3]).is_err());
        // jump of 1 at knot 0
        assert!(PiecewiseAffineFunction::new(vec![0.0, 1.0], vec![0.0; 3], vec![0.0, 1.0, 1.0]).is_err());
        let ok = PiecewiseAffineFunction::new(vec![-1.0, 0.0], vec![0.0, 1.0, -1.0], vec![1.0, 2.0, 2.0]);
        assert!(ok.is_ok());
    }

    #[test]
    fn hat_values() {
        let h = PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).unwrap();
        assert_eq!(h.slopes(), &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(h.eval(0.0), 1.0);
        assert_eq!(h.eval(-0.25), 0.75);
        assert_eq!(h.eval(5.0), 0.0);
    }

    #[test]
    fn abs_of_identity_has_knot_at_zero() {
        let a = identity().abs().unwrap();
        assert!(a.knots().contains(&0.0));
        for x in [-3.0, -0.5, 0.0, 0.25, 7.0] {
            assert_eq!(a.eval(x), f64::abs(x));
        }
    }

    #[test]
    fn x_minus_x_is_zero() {
        let f = identity();
        let z = f.add(&f.scale(-1.0)).unwrap();
        for x in [-10.0, 0.0, 3.5] {
            assert_eq!(z.eval(x), 0.0);
        }
        assert!(z.knots().len() >= 2);
    }

    #[test]
    fn sup_of_two_hats_is_m_shaped() {
        let l = PiecewiseAffineFunction::hat(-1.0, 1.0, 1.0).unwrap();
        let r = PiecewiseAffineFunction::hat(1.0, 1.0, 1.0).unwrap();
        let w = l.sup(&r).unwrap();
        assert_eq!(w.knots(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(w.eval(0.0), 0.0);
        // brute-force pointwise max on a 10^4-point grid
        for i in 0..10_000 {
            let x = -3.0 + 6.0 * i as f64 / 9_999.0;
            assert!((w.eval(x) - l.eval(x).max(r.eval(x))).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_reparametrisation() {
        let h = PiecewiseAffineFunction::hat(1.0, 1.0, 2.0).unwrap();
        let g = h.compose_affine(-2.0, 0.5).unwrap();
        for x in [-2.0, -0.3, 0.0, 0.1, 1.7] {
            assert!((g.eval(x) - h.eval(-2.0 * x + 0.5)).abs() < 1e-12);
        }
    }

    fn arb_pa() -> impl Strategy<Value = PiecewiseAffineFunction> {
        (2usize..6)
            .prop_flat_map(|m| {
                (
                    proptest::collection::vec(0.05f64..2.0, m),
                    -5.0f64..5.0,
                    proptest::collection::vec(-3.0f64..3.0, m + 1),
                    -3.0f64..3.0,
                )
            })
            .prop_map(|(gaps, start, slopes, b0)| {
                let mut knots = Vec::with_capacity(gaps.len());
                let mut x = start;
                for g in gaps {
                    knots.push(x);
                    x += g;
                }
                PiecewiseAffineFunction::from_slopes(knots, slopes, b0).unwrap()
            })
    }

    proptest! {
        #[test]
        fn lattice_ops_match_pointwise(f in arb_pa(), g in arb_pa(), x in -12.0f64..12.0) {
            let tol = 1e-9;
            let s = f.sup(&g).unwrap();
            let i = f.inf(&g).unwrap();
            let a = f.add(&g).unwrap();
            prop_assert!((s.eval(x) - f.eval(x).max(g.eval(x))).abs() < tol);
            prop_assert!((i.eval(x) - f.eval(x).min(g.eval(x))).abs() < tol);
            prop_assert!((a.eval(x) - (f.eval(x) + g.eval(x))).abs() < tol);
            prop_assert!((s.eval(x) + i.eval(x) - a.eval(x)).abs() < tol);
        }
    }
}
