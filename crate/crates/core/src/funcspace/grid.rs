use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{DEFAULT_GRID_POINTS, DEFAULT_WINDOW};

/// A uniformly spaced window `[x_lo, x_hi]` with `n` sample points, both ends
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    x_lo: f64,
    x_hi: f64,
    n: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(r.x_lo, r.x_hi, r.n)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_lo: DEFAULT_WINDOW.0, x_hi: DEFAULT_WINDOW.1, n: DEFAULT_GRID_POINTS }
    }
}

impl GridSpec {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
            return Err(Error::pre(format!("grid needs finite x_lo < x_hi, got [{x_lo}, {x_hi}]")));
        }
        if n < 2 {
            return Err(Error::pre(format!("grid needs n >= 2, got {n}")));
        }
        let h = (x_hi - x_lo) / (n - 1) as f64;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::pre("grid spacing underflows"));
        }
        Ok(GridSpec { x_lo, x_hi, n })
    }

    /// Symmetric window `[-r, r]`.
    pub fn symmetric(r: f64, n: usize) -> Result<Self> {
        Self::new(-r, r, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }

    /// Same spacing-class grid over a window widened by `margin` on each side.
    pub fn widened(&self, margin: f64) -> Result<Self> {
        let h = self.spacing();
        let extra = (margin / h).ceil() as usize;
        Self::new(self.x_lo - extra as f64 * h, self.x_hi + extra as f64 * h, self.n + 2 * extra)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.x_lo, self.x_hi, self.n)
    }
}

/// Parses the command-line form `"lo,hi,n"`.
impl FromStr for GridSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid must be 'lo,hi,n', got '{s}'")));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|_| Error::Parse(format!("bad grid bound '{p}'")));
        let n = parts[2]
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 0.0)
            .ok_or_else(|| Error::Parse(format!("bad grid size '{}'", parts[2])))?;
        GridSpec::new(num(parts[0])?, num(parts[1])?, n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let g = GridSpec::new(-1.0, 1.0, 3).unwrap();
        assert_eq!(g.points(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.spacing(), 1.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(GridSpec::new(1.0, 1.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(f64::NAN, 1.0, 10).is_err());
        assert!(serde_json::from_str::<GridSpec>(r#"{"x_lo":2,"x_hi":1,"n":5}"#).is_err());
    }

    #[test]
    fn parses_cli_form() {
        let g: GridSpec = "-10, 10, 2001".parse().unwrap();
        assert_eq!(g, GridSpec::new(-10.0, 10.0, 2001).unwrap());
        assert!("1,2".parse::<GridSpec>().is_err());
        assert_eq!("0,1,1e3".parse::<GridSpec>().unwrap().n, 1000);
    }

    #[test]
    fn widened_keeps_spacing() {
        let g = GridSpec::new(-1.0, 1.0, 21).unwrap();
        let w = g.widened(0.35).unwrap();
        assert!((w.spacing() - g.spacing()).abs() < 1e-15);
        assert!(w.x_lo <= -1.35 && w.x_hi >= 1.35);
    }
}
