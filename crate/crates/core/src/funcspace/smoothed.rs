//! Piecewise affine functions convolved with a centred Gaussian.
//!
//! Writing `p(x) = a_0 x + b_0 + Σ (a_{i+1} − a_i)(x − j_i)_+`, the
//! convolution only needs `E[(m + Z)_+]`, which has a closed form in `erfc`.
//! The family is closed under further Gaussian smoothing (variances add) and
//! under affine reparametrisation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::pa::PiecewiseAffineFunction;
use crate::error::{Error, Result};

/// `y ↦ E[p(y + Z)]` with `Z ~ N(0, variance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPa {
    pa: PiecewiseAffineFunction,
    variance: f64,
}

/// `E[(m + Z)_+]` for `Z ~ N(0, s²)`, `s > 0`.
fn ramp(m: f64, s: f64) -> f64 {
    let z = m / s;
    let density = s * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    if z <= 0.0 {
        density + m * 0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
    } else {
        m + density - m * 0.5 * libm::erfc(z * FRAC_1_SQRT_2)
    }
}

impl SmoothedPa {
    pub fn new(pa: PiecewiseAffineFunction, variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::pre(format!("smoothing variance must be finite and >= 0, got {variance}")));
        }
        Ok(SmoothedPa { pa, variance })
    }

    pub fn pa(&self) -> &PiecewiseAffineFunction {
        &self.pa
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn eval(&self, y: f64) -> f64 {
        if self.variance == 0.0 {
            return self.pa.eval(y);
        }
        let s = self.variance.sqrt();
        let (k, a) = (self.pa.knots(), self.pa.slopes());
        let mut v = a[0] * y + self.pa.intercepts()[0];
        for (i, &j) in k.iter().enumerate() {
            let d = a[i + 1] - a[i];
            if d != 0.0 {
                v += d * ramp(y - j, s);
            }
        }
        v
    }

    /// Adds `extra` to the smoothing variance.
    pub fn smooth(&self, extra: f64) -> Result<Self> {
        Self::new(self.pa.clone(), self.variance + extra)
    }

    /// `x ↦ g(alpha * x + beta)`.
    pub fn compose_affine(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(self.pa.compose_affine(alpha, beta)?, self.variance / (alpha * alpha))
    }

    pub fn scale(&self, lambda: f64) -> Self {
        SmoothedPa { pa: self.pa.scale(lambda), variance: self.variance }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn matches_brute_force_convolution() {
        let pa =
            PiecewiseAffineFunction::from_points(&[-1.0, 0.0, 0.5, 2.0], &[0.0, 1.0, -1.0, 0.5], 0.3, -0.2).unwrap();
        let var = 0.7;
        let sp = SmoothedPa::new(pa.clone(), var).unwrap();
        let s = var.sqrt();
        for y in [-3.0, -0.4, 0.0, 0.25, 1.7, 5.0] {
            let kernel = |z: f64| (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            // split at the kinks so Simpson sees smooth pieces
            let mut cuts: Vec<f64> = pa.knots().iter().map(|j| j - y).filter(|c| c.abs() < 12.0 * s).collect();
            cuts.insert(0, -12.0 * s);
            cuts.push(12.0 * s);
            let oracle: f64 = cuts.windows(2).map(|w| simpson(|z| pa.eval(y + z) * kernel(z), w[0], w[1], 4000)).sum();
            assert!((sp.eval(y) - oracle).abs() < 1e-10, "y={y}: {} vs {oracle}", sp.eval(y));
        }
    }

    #[test]
    fn variances_add_and_affine_maps_rescale() {
        let pa = PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).unwrap();
        let a = SmoothedPa::new(pa.clone(), 0.2).unwrap().smooth(0.3).unwrap();
        let b = SmoothedPa::new(pa, 0.5).unwrap();
        let c = b.compose_affine(2.0, 0.5).unwrap();
        for y in [-1.0, 0.1, 0.8] {
            assert_eq!(a.eval(y), b.eval(y));
            assert!((c.eval(y) - b.eval(2.0 * y + 0.5)).abs() < 1e-14);
        }
        assert_eq!(SmoothedPa::new(PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).unwrap(), 0.0).unwrap().eval(0.5), 0.5);
        assert!(b.smooth(-1.0).is_err());
    }

    #[test]
    fn far_tails_cancel() {
        let sp = SmoothedPa::new(PiecewiseAffineFunction::hat(0.0, 1.0, 1.0).unwrap(), 1e-4).unwrap();
        assert_eq!(sp.eval(50.0), 0.0);
        assert!(sp.eval(-50.0).abs() < 1e-13);
    }
}
