//! Fixed catalogue of compactly supported test functions for linear statistics.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// Smooth compactly supported test functions φ on ℂ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `exp(1 − 1/(1 − (|z|/R)²))` on `|z| < R`.
    RadialBump { radius: f64 },
    /// Smoothed indicator of `inner ≤ |z| ≤ outer`: equals 1 on
    /// `[inner + width, outer − width]` and vanishes outside `[inner, outer]`.
    /// With `inner = 0` there is no inner ramp, giving a disk indicator.
    MollifiedAnnulus { inner: f64, outer: f64, width: f64 },
    /// `(c₀ + c₁x + c₂y + c₃|z|²) · bump(|z|/R)`.
    PolyBump { radius: f64, c: [f64; 4] },
}

fn bump(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - s * s;
    let v = (1.0 - 1.0 / d).exp();
    (v, v * (-2.0 * s / (d * d)))
}

fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |x: f64| (-1.0 / x).exp();
    let (a, b) = (f(t), f(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    let s = a + b;
    (a / s, (da * b + a * db) / (s * s))
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::RadialBump { radius } => radius > 0.0,
            TestFunction::MollifiedAnnulus { inner, outer, width } => {
                let ramps = if inner > 0.0 { 2.0 } else { 1.0 };
                inner >= 0.0 && width > 0.0 && outer - inner >= ramps * width
            }
            TestFunction::PolyBump { radius, c } => radius > 0.0 && c.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid test function {self:?}")))
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            TestFunction::RadialBump { radius } | TestFunction::PolyBump { radius, .. } => radius,
            TestFunction::MollifiedAnnulus { outer, .. } => outer,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, TestFunction::PolyBump { .. })
    }

    /// Radial profile and its derivative (radial variants only).
    fn profile(&self, rho: f64) -> (f64, f64) {
        match *self {
            TestFunction::RadialBump { radius } => {
                let (v, d) = bump(rho / radius);
                (v, d / radius)
            }
            TestFunction::MollifiedAnnulus { inner, outer, width } => {
                let (vo, dvo) = smooth_step((outer - rho) / width);
                let (vi, dvi) = if inner > 0.0 {
                    smooth_step((rho - inner) / width)
                } else {
                    (1.0, 0.0)
                };
                (vo * vi, (-dvo * vi + vo * dvi) / width)
            }
            TestFunction::PolyBump { .. } => unreachable!("not radial"),
        }
    }

    /// Radial profile `φ(ρ)`; for non-radial functions, the angular average.
    pub fn radial_profile(&self, rho: f64) -> f64 {
        match *self {
            TestFunction::PolyBump { radius, c } => (c[0] + c[3] * rho * rho) * bump(rho / radius).0,
            _ => self.profile(rho).0,
        }
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        match *self {
            TestFunction::PolyBump { radius, c } => {
                let rho = z.norm();
                let p = c[0] + c[1] * z.re + c[2] * z.im + c[3] * rho * rho;
                p * bump(rho / radius).0
            }
            _ => self.profile(z.norm()).0,
        }
    }

    /// Gradient `(φ_x, φ_y)`.
    pub fn gradient(&self, z: Complex64) -> (f64, f64) {
        let rho = z.norm();
        let (ux, uy) = if rho > 0.0 { (z.re / rho, z.im / rho) } else { (0.0, 0.0) };
        match *self {
            TestFunction::PolyBump { radius, c } => {
                let p = c[0] + c[1] * z.re + c[2] * z.im + c[3] * rho * rho;
                let (b, db) = bump(rho / radius);
                let db = db / radius;
                (
                    b * (c[1] + 2.0 * c[3] * z.re) + p * db * ux,
                    b * (c[2] + 2.0 * c[3] * z.im) + p * db * uy,
                )
            }
            _ => {
                let d = self.profile(rho).1;
                (d * ux, d * uy)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            TestFunction::MollifiedAnnulus { inner, outer, width } => {
                let mut b = vec![0.0];
                if inner > 0.0 {
                    b.extend([inner, inner + width]);
                }
                b.extend([outer - width, outer]);
                b.dedup();
                b
            }
            _ => vec![0.0, 0.5 * self.support_radius(), self.support_radius()],
        }
    }

    /// `∫ (φ_x² + φ_y²) dm`.
    pub fn dirichlet_energy(&self) -> f64 {
        let breaks = self.breakpoints();
        if self.is_radial() {
            return quad::adaptive_pieces(
                |rho| {
                    let d = self.profile(rho).1;
                    2.0 * PI * rho * d * d
                },
                &breaks,
                1e-14,
                1e-11,
            );
        }
        // Integrand is a trigonometric polynomial of degree ≤ 2 in θ times
        // radial factors; the trapezoid rule on 32 angles is exact in θ.
        let angles = 32;
        quad::adaptive_pieces(
            |rho| {
                let mut s = 0.0;
                for j in 0..angles {
                    let th = 2.0 * PI * j as f64 / angles as f64;
                    let (gx, gy) = self.gradient(Complex64::from_polar(rho, th));
                    s += gx * gx + gy * gy;
                }
                s * (2.0 * PI / angles as f64) * rho
            },
            &breaks,
            1e-14,
            1e-11,
        )
    }

    /// Sampled `(sup |∇φ|, max φ − min φ)`.
    fn lipschitz_and_oscillation(&self) -> (f64, f64) {
        let r = self.support_radius();
        let (mut lip, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
        let radial_steps = 4000;
        let angles = if self.is_radial() { 1 } else { 256 };
        for i in 0..=radial_steps {
            let rho = r * i as f64 / radial_steps as f64;
            for j in 0..angles {
                let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / angles as f64);
                let (gx, gy) = self.gradient(z);
                lip = lip.max(gx.hypot(gy));
                let v = self.eval(z);
                hi = hi.max(v);
                lo = lo.min(v);
            }
        }
        (lip, hi - lo)
    }

    /// Upper estimate `ω(φ; t) = min(1.01·Lip·t, oscillation)`.
    pub fn modulus_of_continuity(&self, t: f64) -> f64 {
        let (lip, osc) = self.lipschitz_and_oscillation();
        (1.01 * lip * t).min(osc * 1.001 + 1e-12)
    }
}
