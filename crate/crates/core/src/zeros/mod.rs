//! Zeros of truncated samples: root extraction, contour counts, linear statistics.

mod companion;
mod testfn;

pub use companion::polynomial_roots;
pub use testfn::TestFunction;

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaf::GafSample;

/// Largest supported truncation degree.
pub const MAX_DEGREE: usize = 2000;

/// Scaled leading coefficients below this are treated as absent.
const DEGENERATE_LEAD: f64 = 1e-300;

/// Relative slack for the inclusion rule `|z| ≤ r(1 + 1e-12)`.
pub const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Companion,
    ArgumentPrinciple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub zeros: Vec<Complex64>,
    pub radius: f64,
    /// Max `|P(u_j)|` of the ρ₀-rescaled polynomial over retained zeros.
    pub residual_max: f64,
    /// Max coefficient modulus of the rescaled polynomial.
    pub coeff_scale: f64,
    pub method: Method,
    /// Zeros found outside the search disk.
    pub discarded: usize,
    /// Number of vanishing top coefficients removed before root finding.
    pub degree_reduced: usize,
}

impl ZeroSet {
    pub fn count_within(&self, r: f64) -> usize {
        let lim = r * (1.0 + BOUNDARY_SLACK);
        self.zeros.iter().filter(|z| z.norm() <= lim).count()
    }
}

fn check_search(sample: &GafSample, search_radius: f64) -> Result<()> {
    if !(search_radius > 0.0 && search_radius.is_finite()) {
        return Err(Error::Parameter(format!("search radius must be positive, got {search_radius}")));
    }
    let cap = 2.0 * sample.plan.big_b * sample.plan.r;
    if search_radius > cap * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "search radius {search_radius} exceeds 2·B·r = {cap}"
        )));
    }
    if sample.degree() > MAX_DEGREE {
        return Err(Error::Parameter(format!(
            "degree {} exceeds the supported cap {MAX_DEGREE}",
            sample.degree()
        )));
    }
    Ok(())
}

/// Zeros of the truncated sample in `|z| ≤ search_radius`. A vanishing
/// leading coefficient is reported as an error rather than silently dropped.
pub fn find_zeros(sample: &GafSample, search_radius: f64) -> Result<ZeroSet> {
    check_search(sample, search_radius)?;
    let c = sample.scaled_coefficients();
    let n = c.len() - 1;
    if c[n].norm() < DEGENERATE_LEAD {
        let effective = c.iter().rposition(|v| v.norm() >= DEGENERATE_LEAD).unwrap_or(0);
        return Err(Error::DegenerateDegree { degree: n, effective_degree: effective, leading: c[n].norm() });
    }
    roots_in_disk(sample, n, search_radius, 0)
}

/// As [`find_zeros`], but explicitly drops vanishing top coefficients and
/// records how many were removed in `degree_reduced`.
pub fn find_zeros_with_reduction(sample: &GafSample, search_radius: f64) -> Result<ZeroSet> {
    check_search(sample, search_radius)?;
    let c = sample.scaled_coefficients();
    let n = c.len() - 1;
    let effective = c.iter().rposition(|v| v.norm() >= DEGENERATE_LEAD).unwrap_or(0);
    roots_in_disk(sample, effective, search_radius, n - effective)
}

fn roots_in_disk(sample: &GafSample, degree: usize, search_radius: f64, reduced: usize) -> Result<ZeroSet> {
    let c = &sample.scaled_coefficients()[..=degree];
    let rho0 = sample.rho0();
    let coeff_scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let raw = polynomial_roots(c)?;
    let lim_u = search_radius * (1.0 + BOUNDARY_SLACK) / rho0;
    let mut zeros = Vec::new();
    let mut discarded = 0;
    let mut residual_max = 0.0f64;
    for u in raw {
        let u = polish(c, u);
        if u.norm() <= lim_u {
            residual_max = residual_max.max(horner(c, u).norm());
            zeros.push(u * rho0);
        } else {
            discarded += 1;
        }
    }
    Ok(ZeroSet {
        zeros,
        radius: search_radius,
        residual_max,
        coeff_scale,
        method: Method::Companion,
        discarded,
        degree_reduced: reduced,
    })
}

fn horner(c: &[Complex64], u: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, v| acc * u + v)
}

/// Newton steps, each accepted only when it lowers `|P|`.
fn polish(c: &[Complex64], mut u: Complex64) -> Complex64 {
    let mut best = horner(c, u).norm();
    for _ in 0..4 {
        if best == 0.0 {
            break;
        }
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for v in c.iter().rev() {
            dp = dp * u + p;
            p = p * u + v;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let cand = u - p / dp;
        let val = horner(c, cand).norm();
        if val < best {
            best = val;
            u = cand;
        } else {
            break;
        }
    }
    u
}

/// Number of zeros of the sample in `|z| < r`, as the winding number of the
/// polynomial along `|z| = r`. If a zero sits within ~1e-9·r of the circle
/// the radius is nudged up to three times before giving up.
pub fn count_zeros_argument(sample: &GafSample, r: f64) -> Result<usize> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("contour radius must be positive, got {r}")));
    }
    for factor in [1.0, 1.0 + 1e-6, 1.0 - 1e-6, 1.0 + 2e-6] {
        if let Some(n) = winding_number(sample, r * factor) {
            return Ok(n);
        }
    }
    Err(Error::Contour(format!("zero persistently within 1e-9·r of the circle |z| = {r}")))
}

fn winding_number(sample: &GafSample, r: f64) -> Option<usize> {
    let rho = r / sample.rho0();
    let n = sample.degree();
    let min_dist = 1e-9 * rho;
    let eval = |theta: f64| -> Option<Complex64> {
        let u = Complex64::from_polar(rho, theta);
        let (p, dp) = sample.eval_scaled_with_derivative(u);
        // |p/p'| estimates the distance to the nearest zero.
        if p.norm() == 0.0 || p.norm() <= min_dist * dp.norm() {
            None
        } else {
            Some(p)
        }
    };
    let m = (8 * n).max(64);
    let step = 2.0 * PI / m as f64;
    let mut total = 0.0;
    let first = eval(0.0)?;
    let mut prev = first;
    for j in 0..m {
        let t0 = j as f64 * step;
        let t1 = if j + 1 == m { 2.0 * PI } else { t0 + step };
        let next = if j + 1 == m { first } else { eval(t1)? };
        total += arc_phase(&eval, t0, t1, prev, next, 0)?;
        prev = next;
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.05 || rounded < 0.0 {
        return None;
    }
    Some(rounded as usize)
}

fn arc_phase<F: Fn(f64) -> Option<Complex64>>(
    eval: &F,
    t0: f64,
    t1: f64,
    p0: Complex64,
    p1: Complex64,
    depth: u32,
) -> Option<f64> {
    let d = (p1 / p0).arg();
    if d.abs() <= PI / 3.0 {
        return Some(d);
    }
    if depth > 40 {
        return None;
    }
    let tm = 0.5 * (t0 + t1);
    let pm = eval(tm)?;
    Some(arc_phase(eval, t0, tm, p0, pm, depth + 1)? + arc_phase(eval, tm, t1, pm, p1, depth + 1)?)
}

/// `Σ_j φ(z_j / r)`.
pub fn linear_statistic(zset: &ZeroSet, phi: &TestFunction, r: f64) -> Result<f64> {
    let need = r * phi.support_radius();
    if zset.radius < need * (1.0 - BOUNDARY_SLACK) {
        return Err(Error::Coverage(format!(
            "test function reaches radius {need} but zeros were searched only to {}",
            zset.radius
        )));
    }
    Ok(zset.zeros.iter().map(|z| phi.eval(z / r)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaf::sample_gaf;
    use crate::special::{TruncationPlan, WeightModel};

    #[test]
    fn single_zero_at_origin_via_reduction() {
        let m = WeightModel::new(2.0).unwrap();
        let plan = TruncationPlan::for_sampling(&m, 1.0, 10.0, 1.0).unwrap();
        let mut xi = vec![Complex64::new(0.0, 0.0); plan.n_trunc + 1];
        xi[1] = Complex64::new(1.0, 0.0);
        let s = GafSample::with_xi(m, plan, xi).unwrap();
        assert!(matches!(find_zeros(&s, 2.0), Err(Error::DegenerateDegree { effective_degree: 1, .. })));
        let zs = find_zeros_with_reduction(&s, 2.0).unwrap();
        assert_eq!(zs.zeros, vec![Complex64::new(0.0, 0.0)]);
        assert_eq!(zs.discarded, 0);
        assert_eq!(zs.degree_reduced, plan.n_trunc - 1);
    }

    #[test]
    fn companion_and_contour_agree_on_random_samples() {
        let m = WeightModel::new(2.0).unwrap();
        let plan = TruncationPlan::covering(&m, 1.5, 1.0, 36.0).unwrap();
        for t in 0..50 {
            let s = sample_gaf(&m, &plan, 77, t);
            let zs = find_zeros(&s, 1.5).unwrap();
            assert!(zs.residual_max <= 1e-6 * zs.coeff_scale);
            let c = count_zeros_argument(&s, 1.5).unwrap();
            assert_eq!(zs.count_within(1.5), c, "trial {t}");
        }
    }

    #[test]
    fn empty_zero_set_statistic() {
        let zs = ZeroSet {
            zeros: vec![],
            radius: 3.0,
            residual_max: 0.0,
            coeff_scale: 1.0,
            method: Method::Companion,
            discarded: 0,
            degree_reduced: 0,
        };
        let phi = TestFunction::RadialBump { radius: 1.0 };
        assert_eq!(linear_statistic(&zs, &phi, 1.0).unwrap(), 0.0);
        assert!(matches!(linear_statistic(&zs, &phi, 4.0), Err(Error::Coverage(_))));
    }
}
