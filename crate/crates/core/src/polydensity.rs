//! Joint density of the zeros of the truncated polynomial
//! `P_{N,L}(z) = Σ_{k≤N} ξ_k (Lz)^k / √Γ(2(k+1)/β)` and the functionals
//! `A_β`, `S_β`, `I*_β` built from it.
//!
//! The density, for zeros listed in uniformly random order, is
//!
//! ```text
//! f(z̄) = A_{N,L} ∏_{j≠k} |z_j − z_k| · (∫ ∏|w − z_j|² dν_L^β(w))^{−(N+1)}
//! ```
//!
//! where `ν_L^β ∝ e^{−L^β|w|^β} dm(w)` is a probability measure. The integral is
//! exact: radial symmetry kills the cross terms of `|Σ c_k w^k|²`, leaving
//! `Σ |c_k|² ∫|w|^{2k} dν`.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaf::{complex_normal, log_sum_exp, substream};
use crate::quad;
use crate::special::{ln_gamma, log_coefficient, WeightModel};
use crate::zeros::polynomial_roots;

/// Largest degree accepted by [`joint_density`].
pub const MAX_DENSITY_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyDensityParams {
    pub n_deg: usize,
    pub l_scale: f64,
    pub model: WeightModel,
    /// `ln A_{N,L}`.
    pub log_a_nl: f64,
}

impl PolyDensityParams {
    pub fn new(n_deg: usize, l_scale: f64, model: WeightModel) -> Result<Self> {
        if n_deg == 0 {
            return Err(Error::Parameter("degree must be at least 1".into()));
        }
        if !(l_scale > 0.0 && l_scale.is_finite()) {
            return Err(Error::Parameter(format!("L must be positive, got {l_scale}")));
        }
        let n = n_deg as f64;
        let sum_lg: f64 = (0..=n_deg).map(|k| model.ln_gamma_index(k)).sum();
        let log_a_nl = ln_gamma(n + 1.0) + sum_lg
            - n * PI.ln()
            - (n + 1.0) * model.ln_gamma_index(0)
            - n * (n + 1.0) * l_scale.ln();
        Ok(PolyDensityParams { n_deg, l_scale, model, log_a_nl })
    }
}

/// `ln ∫ |w|^{2k} dν_L^β = ln Γ(2(k+1)/β) − ln Γ(2/β) − 2k ln L`.
pub fn log_nu_moment(k: usize, params: &PolyDensityParams) -> f64 {
    params.model.ln_gamma_index(k) - params.model.ln_gamma_index(0) - 2.0 * k as f64 * params.l_scale.ln()
}

pub fn nu_moment(k: usize, params: &PolyDensityParams) -> f64 {
    log_nu_moment(k, params).exp()
}

fn check_len(zbar: &[Complex64], params: &PolyDensityParams) -> Result<()> {
    if zbar.len() != params.n_deg {
        return Err(Error::Parameter(format!(
            "expected {} zeros, got {}",
            params.n_deg,
            zbar.len()
        )));
    }
    if zbar.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("zeros must be finite".into()));
    }
    Ok(())
}

/// Zeros in a fixed total order, so every symmetric functional is evaluated
/// with the same floating-point operation sequence for any permutation.
fn canonical(zbar: &[Complex64]) -> Vec<Complex64> {
    let mut v = zbar.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// Monomial coefficients of `∏(v − y_j)`, constant term first.
fn expand(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for y in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * y;
        }
        c = next;
    }
    c
}

/// `ln ∫ ∏|w − z_j|² dν_L^β(w)`, with roots rescaled by `max(1, max|z_j|)`
/// so the expansion never overflows.
pub fn log_weighted_norm(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    check_len(zbar, params)?;
    let zbar = &canonical(zbar);
    let n = zbar.len();
    let s = zbar.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let ln_s = s.ln();
    let scaled: Vec<Complex64> = zbar.iter().map(|z| z / s).collect();
    let d = expand(&scaled);
    let terms: Vec<f64> = d
        .iter()
        .enumerate()
        .filter(|(_, dk)| dk.norm() > 0.0)
        .map(|(k, dk)| 2.0 * dk.norm().ln() + 2.0 * (n - k) as f64 * ln_s + log_nu_moment(k, params))
        .collect();
    Ok(log_sum_exp(&terms))
}

pub fn weighted_norm(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    log_weighted_norm(zbar, params).map(f64::exp)
}

/// `Σ_{j≠k} ln|z_j − z_k|`; `None` when two zeros coincide.
pub fn log_vandermonde(zbar: &[Complex64]) -> Option<f64> {
    let mut v = 0.0;
    for j in 0..zbar.len() {
        for k in 0..zbar.len() {
            if j != k {
                let d = (zbar[j] - zbar[k]).norm();
                if d == 0.0 {
                    return None;
                }
                v += d.ln();
            }
        }
    }
    Some(v)
}

/// Joint zero density at `zbar` (N ≤ 6).
pub fn joint_density(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    if params.n_deg > MAX_DENSITY_DEGREE {
        return Err(Error::Parameter(format!(
            "density evaluation is limited to N <= {MAX_DENSITY_DEGREE}"
        )));
    }
    log_joint_density(zbar, params).map(f64::exp)
}

/// `ln f(z̄)`, `−∞` at coincident zeros. No degree cap.
pub fn log_joint_density(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    check_len(zbar, params)?;
    let zbar = &canonical(zbar);
    let Some(v) = log_vandermonde(zbar) else {
        return Ok(f64::NEG_INFINITY);
    };
    let s = log_weighted_norm(zbar, params)?;
    Ok(params.log_a_nl + v - (params.n_deg as f64 + 1.0) * s)
}

/// `ln S_β(z̄) = ln ∫ |q_{z̄}|² dν_L^β`.
pub fn s_functional(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    log_weighted_norm(zbar, params)
}

/// `ln A_β(z̄) = sup_w (2 Σ ln|w − z_j| − L^β|w|^β)`.
///
/// Polar grid of 256 angles × 512 radii on `|w| ≤ 2(2N/(βL^β))^{1/β}`
/// (radius 1 always on the grid), then compass-search refinement from the best
/// node. The disk is doubled while the maximizer sits on its boundary.
pub fn a_functional(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    check_len(zbar, params)?;
    let zbar = &canonical(zbar);
    let beta = params.model.beta;
    let lb = params.l_scale.powf(beta);
    let n = zbar.len() as f64;
    let objective = |w: Complex64| -> f64 {
        let mut s = 0.0;
        for z in zbar {
            s += (w - z).norm_sqr().ln();
        }
        s - lb * w.norm().powf(beta)
    };
    let mut radius = 2.0 * (2.0 * n / (beta * lb)).powf(1.0 / beta);
    let (n_ang, n_rad) = (256usize, 512usize);
    for _ in 0..20 {
        let mut radii: Vec<f64> = (1..=n_rad).map(|i| radius * i as f64 / n_rad as f64).collect();
        if radius > 1.0 {
            radii.push(1.0);
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, 0.0), 0usize);
        let origin = objective(Complex64::new(0.0, 0.0));
        if origin > best.0 {
            best = (origin, Complex64::new(0.0, 0.0), 0);
        }
        let rot: Vec<Complex64> = (0..n_ang)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_ang as f64))
            .collect();
        for (ri, &r) in radii.iter().enumerate() {
            let weight = lb * r.powf(beta);
            for u in &rot {
                let w = u * r;
                // Product form with periodic renormalisation to avoid overflow.
                let mut prod = 1.0f64;
                let mut log_acc = 0.0;
                for (i, z) in zbar.iter().enumerate() {
                    prod *= (w - z).norm_sqr();
                    if i % 16 == 15 {
                        if prod == 0.0 {
                            break;
                        }
                        log_acc += prod.ln();
                        prod = 1.0;
                    }
                }
                let val = if prod == 0.0 { f64::NEG_INFINITY } else { log_acc + prod.ln() - weight };
                if val > best.0 {
                    best = (val, w, ri);
                }
            }
        }
        let on_boundary = best.2 + 1 == radii.len();
        let step = (radius / n_rad as f64).max(2.0 * PI * radius / n_ang as f64);
        let refined = compass_search(&objective, best.1, best.0, step);
        if !on_boundary || refined.1.norm() < radius {
            return Ok(refined.0);
        }
        radius *= 2.0;
    }
    Err(Error::Convergence("a_functional maximizer escapes every search disk".into()))
}

fn compass_search<F: Fn(Complex64) -> f64>(f: &F, mut w: Complex64, mut best: f64, mut step: f64) -> (f64, Complex64) {
    let dirs = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(0.7071067811865476, 0.7071067811865476),
        Complex64::new(-0.7071067811865476, 0.7071067811865476),
        Complex64::new(0.7071067811865476, -0.7071067811865476),
        Complex64::new(-0.7071067811865476, -0.7071067811865476),
    ];
    let stop = 1e-12 * (1.0 + w.norm());
    while step > stop {
        let mut moved = false;
        for d in &dirs {
            let cand = w + d * step;
            let v = f(cand);
            if v > best {
                best = v;
                w = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (best, w)
}

/// `I*_β(z̄) = (1/N) ln A_β − (1/N²) Σ_{j≠k} ln|z_j − z_k|`; `+∞` at coincident zeros.
pub fn i_star(zbar: &[Complex64], params: &PolyDensityParams) -> Result<f64> {
    check_len(zbar, params)?;
    let zbar = &canonical(zbar);
    let Some(v) = log_vandermonde(zbar) else {
        return Ok(f64::INFINITY);
    };
    let n = zbar.len() as f64;
    Ok(a_functional(zbar, params)? / n - v / (n * n))
}

/// Zeros of one draw of `P_{N,L}`, from substream `(seed, stream)`, listed in
/// uniformly random order (the same stream supplies the shuffle).
pub fn sample_zeros(params: &PolyDensityParams, seed: u64, stream: u64) -> Result<Vec<Complex64>> {
    let mut rng = substream(seed, stream);
    let ln_l = params.l_scale.ln();
    let coeffs: Vec<Complex64> = (0..=params.n_deg)
        .map(|k| complex_normal(&mut rng) * (log_coefficient(k, &params.model) + k as f64 * ln_l).exp())
        .collect();
    let mut roots = polynomial_roots(&coeffs)?;
    roots.shuffle(&mut rng);
    Ok(roots)
}

/// Density of `|z_1|` for the randomly ordered zeros, N ∈ {1, 2}.
///
/// `joint_density` with the constant `A_{N,L}` as written has total mass N!:
/// it is the N-point correlation function of the zero set. The law of the
/// ordered vector is that divided by N!, which is what is integrated here.
pub fn radial_marginal(params: &PolyDensityParams, rho: f64) -> Result<f64> {
    match params.n_deg {
        1 => Ok(2.0 * PI * rho * joint_density(&[Complex64::new(rho, 0.0)], params)?),
        2 => {
            let z1 = Complex64::new(rho, 0.0);
            let angles = 96;
            // z₂ = s e^{iφ}, s = t/(1 − t) on t ∈ [0, 1).
            let inner = |t: f64| -> f64 {
                if t >= 1.0 {
                    return 0.0;
                }
                let s = t / (1.0 - t);
                let ds = 1.0 / ((1.0 - t) * (1.0 - t));
                let mut acc = 0.0;
                for j in 0..angles {
                    let z2 = Complex64::from_polar(s, 2.0 * PI * j as f64 / angles as f64);
                    acc += log_joint_density(&[z1, z2], params).map(f64::exp).unwrap_or(0.0);
                }
                acc * (2.0 * PI / angles as f64) * s * ds
            };
            let mid = rho / (1.0 + rho);
            let breaks = [0.0, 0.5 * mid, mid, 0.5 * (mid + 1.0), 1.0];
            let mass = quad::adaptive_pieces(inner, &breaks, 1e-13, 1e-9);
            // 2πρ · mass / 2!
            Ok(PI * rho * mass)
        }
        n => Err(Error::Unsupported(format!("radial marginal implemented for N <= 2, got {n}"))),
    }
}

/// `P(a ≤ |z_1| < b)` for N ∈ {1, 2}; `b` may be infinite.
pub fn radial_bin_probability(params: &PolyDensityParams, a: f64, b: f64) -> Result<f64> {
    // ρ = t/(1 − t) keeps infinite bins finite.
    let ta = a / (1.0 + a);
    let tb = if b.is_infinite() { 1.0 } else { b / (1.0 + b) };
    let rule = quad::gauss_legendre(16);
    let err = std::cell::RefCell::new(None);
    let v = quad::fixed(
        |t| {
            let rho = t / (1.0 - t);
            match radial_marginal(params, rho) {
                Ok(m) => m / ((1.0 - t) * (1.0 - t)),
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        ta,
        tb,
        &rule,
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
