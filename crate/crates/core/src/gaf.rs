//! Sampling and evaluation of truncated `F_β`, its covariance kernel and the
//! first intensity of its zeros.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, log_coefficient, TruncationPlan, WeightModel};

/// Counter-based generator for substream `stream_id` of `seed`.
pub fn substream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Standard complex Gaussian, `E|ξ|² = 1`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// One realization of the truncated series `Σ_{k≤N} ξ_k a_k z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GafSample {
    pub model: WeightModel,
    pub plan: TruncationPlan,
    pub xi: Vec<Complex64>,
    pub seed: u64,
    pub stream_id: u64,
    /// `c_k = ξ_k a_k ρ₀^k` with `ρ₀ = plan.r`.
    scaled: Vec<Complex64>,
}

impl GafSample {
    /// Builds a sample from explicit Gaussian coefficients (length `N+1`).
    pub fn with_xi(model: WeightModel, plan: TruncationPlan, xi: Vec<Complex64>) -> Result<Self> {
        if xi.len() != plan.n_trunc + 1 {
            return Err(Error::Parameter(format!(
                "expected {} coefficients, got {}",
                plan.n_trunc + 1,
                xi.len()
            )));
        }
        Ok(Self::assemble(model, plan, xi, 0, 0))
    }

    fn assemble(model: WeightModel, plan: TruncationPlan, xi: Vec<Complex64>, seed: u64, stream_id: u64) -> Self {
        let ln_rho = plan.r.ln();
        let scaled = xi
            .iter()
            .enumerate()
            .map(|(k, x)| x * (log_coefficient(k, &model) + k as f64 * ln_rho).exp())
            .collect();
        GafSample { model, plan, xi, seed, stream_id, scaled }
    }

    pub fn degree(&self) -> usize {
        self.plan.n_trunc
    }

    /// Reference radius used to rescale the coefficients.
    pub fn rho0(&self) -> f64 {
        self.plan.r
    }

    /// Coefficients of the polynomial in `u = z/ρ₀`.
    pub fn scaled_coefficients(&self) -> &[Complex64] {
        &self.scaled
    }

    /// Sample with every ξ_k conjugated; its zeros are the conjugates.
    pub fn conjugate(&self) -> Self {
        let xi = self.xi.iter().map(|x| x.conj()).collect();
        Self::assemble(self.model, self.plan, xi, self.seed, self.stream_id)
    }

    /// Horner evaluation in `u = z/ρ₀` without range checks.
    pub(crate) fn eval_scaled(&self, u: Complex64) -> Complex64 {
        self.scaled.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * u + c)
    }

    /// Value and derivative with respect to u.
    pub(crate) fn eval_scaled_with_derivative(&self, u: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.scaled.iter().rev() {
            dp = dp * u + p;
            p = p * u + c;
        }
        (p, dp)
    }
}

/// Draws ξ_0..ξ_N from substream `(seed, stream_id)`.
pub fn sample_gaf(model: &WeightModel, plan: &TruncationPlan, seed: u64, stream_id: u64) -> GafSample {
    let mut rng = substream(seed, stream_id);
    let xi = (0..=plan.n_trunc).map(|_| complex_normal(&mut rng)).collect();
    GafSample::assemble(*model, *plan, xi, seed, stream_id)
}

/// Same as [`sample_gaf`], then continues the stream for `extra` tail
/// coefficients ξ_{N+1}..ξ_{N+extra}.
pub fn sample_gaf_with_tail(
    model: &WeightModel,
    plan: &TruncationPlan,
    seed: u64,
    stream_id: u64,
    extra: usize,
) -> (GafSample, Vec<Complex64>) {
    let mut rng = substream(seed, stream_id);
    let xi = (0..=plan.n_trunc).map(|_| complex_normal(&mut rng)).collect();
    let tail = (0..extra).map(|_| complex_normal(&mut rng)).collect();
    (GafSample::assemble(*model, *plan, xi, seed, stream_id), tail)
}

/// `Σ_{k≤N} ξ_k a_k z^k`.
pub fn evaluate_truncated(sample: &GafSample, z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite evaluation point {z}")));
    }
    let limit = 4.0 * sample.plan.big_b * sample.plan.r;
    if z.norm() > limit {
        return Err(Error::Parameter(format!(
            "|z| = {} exceeds the validated range 4·B·r = {limit}",
            z.norm()
        )));
    }
    Ok(sample.eval_scaled(z / sample.rho0()))
}

/// Log of the tail bound `exp((N/β) ln(4B^β/α))`.
pub fn log_tail_bound(plan: &TruncationPlan, model: &WeightModel) -> Result<f64> {
    let beta = model.beta;
    let need = (4.0 * plan.big_b).powf(beta);
    if plan.alpha < need {
        return Err(Error::Parameter(format!(
            "tail bound requires alpha >= (4B)^beta = {need}, got alpha = {}",
            plan.alpha
        )));
    }
    let n = plan.n_trunc as f64;
    Ok((n / beta) * (4.0 * plan.big_b.powf(beta) / plan.alpha).ln())
}

pub fn tail_bound(plan: &TruncationPlan, model: &WeightModel) -> Result<f64> {
    log_tail_bound(plan, model).map(f64::exp)
}

/// `ln |Σ_j tail[j] a_{first+j} z^{first+j}|`, summed with a common log scale.
pub fn log_tail_modulus(model: &WeightModel, first: usize, tail: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    if tail.is_empty() {
        return f64::NEG_INFINITY;
    }
    if r == 0.0 {
        return if first == 0 { tail[0].norm().ln() } else { f64::NEG_INFINITY };
    }
    let ln_r = r.ln();
    let theta = z.arg();
    let logs: Vec<f64> = (0..tail.len())
        .map(|j| {
            let k = first + j;
            log_coefficient(k, model) + k as f64 * ln_r
        })
        .collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: Complex64 = tail
        .iter()
        .zip(&logs)
        .enumerate()
        .map(|(j, (x, l))| x * Complex64::from_polar((l - peak).exp(), (first + j) as f64 * theta))
        .sum();
    sum.norm().ln() + peak
}

/// `ln Σ_{k≤N} x^{2k}/Γ(2(k+1)/β)`.
pub fn log_kernel_diag(model: &WeightModel, n_trunc: usize, x: f64) -> f64 {
    if x == 0.0 {
        return -ln_gamma(model.gamma_arg(0));
    }
    let ln_x2 = 2.0 * x.ln();
    let terms: Vec<f64> = (0..=n_trunc)
        .map(|k| k as f64 * ln_x2 - model.ln_gamma_index(k))
        .collect();
    log_sum_exp(&terms)
}

pub fn kernel_diag(model: &WeightModel, n_trunc: usize, x: f64) -> f64 {
    log_kernel_diag(model, n_trunc, x).exp()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Radial Laplacian of `ln K(x,x)` over `4π`, by central differences.
pub fn first_intensity(model: &WeightModel, n_trunc: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("intensity radius must be >= 0, got {x}")));
    }
    let f = |t: f64| log_kernel_diag(model, n_trunc, t);
    let h = 1e-4f64.max(1e-4 * x);
    let lap = if x == 0.0 {
        4.0 * (f(h) - f(0.0)) / (h * h)
    } else if x <= h {
        // Reflect through the origin: the kernel is radial.
        let f0 = f(x);
        let (fp, fm) = (f(x + h), f((x - h).abs()));
        (fp - 2.0 * f0 + fm) / (h * h) + (fp - fm) / (2.0 * h * x)
    } else {
        let f0 = f(x);
        let (fp, fm) = (f(x + h), f(x - h));
        (fp - 2.0 * f0 + fm) / (h * h) + (fp - fm) / (2.0 * h * x)
    };
    Ok((lap / (4.0 * PI)).max(0.0))
}

/// `E[n(r)] = r (ln K)'(r) / 2`, the flux form of the intensity integral.
pub fn expected_zero_count(model: &WeightModel, n_trunc: usize, r: f64) -> f64 {
    if r <= 0.0 || n_trunc == 0 {
        return 0.0;
    }
    let ln_r2 = 2.0 * r.ln();
    let base: Vec<f64> = (0..=n_trunc)
        .map(|k| k as f64 * ln_r2 - model.ln_gamma_index(k))
        .collect();
    let weighted: Vec<f64> = (1..=n_trunc)
        .map(|k| (k as f64).ln() + base[k])
        .collect();
    // r K'/K = 2 Σ k r^{2k}/Γ / Σ r^{2k}/Γ
    (log_sum_exp(&weighted) - log_sum_exp(&base)).exp()
}
