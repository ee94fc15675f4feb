//! Log-domain gamma machinery, series coefficients, Stirling brackets and
//! truncation sizing.
//!
//! Everything that involves `Γ(2(k+1)/β)` goes through [`ln_gamma`]; the gamma
//! function itself is never formed, since the ratios that appear overflow a
//! double long before the degrees used here.

use std::collections::HashMap;
use std::f64::consts::{E, PI};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling series tail `Σ B_{2k} / (2k(2k-1) x^{2k-1})`, coefficients for k = 1..8.
const STIRLING_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Below this argument the recurrence `Γ(x+1) = xΓ(x)` shifts x up before the
/// asymptotic series is applied.
const ASYMPTOTIC_START: f64 = 7.0;

/// The weight exponent β of `e^{-|z|^β}` together with the constants derived
/// from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightModel {
    pub beta: f64,
    /// `C_β = 2^{2/β} β^{1/2 - 2/β}`.
    pub c_beta: f64,
    /// Inner radius of the forbidden annulus (always 1).
    pub hole_inner: f64,
    /// Outer radius of the forbidden annulus, `e^{1/β}`.
    pub hole_outer: f64,
}

impl WeightModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(WeightModel {
            beta,
            c_beta: ln_c_beta(beta).exp(),
            hole_inner: 1.0,
            hole_outer: (1.0 / beta).exp(),
        })
    }

    pub fn ln_c_beta(&self) -> f64 {
        ln_c_beta(self.beta)
    }

    /// Argument `2(n+1)/β` of the gamma function attached to the n-th monomial.
    #[inline]
    pub fn gamma_arg(&self, n: usize) -> f64 {
        2.0 * (n as f64 + 1.0) / self.beta
    }

    /// `ln Γ(2(n+1)/β)`.
    #[inline]
    pub fn ln_gamma_index(&self, n: usize) -> f64 {
        ln_gamma(self.gamma_arg(n))
    }
}

fn ln_c_beta(beta: f64) -> f64 {
    (2.0 / beta) * 2f64.ln() + (0.5 - 2.0 / beta) * beta.ln()
}

/// `ln Γ(x)` for `x > 0`, without domain checking.
///
/// Shifts the argument to `x >= 7` and applies the Stirling series with eight
/// Bernoulli terms; the truncation error there is below 1e-15.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < ASYMPTOTIC_START {
        let mut shifted = x;
        let mut product = 1.0;
        while shifted < ASYMPTOTIC_START {
            product *= shifted;
            shifted += 1.0;
        }
        return stirling_ln_gamma(shifted) - product.ln();
    }
    stirling_ln_gamma(x)
}

fn stirling_ln_gamma(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for c in STIRLING_SERIES {
        series += c * power;
        power *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// Checked `ln Γ(x)`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a positive finite argument, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// `ln a_n = -½ ln Γ(2(n+1)/β)`, the log of the coefficient of `ξ_n z^n`.
#[inline]
pub fn log_coefficient(n: usize, model: &WeightModel) -> f64 {
    -0.5 * model.ln_gamma_index(n)
}

/// `a_n = 1/√Γ(2(n+1)/β)`. Underflows to zero for large n; use
/// [`log_coefficient`] there.
pub fn coefficient(n: usize, model: &WeightModel) -> f64 {
    log_coefficient(n, model).exp()
}

/// Log-domain two-sided Stirling bracket for `Γ(2(k+1)/β)`:
/// `ln[C_β k^{2/β-1/2} (2k/(βe))^{2k/β}]` and that value plus `ln 2`.
pub fn stirling_bounds(k: u64, model: &WeightModel) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Domain("stirling_bounds requires k >= 1".into()));
    }
    let beta = model.beta;
    let kf = k as f64;
    let lower = model.ln_c_beta()
        + (2.0 / beta - 0.5) * kf.ln()
        + (2.0 * kf / beta) * (2.0 * kf / (beta * E)).ln();
    Ok((lower, lower + 2f64.ln()))
}

/// Whether the Stirling bracket contains `ln Γ(2(k+1)/β)`.
pub fn stirling_contains(k: u64, model: &WeightModel) -> bool {
    let (lo, hi) = match stirling_bounds(k, model) {
        Ok(b) => b,
        Err(_) => return false,
    };
    let value = ln_gamma(2.0 * (k as f64 + 1.0) / model.beta);
    lo <= value && value <= hi
}

/// Result of scanning the Stirling bracket over `1..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StirlingThreshold {
    /// Smallest k from which containment holds for every index up to `k_max`.
    /// `None` when the bracket fails at `k_max` itself.
    pub first_valid: Option<u64>,
    pub k_max: u64,
}

fn threshold_cache() -> &'static Mutex<HashMap<(u64, u64), StirlingThreshold>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), StirlingThreshold>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Empirical start of the Stirling bracket for this β, scanned up to `k_max`
/// and cached per `(β, k_max)`.
pub fn stirling_threshold(model: &WeightModel, k_max: u64) -> StirlingThreshold {
    let key = (model.beta.to_bits(), k_max);
    if let Some(hit) = threshold_cache().lock().unwrap().get(&key) {
        return *hit;
    }
    let mut first_valid = None;
    for k in (1..=k_max).rev() {
        if stirling_contains(k, model) {
            first_valid = Some(k);
        } else {
            break;
        }
    }
    let result = StirlingThreshold { first_valid, k_max };
    threshold_cache().lock().unwrap().insert(key, result);
    result
}

/// Round half up to the nearest integer.
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Auxiliary scales used when comparing zero counts of `F_β` and of the
/// rescaled polynomial `P_{N,L}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonScales {
    pub s: f64,
    pub gamma: f64,
    pub t: f64,
    pub m0: f64,
    pub k0_shift: f64,
    pub l_scale: f64,
}

/// Truncation of the series at degree `N = round(βαr^β/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPlan {
    pub r: f64,
    pub alpha: f64,
    pub n_trunc: usize,
    pub big_b: f64,
    /// Set when α lies outside `[ln r, 2 ln r]`.
    pub alpha_warning: bool,
    /// Present for plans built by [`make_truncation_plan`].
    pub scales: Option<ComparisonScales>,
}

fn degree_for(model: &WeightModel, r: f64, alpha: f64) -> usize {
    let n = round_half_up(model.beta * alpha * r.powf(model.beta) / 2.0);
    n.max(1.0) as usize
}

fn alpha_out_of_range(r: f64, alpha: f64) -> bool {
    let lr = r.ln();
    !(alpha >= lr && alpha <= 2.0 * lr)
}

/// Full truncation plan with the comparison scales `γ = t = r^{-s}`,
/// `M_0 = B^{2β} r^{2β}`, `K_0 = 2 M_0 γ` and `L = (r - K_0)/(1 + t)`.
pub fn make_truncation_plan(
    r: f64,
    model: &WeightModel,
    alpha: f64,
    big_b: f64,
    s: f64,
) -> Result<TruncationPlan> {
    let beta = model.beta;
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::Parameter(format!("truncation radius must exceed 1, got {r}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(big_b >= 1.0) {
        return Err(Error::Parameter(format!("support multiplier B must be >= 1, got {big_b}")));
    }
    if !(s > 1.0 + 4.0 * beta) {
        return Err(Error::Parameter(format!(
            "exponent s must exceed 1 + 4β = {}, got {s}",
            1.0 + 4.0 * beta
        )));
    }
    let gamma = r.powf(-s);
    let m0 = big_b.powf(2.0 * beta) * r.powf(2.0 * beta);
    let k0_shift = 2.0 * m0 * gamma;
    let l_scale = (r - k0_shift) / (1.0 + gamma);
    if !(l_scale > 0.0) {
        return Err(Error::Parameter(format!(
            "K_0 = {k0_shift} is not below r = {r}; increase s or r"
        )));
    }
    Ok(TruncationPlan {
        r,
        alpha,
        n_trunc: degree_for(model, r, alpha),
        big_b,
        alpha_warning: alpha_out_of_range(r, alpha),
        scales: Some(ComparisonScales { s, gamma, t: gamma, m0, k0_shift, l_scale }),
    })
}

impl TruncationPlan {
    /// Plan used only for sampling and root finding at desk-scale radii
    /// (any `r > 0`); carries no comparison scales.
    pub fn for_sampling(model: &WeightModel, r: f64, alpha: f64, big_b: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Parameter(format!("radius must be positive, got {r}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(big_b >= 1.0) {
            return Err(Error::Parameter(format!("support multiplier B must be >= 1, got {big_b}")));
        }
        Ok(TruncationPlan {
            r,
            alpha,
            n_trunc: degree_for(model, r, alpha),
            big_b,
            alpha_warning: alpha_out_of_range(r, alpha),
            scales: None,
        })
    }

    /// Sampling plan whose degree is the smallest N such that every dropped
    /// term `|z|^k a_k` with `|z| = B r` is below `exp(-log_rel_tol)` times the
    /// largest term. α is then `2N/(β r^β)`.
    pub fn covering(model: &WeightModel, r: f64, big_b: f64, log_rel_tol: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Parameter(format!("radius must be positive, got {r}")));
        }
        let n = covering_degree(model, big_b * r, log_rel_tol);
        let alpha = 2.0 * n as f64 / (model.beta * r.powf(model.beta));
        Self::for_sampling(model, r, alpha, big_b)
    }

    pub fn l_scale(&self) -> Option<f64> {
        self.scales.map(|s| s.l_scale)
    }
}

/// Smallest N with all terms of index > N at radius `radius` at least
/// `log_rel_tol` below the peak term (in natural log).
pub fn covering_degree(model: &WeightModel, radius: f64, log_rel_tol: f64) -> usize {
    let ln_r = radius.ln();
    let term = |k: usize| k as f64 * ln_r + log_coefficient(k, model);
    let mut peak = term(0);
    let mut k = 1usize;
    // Terms are unimodal in k: climb to the peak, then descend to the cutoff.
    loop {
        let t = term(k);
        if t >= peak {
            peak = t;
            k += 1;
            continue;
        }
        if t < peak - log_rel_tol {
            return (k - 1).max(1);
        }
        k += 1;
    }
}

/// `1/(2π)` times the weight's normalising constant is `β/(2π)`; exposed for
/// quadrature checks.
pub fn weight_normaliser(model: &WeightModel) -> f64 {
    model.beta / (2.0 * PI)
}
