//! Monte Carlo experiments: hole probabilities, conditional zero statistics,
//! depletion of the forbidden band and the dominant-monomial event.
//!
//! Trial `i` always draws from substream `(seed, i)`, trials run in parallel on
//! the current rayon pool, and results are reduced in trial order, so output
//! does not depend on the number of workers.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaf::{expected_zero_count, log_tail_bound, sample_gaf, sample_gaf_with_tail, tail_bound};
use crate::polydensity::{nu_moment, radial_bin_probability, sample_zeros, PolyDensityParams};
use crate::measures::{limiting_measure, HoleParams};
use crate::special::{log_coefficient, TruncationPlan, WeightModel};
use crate::zeros::{count_zeros_argument, find_zeros_with_reduction, TestFunction};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Relative size (in natural log) below which dropped series terms are
/// ignored when planning a hole experiment.
pub const HOLE_LOG_REL_TOL: f64 = 36.0;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Runs `f` on a pool capped at `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Parameter("threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Scaled radius out to which zeros are collected: `max(3, 1.3 e^{1/β})`.
pub fn search_factor(model: &WeightModel) -> f64 {
    3f64.max(1.3 * model.hole_outer)
}

/// Sampling plan for a hole experiment at radius `r`: the series is truncated
/// where it is negligible on `|z| ≤ search_factor · r`.
pub fn hole_plan(model: &WeightModel, r: f64) -> Result<TruncationPlan> {
    TruncationPlan::covering(model, r, search_factor(model), HOLE_LOG_REL_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoleOptions {
    /// Unconditional zero lists are collected from the first this-many trials.
    pub unconditional_trials: usize,
}

impl Default for HoleOptions {
    fn default() -> Self {
        HoleOptions { unconditional_trials: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleResults {
    pub hole_count: usize,
    pub p_hat: f64,
    pub ci95: (f64, f64),
    /// `|z_j|/r` over accepted trials, trial order.
    pub conditional_zero_radii: Vec<f64>,
    /// `|z_j|/r` over the first `unconditional_trials` trials, trial order.
    pub unconditional_zero_radii: Vec<f64>,
    /// Scaled zeros `z_j/r` of each accepted trial.
    pub conditional_zeros: Vec<Vec<Complex64>>,
    /// Index in `unconditional_zero_radii` where the second half of the
    /// unconditional trials starts.
    pub unconditional_split: usize,
    pub unconditional_trials: usize,
    /// Set when no trial was accepted; conditional fields are then empty.
    pub no_acceptance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleExperiment {
    pub model: WeightModel,
    pub plan: TruncationPlan,
    pub trials: usize,
    pub seed: u64,
    pub hole_radius: f64,
    /// Zeros are listed out to `search_radius` (absolute).
    pub search_radius: f64,
    pub results: HoleResults,
}

struct TrialOutcome {
    hole: bool,
    zeros: Option<Vec<Complex64>>,
}

/// Rejection estimate of `P[n(r) = 0]` with conditional and unconditional
/// zero lists.
pub fn estimate_hole_probability(
    model: &WeightModel,
    plan: &TruncationPlan,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<HoleExperiment> {
    estimate_hole_probability_with(model, plan, r, trials, seed, &HoleOptions::default())
}

pub fn estimate_hole_probability_with(
    model: &WeightModel,
    plan: &TruncationPlan,
    r: f64,
    trials: usize,
    seed: u64,
    options: &HoleOptions,
) -> Result<HoleExperiment> {
    if trials < 100 {
        return Err(Error::Parameter(format!("at least 100 trials are required, got {trials}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("hole radius must be positive, got {r}")));
    }
    let search_radius = (search_factor(model) * r).min(2.0 * plan.big_b * plan.r);
    let uncond = options.unconditional_trials.min(trials);
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let sample = sample_gaf(model, plan, seed, i as u64);
            let hole = count_zeros_argument(&sample, r)? == 0;
            let zeros = if hole || i < uncond {
                Some(find_zeros_with_reduction(&sample, search_radius)?.zeros.iter().map(|z| z / r).collect())
            } else {
                None
            };
            Ok(TrialOutcome { hole, zeros })
        })
        .collect();

    let mut hole_count = 0;
    let mut cond_radii = Vec::new();
    let mut uncond_radii = Vec::new();
    let mut cond_zeros = Vec::new();
    let mut split = 0;
    for (i, out) in outcomes.into_iter().enumerate() {
        let out = out?;
        if i == uncond / 2 {
            split = uncond_radii.len();
        }
        if let Some(z) = out.zeros {
            if i < uncond {
                uncond_radii.extend(z.iter().map(|v| v.norm()));
            }
            if out.hole {
                cond_radii.extend(z.iter().map(|v| v.norm()));
                cond_zeros.push(z);
            }
        }
        if out.hole {
            hole_count += 1;
        }
    }
    let results = HoleResults {
        hole_count,
        p_hat: hole_count as f64 / trials as f64,
        ci95: wilson_interval(hole_count, trials, Z95),
        conditional_zero_radii: cond_radii,
        unconditional_zero_radii: uncond_radii,
        conditional_zeros: cond_zeros,
        unconditional_split: split,
        unconditional_trials: uncond,
        no_acceptance: hole_count == 0,
    };
    Ok(HoleExperiment { model: *model, plan: *plan, trials, seed, hole_radius: r, search_radius, results })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Depletion {
    pub band_frac_cond: f64,
    pub band_frac_uncond: f64,
    /// Two-proportion z-score of `uncond − cond`; positive means depletion.
    pub zscore: f64,
    pub n_cond: usize,
    pub n_uncond: usize,
}

/// Fraction of listed scaled zeros in `(1, e^{1/β})`; `None` for an empty list.
fn band_fraction(radii: &[f64], outer: f64) -> Option<(f64, usize)> {
    if radii.is_empty() {
        return None;
    }
    let k = radii.iter().filter(|&&x| x > 1.0 && x < outer).count();
    Some((k as f64 / radii.len() as f64, radii.len()))
}

fn two_proportion(a: &[f64], b: &[f64], outer: f64) -> Result<Depletion> {
    let (Some((fa, na)), Some((fb, nb))) = (band_fraction(a, outer), band_fraction(b, outer)) else {
        return Err(Error::Insufficient("band fraction is 0/0: no zeros listed".into()));
    };
    let pooled = (fa * na as f64 + fb * nb as f64) / (na + nb) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
    let zscore = if se > 0.0 { (fb - fa) / se } else { 0.0 };
    Ok(Depletion { band_frac_cond: fa, band_frac_uncond: fb, zscore, n_cond: na, n_uncond: nb })
}

fn check_coverage(exp: &HoleExperiment) -> Result<()> {
    let need = exp.hole_radius * exp.model.hole_outer * 1.2;
    if exp.search_radius < need {
        return Err(Error::Coverage(format!(
            "zero lists reach {} but the band needs {need}",
            exp.search_radius
        )));
    }
    Ok(())
}

/// Conditional vs unconditional share of scaled zeros in the forbidden band.
pub fn depletion_statistic(exp: &HoleExperiment) -> Result<Depletion> {
    check_coverage(exp)?;
    if exp.results.hole_count < 10 {
        return Err(Error::Insufficient(format!(
            "{} accepted trials; at least 10 are needed",
            exp.results.hole_count
        )));
    }
    two_proportion(
        &exp.results.conditional_zero_radii,
        &exp.results.unconditional_zero_radii,
        exp.model.hole_outer,
    )
}

/// Null check: first half of the unconditional trials against the second.
pub fn split_half_statistic(exp: &HoleExperiment) -> Result<Depletion> {
    check_coverage(exp)?;
    let (a, b) = exp.results.unconditional_zero_radii.split_at(exp.results.unconditional_split);
    two_proportion(a, b, exp.model.hole_outer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominantResult {
    pub p_hat: f64,
    pub ci95: (f64, f64),
    /// `−(β Z_p/2) r^{2β}`, for reporting only.
    pub log_lower_bound: f64,
    pub k0: usize,
    pub n_trunc: usize,
    pub hits: usize,
    pub trials: usize,
    /// Trials where the event held but the contour count differed from k₀.
    pub rouche_violations: usize,
}

/// Truncation used by the dominant-monomial event: α = 4^β e, B = 1.
pub fn dominant_plan(model: &WeightModel, r: f64) -> Result<TruncationPlan> {
    let alpha = 4f64.powf(model.beta) * std::f64::consts::E;
    TruncationPlan::for_sampling(model, r, alpha, 1.0)
}

/// Probability of `{|ξ_{k₀}|b_{k₀} > Σ_{k≠k₀}|ξ_k|b_k + T}` with
/// `b_k = r^k a_k`, `k₀ = ⌊(βp/2)r^β⌋` and T the tail bound of the plan.
/// Every trial where the event holds is also checked against the contour
/// count of the truncated sample.
pub fn dominant_monomial_probability(
    model: &WeightModel,
    r: f64,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<DominantResult> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let params = HoleParams::new(p)?;
    let plan = dominant_plan(model, r)?;
    let beta = model.beta;
    let k0 = (beta * p / 2.0 * r.powf(beta)).floor() as usize;
    let n = plan.n_trunc;
    if k0 > n {
        return Err(Error::Parameter(format!("k0 = {k0} exceeds the truncation degree {n}")));
    }
    let tail = tail_bound(&plan, model)?;
    let ln_r = r.ln();
    let b: Vec<f64> = (0..=n).map(|k| (log_coefficient(k, model) + k as f64 * ln_r).exp()).collect();
    let outcomes: Vec<Result<(bool, bool)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let sample = sample_gaf(model, &plan, seed, i as u64);
            let mut rest = tail;
            for (k, (x, bk)) in sample.xi.iter().zip(&b).enumerate() {
                if k != k0 {
                    rest += x.norm() * bk;
                }
            }
            let hit = sample.xi[k0].norm() * b[k0] > rest;
            let violation = hit && count_zeros_argument(&sample, r)? != k0;
            Ok((hit, violation))
        })
        .collect();
    let mut hits = 0;
    let mut violations = 0;
    for o in outcomes {
        let (h, v) = o?;
        hits += h as usize;
        violations += v as usize;
    }
    Ok(DominantResult {
        p_hat: hits as f64 / trials as f64,
        ci95: wilson_interval(hits, trials, Z95),
        log_lower_bound: -(beta * params.z_p / 2.0) * r.powf(2.0 * beta),
        k0,
        n_trunc: n,
        hits,
        trials,
        rouche_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalLinear {
    pub mean_cond: f64,
    pub target: f64,
    pub gap: f64,
    pub accepted: usize,
}

/// `∫ φ dμ` for a radial measure, angular-averaging non-radial φ.
fn integrate_phi(mu: &crate::measures::RadialMeasure, phi: &TestFunction) -> f64 {
    let cutoff = phi.support_radius();
    if phi.is_radial() {
        mu.integrate_radial(|rho| phi.radial_profile(rho), cutoff)
    } else {
        let m = 128;
        mu.integrate_radial(
            |rho| {
                (0..m)
                    .map(|j| phi.eval(Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * j as f64 / m as f64)))
                    .sum::<f64>()
                    / m as f64
            },
            cutoff,
        )
    }
}

/// Mean of `Σ φ(z_j/r)` over accepted trials against `r^β ∫φ dμ_0^β`.
pub fn conditional_linear_statistics(exp: &HoleExperiment, phi: &TestFunction) -> Result<ConditionalLinear> {
    phi.validate()?;
    let accepted = exp.results.conditional_zeros.len();
    if accepted < 30 {
        return Err(Error::Insufficient(format!("{accepted} accepted trials; at least 30 are needed")));
    }
    let reach = exp.hole_radius * phi.support_radius();
    if reach > exp.search_radius * (1.0 + 1e-12) {
        return Err(Error::Coverage(format!(
            "test function reaches {reach} but zeros were listed only to {}",
            exp.search_radius
        )));
    }
    let total: f64 = exp
        .results
        .conditional_zeros
        .iter()
        .map(|zs| zs.iter().map(|z| phi.eval(*z)).sum::<f64>())
        .sum();
    let mean_cond = total / accepted as f64;
    let mu0 = limiting_measure(&exp.model, 0.0)?;
    let target = exp.hole_radius.powf(exp.model.beta) * integrate_phi(&mu0, phi);
    Ok(ConditionalLinear { mean_cond, target, gap: mean_cond - target, accepted })
}

/// 1% critical value of the chi-square law with 29 degrees of freedom.
pub const CHI2_29_CRITICAL_1PCT: f64 = 49.58788447289881;

/// Number of radial bins used by [`radial_chi_square`].
pub const CHI2_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGap {
    /// Largest gap between the empirical and exact mean density of an annulus.
    pub sup_gap: f64,
    pub bins: usize,
    pub samples: usize,
}

/// Histogram check of the one-point density of the first (randomly ordered)
/// zero of `P_{N,L}`, N ≤ 2: annuli of equal width on `|z| ≤ r_max`, each
/// compared with the exact mean of the density over the annulus.
pub fn density_histogram_gap(
    params: &PolyDensityParams,
    samples: usize,
    seed: u64,
    r_max: f64,
    bins: usize,
) -> Result<DensityGap> {
    if samples == 0 || bins == 0 || !(r_max > 0.0) {
        return Err(Error::Parameter("samples, bins and r_max must be positive".into()));
    }
    let radii = first_zero_radii(params, samples, seed)?;
    let width = r_max / bins as f64;
    let mut counts = vec![0usize; bins];
    for rho in radii {
        if rho < r_max {
            counts[((rho / width) as usize).min(bins - 1)] += 1;
        }
    }
    let mut sup_gap = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        let (a, b) = (i as f64 * width, (i + 1) as f64 * width);
        let area = std::f64::consts::PI * (b * b - a * a);
        let exact = radial_bin_probability(params, a, b)? / area;
        let emp = c as f64 / (samples as f64 * area);
        sup_gap = sup_gap.max((emp - exact).abs());
    }
    Ok(DensityGap { sup_gap, bins, samples })
}

fn first_zero_radii(params: &PolyDensityParams, samples: usize, seed: u64) -> Result<Vec<f64>> {
    (0..samples)
        .into_par_iter()
        .map(|i| sample_zeros(params, seed, i as u64).map(|z| z[0].norm()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub critical_1pct: f64,
    pub observed: Vec<usize>,
    pub expected: Vec<f64>,
}

impl ChiSquare {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical_1pct
    }
}

/// Chi-square test of the radial law of the first zero (N ≤ 2) on 30 bins.
/// Bin edges are the quantiles of the N = 1 law `ρ²/(m₁ + ρ²)` with the same
/// moment `m₁`, so every bin carries a comparable share.
pub fn radial_chi_square(params: &PolyDensityParams, samples: usize, seed: u64) -> Result<ChiSquare> {
    if samples == 0 {
        return Err(Error::Parameter("samples must be positive".into()));
    }
    let m1 = nu_moment(1, params);
    let edges: Vec<f64> = (0..=CHI2_BINS)
        .map(|i| {
            let u = i as f64 / CHI2_BINS as f64;
            if i == CHI2_BINS {
                f64::INFINITY
            } else {
                (m1 * u / (1.0 - u)).sqrt()
            }
        })
        .collect();
    let radii = first_zero_radii(params, samples, seed)?;
    let mut observed = vec![0usize; CHI2_BINS];
    for rho in radii {
        let idx = edges.partition_point(|&e| e <= rho).saturating_sub(1).min(CHI2_BINS - 1);
        observed[idx] += 1;
    }
    let mut expected = Vec::with_capacity(CHI2_BINS);
    for w in edges.windows(2) {
        expected.push(samples as f64 * radial_bin_probability(params, w[0], w[1])?);
    }
    let statistic = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    Ok(ChiSquare { statistic, df: CHI2_BINS - 1, critical_1pct: CHI2_29_CRITICAL_1PCT, observed, expected })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStudy {
    pub trials: usize,
    pub exceedances: usize,
    pub log_bound: f64,
    /// Largest `ln|T_N| − ln bound` seen over all trials and grid points.
    pub max_log_ratio: f64,
}

/// Compares `sup |T_N|` over a polar `grid × grid` mesh of `|z| ≤ B r` with
/// the tail bound. `T_N` sums the terms `N+1 ..= N+extra`.
pub fn tail_exceedance_study(
    model: &WeightModel,
    plan: &TruncationPlan,
    trials: usize,
    seed: u64,
    grid: usize,
    extra: usize,
) -> Result<TailStudy> {
    if trials == 0 || grid == 0 || extra == 0 {
        return Err(Error::Parameter("trials, grid and extra must be positive".into()));
    }
    let log_bound = log_tail_bound(plan, model)?;
    let first = plan.n_trunc + 1;
    let outer = plan.big_b * plan.r;
    let radii: Vec<f64> = (1..=grid).map(|i| outer * i as f64 / grid as f64).collect();
    let units: Vec<Complex64> = (0..grid)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / grid as f64))
        .collect();
    let worst: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (_, tail) = sample_gaf_with_tail(model, plan, seed, i as u64, extra);
            let mut worst = f64::NEG_INFINITY;
            for &rho in &radii {
                let ln_r = rho.ln();
                let logs: Vec<f64> =
                    (0..extra).map(|j| log_coefficient(first + j, model) + (first + j) as f64 * ln_r).collect();
                let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let c: Vec<Complex64> = tail.iter().zip(&logs).map(|(x, l)| x * (l - peak).exp()).collect();
                for w in &units {
                    // |Σ c_j w^{first+j}| = |Σ c_j w^j|.
                    let v = c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, cj| acc * w + cj);
                    worst = worst.max(v.norm().ln() + peak);
                }
            }
            worst - log_bound
        })
        .collect();
    let exceedances = worst.iter().filter(|&&w| w > 0.0).count();
    let max_log_ratio = worst.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(TailStudy { trials, exceedances, log_bound, max_log_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountStudy {
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
    /// `∫_{D(0,r)}` of the first intensity of the truncated series.
    pub predicted: f64,
}

/// Mean number of zeros in `D(0, r)` against the intensity prediction.
pub fn zero_count_study(
    model: &WeightModel,
    plan: &TruncationPlan,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<CountStudy> {
    if trials < 2 {
        return Err(Error::Parameter("at least two trials are required".into()));
    }
    let counts: Vec<Result<usize>> = (0..trials)
        .into_par_iter()
        .map(|i| count_zeros_argument(&sample_gaf(model, plan, seed, i as u64), r))
        .collect();
    let counts: Vec<f64> = counts.into_iter().map(|c| c.map(|v| v as f64)).collect::<Result<_>>()?;
    let n = trials as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(CountStudy { trials, mean, std_err: (var / n).sqrt(), predicted: expected_zero_count(model, plan.n_trunc, r) })
}
