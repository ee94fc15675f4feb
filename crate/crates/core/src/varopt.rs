//! Direct minimization of `I_{α,β}(μ) = B_{α,β}(μ) − Σ(μ)` over radial
//! probability measures supported on finitely many circles.
//!
//! With weights `w` on radii `r_1 < … < r_M` the energy is `wᵀKw`,
//! `K_ij = ln max(r_i, r_j)`, and the objective is
//!
//! ```text
//! J(w) = 2 max_x (U_w(x) − x^β/(βα)) − wᵀKw,   U_w(x) = Σ w_k ln max(x, r_k).
//! ```
//!
//! On the simplex `−wᵀKw = wᵀ(ln R·11ᵀ − K)w − ln R` for any `R ≥ r_M`, and
//! `ln R·11ᵀ − K` is a Gram matrix (`ln R − ln max(a, b) = ∫ 1[a<s]1[b<s] ds/s`
//! over `s ∈ (0, R)`), so J is a convex quadratic plus a max of affine
//! functions. The default solver writes the max in epigraph form and runs a
//! primal–dual interior-point method on the resulting QP, adding cutting
//! planes at the exact maximizers until the epigraph variable matches the
//! true supremum. A projected-subgradient solver is also provided.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::measures::{q_of_p, CircleAtom, RadialMeasure, Regime};
use crate::special::WeightModel;

/// Symmetric matrix `K_ij = ln max(r_i, r_j)`.
pub fn energy_matrix(grid: &[f64]) -> DMatrix<f64> {
    let m = grid.len();
    DMatrix::from_fn(m, m, |i, j| grid[i].max(grid[j]).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedRadialMeasure {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscretizedRadialMeasure {
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if grid.len() != weights.len() || grid.is_empty() {
            return Err(Error::Parameter("grid and weights must have equal non-zero length".into()));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) || grid[0] <= 0.0 {
            return Err(Error::Parameter("grid must be positive and strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Parameter("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscretizedRadialMeasure { grid, weights })
    }

    /// Total weight on radii in `(lo, hi)`, endpoints included on request.
    pub fn mass_between(&self, lo: f64, hi: f64, include_lo: bool, include_hi: bool) -> f64 {
        self.grid
            .iter()
            .zip(&self.weights)
            .filter(|(r, _)| {
                let above = if include_lo { **r >= lo } else { **r > lo };
                let below = if include_hi { **r <= hi } else { **r < hi };
                above && below
            })
            .map(|(_, w)| w)
            .sum()
    }

    /// Weight on the node closest to `radius`.
    pub fn weight_at(&self, radius: f64) -> f64 {
        let i = nearest(&self.grid, radius);
        self.weights[i]
    }

    pub fn to_radial_measure(&self, beta: f64) -> RadialMeasure {
        RadialMeasure {
            atoms: self
                .grid
                .iter()
                .zip(&self.weights)
                .map(|(&radius, &mass)| CircleAtom { radius, mass })
                .collect(),
            pieces: vec![],
            beta,
        }
    }
}

fn nearest(grid: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, r) in grid.iter().enumerate() {
        if (r - x).abs() < (grid[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Mass constraint on the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `μ(𝔻) ≤ p/α` (open disk), the regime p < 1.
    MassInsideLe,
    /// `μ(𝔻̄) ≥ p/α` (closed disk), the regime p > 1.
    MassClosedInsideGe,
}

impl Constraint {
    pub fn for_p(p: f64) -> Result<Self> {
        Ok(match Regime::of(p)? {
            Regime::PEq0 | Regime::PLt1 => Constraint::MassInsideLe,
            Regime::PIn1E | Regime::PGeE => Constraint::MassClosedInsideGe,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Constraint::MassInsideLe => "mass_inside_le",
            Constraint::MassClosedInsideGe => "mass_closed_inside_ge",
        }
    }

    fn in_group(&self, r: f64) -> bool {
        match self {
            Constraint::MassInsideLe => r < 1.0,
            Constraint::MassClosedInsideGe => r <= 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    InteriorPoint,
    ProjectedSubgradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaroptOptions {
    pub grid_size: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub solver: Solver,
}

impl Default for VaroptOptions {
    fn default() -> Self {
        VaroptOptions { grid_size: 400, max_iters: 200, tol: 1e-6, solver: Solver::InteriorPoint }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaroptResult {
    pub measure: DiscretizedRadialMeasure,
    /// `J(w)` with the supremum evaluated exactly.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Support edges the minimizer is expected to have: `p^{1/β}`, `1`, `q^{1/β}`, `α^{1/β}`.
pub fn breakpoints(alpha: f64, model: &WeightModel, p: f64) -> Result<Vec<f64>> {
    let inv = 1.0 / model.beta;
    let q = q_of_p(p)?;
    let top = alpha.powf(inv);
    let mut b = vec![1.0, top];
    for v in [p, q] {
        if v > 0.0 && v < alpha {
            b.push(v.powf(inv));
        }
    }
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let r_min = 1e-2 * b[0];
    b.insert(0, r_min);
    Ok(b)
}

/// Piecewise-geometric grid of exactly `m` nodes containing every breakpoint.
/// Interior nodes are shared out in proportion to `Δ(r^β)`, with at least
/// eight per segment.
pub fn make_grid(alpha: f64, model: &WeightModel, p: f64, m: usize) -> Result<Vec<f64>> {
    let b = breakpoints(alpha, model, p)?;
    let segs = b.len() - 1;
    let min_per = 8;
    if m < b.len() + min_per * segs {
        return Err(Error::Parameter(format!("grid size {m} too small for {} segments", segs)));
    }
    let beta = model.beta;
    let lens: Vec<f64> = b.windows(2).map(|w| w[1].powf(beta) - w[0].powf(beta)).collect();
    let total: f64 = lens.iter().sum();
    let spare = m - b.len() - min_per * segs;
    let mut counts: Vec<usize> = lens.iter().map(|l| min_per + (spare as f64 * l / total).floor() as usize).collect();
    let mut used: usize = counts.iter().sum();
    // Hand out the rounding remainder to the longest segments.
    let mut order: Vec<usize> = (0..segs).collect();
    order.sort_by(|&i, &j| lens[j].partial_cmp(&lens[i]).unwrap());
    let mut k = 0;
    while used + b.len() < m {
        counts[order[k % segs]] += 1;
        used += 1;
        k += 1;
    }
    let mut grid = Vec::with_capacity(m);
    for (s, w) in b.windows(2).enumerate() {
        let (a, c) = (w[0], w[1]);
        let n = counts[s] + 1;
        let ratio = (c / a).ln() / n as f64;
        for i in 0..n {
            grid.push(a * (ratio * i as f64).exp());
        }
    }
    grid.push(*b.last().unwrap());
    debug_assert_eq!(grid.len(), m);
    Ok(grid)
}

/// Inserts the geometric midpoint of every consecutive pair.
pub fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push((w[0] * w[1]).sqrt());
    }
    out.extend(grid.last());
    out
}

/// `U_w(x)` at each of the sorted points `xs`, in `O(M + len(xs))`.
pub fn potential_on(grid: &[f64], w: &[f64], xs: &[f64]) -> Vec<f64> {
    // suffix[k] = Σ_{j≥k} w_j ln r_j
    let m = grid.len();
    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + w[k] * grid[k].ln();
    }
    let mut inside = 0.0;
    let mut k = 0;
    xs.iter()
        .map(|&x| {
            while k < m && grid[k] <= x {
                inside += w[k];
                k += 1;
            }
            if x > 0.0 {
                inside * x.ln() + suffix[k]
            } else {
                suffix[k]
            }
        })
        .collect()
}

/// `wᵀKw` in `O(M)`.
pub fn quadratic_energy(grid: &[f64], w: &[f64]) -> f64 {
    let mut below = 0.0;
    let mut e = 0.0;
    for (r, wk) in grid.iter().zip(w) {
        e += wk * r.ln() * (wk + 2.0 * below);
        below += wk;
    }
    e
}

/// Exact `max_x (U_w(x) − x^β/(βα))`, the maximizer, and the local maximum
/// of every inter-node interval.
pub fn exact_sup(grid: &[f64], w: &[f64], alpha: f64, beta: f64) -> (f64, f64, Vec<(f64, f64)>) {
    let m = grid.len();
    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + w[k] * grid[k].ln();
    }
    let weight = |x: f64| x.powf(beta) / (beta * alpha);
    let mut locals = Vec::with_capacity(m + 1);
    locals.push((0.0, suffix[0]));
    let mut inside = 0.0;
    for k in 0..m {
        inside += w[k];
        let lo = grid[k];
        let hi = if k + 1 < m { grid[k + 1] } else { f64::INFINITY };
        let stationary = if inside > 0.0 { (inside * alpha).powf(1.0 / beta) } else { 0.0 };
        let x = stationary.clamp(lo, hi);
        let x = if x.is_finite() { x } else { lo };
        locals.push((x, inside * x.ln() + suffix[k + 1] - weight(x)));
    }
    let (mut bx, mut bv) = locals[0];
    for &(x, v) in &locals {
        if v > bv {
            bv = v;
            bx = x;
        }
    }
    (bv, bx, locals)
}

/// `J(w)` with the exact supremum.
pub fn objective(grid: &[f64], w: &[f64], alpha: f64, beta: f64) -> f64 {
    2.0 * exact_sup(grid, w, alpha, beta).0 - quadratic_energy(grid, w)
}

/// Minimizes J over discrete radial probability measures on a grid of
/// `options.grid_size` nodes subject to the unit-disk mass constraint.
pub fn minimize_constrained(
    alpha: f64,
    model: &WeightModel,
    p: f64,
    constraint: Constraint,
    options: &VaroptOptions,
) -> Result<VaroptResult> {
    validate(alpha, p, options)?;
    let grid = make_grid(alpha, model, p, options.grid_size)?;
    minimize_on_grid(&grid, alpha, model, p, constraint, options)
}

fn validate(alpha: f64, p: f64, options: &VaroptOptions) -> Result<()> {
    if p >= alpha {
        return Err(Error::Parameter(format!("constraint p/α = {} is infeasible", p / alpha)));
    }
    if !(alpha > E) {
        return Err(Error::Parameter(format!("alpha must exceed e, got {alpha}")));
    }
    if options.grid_size < 200 {
        return Err(Error::Parameter(format!("grid size must be at least 200, got {}", options.grid_size)));
    }
    Ok(())
}

/// As [`minimize_constrained`] on a caller-supplied grid (at least 2 nodes).
pub fn minimize_on_grid(
    grid: &[f64],
    alpha: f64,
    model: &WeightModel,
    p: f64,
    constraint: Constraint,
    options: &VaroptOptions,
) -> Result<VaroptResult> {
    if p >= alpha {
        return Err(Error::Parameter(format!("constraint p/α = {} is infeasible", p / alpha)));
    }
    if p < 0.0 || p == 1.0 {
        return Err(Error::Parameter(format!("p = {p} is outside the supported regimes")));
    }
    if grid.len() < 2 || !grid.windows(2).all(|w| w[0] < w[1]) || grid[0] <= 0.0 {
        return Err(Error::Parameter("grid must be positive and strictly increasing".into()));
    }
    let bound = p / alpha;
    match options.solver {
        Solver::InteriorPoint => interior_point(grid, alpha, model.beta, bound, constraint, options),
        Solver::ProjectedSubgradient => subgradient(grid, alpha, model.beta, bound, constraint, options),
    }
}

// ---------------------------------------------------------------------------
// Interior point

struct Qp<'a> {
    /// Objective is `wᵀQw + 2t`.
    q: DMatrix<f64>,
    probes: DMatrix<f64>,
    rhs: DVector<f64>,
    /// `sign · Σ_{mask} w ≤ bound`.
    mask: &'a [bool],
    sign: f64,
    bound: f64,
}

struct QpSolution {
    w: Vec<f64>,
    t: f64,
    iterations: usize,
    converged: bool,
}

impl Qp<'_> {
    fn n(&self) -> usize {
        self.q.nrows()
    }

    fn n_ineq(&self) -> usize {
        self.probes.nrows() + self.n() + 1
    }

    /// `G x` for `x = (w, t)`.
    fn g_mul(&self, w: &DVector<f64>, t: f64) -> DVector<f64> {
        let np = self.probes.nrows();
        let n = self.n();
        let lw = &self.probes * w;
        let mut out = DVector::zeros(self.n_ineq());
        for j in 0..np {
            out[j] = lw[j] - t;
        }
        for k in 0..n {
            out[np + k] = -w[k];
        }
        let g: f64 = (0..n).filter(|&k| self.mask[k]).map(|k| w[k]).sum();
        out[np + n] = self.sign * g;
        out
    }

    /// `Gᵀ z` split into its w and t parts.
    fn gt_mul(&self, z: &DVector<f64>) -> (DVector<f64>, f64) {
        let np = self.probes.nrows();
        let n = self.n();
        let zp = z.rows(0, np);
        let mut gw = self.probes.tr_mul(&zp);
        let zg = z[np + n];
        for k in 0..n {
            gw[k] -= z[np + k];
            if self.mask[k] {
                gw[k] += self.sign * zg;
            }
        }
        (gw, -zp.sum())
    }

    fn h_vec(&self) -> DVector<f64> {
        let np = self.probes.nrows();
        let n = self.n();
        let mut h = DVector::zeros(self.n_ineq());
        h.rows_mut(0, np).copy_from(&self.rhs);
        h[np + n] = self.bound;
        h
    }

    fn solve(&self, max_iter: usize) -> Result<QpSolution> {
        let n = self.n();
        let np = self.probes.nrows();
        let mi = self.n_ineq();
        let h = self.h_vec();
        let mut w = DVector::from_element(n, 1.0 / n as f64);
        let lw = &self.probes * &w;
        let mut t = (0..np).map(|j| lw[j] - self.rhs[j]).fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let gx = self.g_mul(&w, t);
        let mut s = DVector::from_fn(mi, |i, _| (h[i] - gx[i]).max(1.0));
        let mut z = DVector::from_element(mi, 1.0);
        let mut y = 0.0;
        let scale = 1.0 + self.q.amax() + self.probes.amax();

        for iter in 0..max_iter {
            // Residuals.
            let (gtz_w, gtz_t) = self.gt_mul(&z);
            let qw = &self.q * &w;
            let rd_w = 2.0 * &qw + gtz_w + DVector::from_element(n, y);
            let rd_t = 2.0 + gtz_t;
            let rp = w.sum() - 1.0;
            let ri = self.g_mul(&w, t) + &s - &h;
            let mu = s.dot(&z) / mi as f64;
            // The dual residual bottoms out near 1e-6 once W = z/s spans
            // ~20 decades; complementarity and primal feasibility decide.
            if mu < 1e-11 && ri.amax() < 1e-10 && rp.abs() < 1e-12 && rd_w.amax().max(rd_t.abs()) < 1e-5 * scale {
                return Ok(QpSolution { w: w.iter().cloned().collect(), t, iterations: iter, converged: true });
            }

            // Normal matrix H = P + GᵀWG.
            let wdiag = z.component_div(&s);
            let mut hmat = 2.0 * &self.q;
            let mut scaled = self.probes.clone();
            let mut lt_w: DVector<f64> = DVector::zeros(n);
            let mut sum_wp = 0.0;
            for j in 0..np {
                let wj = wdiag[j];
                sum_wp += wj;
                let sq = wj.sqrt();
                for k in 0..n {
                    lt_w[k] += wj * self.probes[(j, k)];
                }
                scaled.row_mut(j).scale_mut(sq);
            }
            hmat.gemm_tr(1.0, &scaled, &scaled, 1.0);
            let wg = wdiag[np + n];
            for k in 0..n {
                hmat[(k, k)] += wdiag[np + k];
                if self.mask[k] {
                    for l in 0..n {
                        if self.mask[l] {
                            hmat[(k, l)] += wg;
                        }
                    }
                }
            }
            // Full (n+1) system with the t row/column appended.
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&hmat);
            for k in 0..n {
                big[(k, n)] = -lt_w[k];
                big[(n, k)] = -lt_w[k];
            }
            big[(n, n)] = sum_wp;
            let chol = factor(big)?;

            let solve_dir = |rc: &DVector<f64>| -> (DVector<f64>, f64, f64, DVector<f64>, DVector<f64>) {
                let u = wdiag.component_mul(&ri) - rc.component_div(&s);
                let (gtu_w, gtu_t) = self.gt_mul(&u);
                let mut rhs = DVector::zeros(n + 1);
                for k in 0..n {
                    rhs[k] = -rd_w[k] - gtu_w[k];
                }
                rhs[n] = -rd_t - gtu_t;
                let mut a = DVector::zeros(n + 1);
                a.rows_mut(0, n).fill(1.0);
                let hr = chol.solve(&rhs);
                let ha = chol.solve(&a);
                let dy = (a.dot(&hr) + rp) / a.dot(&ha);
                let dx = hr - dy * ha;
                let dw = dx.rows(0, n).into_owned();
                let dt = dx[n];
                let gdx = self.g_mul(&dw, dt);
                let ds = -&ri - &gdx;
                let dz = wdiag.component_mul(&(gdx + &ri)) - rc.component_div(&s);
                (dw, dt, dy, ds, dz)
            };

            // Predictor.
            let rc_aff = s.component_mul(&z);
            let (_, _, _, ds_a, dz_a) = solve_dir(&rc_aff);
            let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
            let mu_aff = (&s + a_aff * &ds_a).dot(&(&z + a_aff * &dz_a)) / mi as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            // Corrector.
            let rc = rc_aff + ds_a.component_mul(&dz_a) - DVector::from_element(mi, sigma * mu);
            let (dw, dt, dy, ds, dz) = solve_dir(&rc);
            let step = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
            w += step * dw;
            t += step * dt;
            y += step * dy;
            s += step * ds;
            z += step * dz;
        }
        Ok(QpSolution { w: w.iter().cloned().collect(), t, iterations: max_iter, converged: false })
    }
}

fn factor(mut m: DMatrix<f64>) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>> {
    let diag_max = m.diagonal().amax().max(1.0);
    let mut reg = 0.0;
    for _ in 0..12 {
        if let Some(c) = m.clone().cholesky() {
            return Ok(c);
        }
        let next = if reg == 0.0 { 1e-14 * diag_max } else { reg * 10.0 };
        for i in 0..m.nrows() {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
    Err(Error::Convergence("interior-point normal matrix is not positive definite".into()))
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = f64::INFINITY;
    for (x, d) in v.iter().zip(dv.iter()) {
        if *d < 0.0 {
            a = a.min(-x / d);
        }
    }
    a.min(1.0)
}

fn interior_point(
    grid: &[f64],
    alpha: f64,
    beta: f64,
    bound: f64,
    constraint: Constraint,
    options: &VaroptOptions,
) -> Result<VaroptResult> {
    // With p = 0 the open-disk nodes are pinned to zero; drop them.
    let active: Vec<usize> = (0..grid.len())
        .filter(|&k| !(constraint == Constraint::MassInsideLe && bound == 0.0 && grid[k] < 1.0))
        .collect();
    if active.is_empty() {
        return Err(Error::Parameter("no grid node can carry mass under the constraint".into()));
    }
    let sub: Vec<f64> = active.iter().map(|&k| grid[k]).collect();
    let n = sub.len();
    let ln_top = sub[n - 1].ln();
    let q = DMatrix::from_fn(n, n, |i, j| ln_top - sub[i].max(sub[j]).ln());
    let mask: Vec<bool> = sub.iter().map(|&r| constraint.in_group(r)).collect();
    let (sign, gbound) = match constraint {
        Constraint::MassInsideLe => (1.0, bound),
        Constraint::MassClosedInsideGe => (-1.0, -bound),
    };
    let has_group = mask.iter().any(|&b| b);
    if !has_group && constraint == Constraint::MassClosedInsideGe && bound > 0.0 {
        return Err(Error::Parameter("grid has no node in the closed unit disk".into()));
    }
    // An empty group makes the row vacuous; keep it strictly feasible.
    let gbound = if has_group { gbound } else { 1.0 };
    let top = alpha.powf(1.0 / beta);
    let mut probes: Vec<f64> = vec![0.0];
    probes.extend(sub.iter().cloned());
    probes.extend(sub.windows(2).map(|w| (w[0] * w[1]).sqrt()));
    probes.push(top);
    let weight = |x: f64| x.powf(beta) / (beta * alpha);

    let mut total_iters = 0;
    let mut converged = false;
    let mut w_full = vec![0.0; grid.len()];
    for _round in 0..30 {
        probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        probes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
        let pm = DMatrix::from_fn(probes.len(), n, |j, k| probes[j].max(sub[k]).ln());
        let rhs = DVector::from_iterator(probes.len(), probes.iter().map(|&x| weight(x)));
        let qp = Qp { q: q.clone(), probes: pm, rhs, mask: &mask, sign, bound: gbound };
        let sol = qp.solve(options.max_iters)?;
        total_iters += sol.iterations;
        let mut w: Vec<f64> = sol.w.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let (sup, _, locals) = exact_sup(&sub, &w, alpha, beta);
        for (k, &idx) in active.iter().enumerate() {
            w_full[idx] = w[k];
        }
        w_full.iter_mut().enumerate().for_each(|(i, v)| {
            if !active.contains(&i) {
                *v = 0.0
            }
        });
        let gap = sup - sol.t;
        if gap <= 1e-10 {
            converged = sol.converged;
            break;
        }
        let mut cuts: Vec<(f64, f64)> = locals.into_iter().filter(|(_, v)| *v > sol.t + 1e-12).collect();
        cuts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        probes.extend(cuts.iter().take(64).map(|c| c.0));
    }
    finish(grid, w_full, alpha, beta, converged, total_iters)
}

fn finish(grid: &[f64], mut w: Vec<f64>, alpha: f64, beta: f64, converged: bool, iterations: usize) -> Result<VaroptResult> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let objective = objective(grid, &w, alpha, beta);
    Ok(VaroptResult {
        measure: DiscretizedRadialMeasure::new(grid.to_vec(), w)?,
        objective,
        converged,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Projected subgradient

/// Euclidean projection of `v` onto `{w ≥ 0, Σw = mass}`; returns the threshold.
fn simplex_threshold(v: &[f64], mass: f64) -> f64 {
    if v.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = (s[0] - mass) / 1.0;
    for (i, x) in s.iter().enumerate() {
        cum += x;
        let cand = (cum - mass) / (i + 1) as f64;
        if x - cand > 0.0 {
            tau = cand;
        }
    }
    tau
}

/// Projection onto `{w ≥ 0, Σw = 1, Σ_{mask} w ≤ cap}` (or `≥ cap`).
pub fn project_constrained(v: &[f64], mask: &[bool], cap: f64, upper: bool) -> Vec<f64> {
    let (inside, outside): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
        v.iter().cloned().enumerate().partition(|(i, _)| mask[*i]);
    let vin: Vec<f64> = inside.iter().map(|x| x.1).collect();
    let vout: Vec<f64> = outside.iter().map(|x| x.1).collect();
    let project = |m_in: f64| -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        if !vin.is_empty() {
            let t = simplex_threshold(&vin, m_in);
            for (i, x) in &inside {
                out[*i] = (x - t).max(0.0);
            }
        }
        if !vout.is_empty() {
            let t = simplex_threshold(&vout, 1.0 - m_in);
            for (i, x) in &outside {
                out[*i] = (x - t).max(0.0);
            }
        }
        out
    };
    if vin.is_empty() {
        return project(0.0);
    }
    if vout.is_empty() {
        return project(1.0);
    }
    // Unconstrained split: thresholds of the two blocks coincide.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if simplex_threshold(&vin, mid) > simplex_threshold(&vout, 1.0 - mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let free = 0.5 * (lo + hi);
    let m_in = if upper { free.min(cap) } else { free.max(cap) };
    project(m_in.clamp(0.0, 1.0))
}

fn subgradient(
    grid: &[f64],
    alpha: f64,
    beta: f64,
    bound: f64,
    constraint: Constraint,
    options: &VaroptOptions,
) -> Result<VaroptResult> {
    let m = grid.len();
    let mask: Vec<bool> = grid.iter().map(|&r| constraint.in_group(r)).collect();
    let upper = constraint == Constraint::MassInsideLe;
    let ln_r: Vec<f64> = grid.iter().map(|r| r.ln()).collect();
    let mut w = project_constrained(&vec![1.0 / m as f64; m], &mask, bound, upper);
    let mut avg = w.clone();
    let mut avg_count = 1.0;
    let mut best_obj = objective(grid, &avg, alpha, beta);
    let mut best = avg.clone();
    let mut last_check = best_obj;
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=options.max_iters {
        iters = it;
        let (_, xstar, _) = exact_sup(grid, &w, alpha, beta);
        // ∂J = 2 ln max(x*, r_k) − 2 (Kw)_k.
        let mut below = 0.0;
        let mut suffix = vec![0.0; m + 1];
        for k in (0..m).rev() {
            suffix[k] = suffix[k + 1] + w[k] * ln_r[k];
        }
        let mut grad = vec![0.0; m];
        for k in 0..m {
            below += w[k];
            let kw = ln_r[k] * below + suffix[k + 1];
            grad[k] = 2.0 * xstar.max(grid[k]).ln() - 2.0 * kw;
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-300);
        let step = 0.5 / (gnorm * (it as f64).sqrt());
        let v: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        w = project_constrained(&v, &mask, bound, upper);
        // Suffix averaging over the second half of the run.
        if it > options.max_iters / 2 {
            avg_count += 1.0;
            for (a, x) in avg.iter_mut().zip(&w) {
                *a += (x - *a) / avg_count;
            }
        } else {
            avg.copy_from_slice(&w);
            avg_count = 1.0;
        }
        if it % 200 == 0 {
            let obj = objective(grid, &avg, alpha, beta);
            if obj < best_obj {
                best_obj = obj;
                best = avg.clone();
            }
            if (last_check - obj).abs() < options.tol && it > options.max_iters / 2 {
                converged = true;
                break;
            }
            last_check = obj;
        }
    }
    let obj = objective(grid, &avg, alpha, beta);
    if obj < best_obj {
        best = avg;
    }
    finish(grid, best, alpha, beta, converged, iters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_matrix_examples() {
        let k = energy_matrix(&[1.0]);
        assert_eq!(k[(0, 0)], 0.0);
        let k = energy_matrix(&[0.5, 2.0]);
        assert_eq!(k[(0, 0)], 0.5f64.ln());
        assert_eq!(k[(0, 1)], 2f64.ln());
        assert_eq!(k[(1, 0)], 2f64.ln());
        assert_eq!(k[(1, 1)], 2f64.ln());
    }

    #[test]
    fn fast_energy_and_potential_match_dense() {
        let grid = [0.3, 0.7, 1.0, 1.4, 2.2];
        let w = [0.1, 0.2, 0.3, 0.15, 0.25];
        let k = energy_matrix(&grid);
        let wv = DVector::from_row_slice(&w);
        assert!((quadratic_energy(&grid, &w) - wv.dot(&(&k * &wv))).abs() < 1e-15);
        let xs = [0.0, 0.5, 1.0, 1.2, 3.0];
        let fast = potential_on(&grid, &w, &xs);
        for (x, u) in xs.iter().zip(fast) {
            let direct: f64 = grid.iter().zip(&w).map(|(r, wk)| wk * x.max(*r).ln()).sum();
            assert!((u - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_contains_breakpoints() {
        let m = WeightModel::new(2.0).unwrap();
        let g = make_grid(10.0, &m, 0.5, 400).unwrap();
        assert_eq!(g.len(), 400);
        assert!(g.contains(&1.0));
        assert!((g.last().unwrap() - 10f64.sqrt()).abs() < 1e-15);
        let q = q_of_p(0.5).unwrap().sqrt();
        assert!(g.iter().any(|r| (r - q).abs() < 1e-15));
        let r = refine_grid(&g);
        assert_eq!(r.len(), 799);
        assert!(g.iter().all(|x| r.contains(x)));
    }

    #[test]
    fn projection_respects_group_cap() {
        let v = [0.5, 0.4, 0.3, 0.2, 0.1];
        let mask = [true, true, false, false, false];
        let w = project_constrained(&v, &mask, 0.3, true);
        let inside: f64 = w[..2].iter().sum();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(inside <= 0.3 + 1e-12);
        assert!(w.iter().all(|x| *x >= 0.0));
        let w = project_constrained(&v, &mask, 0.9, false);
        assert!(w[..2].iter().sum::<f64>() >= 0.9 - 1e-12);
    }

    #[test]
    fn infeasible_constraint_rejected() {
        let m = WeightModel::new(2.0).unwrap();
        let r = minimize_constrained(5.0, &m, 6.0, Constraint::MassClosedInsideGe, &VaroptOptions::default());
        assert!(matches!(r, Err(Error::Parameter(_))));
    }
}
