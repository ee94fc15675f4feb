//! Exact radially symmetric measures built from uniform circle measures and
//! pieces of `m̂^β` (the radial measure with `m̂^β(D(0,R)) = R^β`), together
//! with their logarithmic potentials and energies.
//!
//! Every potential reduces to one-dimensional closed forms through the angular
//! average `(1/2π)∫ ln|x − t e^{iθ}| dθ = ln max(x, t)`.

mod hole;
mod minimizer;

pub use hole::{h, q_of_p, z_of_p, HoleParams, Regime};
pub use minimizer::{limiting_measure, minimizer, minimizer_measure, potential_closed, Minimizer};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::WeightModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleAtom {
    pub radius: f64,
    pub mass: f64,
}

/// `coeff · m̂^β` restricted to `r_in ≤ |z| ≤ r_out`; `r_out` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusPiece {
    pub r_in: f64,
    pub r_out: f64,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialMeasure {
    pub atoms: Vec<CircleAtom>,
    pub pieces: Vec<AnnulusPiece>,
    pub beta: f64,
}

/// `G(t) = t^β (ln t − 1/β)`, an antiderivative of `ln t · β t^{β−1}`; `G(0) = 0`.
#[inline]
fn g_anti(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(beta) * (t.ln() - 1.0 / beta)
    }
}

impl AnnulusPiece {
    pub fn mass(&self, beta: f64) -> f64 {
        self.coeff * (self.r_out.powf(beta) - self.r_in.powf(beta))
    }

    pub fn is_bounded(&self) -> bool {
        self.r_out.is_finite()
    }

    /// `coeff · ∫_{r_in}^{r_out} ln max(x, t) β t^{β−1} dt`.
    fn potential(&self, x: f64, beta: f64) -> f64 {
        let (a, b) = (self.r_in, self.r_out);
        let mut v = 0.0;
        if x > a {
            v += x.ln() * (x.min(b).powf(beta) - a.powf(beta));
        }
        if x < b {
            v += g_anti(b, beta) - g_anti(a.max(x), beta);
        }
        self.coeff * v
    }

    /// `∫ U_self dν` where ν is `other`, in closed form.
    fn mutual_energy(&self, other: &AnnulusPiece, beta: f64) -> f64 {
        let (a1, b1, c1) = (self.r_in, self.r_out, self.coeff);
        let (a2, b2, c2) = (other.r_in, other.r_out, other.coeff);
        let p = |t: f64| t.powf(beta);
        let i0 = |u: f64, v: f64| p(v) - p(u);
        let iln = |u: f64, v: f64| g_anti(v, beta) - g_anti(u, beta);
        let ipow = |u: f64, v: f64| 0.5 * (p(v) * p(v) - p(u) * p(u));
        let mut e = 0.0;
        // s ≤ a1: constant potential.
        let (u, v) = (a2, b2.min(a1));
        if v > u {
            e += (g_anti(b1, beta) - g_anti(a1, beta)) * i0(u, v);
        }
        // a1 < s < b1.
        let (u, v) = (a2.max(a1), b2.min(b1));
        if v > u {
            e += g_anti(b1, beta) * i0(u, v) - p(a1) * iln(u, v) + ipow(u, v) / beta;
        }
        // s ≥ b1: behaves like a point mass at the origin.
        let (u, v) = (a2.max(b1), b2);
        if v > u {
            e += (p(b1) - p(a1)) * iln(u, v);
        }
        c1 * c2 * e
    }
}

impl RadialMeasure {
    pub fn new(atoms: Vec<CircleAtom>, pieces: Vec<AnnulusPiece>, beta: f64) -> Result<Self> {
        for a in &atoms {
            if !(a.radius >= 0.0 && a.mass >= 0.0 && a.radius.is_finite()) {
                return Err(Error::Parameter(format!("invalid circle atom {a:?}")));
            }
        }
        let mut sorted = pieces.clone();
        sorted.sort_by(|x, y| x.r_in.partial_cmp(&y.r_in).unwrap());
        for w in sorted.windows(2) {
            if w[1].r_in < w[0].r_out {
                return Err(Error::Parameter("annulus pieces overlap".into()));
            }
        }
        for pc in &pieces {
            if !(pc.r_in >= 0.0 && pc.r_in < pc.r_out && pc.coeff >= 0.0) {
                return Err(Error::Parameter(format!("invalid annulus piece {pc:?}")));
            }
        }
        Ok(RadialMeasure { atoms, pieces, beta })
    }

    pub fn is_bounded(&self) -> bool {
        self.pieces.iter().all(AnnulusPiece::is_bounded)
    }

    /// Total mass; `+∞` when an unbounded piece carries mass.
    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        atoms + self.pieces.iter().map(|p| p.mass(self.beta)).sum::<f64>()
    }

    /// Mass of the open disk `|z| < r`, or the closed disk when `closed`.
    pub fn mass_within(&self, r: f64, closed: bool) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| if closed { a.radius <= r } else { a.radius < r })
            .map(|a| a.mass)
            .sum();
        let pieces: f64 = self
            .pieces
            .iter()
            .filter(|p| p.r_in < r)
            .map(|p| p.coeff * (p.r_out.min(r).powf(self.beta) - p.r_in.powf(self.beta)))
            .sum();
        atoms + pieces
    }

    /// `∫ f(|z|) dμ` over `|z| ≤ cutoff`, using `u = t^β` on the pieces.
    pub fn integrate_radial<F: Fn(f64) -> f64>(&self, f: F, cutoff: f64) -> f64 {
        let beta = self.beta;
        let atoms: f64 = self.atoms.iter().filter(|a| a.radius <= cutoff).map(|a| a.mass * f(a.radius)).sum();
        let pieces: f64 = self
            .pieces
            .iter()
            .filter(|p| p.r_in < cutoff)
            .map(|p| {
                let (u0, u1) = (p.r_in.powf(beta), p.r_out.min(cutoff).powf(beta));
                p.coeff * quad::adaptive(|u: f64| f(u.powf(1.0 / beta)), u0, u1, 1e-14, 1e-12)
            })
            .sum();
        atoms + pieces
    }

    /// Multiplies every mass by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        RadialMeasure {
            atoms: self.atoms.iter().map(|a| CircleAtom { radius: a.radius, mass: a.mass * factor }).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| AnnulusPiece { coeff: p.coeff * factor, ..*p })
                .collect(),
            beta: self.beta,
        }
    }

    fn potential_unchecked(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass * x.max(a.radius).ln()).sum();
        atoms + self.pieces.iter().map(|p| p.potential(x, self.beta)).sum::<f64>()
    }
}

/// `U_μ(x) = ∫ ln|z − x| dμ(z)` for a bounded radial measure, in closed form.
pub fn potential_quadrature(mu: &RadialMeasure, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("potential radius must be >= 0, got {x}")));
    }
    if !mu.is_bounded() {
        return Err(Error::Parameter(
            "measure has an unbounded piece; truncate it with a finite outer radius first".into(),
        ));
    }
    Ok(mu.potential_unchecked(x))
}

/// `Σ(μ) = ∫ U_μ dμ` by pairwise closed forms.
pub fn log_energy(mu: &RadialMeasure) -> Result<f64> {
    if !mu.is_bounded() {
        return Err(Error::Parameter("log_energy needs a bounded measure".into()));
    }
    let beta = mu.beta;
    let mut e = 0.0;
    for a in &mu.atoms {
        for b in &mu.atoms {
            e += a.mass * b.mass * a.radius.max(b.radius).ln();
        }
        for p in &mu.pieces {
            e += 2.0 * a.mass * p.potential(a.radius, beta);
        }
    }
    for p1 in &mu.pieces {
        for p2 in &mu.pieces {
            e += p1.mutual_energy(p2, beta);
        }
    }
    Ok(e)
}

/// `x ↦ U_μ(x) − x^β/(βα)`.
fn weighted_potential(mu: &RadialMeasure, alpha: f64, x: f64) -> f64 {
    mu.potential_unchecked(x) - x.powf(mu.beta) / (mu.beta * alpha)
}

/// `B_{α,β}(μ) = 2 sup_x (U_μ(x) − x^β/(βα))`, searched on `[0, α^{1/β}]`
/// with a 2000-point grid and golden-section refinement.
pub fn b_functional(mu: &RadialMeasure, alpha: f64, model: &WeightModel) -> Result<f64> {
    if !mu.is_bounded() {
        return Err(Error::Parameter("b_functional needs a bounded measure".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    let top = alpha.powf(1.0 / model.beta);
    let f = |x: f64| weighted_potential(mu, alpha, x);
    let m = 2000;
    let grid: Vec<f64> = (0..m).map(|i| top * i as f64 / (m - 1) as f64).collect();
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Candidate atoms sit exactly at kinks; include them explicitly.
    for a in &mu.atoms {
        if a.radius <= top {
            best = best.max(f(a.radius));
        }
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(m - 1)];
    best = best.max(golden_max(&f, lo, hi, 1e-10));
    Ok(2.0 * best)
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = f(a).max(f(b)).max(fc).max(fd);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub b_value: f64,
    pub sigma_value: f64,
    /// `I_{α,β}(μ) = B − Σ`.
    pub i_value: f64,
    pub g_max: f64,
    pub g_support_dev: f64,
    /// `g_μ(1)`.
    pub g_at_unit: f64,
    pub probe_grid: Vec<f64>,
}

/// Potential, energy and equilibrium diagnostics of a bounded probability measure.
///
/// `g_μ(x) = U_μ(x) − x^β/(βα) − B/2`. The support deviation is taken over
/// the annulus pieces of `mu` (each sampled at 200 points, endpoints included).
pub fn equilibrium_report(mu: &RadialMeasure, alpha: f64, model: &WeightModel) -> Result<EnergyReport> {
    let b_value = b_functional(mu, alpha, model)?;
    let sigma_value = log_energy(mu)?;
    let g = |x: f64| weighted_potential(mu, alpha, x) - 0.5 * b_value;
    let top = alpha.powf(1.0 / model.beta);
    let n = 2000;
    let mut probe_grid: Vec<f64> = (0..=n).map(|i| 1.5 * top * i as f64 / n as f64).collect();
    let mut g_support_dev = 0.0f64;
    for p in &mu.pieces {
        let k = 200;
        for i in 0..=k {
            let x = p.r_in + (p.r_out - p.r_in) * i as f64 / k as f64;
            g_support_dev = g_support_dev.max(g(x).abs());
            probe_grid.push(x);
        }
    }
    probe_grid.extend(mu.atoms.iter().map(|a| a.radius));
    probe_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probe_grid.dedup();
    let g_max = probe_grid.iter().map(|&x| g(x)).fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyReport {
        b_value,
        sigma_value,
        i_value: b_value - sigma_value,
        g_max,
        g_support_dev,
        g_at_unit: g(1.0),
        probe_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_potential() {
        let mu = RadialMeasure::new(vec![CircleAtom { radius: 1.0, mass: 1.0 }], vec![], 2.0).unwrap();
        assert_eq!(potential_quadrature(&mu, 0.5).unwrap(), 0.0);
        assert!((potential_quadrature(&mu, 2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_energy(&mu).unwrap(), 0.0);
    }

    #[test]
    fn scaled_disk_potential_at_origin() {
        for (alpha, beta) in [(10.0, 2.0), (7.5, 0.5), (100.0, 3.0)] {
            let top = f64::powf(alpha, 1.0 / beta);
            let mu = RadialMeasure::new(vec![], vec![AnnulusPiece { r_in: 0.0, r_out: top, coeff: 1.0 / alpha }], beta).unwrap();
            assert!((mu.total_mass() - 1.0).abs() < 1e-12);
            let u0 = potential_quadrature(&mu, 0.0).unwrap();
            assert!((u0 - (f64::ln(alpha) - 1.0) / beta).abs() < 1e-12);
        }
    }

    #[test]
    fn piece_energy_matches_quadrature_of_potential() {
        let beta = 1.5;
        let p1 = AnnulusPiece { r_in: 0.2, r_out: 1.3, coeff: 0.4 };
        let p2 = AnnulusPiece { r_in: 0.9, r_out: 2.1, coeff: 0.2 };
        let direct = p1.mutual_energy(&p2, beta);
        let numeric = quad::adaptive_pieces(
            |s: f64| p1.potential(s, beta) * p2.coeff * beta * s.powf(beta - 1.0),
            &[0.9, 1.3, 2.1],
            1e-15,
            1e-13,
        );
        assert!((direct - numeric).abs() < 1e-12);
        assert!((p1.mutual_energy(&p2, beta) - p2.mutual_energy(&p1, beta)).abs() < 1e-13);
    }

    #[test]
    fn b_functional_of_unit_circle() {
        let m = WeightModel::new(2.0).unwrap();
        let mu = RadialMeasure::new(vec![CircleAtom { radius: 1.0, mass: 1.0 }], vec![], 2.0).unwrap();
        let alpha = std::f64::consts::E.powi(2);
        // max over x of ln max(x,1) − x²/(2e²): at x = e, value 1 − 1/2.
        let b = b_functional(&mu, alpha, &m).unwrap();
        assert!((b - 1.0).abs() < 1e-9);
    }
}
