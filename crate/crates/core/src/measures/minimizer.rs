//! Explicit constrained minimizers `μ_{α,p}^β`, their potentials, and the
//! limiting measures `μ_p^β`.

use std::f64::consts::E;

use super::hole::{HoleParams, Regime};
use super::{AnnulusPiece, CircleAtom, RadialMeasure};
use crate::error::{Error, Result};
use crate::special::WeightModel;

/// A minimizer together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub measure: RadialMeasure,
    pub params: HoleParams,
    pub alpha: f64,
    pub model: WeightModel,
}

/// Minimizer of `I_{α,β}` under the unit-disk mass constraint at level p/α.
pub fn minimizer(alpha: f64, model: &WeightModel, p: f64) -> Result<Minimizer> {
    let params = HoleParams::new(p)?;
    if p >= alpha {
        return Err(Error::EmptyBulk(format!("p = {p} leaves no bulk below alpha = {alpha}")));
    }
    if !(alpha > E) || !(alpha > p * (1.0 + 1e-9)) {
        return Err(Error::Parameter(format!("alpha must exceed max(e, p), got {alpha}")));
    }
    let beta = model.beta;
    let inv = 1.0 / beta;
    let coeff = 1.0 / alpha;
    let top = alpha.powf(inv);
    let (p, q) = (params.p, params.q);
    let piece = |a: f64, b: f64| AnnulusPiece { r_in: a, r_out: b, coeff };
    let (atom_mass, pieces) = match params.regime {
        Regime::PEq0 => (q / alpha, vec![piece(q.powf(inv), top)]),
        Regime::PLt1 => ((q - p) / alpha, vec![piece(0.0, p.powf(inv)), piece(q.powf(inv), top)]),
        Regime::PIn1E => ((p - q) / alpha, vec![piece(0.0, q.powf(inv)), piece(p.powf(inv), top)]),
        Regime::PGeE => (p / alpha, vec![piece(p.powf(inv), top)]),
    };
    let measure = RadialMeasure::new(vec![CircleAtom { radius: 1.0, mass: atom_mass }], pieces, beta)?;
    Ok(Minimizer { measure, params, alpha, model: *model })
}

pub fn minimizer_measure(alpha: f64, model: &WeightModel, p: f64) -> Result<RadialMeasure> {
    minimizer(alpha, model, p).map(|m| m.measure)
}

/// `lim_{α→∞} (βα/2) μ_{α,p}^β` for p ∈ [0, 1); the outer piece is unbounded.
pub fn limiting_measure(model: &WeightModel, p: f64) -> Result<RadialMeasure> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Unsupported(format!("limiting measure is defined for p in [0, 1), got {p}")));
    }
    let beta = model.beta;
    let params = HoleParams::new(p)?;
    let half = beta / 2.0;
    let mut pieces = Vec::new();
    if p > 0.0 {
        pieces.push(AnnulusPiece { r_in: 0.0, r_out: p.powf(1.0 / beta), coeff: half });
    }
    pieces.push(AnnulusPiece { r_in: params.q.powf(1.0 / beta), r_out: f64::INFINITY, coeff: half });
    RadialMeasure::new(vec![CircleAtom { radius: 1.0, mass: half * (params.q - p) }], pieces, beta)
}

/// Closed-form potential `U_{μ_{α,p}^β}(x)`, piecewise in x.
pub fn potential_closed(min: &Minimizer, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("potential radius must be >= 0, got {x}")));
    }
    let beta = min.model.beta;
    let alpha = min.alpha;
    let (p, q) = (min.params.p, min.params.q);
    let inv = 1.0 / beta;
    let base = (alpha.ln() - 1.0) / beta;
    let level = |v: f64| if v == 0.0 { 0.0 } else { (v * v.ln() - v) / (beta * alpha) };
    let bulk = |x: f64| base + x.powf(beta) / (beta * alpha);
    let log_zone = |v: f64, x: f64| v * x.ln() / alpha + base - level(v);
    let top = alpha.powf(inv);
    if x > top {
        return Ok(x.ln());
    }
    let v = match min.params.regime {
        Regime::PEq0 | Regime::PLt1 => {
            let (c, e) = (p.powf(inv), q.powf(inv));
            if x <= c {
                bulk(x)
            } else if x <= 1.0 {
                log_zone(p, x)
            } else if x < e {
                log_zone(q, x)
            } else {
                bulk(x)
            }
        }
        Regime::PIn1E => {
            let (c, e) = (q.powf(inv), p.powf(inv));
            if x <= c {
                bulk(x)
            } else if x <= 1.0 {
                log_zone(q, x)
            } else if x < e {
                log_zone(p, x)
            } else {
                bulk(x)
            }
        }
        Regime::PGeE => {
            let e = p.powf(inv);
            if x <= 1.0 {
                base - level(p)
            } else if x < e {
                log_zone(p, x)
            } else {
                bulk(x)
            }
        }
    };
    Ok(v)
}
