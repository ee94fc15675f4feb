//! The conjugate level q(p) and the rate constant Z_p.

use std::f64::consts::E;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    PEq0,
    PLt1,
    PIn1E,
    PGeE,
}

impl Regime {
    pub fn of(p: f64) -> Result<Regime> {
        check_p(p)?;
        Ok(if p == 0.0 {
            Regime::PEq0
        } else if p < 1.0 {
            Regime::PLt1
        } else if p < E {
            Regime::PIn1E
        } else {
            Regime::PGeE
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PEq0 => "p_eq_0",
            Regime::PLt1 => "p_lt_1",
            Regime::PIn1E => "p_in_1_e",
            Regime::PGeE => "p_ge_e",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleParams {
    pub p: f64,
    pub q: f64,
    pub z_p: f64,
    pub regime: Regime,
}

impl HoleParams {
    pub fn new(p: f64) -> Result<Self> {
        Ok(HoleParams { p, q: q_of_p(p)?, z_p: z_of_p(p)?, regime: Regime::of(p)? })
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be a finite non-negative number, got {p}")));
    }
    if p == 1.0 {
        return Err(Error::Singular("p = 1 is excluded: q and Z_p degenerate there".into()));
    }
    Ok(())
}

/// `h(x) = x(ln x − 1)`, extended by `h(0) = 0`.
pub fn h(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x.ln() - 1.0)
    }
}

/// The other solution of `h(q) = h(p)`; `e` at p = 0 and 0 for p ≥ e.
pub fn q_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    if p == 0.0 {
        return Ok(E);
    }
    if p >= E {
        return Ok(0.0);
    }
    let target = h(p);
    // h is increasing on (1, e) and decreasing on (0, 1).
    let (mut lo, mut hi, increasing) = if p < 1.0 { (1.0, E, true) } else { (0.0, 1.0, false) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let above = h(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn quarter_term(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v * (2.0 * v.ln() - 1.0)
    }
}

/// Rate constant `Z_p`.
pub fn z_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    if p == 0.0 {
        return Ok(E * E / 4.0);
    }
    if p >= E {
        return Ok(0.25 * quarter_term(p));
    }
    let q = q_of_p(p)?;
    Ok((0.25 * (quarter_term(q) - quarter_term(p))).abs())
}
