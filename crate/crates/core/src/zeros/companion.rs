//! Polynomial roots as eigenvalues of a balanced companion matrix, via a
//! complex single-shift QR iteration on the upper-Hessenberg form.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERS_PER_EIGENVALUE: usize = 60;

/// Dense row-major square matrix.
struct Dense {
    n: usize,
    a: Vec<Complex64>,
}

impl Dense {
    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }
    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.a[i * self.n + j]
    }
}

/// Roots of `Σ coeffs[k] u^k`. The leading coefficient must be non-zero.
/// Exactly-zero low-order coefficients produce roots at the origin.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    if lead == Complex64::new(0.0, 0.0) {
        return Err(Error::Parameter("leading coefficient is zero".into()));
    }
    let zero_roots = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    let reduced = &coeffs[zero_roots..];
    let n = reduced.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(-reduced[0] / reduced[1]);
        return Ok(roots);
    }
    let mut h = Dense { n, a: vec![Complex64::new(0.0, 0.0); n * n] };
    for j in 0..n {
        *h.at_mut(0, j) = -reduced[n - 1 - j] / lead;
    }
    for i in 1..n {
        *h.at_mut(i, i - 1) = Complex64::new(1.0, 0.0);
    }
    balance(&mut h);
    roots.extend(hessenberg_eigenvalues(&mut h)?);
    Ok(roots)
}

/// Parlett–Reinsch balancing with powers of two (exact in floating point).
fn balance(h: &mut Dense) {
    const RADIX: f64 = 2.0;
    let n = h.n;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += h.at(j, i).l1_norm();
                    r += h.at(i, j).l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    *h.at_mut(i, j) *= inv;
                }
                for j in 0..n {
                    *h.at_mut(j, i) *= f;
                }
            }
        }
    }
}

/// Rotation `[[c, s], [-s̄, c]]` mapping `(a, b)` to `(r, 0)`.
#[inline]
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    // Eigenvalue of [[a, b], [c, d]] closest to d.
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_eigenvalues(h: &mut Dense) -> Result<Vec<Complex64>> {
    let n = h.n;
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    loop {
        if hi == 0 {
            eig[0] = h.at(0, 0);
            break;
        }
        // Deflation search.
        let mut l = hi;
        while l > 0 {
            let sub = h.at(l, l - 1).l1_norm();
            let diag = h.at(l - 1, l - 1).l1_norm() + h.at(l, l).l1_norm();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                *h.at_mut(l, l - 1) = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h.at(hi, hi);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_ITERS_PER_EIGENVALUE {
            return Err(Error::Convergence(format!(
                "QR iteration stalled at eigenvalue {hi} of {n}"
            )));
        }
        let mu = if iter % 10 == 0 {
            let sub = h.at(hi, hi - 1).norm();
            let extra = if hi >= 2 { h.at(hi - 1, hi - 2).norm() } else { 0.0 };
            h.at(hi, hi) + Complex64::new(0.75 * (sub + extra), 0.4 * sub)
        } else {
            wilkinson_shift(h.at(hi - 1, hi - 1), h.at(hi - 1, hi), h.at(hi, hi - 1), h.at(hi, hi))
        };
        for k in l..=hi {
            *h.at_mut(k, k) -= mu;
        }
        rots.clear();
        for k in l..hi {
            let (c, s) = givens(h.at(k, k), h.at(k + 1, k));
            rots.push((c, s));
            for j in k..=hi {
                let x = h.at(k, j);
                let y = h.at(k + 1, j);
                *h.at_mut(k, j) = x * c + s * y;
                *h.at_mut(k + 1, j) = -s.conj() * x + y * c;
            }
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = l + idx;
            let last = (k + 2).min(hi);
            for i in l..=last {
                let x = h.at(i, k);
                let y = h.at(i, k + 1);
                *h.at_mut(i, k) = x * c + y * s.conj();
                *h.at_mut(i, k + 1) = -x * s + y * c;
            }
        }
        for k in l..=hi {
            *h.at_mut(k, k) += mu;
        }
    }
    Ok(eig)
}
