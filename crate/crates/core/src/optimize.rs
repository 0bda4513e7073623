//! Scalar minimisation and root refinement on a bracket.

use crate::error::{Error, Result};

/// `(3 - sqrt(5)) / 2`
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    /// Final bracket around `x`.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while b - a > tol {
        if iterations == max_iter {
            return Err(Error::Numerical(format!(
                "golden-section search did not converge in {max_iter} iterations (bracket [{a}, {b}])"
            )));
        }
        iterations += 1;
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Numerical(format!(
                "objective not finite inside the bracket near x = {x1}, {x2}"
            )));
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(Minimum {
        x,
        fx,
        lo: a,
        hi: b,
        iterations,
    })
}

/// Bisection for a sign change of `g` on `[lo, hi]`, to an absolute width
/// of `tol`.
pub fn bisect<G>(g: G, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() || !ga.is_finite() || !gb.is_finite() {
        return Err(Error::Numerical(format!(
            "no sign change on [{lo}, {hi}]: g = {ga}, {gb}"
        )));
    }
    let neg_at_a = ga < 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if b - a <= tol || m == a || m == b {
            return Ok(m);
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let m = golden_section(|x| (x - 1.3).powi(2) + 2.0, -4.0, 7.0, 1e-9, 500).unwrap();
        // function values resolve the vertex only to about sqrt(eps)
        assert!((m.x - 1.3).abs() < 1e-7);
        assert!((m.fx - 2.0).abs() < 1e-15);
        assert!(m.lo <= m.x && m.x <= m.hi);
    }

    #[test]
    fn golden_rejects_bad_bracket() {
        assert!(golden_section(|x| x, 1.0, 1.0, 1e-6, 10).is_err());
        assert!(matches!(
            golden_section(|x| x * x, -1.0, 1.0, 1e-12, 3),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn bisect_solves_transcendental() {
        // e^u - 1 = 2u, nonzero root
        let u = bisect(|u: f64| u.exp_m1() - 2.0 * u, 0.5, 3.0, 1e-15, 200).unwrap();
        assert!((u - 1.256_431_208_626_169_7).abs() < 1e-13);
        assert!(bisect(|u| u * u + 1.0, -1.0, 1.0, 1e-9, 100).is_err());
    }
}
