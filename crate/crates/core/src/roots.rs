//! Bracketing scan and Brent's method.

use crate::error::{Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct BrentOutcome {
    pub root: f64,
    pub iterations: usize,
    /// Smallest `|f|` seen so far, after each iteration.
    pub residual_history: Vec<f64>,
}

/// Brent's method on a sign-changing bracket `[a, b]`, stopping when the
/// bracket is narrower than `tol`.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<BrentOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(BrentOutcome { root: a, iterations: 0, residual_history: vec![0.0] });
    }
    if fb == 0.0 {
        return Ok(BrentOutcome { root: b, iterations: 0, residual_history: vec![0.0] });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRoot(format!("no sign change on [{a}, {b}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let mut best = fa.abs().min(fb.abs());
    let mut history = Vec::new();
    for it in 1..=200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(BrentOutcome { root: b, iterations: it - 1, residual_history: history });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
        best = best.min(fb.abs());
        history.push(best);
    }
    Err(Error::NoRoot("Brent iteration limit reached".into()))
}

/// Evaluates `f` on `lo, lo+step, …, hi` (in parallel) and returns the
/// sign-change brackets in increasing order.
pub fn scan_brackets<F>(f: F, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(hi > lo) || !(step > 0.0) {
        return Err(Error::Config(format!("bad scan range [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step).ceil() as usize;
    let xs: Vec<f64> = (0..=count).map(|k| (lo + k as f64 * step).min(hi)).collect();
    let vals: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for k in 0..xs.len() - 1 {
        if vals[k] == 0.0 {
            out.push((xs[k], xs[k]));
        } else if vals[k].signum() != vals[k + 1].signum() && vals[k + 1] != 0.0 {
            out.push((xs[k], xs[k + 1]));
        }
    }
    if *vals.last().unwrap() == 0.0 {
        let x = *xs.last().unwrap();
        out.push((x, x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cosine_root() {
        let r = brent(|x| Ok(x.cos()), 1.0, 2.0, 1e-12).unwrap();
        assert!((r.root - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        assert!(matches!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-9), Err(Error::NoRoot(_))));
    }

    #[test]
    fn scan_orders_brackets() {
        let b = scan_brackets(|x| Ok(x.sin()), 0.5, 10.0, 0.25).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b[0].0 < std::f64::consts::PI && b[0].1 > std::f64::consts::PI);
    }
}
