//! Spherical Bessel and Hankel functions of complex argument, and Legendre
//! polynomials.
//!
//! `j_n` comes from downward (Miller) recurrence normalised against the
//! closed forms of `j_0`/`j_1`; `h_n^(1)` from upward recurrence; `y_n` is
//! recovered as `(h_n - j_n)/i`. Everything is computed in [`Scaled`] form so
//! evanescent arguments never overflow; the plain-valued wrappers refuse to
//! return magnitudes above [`MAGNITUDE_CAP`].

use crate::error::{Error, Result};
use crate::scaled::Scaled;
use num_complex::Complex64;

/// Largest harmonic order accepted by the Bessel routines.
pub const ORDER_CAP: usize = 256;
/// Largest magnitude returned by the unscaled wrappers.
pub const MAGNITUDE_CAP: f64 = 1e300;

const RESCALE: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselKind {
    J,
    Y,
    H1,
}

fn i() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn check_order(n: usize) -> Result<()> {
    if n > ORDER_CAP {
        return Err(Error::Domain(format!("order {n} exceeds the cap {ORDER_CAP}")));
    }
    Ok(())
}

/// `e^{iz}` in scaled form.
fn exp_iz(z: Complex64) -> Scaled {
    Scaled::new(Complex64::from_polar(1.0, z.re), -z.im)
}

/// `(sin z, cos z)` in scaled form.
fn sin_cos(z: Complex64) -> (Scaled, Scaled) {
    let y = z.im;
    let ay = y.abs();
    let ep = Complex64::from_polar((-y - ay).exp(), z.re);
    let em = Complex64::from_polar((y - ay).exp(), -z.re);
    let s = (ep - em) / (2.0 * i());
    let c = (ep + em) / 2.0;
    (Scaled::new(s, ay), Scaled::new(c, ay))
}

/// `j_0(z)` and `j_1(z)` from closed forms.
fn j01(z: Complex64) -> (Scaled, Scaled) {
    let (s, c) = sin_cos(z);
    let zs = Scaled::from_complex(z);
    let j0 = s / zs;
    let j1 = (j0 - c) / zs;
    (j0, j1)
}

/// `j_0 .. j_nmax` in scaled form.
pub fn sph_j_seq(nmax: usize, z: Complex64) -> Result<Vec<Scaled>> {
    check_order(nmax)?;
    Ok(j_seq(nmax, z))
}

fn j_seq(nmax: usize, z: Complex64) -> Vec<Scaled> {
    let m = nmax.max(1);
    let mut out = vec![Scaled::ZERO; m + 1];
    if z.norm() == 0.0 {
        out[0] = Scaled::from_real(1.0);
        out.truncate(nmax + 1);
        return out;
    }
    let az = z.norm();
    let start = m.max(az.ceil() as usize) + 25 + (12.0 * az.cbrt()).ceil() as usize;
    let mut fp1 = Complex64::new(0.0, 0.0);
    let mut f = Complex64::new(1.0, 0.0);
    let mut acc = 0.0;
    for n in (1..=start).rev() {
        let fm1 = f * ((2 * n + 1) as f64) / z - fp1;
        if n - 1 <= m {
            out[n - 1] = Scaled::new(fm1, acc);
        }
        fp1 = f;
        f = fm1;
        if f.norm() > RESCALE {
            f /= RESCALE;
            fp1 /= RESCALE;
            acc += RESCALE.ln();
        }
    }
    let (j0, j1) = j01(z);
    let c = if j0.ln_abs() >= j1.ln_abs() { j0 / out[0] } else { j1 / out[1] };
    for v in out.iter_mut() {
        if !v.is_zero() {
            *v = *v * c;
        }
    }
    out.truncate(nmax + 1);
    out
}

/// `h^(1)_0 .. h^(1)_nmax` in scaled form.
///
/// Upward recurrence is stable only in the closed upper half plane; below it
/// `h^(1) = 2 j - h^(2)` with `h^(2)(z) = conj(h^(1)(conj z))`.
pub fn sph_h1_seq(nmax: usize, z: Complex64) -> Result<Vec<Scaled>> {
    check_order(nmax)?;
    if z.norm() == 0.0 {
        return Err(Error::Domain("h_n^(1) is singular at z = 0".into()));
    }
    Ok(h1_seq(nmax, z))
}

fn h1_seq(nmax: usize, z: Complex64) -> Vec<Scaled> {
    if z.im < 0.0 {
        let j = j_seq(nmax, z);
        let h2 = h1_upward(nmax, z.conj());
        return j.iter().zip(h2.iter()).map(|(&jn, &h)| jn.scale(Complex64::new(2.0, 0.0)) - h.conj()).collect();
    }
    h1_upward(nmax, z)
}

fn h1_upward(nmax: usize, z: Complex64) -> Vec<Scaled> {
    let e = exp_iz(z);
    let zs = Scaled::from_complex(z);
    let h0 = e.scale(-i()) / zs;
    let h1 = (e.scale(-(z + i()))) / (zs * zs);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(h0);
    if nmax == 0 {
        return out;
    }
    out.push(h1);
    let mut acc = h0.exp.max(h1.exp);
    let mut hm1 = h0.value_shifted(acc);
    let mut h = h1.value_shifted(acc);
    for n in 1..nmax {
        let hp1 = h * ((2 * n + 1) as f64) / z - hm1;
        out.push(Scaled::new(hp1, acc));
        hm1 = h;
        h = hp1;
        if h.norm() > RESCALE {
            h /= RESCALE;
            hm1 /= RESCALE;
            acc += RESCALE.ln();
        }
    }
    out
}

/// `y_0 .. y_nmax` in scaled form.
pub fn sph_y_seq(nmax: usize, z: Complex64) -> Result<Vec<Scaled>> {
    check_order(nmax)?;
    if z.norm() == 0.0 {
        return Err(Error::Domain("y_n is singular at z = 0".into()));
    }
    Ok(y_seq(nmax, z))
}

fn y_seq(nmax: usize, z: Complex64) -> Vec<Scaled> {
    let j = j_seq(nmax, z);
    let h = h1_seq(nmax, z);
    j.iter().zip(h.iter()).map(|(&jn, &hn)| (hn - jn).scale(-i())).collect()
}

pub fn sph_seq(kind: BesselKind, nmax: usize, z: Complex64) -> Result<Vec<Scaled>> {
    match kind {
        BesselKind::J => sph_j_seq(nmax, z),
        BesselKind::Y => sph_y_seq(nmax, z),
        BesselKind::H1 => sph_h1_seq(nmax, z),
    }
}

/// `(f_n(z), f_n'(z))` in scaled form.
pub fn sph_bessel_pair_scaled(kind: BesselKind, n: usize, z: Complex64) -> Result<(Scaled, Scaled)> {
    check_order(n)?;
    if z.norm() == 0.0 {
        return match kind {
            BesselKind::J => {
                let v = if n == 0 { 1.0 } else { 0.0 };
                let d = if n == 1 { 1.0 / 3.0 } else { 0.0 };
                Ok((Scaled::from_real(v), Scaled::from_real(d)))
            }
            _ => Err(Error::Domain(format!("{kind:?}_{n} is singular at z = 0"))),
        };
    }
    let seq = match kind {
        BesselKind::J => j_seq(n + 1, z),
        BesselKind::Y => y_seq(n + 1, z),
        BesselKind::H1 => h1_seq(n + 1, z),
    };
    let d = if n == 0 { -seq[1] } else { seq[n - 1] - seq[n].scale(Complex64::new((n + 1) as f64, 0.0) / z) };
    Ok((seq[n], d))
}

pub fn sph_bessel_scaled(kind: BesselKind, n: usize, z: Complex64) -> Result<Scaled> {
    Ok(sph_bessel_pair_scaled(kind, n, z)?.0)
}

fn unscale(s: Scaled) -> Result<Complex64> {
    if s.ln_abs() > MAGNITUDE_CAP.ln() {
        return Err(Error::Overflow(format!("magnitude e^{:.1} exceeds the representable cap", s.ln_abs())));
    }
    Ok(s.value())
}

/// `j_n(z)`, `y_n(z)` or `h_n^(1)(z)`.
pub fn sph_bessel(kind: BesselKind, n: usize, z: Complex64) -> Result<Complex64> {
    unscale(sph_bessel_scaled(kind, n, z)?)
}

/// Derivative with respect to `z`.
pub fn sph_bessel_deriv(kind: BesselKind, n: usize, z: Complex64) -> Result<Complex64> {
    unscale(sph_bessel_pair_scaled(kind, n, z)?.1)
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("legendre_p needs |x| <= 1, got {x}")));
    }
    Ok(legendre_seq(n, x)[n])
}

/// `P_0(x) .. P_nmax(x)`; no domain check.
pub fn legendre_seq(nmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(1.0);
    if nmax >= 1 {
        p.push(x);
    }
    for n in 1..nmax {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}
