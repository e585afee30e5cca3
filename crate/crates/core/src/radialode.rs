//! Per-harmonic radial solver.
//!
//! The state carried across interfaces is `(u, F)` with `F = σ_r r² u'`;
//! both are continuous at every breakpoint. Two engines are available:
//! closed-form Bessel bases in uniform and pushforward regions
//! ([`Engine::Auto`]), and Dormand–Prince integration everywhere
//! ([`Engine::Direct`]).

use crate::cloakmodel::{material_profile, HatConfig, Medium, RadialProfile};
use crate::error::{Error, Result};
use crate::ode::{self, Node, OdeOptions, State, Trajectory};
use crate::scaled::Scaled;
use crate::specfun::{sph_h1_seq, sph_j_seq};
use num_complex::Complex64;

/// Start radius of the regular branch when no closed form is available at the origin.
pub const R_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Auto,
    Direct,
}

/// Value and radial derivative at a radius; the true data are
/// `(u, du_dr) * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyData {
    pub radius: f64,
    pub u: Complex64,
    pub du_dr: Complex64,
    pub log_scale: f64,
}

impl CauchyData {
    pub fn new(radius: f64, u: Complex64, du_dr: Complex64) -> Self {
        CauchyData { radius, u, du_dr, log_scale: 0.0 }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Closed-form basis of one region: `u = f(z)`, `z = k (α r + β)`, with
/// flux `σ α² (α r + β)² k f'(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    Bessel {
        k: Complex64,
        alpha: f64,
        beta: f64,
        sigma: f64,
    },
    /// `k = 0` in a uniform region: `r^n` and `r^{-n-1}`.
    Power {
        sigma: f64,
    },
}

/// Values of both basis functions at a radius.
#[derive(Debug, Clone, Copy)]
struct BasisPoint {
    f: Scaled,
    df: Scaled,
    flux_f: Scaled,
    g: Scaled,
    dg: Scaled,
    flux_g: Scaled,
    det: Scaled,
}

impl Basis {
    pub fn for_region(profile: &RadialProfile, k: usize) -> Option<Basis> {
        if !profile.closed_form(k) {
            return None;
        }
        let reg = &profile.regions[k];
        match reg.medium {
            Medium::Uniform { sigma, weight, shift } => {
                let q = weight * profile.energy + shift;
                if q == 0.0 {
                    Some(Basis::Power { sigma })
                } else {
                    Some(Basis::Bessel { k: c(q / sigma).sqrt(), alpha: 1.0, beta: 0.0, sigma })
                }
            }
            Medium::Pushforward { scale } => {
                Some(Basis::Bessel { k: c(profile.energy).sqrt(), alpha: 2.0, beta: -2.0 * scale, sigma: 0.25 })
            }
            Medium::Printed { .. } => None,
        }
    }

    /// Evaluates `(j-branch, h-branch)` for all orders `0..=nmax` at `r`.
    /// Returned per order: (f, df/dr, flux_f, g, dg/dr, flux_g).
    fn eval_all(&self, nmax: usize, r: f64, want_g: bool) -> Result<Vec<BasisPoint>> {
        match *self {
            Basis::Bessel { k, alpha, beta, sigma } => {
                let y = alpha * r + beta;
                let z = k * y;
                let js = sph_j_seq(nmax + 1, z)?;
                let hs = if want_g { Some(sph_h1_seq(nmax + 1, z)?) } else { None };
                let cf = Scaled::from_complex(k * (sigma * alpha * alpha * y * y));
                let dz = Scaled::from_complex(k * alpha);
                let det = if y == 0.0 {
                    Scaled::ZERO
                } else {
                    Scaled::from_complex(Complex64::i() * (sigma * alpha * alpha) / k)
                };
                let deriv = |s: &[Scaled], n: usize| -> Scaled {
                    if n == 0 {
                        -s[1]
                    } else if z.norm() == 0.0 {
                        if n == 1 {
                            Scaled::from_real(1.0 / 3.0)
                        } else {
                            Scaled::ZERO
                        }
                    } else {
                        s[n - 1] - s[n].scale(c((n + 1) as f64) / z)
                    }
                };
                let mut out = Vec::with_capacity(nmax + 1);
                for n in 0..=nmax {
                    let fd = deriv(&js, n);
                    let (g, gd) = match &hs {
                        Some(h) => (h[n], deriv(h, n)),
                        None => (Scaled::ZERO, Scaled::ZERO),
                    };
                    out.push(BasisPoint {
                        f: js[n],
                        df: fd * dz,
                        flux_f: fd * cf,
                        g,
                        dg: gd * dz,
                        flux_g: gd * cf,
                        det,
                    });
                }
                Ok(out)
            }
            Basis::Power { sigma } => {
                let mut out = Vec::with_capacity(nmax + 1);
                for n in 0..=nmax {
                    let nf = n as f64;
                    let f = if n == 0 { Scaled::from_real(1.0) } else { Scaled::new(c(1.0), nf * r.ln()) };
                    let df = if n == 0 { Scaled::ZERO } else { Scaled::new(c(nf), (nf - 1.0) * r.ln()) };
                    let flux_f = if n == 0 { Scaled::ZERO } else { Scaled::new(c(sigma * nf), (nf + 1.0) * r.ln()) };
                    let (g, dg, flux_g) = if want_g && r > 0.0 {
                        (
                            Scaled::new(c(1.0), -(nf + 1.0) * r.ln()),
                            Scaled::new(c(-(nf + 1.0)), -(nf + 2.0) * r.ln()),
                            Scaled::new(c(-sigma * (nf + 1.0)), -nf * r.ln()),
                        )
                    } else {
                        (Scaled::ZERO, Scaled::ZERO, Scaled::ZERO)
                    };
                    out.push(BasisPoint {
                        f,
                        df,
                        flux_f,
                        g,
                        dg,
                        flux_g,
                        det: Scaled::from_real(-sigma * (2.0 * nf + 1.0)),
                    });
                }
                Ok(out)
            }
        }
    }

    fn eval(&self, n: usize, r: f64, want_g: bool) -> Result<BasisPoint> {
        Ok(self.eval_all(n, r, want_g)?[n])
    }
}

/// Coefficients `(c_j, c_h)` reproducing the state `(u, F)` at a point.
fn coefficients(bp: &BasisPoint, u: Scaled, flux: Scaled) -> (Scaled, Scaled) {
    let cj = (u * bp.flux_g - bp.g * flux) / bp.det;
    let ch = (bp.f * flux - bp.flux_f * u) / bp.det;
    (cj, ch)
}

#[derive(Debug, Clone)]
pub enum SegmentRepr {
    Bessel {
        basis: Basis,
        cj: Scaled,
        ch: Scaled,
    },
    /// Trajectory of `(u, F)`.
    Numeric(Trajectory),
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub inner: f64,
    pub outer: f64,
    pub region: usize,
    pub repr: SegmentRepr,
}

/// A solution of one harmonic, stored region by region.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub n: usize,
    pub segments: Vec<Segment>,
    pub profile: RadialProfile,
}

fn flux_of(profile: &RadialProfile, k: usize, r: f64, du: Scaled) -> Scaled {
    let s = profile.regions[k].medium.coefficients(r).0;
    du.scale(c(s * r * r))
}

impl Segment {
    fn eval(&self, profile: &RadialProfile, n: usize, r: f64) -> Result<(Scaled, Scaled)> {
        match &self.repr {
            SegmentRepr::Bessel { basis, cj, ch } => {
                let bp = basis.eval(n, r, !ch.is_zero())?;
                let mut u = *cj * bp.f;
                let mut du = *cj * bp.df;
                if !ch.is_zero() {
                    u = u + *ch * bp.g;
                    du = du + *ch * bp.dg;
                }
                Ok((u, du))
            }
            SegmentRepr::Numeric(tr) => {
                let (y, e) = tr.eval_with(rhs(profile, self.region, n), r);
                let s = profile.regions[self.region].medium.coefficients(r).0;
                Ok((Scaled::new(y[0], e), Scaled::new(y[1] / (s * r * r), e)))
            }
        }
    }

    /// `(u, F)` at `r`.
    fn state(&self, profile: &RadialProfile, n: usize, r: f64) -> Result<(Scaled, Scaled)> {
        match &self.repr {
            SegmentRepr::Numeric(tr) => {
                let (y, e) = tr.eval_with(rhs(profile, self.region, n), r);
                Ok((Scaled::new(y[0], e), Scaled::new(y[1], e)))
            }
            SegmentRepr::Bessel { basis, cj, ch } => {
                let bp = basis.eval(n, r, !ch.is_zero())?;
                let mut u = *cj * bp.f;
                let mut f = *cj * bp.flux_f;
                if !ch.is_zero() {
                    u = u + *ch * bp.g;
                    f = f + *ch * bp.flux_g;
                }
                Ok((u, f))
            }
        }
    }

    fn scale(&mut self, k: Scaled) {
        match &mut self.repr {
            SegmentRepr::Bessel { cj, ch, .. } => {
                *cj = *cj * k;
                *ch = *ch * k;
            }
            SegmentRepr::Numeric(tr) => {
                let phase = k.mant;
                for nd in tr.nodes.iter_mut() {
                    for i in 0..2 {
                        nd.y[i] *= phase;
                        nd.dy[i] *= phase;
                    }
                    nd.exp += k.exp;
                }
            }
        }
    }
}

impl RadialSolution {
    fn segment_index(&self, r: f64) -> usize {
        let k = self.segments.partition_point(|s| s.outer <= r);
        k.min(self.segments.len() - 1)
    }

    pub fn inner(&self) -> f64 {
        self.segments[0].inner
    }

    pub fn outer(&self) -> f64 {
        self.segments.last().unwrap().outer
    }

    /// `(u, du/dr)` in scaled form; at a breakpoint the outer region is used.
    pub fn eval_scaled(&self, r: f64) -> Result<(Scaled, Scaled)> {
        if r < self.inner() - 1e-12 || r > self.outer() + 1e-12 {
            return Err(Error::Domain(format!(
                "r = {r} outside the solution range [{}, {}]",
                self.inner(),
                self.outer()
            )));
        }
        let s = &self.segments[self.segment_index(r)];
        s.eval(&self.profile, self.n, r)
    }

    /// `(u, F)` with `F = σ_r r² u'`.
    pub fn state_scaled(&self, r: f64) -> Result<(Scaled, Scaled)> {
        let s = &self.segments[self.segment_index(r)];
        s.state(&self.profile, self.n, r)
    }

    pub fn value(&self, r: f64) -> Result<Complex64> {
        Ok(self.eval_scaled(r)?.0.value())
    }

    pub fn derivative(&self, r: f64) -> Result<Complex64> {
        Ok(self.eval_scaled(r)?.1.value())
    }

    pub fn cauchy(&self, r: f64) -> Result<CauchyData> {
        let (u, du) = self.eval_scaled(r)?;
        let e = u.exp.max(du.exp);
        Ok(CauchyData { radius: r, u: u.value_shifted(e), du_dr: du.value_shifted(e), log_scale: e })
    }

    /// `(r, u, du/dr)` at the requested radii.
    pub fn samples(&self, radii: &[f64]) -> Result<Vec<(f64, Complex64, Complex64)>> {
        radii
            .iter()
            .map(|&r| {
                let (u, du) = self.eval_scaled(r)?;
                Ok((r, u.value(), du.value()))
            })
            .collect()
    }

    /// Multiplies the solution by `k`.
    pub fn scale(&mut self, k: Scaled) {
        for s in self.segments.iter_mut() {
            s.scale(k);
        }
    }

    pub fn scaled(mut self, k: Scaled) -> Self {
        self.scale(k);
        self
    }

    /// Closed-form coefficients of the segment containing `r`, if any.
    pub fn bessel_coefficients(&self, r: f64) -> Option<(Basis, Scaled, Scaled)> {
        match &self.segments[self.segment_index(r)].repr {
            SegmentRepr::Bessel { basis, cj, ch } => Some((*basis, *cj, *ch)),
            SegmentRepr::Numeric(_) => None,
        }
    }
}

fn rhs(profile: &RadialProfile, k: usize, n: usize) -> impl Fn(f64, &State) -> State + '_ {
    let l = (n * (n + 1)) as f64;
    move |r: f64, y: &State| {
        let (sr, st, _, _) = profile.regions[k].medium.coefficients(r);
        let q = profile.q_in(k, r);
        [y[1] / (sr * r * r), y[0] * (st * l - q * r * r)]
    }
}

fn to_state(u: Scaled, f: Scaled) -> (State, f64) {
    let e = if u.is_zero() && f.is_zero() { 0.0 } else { u.exp.max(f.exp) };
    ([u.value_shifted(e), f.value_shifted(e)], e)
}

#[allow(clippy::too_many_arguments)]
fn numeric_segment(
    profile: &RadialProfile,
    k: usize,
    n: usize,
    from: f64,
    u: Scaled,
    f: Scaled,
    to: f64,
    opts: &OdeOptions,
) -> Result<Segment> {
    if to.min(from) < R_MIN * 0.999 {
        return Err(Error::Singularity(format!(
            "direct integration cannot reach r = {} (regular start is at {R_MIN})",
            to.min(from)
        )));
    }
    let (y0, e0) = to_state(u, f);
    let tr = ode::integrate(rhs(profile, k, n), from, y0, e0, to, opts)?;
    let tr = if to < from { Trajectory { nodes: tr.nodes.into_iter().rev().collect(), opts: tr.opts } } else { tr };
    Ok(Segment { inner: from.min(to), outer: from.max(to), region: k, repr: SegmentRepr::Numeric(tr) })
}

/// Series-type start of the regular branch at `R_MIN` for regions without a closed form.
fn regular_start(profile: &RadialProfile, n: usize) -> Result<(Scaled, Scaled)> {
    let (sr, _, _, _) = profile.regions[0].medium.coefficients(R_MIN);
    let q = profile.q_in(0, R_MIN);
    let k = c(q / sr).sqrt();
    let basis =
        if q == 0.0 { Basis::Power { sigma: sr } } else { Basis::Bessel { k, alpha: 1.0, beta: 0.0, sigma: sr } };
    let bp = basis.eval(n, R_MIN, false)?;
    Ok((bp.f, bp.flux_f))
}

/// Regular-at-origin solution over the whole profile, normalised so that
/// `u ~ j_n(k r)` in the innermost region.
pub fn regular_solution(
    profile: &RadialProfile,
    n: usize,
    engine: Engine,
    opts: &OdeOptions,
) -> Result<RadialSolution> {
    let mut segments = Vec::with_capacity(profile.regions.len());
    let mut state: Option<(Scaled, Scaled)> = None;
    for (k, reg) in profile.regions.iter().enumerate() {
        let basis = if engine == Engine::Auto { Basis::for_region(profile, k) } else { None };
        let seg = match (basis, state) {
            (Some(b), None) => Segment {
                inner: reg.inner,
                outer: reg.outer,
                region: k,
                repr: SegmentRepr::Bessel { basis: b, cj: Scaled::from_real(1.0), ch: Scaled::ZERO },
            },
            (Some(b), Some((u, f))) => {
                let bp = b.eval(n, reg.inner, true)?;
                let (cj, ch) = coefficients(&bp, u, f);
                Segment {
                    inner: reg.inner,
                    outer: reg.outer,
                    region: k,
                    repr: SegmentRepr::Bessel { basis: b, cj, ch },
                }
            }
            (None, None) => {
                let (u, f) = regular_start(profile, n)?;
                let mut s = numeric_segment(profile, k, n, R_MIN, u, f, reg.outer, opts)?;
                s.inner = reg.inner;
                s
            }
            (None, Some((u, f))) => numeric_segment(profile, k, n, reg.inner, u, f, reg.outer, opts)?,
        };
        state = Some(seg.state(profile, n, reg.outer)?);
        segments.push(seg);
    }
    Ok(RadialSolution { n, segments, profile: profile.clone() })
}

/// Direct integration from Cauchy data to `to_radius`, crossing interfaces
/// with continuity of `u` and `σ_r r² u'`.
pub fn integrate(
    profile: &RadialProfile,
    n: usize,
    from: &CauchyData,
    to_radius: f64,
    opts: &OdeOptions,
) -> Result<RadialSolution> {
    solve_between(profile, n, from, to_radius, Engine::Direct, opts)
}

fn solve_between(
    profile: &RadialProfile,
    n: usize,
    from: &CauchyData,
    to_radius: f64,
    engine: Engine,
    opts: &OdeOptions,
) -> Result<RadialSolution> {
    let l = profile.outer_radius();
    for r in [from.radius, to_radius] {
        if !(r >= 0.0 && r <= l * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("radius {r} outside the profile [0, {l}]")));
        }
    }
    let mut k = region_for(profile, from.radius, to_radius);
    let mut r = from.radius;
    let u0 = Scaled::new(from.u, from.log_scale);
    let mut state = (u0, flux_of(profile, k, r, Scaled::new(from.du_dr, from.log_scale)));
    let mut segments = Vec::new();
    let outward = to_radius >= from.radius;
    loop {
        let reg = profile.regions[k];
        let end = if outward { reg.outer.min(to_radius) } else { reg.inner.max(to_radius) };
        let basis = if engine == Engine::Auto { Basis::for_region(profile, k) } else { None };
        let seg = match basis {
            Some(b) => {
                let bp = b.eval(n, r, true)?;
                let (cj, ch) = coefficients(&bp, state.0, state.1);
                Segment {
                    inner: r.min(end),
                    outer: r.max(end),
                    region: k,
                    repr: SegmentRepr::Bessel { basis: b, cj, ch },
                }
            }
            None => numeric_segment(profile, k, n, r, state.0, state.1, end, opts)?,
        };
        state = seg.state(profile, n, end)?;
        segments.push(seg);
        r = end;
        if r == to_radius {
            break;
        }
        if outward {
            k += 1;
        } else {
            k -= 1;
        }
    }
    if !outward {
        segments.reverse();
    }
    Ok(RadialSolution { n, segments, profile: profile.clone() })
}

/// Region used when leaving `r` towards `to`: at a breakpoint, the side facing `to`.
fn region_for(profile: &RadialProfile, r: f64, to: f64) -> usize {
    let k = profile.region_index(r);
    if to < r && k > 0 && profile.regions[k].inner == r {
        k - 1
    } else {
        k
    }
}

/// Propagates Cauchy data with the closed-form engine where possible.
pub fn propagate(
    profile: &RadialProfile,
    n: usize,
    from: &CauchyData,
    to_radius: f64,
    opts: &OdeOptions,
) -> Result<CauchyData> {
    if to_radius == from.radius {
        return Ok(*from);
    }
    let sol = solve_between(profile, n, from, to_radius, Engine::Auto, opts)?;
    let seg = if to_radius >= from.radius { sol.segments.last().unwrap() } else { &sol.segments[0] };
    let (u, du) = seg.eval(profile, n, to_radius)?;
    let e = u.exp.max(du.exp);
    Ok(CauchyData { radius: to_radius, u: u.value_shifted(e), du_dr: du.value_shifted(e), log_scale: e })
}

/// Transfer matrix on `(u, σ_r r² u')`: the true matrix is `m * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[Complex64; 2]; 2],
    pub log_scale: f64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        TransferMatrix { m: [[c(1.0), c(0.0)], [c(0.0), c(1.0)]], log_scale: 0.0 }
    }

    pub fn compose(&self, first: &TransferMatrix) -> TransferMatrix {
        let a = &self.m;
        let b = &first.m;
        let mut m = [[c(0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        normalize_matrix(m, self.log_scale + first.log_scale)
    }

    /// Determinant including the scale factor (may overflow for huge scales).
    pub fn det(&self) -> Complex64 {
        (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]) * (2.0 * self.log_scale).exp()
    }

    pub fn entry(&self, i: usize, j: usize) -> Scaled {
        Scaled::new(self.m[i][j], self.log_scale)
    }
}

fn normalize_matrix(m: [[Complex64; 2]; 2], log_scale: f64) -> TransferMatrix {
    let big = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if big == 0.0 || !big.is_finite() {
        return TransferMatrix { m, log_scale };
    }
    let mut out = m;
    for row in out.iter_mut() {
        for z in row.iter_mut() {
            *z /= big;
        }
    }
    TransferMatrix { m: out, log_scale: log_scale + big.ln() }
}

fn matrix_from_scaled(e: [[Scaled; 2]; 2]) -> TransferMatrix {
    let top = e.iter().flatten().filter(|s| !s.is_zero()).map(|s| s.exp).fold(f64::NEG_INFINITY, f64::max);
    let top = if top.is_finite() { top } else { 0.0 };
    let mut m = [[c(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = e[i][j].value_shifted(top);
        }
    }
    normalize_matrix(m, top)
}

fn region_matrix(
    profile: &RadialProfile,
    k: usize,
    n: usize,
    ra: f64,
    rb: f64,
    opts: &OdeOptions,
) -> Result<TransferMatrix> {
    if ra == rb {
        return Ok(TransferMatrix::identity());
    }
    if let Some(b) = Basis::for_region(profile, k) {
        let pa = b.eval(n, ra, true)?;
        let pb = b.eval(n, rb, true)?;
        // M = B(rb) B(ra)^{-1}
        let e = [
            [(pb.f * pa.flux_g - pb.g * pa.flux_f) / pa.det, (pb.g * pa.f - pb.f * pa.g) / pa.det],
            [(pb.flux_f * pa.flux_g - pb.flux_g * pa.flux_f) / pa.det, (pb.flux_g * pa.f - pb.flux_f * pa.g) / pa.det],
        ];
        return Ok(matrix_from_scaled(e));
    }
    let mut cols = [[Scaled::ZERO; 2]; 2];
    for (j, (u, f)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let seg = numeric_segment(profile, k, n, ra, Scaled::from_real(u), Scaled::from_real(f), rb, opts)?;
        let Node { y, exp, .. } = if rb >= ra {
            *match &seg.repr {
                SegmentRepr::Numeric(tr) => tr.last(),
                _ => unreachable!(),
            }
        } else {
            *match &seg.repr {
                SegmentRepr::Numeric(tr) => tr.first(),
                _ => unreachable!(),
            }
        };
        cols[0][j] = Scaled::new(y[0], exp);
        cols[1][j] = Scaled::new(y[1], exp);
    }
    Ok(matrix_from_scaled(cols))
}

/// Transfer matrix on `(u, σ_r r² u')` from `ra` to `rb`, composed region by region.
pub fn transfer_matrix(
    profile: &RadialProfile,
    n: usize,
    ra: f64,
    rb: f64,
    opts: &OdeOptions,
) -> Result<TransferMatrix> {
    let l = profile.outer_radius();
    for r in [ra, rb] {
        if !(r >= 0.0 && r <= l) {
            return Err(Error::Domain(format!("radius {r} outside the profile [0, {l}]")));
        }
    }
    let mut acc = TransferMatrix::identity();
    if ra == rb {
        return Ok(acc);
    }
    let outward = rb > ra;
    let mut k = region_for(profile, ra, rb);
    let mut r = ra;
    loop {
        let reg = profile.regions[k];
        let end = if outward { reg.outer.min(rb) } else { reg.inner.max(rb) };
        let m = region_matrix(profile, k, n, r, end, opts)?;
        acc = m.compose(&acc);
        r = end;
        if r == rb {
            return Ok(acc);
        }
        if outward {
            k += 1;
        } else {
            k -= 1;
        }
    }
}

/// `u'(L)/u(L)` of the regular solution of harmonic `n`.
pub fn dtn_harmonic(config: &HatConfig, n: usize) -> Result<Complex64> {
    let profile = material_profile(config)?;
    let opts = OdeOptions { rtol: config.ode_tol, ..OdeOptions::default() };
    let sol = regular_solution(&profile, n, Engine::Auto, &opts)?;
    let l = config.outer_radius;
    let (u, du) = sol.eval_scaled(l)?;
    let (_, flux) = sol.state_scaled(l)?;
    let norm = u.ln_abs().max((flux.scale(c(1.0 / (l * l)))).ln_abs());
    if u.ln_abs() - norm < (1e-10f64).ln() {
        return Err(Error::Resonance(format!("u(L) vanishes for harmonic {n}: E is an interior eigenvalue")));
    }
    Ok((du / u).value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloakmodel::Region;

    fn free(l: f64, e: f64) -> RadialProfile {
        RadialProfile::new(vec![Region { inner: 0.0, outer: l, medium: Medium::free() }], e).unwrap()
    }

    #[test]
    fn free_space_inward_integration() {
        let l = 2.0 * std::f64::consts::PI;
        let p = free(l, 4.0);
        let w = 2.0f64;
        let u = (w * l).sin() / (w * l);
        let du = w * ((w * l).cos() / (w * l) - (w * l).sin() / (w * l).powi(2));
        let from = CauchyData::new(l, c(u), c(du));
        let sol = integrate(&p, 0, &from, 1.0, &OdeOptions::default()).unwrap();
        let v = sol.value(1.0).unwrap();
        assert!((v.re - 0.45464871341284085).abs() < 1e-9);
    }

    #[test]
    fn zero_width_matrix_is_identity() {
        let p = free(3.0, 4.0);
        let m = transfer_matrix(&p, 2, 1.0, 1.0, &OdeOptions::default()).unwrap();
        assert_eq!(m, TransferMatrix::identity());
    }

    #[test]
    fn regular_solution_is_j_n() {
        let p = free(3.0, 4.0);
        let sol = regular_solution(&p, 3, Engine::Auto, &OdeOptions::default()).unwrap();
        let v = sol.value(1.3).unwrap();
        let j3 = crate::specfun::sph_bessel(crate::specfun::BesselKind::J, 3, c(2.6)).unwrap();
        assert!((v - j3).norm() < 1e-14);
    }

    #[test]
    fn reaching_origin_is_singular() {
        let p = free(3.0, 4.0);
        let from = CauchyData::new(1.0, c(1.0), c(0.0));
        assert!(matches!(integrate(&p, 1, &from, 0.0, &OdeOptions::default()), Err(Error::Singularity(_))));
    }
}
