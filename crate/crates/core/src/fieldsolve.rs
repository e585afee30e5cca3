//! Field assembly: Dirichlet and eigen s-waves, plane-wave scattering, the
//! interior mode Φ, and effective fields.

use crate::cloakmodel::{
    blowup_inverse, material_profile, theta_tilde, CloakModel, HatConfig, LayerWeight, Medium, RadialProfile, Region,
    ShellConvention,
};
use crate::error::{Error, Result};
use crate::quad;
use crate::radialode::{regular_solution, Engine, RadialSolution, SegmentRepr};
use crate::scaled::Scaled;
use crate::specfun::{legendre_seq, sph_bessel_pair_scaled, sph_h1_seq, sph_j_seq, BesselKind};
use crate::tuner::{matching_radius, ode_options};
use num_complex::Complex64;
use rayon::prelude::*;

/// What data fixed the overall factor of a harmonic solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `u(L) = h0`.
    Dirichlet(Complex64),
    /// `u'(L)` equals the slope of the free eigenfunction `j₀(ωr)`.
    EigenSlope,
    /// Incident channel `i^n (2n+1) j_n(ωr)`.
    PlaneWave,
}

/// Closed-form weights of one region: `u = j_weight·f + h_weight·g` in the
/// region's own basis (`None` where the region was integrated numerically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionWeights {
    pub inner: f64,
    pub outer: f64,
    pub j_weight: Option<Scaled>,
    pub h_weight: Option<Scaled>,
}

#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub n: usize,
    pub solution: RadialSolution,
    /// Weights region by region, innermost first (the innermost region has no `h` part).
    pub regions: Vec<RegionWeights>,
    /// Exterior `u = b j_n(ωr) + c h_n(ωr)` beyond the cloak.
    pub b: Scaled,
    pub c: Scaled,
    pub normalization: Normalization,
}

impl HarmonicSolution {
    fn build(n: usize, solution: RadialSolution, config: &HatConfig, normalization: Normalization) -> Result<Self> {
        let regions = solution
            .segments
            .iter()
            .map(|s| match &s.repr {
                SegmentRepr::Bessel { cj, ch, .. } => {
                    RegionWeights { inner: s.inner, outer: s.outer, j_weight: Some(*cj), h_weight: Some(*ch) }
                }
                SegmentRepr::Numeric(_) => {
                    RegionWeights { inner: s.inner, outer: s.outer, j_weight: None, h_weight: None }
                }
            })
            .collect();
        let (b, c) = exterior_coefficients(&solution, n, config)?;
        Ok(HarmonicSolution { n, solution, regions, b, c, normalization })
    }

    /// `c_n / b_n`, the scattered amplitude relative to the incident channel.
    pub fn scattering_coefficient(&self) -> Complex64 {
        (self.c / self.b).value()
    }

    pub fn value(&self, r: f64) -> Result<Complex64> {
        self.solution.value(r)
    }
}

/// Exterior `(b, c)` of harmonic `n` beyond the matching radius.
pub fn exterior_coefficients(sol: &RadialSolution, n: usize, config: &HatConfig) -> Result<(Scaled, Scaled)> {
    let r = matching_radius(config);
    if r == 0.0 {
        let (u, _) = sol.eval_scaled(config.outer_radius)?;
        let (j, _) =
            sph_bessel_pair_scaled(BesselKind::J, n, Complex64::new(config.omega() * config.outer_radius, 0.0))?;
        return Ok((u / j, Scaled::ZERO));
    }
    let (u, flux) = sol.state_scaled(r)?;
    let z = Complex64::new(config.omega() * r, 0.0);
    let (j, dj) = sph_bessel_pair_scaled(BesselKind::J, n, z)?;
    let (h, dh) = sph_bessel_pair_scaled(BesselKind::H1, n, z)?;
    let w = Scaled::from_real(config.omega() * r * r);
    let (fj, fh) = (dj * w, dh * w);
    let det = j * fh - h * fj;
    Ok(((u * fh - h * flux) / det, (j * flux - fj * u) / det))
}

fn regular(config: &HatConfig, n: usize) -> Result<RadialSolution> {
    let profile = material_profile(config)?;
    regular_solution(&profile, n, Engine::Auto, &ode_options(config))
}

/// s-wave with `u(L) = h0`.
pub fn solve_dirichlet_radial(config: &HatConfig, h0: Complex64) -> Result<HarmonicSolution> {
    let sol = regular(config, 0)?;
    let l = config.outer_radius;
    let (u, flux) = sol.state_scaled(l)?;
    let size = u.ln_abs().max(flux.scale(Complex64::new(1.0 / (l * l), 0.0)).ln_abs());
    if u.is_zero() || u.ln_abs() - size < (1e-10f64).ln() {
        return Err(Error::Resonance("u(L) vanishes: E is a Dirichlet eigenvalue of the device".into()));
    }
    let k = Scaled::from_complex(h0) / u;
    HarmonicSolution::build(0, sol.scaled(k), config, Normalization::Dirichlet(h0))
}

/// s-wave eigenfunction scaled so that `u'(L) = ω j₀'(ωL)`.
pub fn solve_eigen_radial(config: &HatConfig) -> Result<HarmonicSolution> {
    let sol = regular(config, 0)?;
    let l = config.outer_radius;
    let (_, du) = sol.eval_scaled(l)?;
    let (_, dj) = sph_bessel_pair_scaled(BesselKind::J, 0, Complex64::new(config.omega() * l, 0.0))?;
    let k = dj.scale(Complex64::new(config.omega(), 0.0)) / du;
    HarmonicSolution::build(0, sol.scaled(k), config, Normalization::EigenSlope)
}

/// Whether `E` is (numerically) a Dirichlet eigenvalue of the empty ball.
pub fn is_free_eigen(config: &HatConfig) -> bool {
    let x = config.omega() * config.outer_radius;
    (x.sin() / x).abs() < 1e-8
}

/// Eigen solve when `E` is a free Dirichlet eigenvalue, otherwise `u(L) = 1`.
pub fn solve_radial(config: &HatConfig) -> Result<HarmonicSolution> {
    if is_free_eigen(config) {
        solve_eigen_radial(config)
    } else {
        solve_dirichlet_radial(config, Complex64::new(1.0, 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct PlaneWave {
    pub direction: [f64; 3],
    pub omega: f64,
    pub outer_radius: f64,
    pub harmonics: Vec<HarmonicSolution>,
    /// The last harmonic still scatters more than `1e-10` of its incident channel.
    pub truncation_warning: bool,
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain("direction must be a non-zero vector".into()));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Plane wave `e^{iω d·x}` scattered by the device, harmonics `0..=n_max`.
pub fn solve_plane_wave(config: &HatConfig, direction: [f64; 3]) -> Result<PlaneWave> {
    let d = unit(direction)?;
    let profile = material_profile(config)?;
    let opts = ode_options(config);
    let harmonics = (0..=config.n_max)
        .into_par_iter()
        .map(|n| {
            let sol = regular_solution(&profile, n, Engine::Auto, &opts)?;
            let (b, _) = exterior_coefficients(&sol, n, config)?;
            let weight = Complex64::i().powu(n as u32) * (2 * n + 1) as f64;
            let k = Scaled::from_complex(weight) / b;
            HarmonicSolution::build(n, sol.scaled(k), config, Normalization::PlaneWave)
        })
        .collect::<Result<Vec<_>>>()?;
    let last = harmonics.last().unwrap().scattering_coefficient().norm();
    Ok(PlaneWave {
        direction: d,
        omega: config.omega(),
        outer_radius: config.outer_radius,
        harmonics,
        truncation_warning: last > 1e-10,
    })
}

impl PlaneWave {
    pub fn scattering_coefficients(&self) -> Vec<Complex64> {
        self.harmonics.iter().map(|h| h.scattering_coefficient()).collect()
    }

    /// Scattered over incident intensity on the sphere `r = L`:
    /// `Σ (2n+1) |c_n h_n(ωL)|² / Σ (2n+1) |j_n(ωL)|²`.
    pub fn far_field_residual(&self) -> Result<f64> {
        let nmax = self.harmonics.len() - 1;
        let z = Complex64::new(self.omega * self.outer_radius, 0.0);
        let js = sph_j_seq(nmax, z)?;
        let hs = sph_h1_seq(nmax, z)?;
        let (mut sc, mut inc) = (0.0, 0.0);
        for (n, h) in self.harmonics.iter().enumerate() {
            let w = (2 * n + 1) as f64;
            sc += w * (Scaled::from_complex(h.scattering_coefficient()) * hs[n]).abs().powi(2);
            inc += w * js[n].abs().powi(2);
        }
        Ok(sc / inc)
    }

    /// Truncated incident field `Σ i^n (2n+1) j_n(ωr) P_n(cos γ)`.
    pub fn incident(&self, x: [f64; 3]) -> Result<Complex64> {
        let (r, ct) = polar(x, self.direction);
        let nmax = self.harmonics.len() - 1;
        let js = sph_j_seq(nmax, Complex64::new(self.omega * r, 0.0))?;
        let p = legendre_seq(nmax, ct);
        let mut s = Complex64::new(0.0, 0.0);
        for n in 0..=nmax {
            s += Complex64::i().powu(n as u32) * (2 * n + 1) as f64 * js[n].value() * p[n];
        }
        Ok(s)
    }
}

fn polar(x: [f64; 3], axis: [f64; 3]) -> (f64, f64) {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        return (0.0, 1.0);
    }
    let ct = ((x[0] * axis[0] + x[1] * axis[1] + x[2] * axis[2]) / r).clamp(-1.0, 1.0);
    (r, ct)
}

/// The interior mode Φ on the hidden ball.
#[derive(Debug, Clone)]
pub struct PhiMode {
    pub phi: RadialSolution,
    pub phi_at_1: f64,
    pub dphi_at_1: f64,
    /// L² norm of the unnormalised regular solution.
    pub norm: f64,
}

impl PhiMode {
    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.phi.value(r)?.re)
    }
}

/// Profile of the shells alone, padded with free space up to the hidden radius.
pub fn interior_profile(config: &HatConfig) -> Result<RadialProfile> {
    config.validate()?;
    let hidden = config.hidden_radius();
    let mut regions = Vec::new();
    let mut r = 0.0;
    for s in &config.shells {
        let medium = match config.convention {
            ShellConvention::Additive => Medium::Uniform { sigma: 1.0, weight: 1.0, shift: s.tau },
            ShellConvention::Kappa => Medium::Uniform { sigma: 1.0, weight: s.tau, shift: 0.0 },
        };
        regions.push(Region { inner: r, outer: s.radius.min(hidden), medium });
        r = s.radius;
    }
    if r < hidden {
        regions.push(Region { inner: r, outer: hidden, medium: Medium::free() });
    }
    RadialProfile::new(regions, config.energy)
}

/// Regular interior s-wave on the hidden ball with unit L² norm there.
pub fn compute_phi(config: &HatConfig) -> Result<PhiMode> {
    let profile = interior_profile(config)?;
    let sol = regular_solution(&profile, 0, Engine::Auto, &ode_options(config))?;
    let hidden = config.hidden_radius();
    let bps = profile.breakpoints();
    let mass = quad::integrate(
        |r| {
            let u = sol.eval_scaled(r).map(|v| v.0.abs()).unwrap_or(f64::NAN);
            4.0 * std::f64::consts::PI * r * r * u * u
        },
        0.0,
        hidden,
        &bps,
        config.quad_tol,
    )?;
    let norm = mass.sqrt();
    let phi = sol.scaled(Scaled::from_real(1.0 / norm));
    let (v, d) = phi.eval_scaled(hidden)?;
    Ok(PhiMode { phi_at_1: v.value().re, dphi_at_1: d.value().re, phi, norm })
}

/// Finite-ρ effective field `θ̃^{1/2} Σ u_n(r) P_n(cos γ)` about `axis`.
#[derive(Debug, Clone)]
pub struct EffectiveField {
    pub harmonics: Vec<HarmonicSolution>,
    pub axis: [f64; 3],
    pub outer_radius: f64,
    pub length_scale: f64,
    pub weight: Option<LayerWeight>,
}

impl EffectiveField {
    pub fn new(harmonics: Vec<HarmonicSolution>, config: &HatConfig, axis: [f64; 3]) -> Result<Self> {
        Ok(EffectiveField {
            harmonics,
            axis: unit(axis)?,
            outer_radius: config.outer_radius,
            length_scale: config.length_scale,
            weight: if config.cloak == CloakModel::None { None } else { Some(config.layer_weight) },
        })
    }

    pub fn radial(solution: HarmonicSolution, config: &HatConfig) -> Result<Self> {
        EffectiveField::new(vec![solution], config, [0.0, 0.0, 1.0])
    }

    pub fn plane_wave(pw: &PlaneWave, config: &HatConfig) -> Result<Self> {
        EffectiveField::new(pw.harmonics.clone(), config, pw.direction)
    }

    /// θ̃ at radius `r`.
    pub fn theta(&self, r: f64) -> f64 {
        match self.weight {
            Some(w) => theta_tilde(r / self.length_scale, w),
            None => 1.0,
        }
    }

    /// Breakpoints of the underlying profile.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.harmonics[0].solution.profile.breakpoints();
        if self.weight.is_some() {
            b.push(self.length_scale);
            b.push(2.0 * self.length_scale);
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `u_n(r)` for every stored harmonic; closed-form regions share one Bessel evaluation.
    pub fn radial_values(&self, r: f64) -> Result<Vec<Scaled>> {
        let first = &self.harmonics[0].solution;
        let nmax = self.harmonics.last().unwrap().n;
        if let Some((basis, _, _)) = first.bessel_coefficients(r) {
            let same = self
                .harmonics
                .iter()
                .all(|h| matches!(h.solution.bessel_coefficients(r), Some((b, _, _)) if b == basis));
            if same && self.harmonics.len() > 1 {
                if let crate::radialode::Basis::Bessel { k, alpha, beta, .. } = basis {
                    let z = k * (alpha * r + beta);
                    let js = sph_j_seq(nmax, z)?;
                    let need_h = self.harmonics.iter().any(|h| !h.solution.bessel_coefficients(r).unwrap().2.is_zero());
                    let hs = if need_h { Some(sph_h1_seq(nmax, z)?) } else { None };
                    return Ok(self
                        .harmonics
                        .iter()
                        .map(|h| {
                            let (_, cj, ch) = h.solution.bessel_coefficients(r).unwrap();
                            let mut v = cj * js[h.n];
                            if let Some(hs) = &hs {
                                if !ch.is_zero() {
                                    v = v + ch * hs[h.n];
                                }
                            }
                            v
                        })
                        .collect());
                }
            }
        }
        self.harmonics.iter().map(|h| Ok(h.solution.eval_scaled(r)?.0)).collect()
    }

    /// Field value at a point of `B_L`.
    pub fn at(&self, x: [f64; 3]) -> Result<Complex64> {
        let (r, ct) = polar(x, self.axis);
        if r > self.outer_radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("point at r = {r} lies outside B_L")));
        }
        let vals = self.radial_values(r)?;
        let nmax = self.harmonics.last().unwrap().n;
        let p = legendre_seq(nmax, ct);
        let mut s = Complex64::new(0.0, 0.0);
        for (h, v) in self.harmonics.iter().zip(vals) {
            s += v.value() * p[h.n];
        }
        Ok(s * self.theta(r).sqrt())
    }

    /// Angular average of `|ψ|²` on the sphere of radius `r`.
    pub fn shell_density(&self, r: f64) -> Result<f64> {
        let vals = self.radial_values(r)?;
        let s: f64 = self.harmonics.iter().zip(vals).map(|(h, v)| v.abs().powi(2) / (2 * h.n + 1) as f64).sum();
        Ok(s * self.theta(r))
    }
}

/// Finite-ρ effective field at many points (parallel, order preserving).
pub fn effective_field(field: &EffectiveField, points: &[[f64; 3]]) -> Result<Vec<Complex64>> {
    points.par_iter().map(|&x| field.at(x)).collect()
}

/// The ρ → 0 effective field of a radial problem with Dirichlet data `h0`:
/// `θ̃^{1/2} u(F⁻¹(x))` outside the hidden ball and `β u(0) Φ` inside,
/// where `u` is the free solution and `β = 1/Φ(1)`.
#[derive(Debug, Clone)]
pub struct LimitField {
    pub omega: f64,
    pub amplitude: Complex64,
    pub outer_radius: f64,
    pub beta: f64,
    pub u_at_0: Complex64,
    pub phi: PhiMode,
    pub weight: LayerWeight,
}

pub fn limit_effective_field(config: &HatConfig, h0: Complex64) -> Result<LimitField> {
    if config.length_scale != 1.0 {
        return Err(Error::Config("the limit field is defined for unit length scale".into()));
    }
    let w = config.omega();
    let x = w * config.outer_radius;
    let j_l = x.sin() / x;
    if j_l.abs() < 1e-12 {
        return Err(Error::Resonance("u(L) vanishes for the free ball".into()));
    }
    let amplitude = h0 / j_l;
    let phi = compute_phi(config)?;
    Ok(LimitField {
        omega: w,
        amplitude,
        outer_radius: config.outer_radius,
        beta: 1.0 / phi.phi_at_1,
        u_at_0: amplitude,
        phi,
        weight: config.layer_weight,
    })
}

impl LimitField {
    fn free(&self, y: f64) -> Complex64 {
        let z = self.omega * y;
        let j0 = if z == 0.0 { 1.0 } else { z.sin() / z };
        self.amplitude * j0
    }

    /// Unweighted field ũ at radius `r`.
    pub fn unweighted(&self, r: f64) -> Result<Complex64> {
        if r > self.outer_radius * (1.0 + 1e-12) || r < 0.0 {
            return Err(Error::Domain(format!("r = {r} outside B_L")));
        }
        if r <= 1.0 {
            return Ok(self.u_at_0 * self.beta * self.phi.value(r)?);
        }
        Ok(self.free(blowup_inverse(r, 0.0)?))
    }

    pub fn at(&self, r: f64) -> Result<Complex64> {
        Ok(self.unweighted(r)? * theta_tilde(r, self.weight).sqrt())
    }

    pub fn shell_density(&self, r: f64) -> Result<f64> {
        Ok(self.at(r)?.norm_sqr())
    }
}
