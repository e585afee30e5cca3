//! Root finding in `τ₁` for the hat, resonance and Dirichlet conditions,
//! and mode classification.
//!
//! The hat condition is written as a Wronskian at the outer cloak radius
//! between the regular interior s-wave and the free wave `j₀(ωr)`: it
//! vanishes exactly when the exterior field is a multiple of `j₀`. The
//! resonance condition uses `y₀` instead: the exterior continuation is then a
//! pure standing wave with no regular part, the real-axis signature of the
//! interior resonance.

use crate::cloakmodel::{material_profile, CloakModel, HatConfig};
use crate::error::{Error, Result};
use crate::fieldsolve::exterior_coefficients;
use crate::ode::OdeOptions;
use crate::radialode::{regular_solution, Engine, RadialSolution};
use crate::roots::{brent, scan_brackets};
use crate::scaled::Scaled;
use crate::specfun::{sph_bessel_pair_scaled, BesselKind};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerOptions {
    pub scan_step: f64,
    /// Bracket width at which Brent stops.
    pub tol: f64,
    pub engine: Engine,
}

impl Default for TunerOptions {
    fn default() -> Self {
        TunerOptions { scan_step: 0.25, tol: 1e-6, engine: Engine::Auto }
    }
}

pub const DEFAULT_BRACKET: (f64, f64) = (-500.0, 500.0);

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    pub tau1: f64,
    pub iterations: usize,
    /// Smallest `|W|` after each Brent iteration.
    pub residual_history: Vec<f64>,
}

pub(crate) fn ode_options(config: &HatConfig) -> OdeOptions {
    OdeOptions { rtol: config.ode_tol, ..OdeOptions::default() }
}

/// Radius where the exterior free region starts.
pub fn matching_radius(config: &HatConfig) -> f64 {
    match config.cloak {
        CloakModel::None => config.shell_outer(),
        _ => config.cloak_outer(),
    }
}

pub(crate) fn s_wave(config: &HatConfig, engine: Engine) -> Result<RadialSolution> {
    let profile = material_profile(config)?;
    regular_solution(&profile, 0, engine, &ode_options(config))
}

/// Scale-free Wronskian of the regular s-wave with a free reference wave at `r`.
fn wronskian(sol: &RadialSolution, r: f64, omega: f64, kind: BesselKind) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let (u, flux) = sol.state_scaled(r)?;
    let (f, df) = sph_bessel_pair_scaled(kind, 0, Complex64::new(omega * r, 0.0))?;
    let ff = df.scale(Complex64::new(omega * r * r, 0.0));
    let w = u * ff - flux * f;
    let norm_s = |a: Scaled, b: Scaled| a.ln_abs().max(b.scale(Complex64::new(1.0 / (r * r), 0.0)).ln_abs());
    let scale = norm_s(u, flux) + norm_s(f, ff);
    if w.is_zero() {
        return Ok(0.0);
    }
    Ok(Scaled::new(w.mant, w.exp - scale).value().re)
}

fn mismatch_with(tau1: f64, config: &HatConfig, kind: BesselKind, engine: Engine) -> Result<f64> {
    let cfg = config.with_tau1(tau1);
    let sol = s_wave(&cfg, engine)?;
    wronskian(&sol, matching_radius(&cfg), cfg.omega(), kind)
}

/// Hat mismatch `W(τ₁)`: zero iff the exterior field is a multiple of `j₀(ωr)`.
pub fn sh_mismatch(tau1: f64, config: &HatConfig) -> Result<f64> {
    mismatch_with(tau1, config, BesselKind::J, Engine::Auto)
}

/// Resonance mismatch: zero iff the exterior field is a multiple of `y₀(ωr)`.
pub fn resonance_mismatch(tau1: f64, config: &HatConfig) -> Result<f64> {
    mismatch_with(tau1, config, BesselKind::Y, Engine::Auto)
}

/// `u(L)` of the regular s-wave, normalised by the size of its Cauchy data.
pub fn dirichlet_mismatch(tau1: f64, config: &HatConfig) -> Result<f64> {
    let cfg = config.with_tau1(tau1);
    let sol = s_wave(&cfg, Engine::Auto)?;
    let l = cfg.outer_radius;
    let (u, flux) = sol.state_scaled(l)?;
    let scale = u.ln_abs().max(flux.scale(Complex64::new(1.0 / (l * l), 0.0)).ln_abs());
    if u.is_zero() {
        return Ok(0.0);
    }
    Ok(Scaled::new(u.mant, u.exp - scale).value().re)
}

fn smallest_root<F>(f: F, bracket: (f64, f64), opts: &TunerOptions, what: &str) -> Result<RootReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let brackets = scan_brackets(&f, bracket.0, bracket.1, opts.scan_step)?;
    let Some(&(a, b)) = brackets.first() else {
        return Err(Error::NoRoot(format!("no sign change of the {what} mismatch in [{}, {}]", bracket.0, bracket.1)));
    };
    if a == b {
        return Ok(RootReport { tau1: a, iterations: 0, residual_history: vec![0.0] });
    }
    let out = brent(&f, a, b, opts.tol)?;
    Ok(RootReport { tau1: out.root, iterations: out.iterations, residual_history: out.residual_history })
}

fn require_shell(config: &HatConfig) -> Result<()> {
    if config.shells.is_empty() {
        return Err(Error::NoRoot("the device has no interior shell to tune".into()));
    }
    Ok(())
}

/// Smallest hat root in `bracket`.
pub fn find_tau1_sh(config: &HatConfig, bracket: (f64, f64), opts: &TunerOptions) -> Result<RootReport> {
    require_shell(config)?;
    let engine = opts.engine;
    smallest_root(|t| mismatch_with(t, config, BesselKind::J, engine), bracket, opts, "hat")
}

/// Smallest resonance root in `bracket`.
pub fn find_tau1_resonance(config: &HatConfig, bracket: (f64, f64), opts: &TunerOptions) -> Result<RootReport> {
    require_shell(config)?;
    let engine = opts.engine;
    smallest_root(|t| mismatch_with(t, config, BesselKind::Y, engine), bracket, opts, "resonance")
}

/// Smallest root of `u(L) = 0` in `bracket`.
pub fn find_tau1_dirichlet(config: &HatConfig, bracket: (f64, f64), opts: &TunerOptions) -> Result<RootReport> {
    require_shell(config)?;
    smallest_root(|t| dirichlet_mismatch(t, config), bracket, opts, "Dirichlet")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hat,
    Resonance,
    CloakLike,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Hat => "hat",
            Mode::Resonance => "resonance",
            Mode::CloakLike => "cloak-like",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeThresholds {
    /// Largest scattered-to-incident amplitude still counted as a hat.
    pub hat_tol: f64,
    /// Interior amplitude (in units of the incident amplitude) above which the
    /// interior counts as excited.
    pub amp_threshold: f64,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        ModeThresholds { hat_tol: 1e-3, amp_threshold: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeReport {
    pub tau1: f64,
    pub mode: Mode,
    pub interior_amplitude: f64,
    pub far_field_residual: f64,
}

/// Interior amplitude and far-field residual for a unit incident s-wave.
pub fn classify_mode(tau1: f64, config: &HatConfig, thresholds: &ModeThresholds) -> Result<ModeReport> {
    let cfg = config.with_tau1(tau1);
    let sol = s_wave(&cfg, Engine::Auto)?;
    let (b, cc) = exterior_coefficients(&sol, 0, &cfg)?;
    let residual = (cc / b).abs();
    let hidden = cfg.hidden_radius();
    let mut peak = 0.0f64;
    for k in 0..=400 {
        let r = hidden * k as f64 / 400.0;
        peak = peak.max((sol.eval_scaled(r)?.0 / b).abs());
    }
    let mode = if peak <= thresholds.amp_threshold {
        Mode::CloakLike
    } else if residual < thresholds.hat_tol {
        Mode::Hat
    } else {
        Mode::Resonance
    };
    Ok(ModeReport { tau1, mode, interior_amplitude: peak, far_field_residual: residual })
}
