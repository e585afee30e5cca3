//! Device geometry and material coefficients: the blow-up map, the cloak
//! layer, the interior shells, and the homogenised density weight θ̃.
//!
//! All radial equations have the form
//! `-(1/r²)(r² σ_r u')' + [σ_t n(n+1)/r² - q(r)] u = 0` with
//! `q(r) = w(r) (E - V(r)) + s(r)`: `w` is the energy weight (κ of the
//! Helmholtz form), `s` a constant energy shift and `V` an optional extra
//! potential.

use crate::error::{Error, Result};
use crate::specfun::ORDER_CAP;
use std::fmt;
use std::sync::Arc;

/// Coefficients used in the cloak layer `(R, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloakModel {
    /// No cloak: free space between the last shell and `L`.
    None,
    /// Pushforward of the identity under the blow-up map:
    /// `σ_r = 2(r-1)²/r²`, `σ_t = 2`, `κ = 8(r-1)²/r²`. Solvable in closed form.
    Pushforward,
    /// `σ_r = 2(r-1)²`, `σ_t = 2`, `κ = 64 (r-1)⁴/r⁴`; always integrated numerically.
    Printed,
}

/// How a shell value `τ` enters the interior equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellConvention {
    /// `ω²κ = E + τ`: the shell carries the Schrödinger potential `-τ`.
    Additive,
    /// `κ = τ`: the shell value multiplies the energy.
    Kappa,
}

/// Which θ̃ is used for the cloak-layer weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerWeight {
    /// The idealised value 2.
    Ideal,
    /// Cell average of `1/m` for the mollified profiles of [`isotropic_density`].
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub radius: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HatConfig {
    pub rho: f64,
    /// Outer domain radius `L`.
    pub outer_radius: f64,
    pub shells: Vec<Shell>,
    pub energy: f64,
    pub n_max: usize,
    pub ode_tol: f64,
    pub quad_tol: f64,
    pub cloak: CloakModel,
    pub convention: ShellConvention,
    pub layer_weight: LayerWeight,
    /// The cloak occupies `(ℓ R, 2ℓ)`; 1 except for rescaled devices.
    pub length_scale: f64,
}

impl HatConfig {
    pub fn new(rho: f64, outer_radius: f64, shells: Vec<Shell>, energy: f64) -> Self {
        HatConfig {
            rho,
            outer_radius,
            shells,
            energy,
            n_max: 30,
            ode_tol: 1e-10,
            quad_tol: 1e-10,
            cloak: CloakModel::Pushforward,
            convention: ShellConvention::Additive,
            layer_weight: LayerWeight::Mollified,
            length_scale: 1.0,
        }
    }

    /// Two-shell device `{(s1, τ1), (s2, τ2)}`.
    pub fn two_shell(rho: f64, outer_radius: f64, energy: f64, s1: f64, tau1: f64, s2: f64, tau2: f64) -> Self {
        HatConfig::new(
            rho,
            outer_radius,
            vec![Shell { radius: s1, tau: tau1 }, Shell { radius: s2, tau: tau2 }],
            energy,
        )
    }

    pub fn omega(&self) -> f64 {
        self.energy.sqrt()
    }

    /// `R = 1 + ρ/2`, in device units.
    pub fn cloak_inner(&self) -> f64 {
        self.length_scale * (1.0 + self.rho / 2.0)
    }

    pub fn cloak_outer(&self) -> f64 {
        2.0 * self.length_scale
    }

    /// Radius of the cloaked ball (1 in device units).
    pub fn hidden_radius(&self) -> f64 {
        self.length_scale
    }

    /// `R₀`, the outer radius of the last shell (0 without shells).
    pub fn shell_outer(&self) -> f64 {
        self.shells.last().map_or(0.0, |s| s.radius)
    }

    pub fn with_tau1(&self, tau1: f64) -> Self {
        let mut c = self.clone();
        if let Some(s) = c.shells.first_mut() {
            s.tau = tau1;
        }
        c
    }

    pub fn tau1(&self) -> Option<f64> {
        self.shells.first().map(|s| s.tau)
    }

    /// The reference device: same `L`, `E` and numerics, no cloak and no shells.
    pub fn empty_ball(&self) -> Self {
        let mut c = self.clone();
        c.cloak = CloakModel::None;
        c.shells.clear();
        c
    }

    /// Shell value that makes a shell indistinguishable from free space.
    pub fn trivial_tau(&self) -> f64 {
        match self.convention {
            ShellConvention::Additive => 0.0,
            ShellConvention::Kappa => 1.0,
        }
    }

    /// Rescales lengths by `ell` and energies by `ell⁻²`.
    pub fn scaled(&self, ell: f64) -> Self {
        let mut c = self.clone();
        let e2 = ell * ell;
        c.outer_radius *= ell;
        c.energy /= e2;
        c.length_scale *= ell;
        for s in c.shells.iter_mut() {
            s.radius *= ell;
            if self.convention == ShellConvention::Additive {
                s.tau /= e2;
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let finite = [self.rho, self.outer_radius, self.energy, self.ode_tol, self.quad_tol, self.length_scale];
        if finite.iter().any(|v| !v.is_finite())
            || self.shells.iter().any(|s| !s.radius.is_finite() || !s.tau.is_finite())
        {
            return bad("all parameters must be finite".into());
        }
        if !(self.energy > 0.0) {
            return bad(format!("E > 0 violated (E = {})", self.energy));
        }
        if !(self.length_scale > 0.0) {
            return bad("length scale must be positive".into());
        }
        if !(self.ode_tol > 0.0) || !(self.quad_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.n_max >= ORDER_CAP {
            return bad(format!("n_max must be below {ORDER_CAP}"));
        }
        let mut prev = 0.0;
        for s in &self.shells {
            if !(s.radius > prev) {
                return bad(format!("shell radii must be positive and strictly increasing (at {})", s.radius));
            }
            prev = s.radius;
        }
        let r0 = self.shell_outer();
        let ell = self.length_scale;
        if self.cloak == CloakModel::None {
            if !(r0 < self.outer_radius) {
                return bad(format!("R0 < L violated (R0 = {r0}, L = {})", self.outer_radius));
            }
            return Ok(());
        }
        if !(self.rho > 0.0 && self.rho < 2.0) {
            return bad(format!("0 < rho < 2 violated (rho = {})", self.rho));
        }
        if !(r0 < ell) {
            return bad(format!("R0 < 1 violated (R0 = {})", r0 / ell));
        }
        if !(self.outer_radius > 2.0 * ell) {
            return bad(format!("2 < L violated (L = {})", self.outer_radius / ell));
        }
        Ok(())
    }
}

/// Constant-coefficient medium or one of the cloak-layer formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Medium {
    Uniform { sigma: f64, weight: f64, shift: f64 },
    Pushforward { scale: f64 },
    Printed { scale: f64 },
}

impl Medium {
    pub fn free() -> Self {
        Medium::Uniform { sigma: 1.0, weight: 1.0, shift: 0.0 }
    }

    /// `(σ_r, σ_t, w, s)` at radius `r`.
    pub fn coefficients(&self, r: f64) -> (f64, f64, f64, f64) {
        match *self {
            Medium::Uniform { sigma, weight, shift } => (sigma, sigma, weight, shift),
            Medium::Pushforward { scale } => {
                let x = r / scale;
                let g = (x - 1.0) * (x - 1.0) / (x * x);
                (2.0 * g, 2.0, 8.0 * g, 0.0)
            }
            Medium::Printed { scale } => {
                let x = r / scale;
                let d = (x - 1.0) * (x - 1.0);
                (2.0 * d, 2.0, 64.0 * d * d / (x * x * x * x), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub inner: f64,
    pub outer: f64,
    pub medium: Medium,
}

/// Smooth radial function used as an extra potential.
#[derive(Clone)]
pub struct ExtraPotential(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for ExtraPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExtraPotential(..)")
    }
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub regions: Vec<Region>,
    pub energy: f64,
    /// Enters as `q = w (E - V) + s`, i.e. weighted like the energy.
    pub extra: Option<ExtraPotential>,
}

impl RadialProfile {
    pub fn new(regions: Vec<Region>, energy: f64) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::Config("profile needs at least one region".into()));
        }
        if regions[0].inner != 0.0 {
            return Err(Error::Config("profile must start at r = 0".into()));
        }
        for w in regions.windows(2) {
            if w[0].outer != w[1].inner {
                return Err(Error::Config(format!("regions do not tile at r = {}", w[0].outer)));
            }
        }
        for reg in &regions {
            if !(reg.outer > reg.inner) {
                return Err(Error::Config(format!("empty region at r = {}", reg.inner)));
            }
            if let Medium::Uniform { sigma, .. } = reg.medium {
                if !(sigma > 0.0) {
                    return Err(Error::Config("sigma must be positive".into()));
                }
            }
        }
        Ok(RadialProfile { regions, energy, extra: None })
    }

    pub fn with_extra(mut self, extra: ExtraPotential) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn outer_radius(&self) -> f64 {
        self.regions.last().unwrap().outer
    }

    /// Interior breakpoints (region boundaries other than 0 and `L`).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.regions[..self.regions.len() - 1].iter().map(|r| r.outer).collect()
    }

    /// Index of the region containing `r`; a breakpoint belongs to the outer region.
    pub fn region_index(&self, r: f64) -> usize {
        let k = self.regions.partition_point(|reg| reg.outer <= r);
        k.min(self.regions.len() - 1)
    }

    pub fn sigma_r(&self, r: f64) -> f64 {
        self.regions[self.region_index(r)].medium.coefficients(r).0
    }

    pub fn sigma_t(&self, r: f64) -> f64 {
        self.regions[self.region_index(r)].medium.coefficients(r).1
    }

    /// Energy weight `w(r)`.
    pub fn weight(&self, r: f64) -> f64 {
        self.regions[self.region_index(r)].medium.coefficients(r).2
    }

    /// Effective `κ` with `ω²κ = E w + s`.
    pub fn kappa(&self, r: f64) -> f64 {
        let (_, _, w, s) = self.regions[self.region_index(r)].medium.coefficients(r);
        w + s / self.energy
    }

    /// `q(r)` in region `k`.
    pub fn q_in(&self, k: usize, r: f64) -> f64 {
        let (_, _, w, s) = self.regions[k].medium.coefficients(r);
        let v = self.extra.as_ref().map_or(0.0, |e| (e.0)(r));
        w * (self.energy - v) + s
    }

    /// Whether region `k` has a closed-form Bessel basis.
    pub fn closed_form(&self, k: usize) -> bool {
        self.extra.is_none() && matches!(self.regions[k].medium, Medium::Uniform { .. } | Medium::Pushforward { .. })
    }
}

/// Builds the coefficient profile of a device.
pub fn material_profile(config: &HatConfig) -> Result<RadialProfile> {
    config.validate()?;
    let mut regions = Vec::new();
    let mut r = 0.0;
    for s in &config.shells {
        let medium = match config.convention {
            ShellConvention::Additive => Medium::Uniform { sigma: 1.0, weight: 1.0, shift: s.tau },
            ShellConvention::Kappa => Medium::Uniform { sigma: 1.0, weight: s.tau, shift: 0.0 },
        };
        regions.push(Region { inner: r, outer: s.radius, medium });
        r = s.radius;
    }
    let ell = config.length_scale;
    match config.cloak {
        CloakModel::None => {}
        model => {
            regions.push(Region { inner: r, outer: config.cloak_inner(), medium: Medium::free() });
            let medium = if model == CloakModel::Pushforward {
                Medium::Pushforward { scale: ell }
            } else {
                Medium::Printed { scale: ell }
            };
            regions.push(Region { inner: config.cloak_inner(), outer: config.cloak_outer(), medium });
            r = config.cloak_outer();
        }
    }
    regions.push(Region { inner: r, outer: config.outer_radius, medium: Medium::free() });
    RadialProfile::new(regions, config.energy)
}

/// `η(r)`, the interior coefficient multiplying `E` (1 outside the shells).
pub fn eta(r: f64, config: &HatConfig) -> f64 {
    for s in &config.shells {
        if r < s.radius {
            return match config.convention {
                ShellConvention::Additive => 1.0 + s.tau / config.energy,
                ShellConvention::Kappa => s.tau,
            };
        }
    }
    1.0
}

/// `Q(r) = -E (η(r) - 1)`, supported in `[0, R₀]`.
pub fn cloaked_potential_q(r: f64, config: &HatConfig) -> f64 {
    -config.energy * (eta(r, config) - 1.0)
}

/// Physical radius of the virtual radius `y` (`ρ < y`): identity beyond 2,
/// `1 + y/2` on `(ρ, 2]`. `rho = 0` gives the singular map.
pub fn blowup_map(y: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) || !(y > rho) {
        return Err(Error::Domain(format!("blow-up map needs y > rho (y = {y}, rho = {rho})")));
    }
    Ok(if y > 2.0 { y } else { 1.0 + y / 2.0 })
}

/// Inverse of [`blowup_map`], defined for `x > R = 1 + ρ/2`.
pub fn blowup_inverse(x: f64, rho: f64) -> Result<f64> {
    let r = 1.0 + rho / 2.0;
    if !(rho >= 0.0) || !(x > r) {
        return Err(Error::Domain(format!("inverse blow-up map needs x > R (x = {x}, R = {r})")));
    }
    Ok(if x > 2.0 { x } else { 2.0 * (x - 1.0) })
}

/// Width of the mollified bump `p₃` and of the `p₁`/`p₂` transition, in periods.
const BUMP_CORE: f64 = 0.005;
const BUMP_EDGE: f64 = 0.01;
const SPLIT_EDGE: f64 = 0.02;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// The three periodic profiles `(p₁, p₂, p₃)` at cell coordinate `t`.
pub fn cell_profiles(t: f64) -> (f64, f64, f64) {
    let t = t - t.floor();
    let d = t.min(1.0 - t);
    let p3 = smoothstep((BUMP_CORE + BUMP_EDGE - d) / BUMP_EDGE);
    let split = if t < 0.75 { smoothstep((0.5 + SPLIT_EDGE / 2.0 - t) / SPLIT_EDGE) } else { 0.0 };
    ((1.0 - p3) * split, (1.0 - p3) * (1.0 - split), p3)
}

/// `∫₀¹ p₃`; the other two profiles each integrate to `(1 - γ)/2`.
pub fn bump_mass() -> f64 {
    2.0 * (BUMP_CORE + BUMP_EDGE / 2.0)
}

fn layer_ab(r: f64) -> (f64, f64) {
    let s = (2.0 - r).max(0.0).sqrt();
    (2.0 * (1.0 + s), 2.0 * (1.0 - s))
}

/// θ̃(r) for a unit-scale device: 1 outside `(1, 2)`.
pub fn theta_tilde(r: f64, weight: LayerWeight) -> f64 {
    if r > 1.0 && r < 2.0 {
        let (a, b) = layer_ab(r);
        match weight {
            LayerWeight::Ideal => (a + b) / 2.0,
            LayerWeight::Mollified => (a + b) * (1.0 - bump_mass()) / 2.0 + bump_mass(),
        }
    } else {
        1.0
    }
}

/// θ(y) = θ̃(F(y)) |det DF(y)| on `0 < y ≤ 2`.
pub fn theta_virtual(y: f64, weight: LayerWeight) -> Result<f64> {
    if !(y > 0.0 && y <= 2.0) {
        return Err(Error::Domain(format!("theta_virtual needs 0 < y <= 2, got {y}")));
    }
    let x = 1.0 + y / 2.0;
    let det = 0.5 * (x / y).powi(2);
    let th = if y == 2.0 {
        // The outer interface belongs to the layer.
        let (a, b) = layer_ab(2.0);
        match weight {
            LayerWeight::Ideal => (a + b) / 2.0,
            LayerWeight::Mollified => (a + b) * (1.0 - bump_mass()) / 2.0 + bump_mass(),
        }
    } else {
        theta_tilde(x, weight)
    };
    Ok(th * det)
}

/// Effective mass `m(r)` of the layered isotropic realisation with period `ε`.
pub fn isotropic_density(r: f64, rho: f64, epsilon: f64) -> Result<f64> {
    let big_r = 1.0 + rho / 2.0;
    let cells = (2.0 - big_r) / epsilon;
    if !(epsilon > 0.0) || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
        return Err(Error::Config(format!("(2 - R)/epsilon must be a positive integer (got {cells})")));
    }
    if !(r > big_r && r < 2.0) {
        return Ok(1.0);
    }
    let (a, b) = layer_ab(r);
    let (p1, p2, p3) = cell_profiles((r - big_r) / epsilon);
    Ok(1.0 / (a * p1 + b * p2 + p3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> HatConfig {
        HatConfig::two_shell(0.01, 2.0 * std::f64::consts::PI, 4.0, 0.6, 12.9016, 0.8, -50.0)
    }

    #[test]
    fn blowup_examples() {
        assert_eq!(blowup_map(2.5, 0.01).unwrap(), 2.5);
        assert_eq!(blowup_map(1.0, 0.01).unwrap(), 1.5);
        let y = blowup_inverse(1.75, 0.01).unwrap();
        assert!((y - 1.5).abs() < 1e-15);
        assert!((blowup_map(y, 0.01).unwrap() - 1.75).abs() < 1e-15);
        assert!(blowup_map(0.005, 0.01).is_err());
        assert!(blowup_inverse(1.001, 0.01).is_err());
    }

    #[test]
    fn printed_layer_values() {
        let mut c = fig3();
        c.cloak = CloakModel::Printed;
        let p = material_profile(&c).unwrap();
        assert!((p.kappa(1.5) - 0.7901234567901234).abs() < 1e-12);
        assert!((p.sigma_r(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(p.sigma_t(1.5), 2.0);
    }

    #[test]
    fn kappa_convention_shell_values() {
        let mut c = fig3();
        c.convention = ShellConvention::Kappa;
        let p = material_profile(&c).unwrap();
        assert_eq!(p.kappa(0.7), -50.0);
        assert_eq!(cloaked_potential_q(0.7, &c), 204.0);
        assert_eq!(cloaked_potential_q(1.2, &c), 0.0);
        let c1 = c.with_tau1(1.0);
        assert_eq!(cloaked_potential_q(0.3, &c1), 0.0);
    }

    #[test]
    fn additive_convention_shell_values() {
        let c = fig3();
        let p = material_profile(&c).unwrap();
        assert!((p.kappa(0.7) - (1.0 - 50.0 / 4.0)).abs() < 1e-15);
        assert!((cloaked_potential_q(0.7, &c) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn regions_tile_and_jump_only_at_breakpoints() {
        let p = material_profile(&fig3()).unwrap();
        let bps = p.breakpoints();
        assert_eq!(bps, vec![0.6, 0.8, 1.005, 2.0]);
        assert_eq!(p.outer_radius(), fig3().outer_radius);
    }

    #[test]
    fn validation_catches_bad_geometry() {
        let mut c = fig3();
        c.shells[1].radius = 1.1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = fig3();
        c.energy = 0.0;
        assert!(c.validate().is_err());
        let mut c = fig3();
        c.outer_radius = 1.9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta_tilde(1.5, LayerWeight::Ideal), 2.0);
        assert_eq!(theta_tilde(2.5, LayerWeight::Ideal), 1.0);
        assert!((theta_virtual(2.0, LayerWeight::Ideal).unwrap() - 1.0).abs() < 1e-15);
        assert!((theta_tilde(1.5, LayerWeight::Mollified) - 1.98).abs() < 1e-12);
        assert!(theta_virtual(0.0, LayerWeight::Ideal).is_err());
    }

    #[test]
    fn profiles_partition_unity() {
        for k in 0..1000 {
            let t = k as f64 / 1000.0;
            let (a, b, c) = cell_profiles(t);
            assert!((a + b + c - 1.0).abs() < 1e-15);
            assert!(a >= 0.0 && b >= 0.0 && c >= 0.0);
        }
        let (a, b, c) = cell_profiles(0.0);
        assert_eq!((a, b, c), (0.0, 0.0, 1.0));
    }

    #[test]
    fn density_outside_layer_is_one() {
        let rho = 0.01;
        let eps = (2.0 - 1.005) / 64.0;
        assert_eq!(isotropic_density(0.5, rho, eps).unwrap(), 1.0);
        assert_eq!(isotropic_density(2.5, rho, eps).unwrap(), 1.0);
        assert!((isotropic_density(1.005 + 3.0 * eps, rho, eps).unwrap() - 1.0).abs() < 1e-15);
        assert!(isotropic_density(1.5, rho, 0.3).is_err());
    }

    #[test]
    fn scaling_moves_geometry() {
        let c = fig3().scaled(10.0);
        assert!((c.energy - 0.04).abs() < 1e-15);
        assert_eq!(c.cloak_outer(), 20.0);
        assert!((c.shells[1].tau + 0.5).abs() < 1e-15);
        c.validate().unwrap();
    }
}
