//! Probability masses, hat strength, the three-card-monte game, and the
//! Coulomb interaction of two trapped particles.

use crate::cloakmodel::{material_profile, ExtraPotential, HatConfig};
use crate::error::{Error, Result};
use crate::fieldsolve::{compute_phi, solve_radial, EffectiveField, LimitField};
use crate::quad;
use crate::radialode::{regular_solution, Engine, RadialSolution};
use crate::scaled::Scaled;
use crate::tuner::ode_options;
use num_complex::Complex64;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

/// Quadrature of a fallible integrand; the first failure is returned.
fn integrate_with<F>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = RefCell::new(None);
    let v = quad::integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        breakpoints,
        tol,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => v,
    }
}

/// A radially symmetric probability density (angular average of `|ψ|²`).
pub trait RadialDensity: Sync {
    fn density(&self, r: f64) -> Result<f64>;
    fn breakpoints(&self) -> Vec<f64>;
    fn outer_radius(&self) -> f64;
}

impl RadialDensity for EffectiveField {
    fn density(&self, r: f64) -> Result<f64> {
        self.shell_density(r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        EffectiveField::breakpoints(self)
    }

    fn outer_radius(&self) -> f64 {
        self.outer_radius
    }
}

impl RadialDensity for LimitField {
    fn density(&self, r: f64) -> Result<f64> {
        self.shell_density(r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.phi.phi.profile.breakpoints();
        b.extend([1.0, 2.0]);
        b
    }

    fn outer_radius(&self) -> f64 {
        self.outer_radius
    }
}

/// `∫ 4π r² |ψ|² dr` over `interval`.
pub fn region_mass(field: &dyn RadialDensity, interval: (f64, f64), tol: f64) -> Result<f64> {
    let (a, b) = interval;
    let l = field.outer_radius();
    if !(0.0 <= a && a <= b && b <= l * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("interval [{a}, {b}] is not inside [0, {l}]")));
    }
    let bps = field.breakpoints();
    integrate_with(|r| Ok(4.0 * PI * r * r * field.density(r)?), a, b.min(l), &bps, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ball {
    Empty,
    Hat,
}

impl Ball {
    pub fn label(&self) -> &'static str {
        match self {
            Ball::Empty => "empty",
            Ball::Hat => "sh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionProb {
    pub name: String,
    pub ball: Ball,
    pub region: (f64, f64),
    pub mass: f64,
    pub total: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub name: String,
    pub ball: Ball,
    /// `P(region | r > 2)`.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub rows: Vec<RegionProb>,
    pub conditionals: Vec<Conditional>,
}

impl ProbabilityTable {
    pub fn probability(&self, name: &str, ball: Ball) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name && r.ball == ball).map(|r| r.probability)
    }

    pub fn conditional(&self, name: &str, ball: Ball) -> Option<f64> {
        self.conditionals.iter().find(|r| r.name == name && r.ball == ball).map(|r| r.probability)
    }
}

/// s-wave field of a ball: eigen-normalised when `E` is a free Dirichlet
/// eigenvalue, `u(L) = 1` otherwise.
pub fn ball_field(config: &HatConfig) -> Result<EffectiveField> {
    EffectiveField::radial(solve_radial(config)?, config)
}

/// Region probabilities for both balls, plus conditionals given `r > 2ℓ`.
pub fn probabilities(
    config_empty: &HatConfig,
    config_sh: &HatConfig,
    regions: &[(String, (f64, f64))],
) -> Result<ProbabilityTable> {
    if config_empty.outer_radius != config_sh.outer_radius || config_empty.energy != config_sh.energy {
        return Err(Error::Config("both balls must share L and E".into()));
    }
    let l = config_sh.outer_radius;
    let exterior = (2.0 * config_sh.length_scale, l);
    let mut rows = Vec::new();
    let mut conditionals = Vec::new();
    for (ball, cfg) in [(Ball::Empty, config_empty), (Ball::Hat, config_sh)] {
        let field = ball_field(cfg)?;
        let tol = cfg.quad_tol;
        let total = region_mass(&field, (0.0, l), tol)?;
        let outside = region_mass(&field, exterior, tol)?;
        for (name, region) in regions {
            let mass = region_mass(&field, *region, tol)?;
            rows.push(RegionProb { name: name.clone(), ball, region: *region, mass, total, probability: mass / total });
            let (a, b) = (region.0.max(exterior.0), region.1.min(exterior.1));
            let inside = if a < b { region_mass(&field, (a, b), tol)? } else { 0.0 };
            conditionals.push(Conditional { name: name.clone(), ball, probability: inside / outside });
        }
    }
    Ok(ProbabilityTable { rows, conditionals })
}

/// Hat strength `1/Φ(1)²`.
pub fn strength(config: &HatConfig) -> Result<f64> {
    let phi = compute_phi(config)?;
    Ok(1.0 / (phi.phi_at_1 * phi.phi_at_1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSpec {
    pub n_balls: usize,
    /// Region `A`, inside `(2, L)`.
    pub region: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameReport {
    pub a_em: f64,
    pub c_em: f64,
    pub a_sh: f64,
    pub c_sh: f64,
    pub mu_em: f64,
    pub mu_sh: f64,
    /// `p (μ_sh − μ_em)` with `p = 1/n_balls`.
    pub expected_profit: f64,
}

/// Expectations of the three-card-monte game with one hat among `n_balls`.
pub fn monte_game(game: &GameSpec, config_empty: &HatConfig, config_sh: &HatConfig) -> Result<GameReport> {
    if game.n_balls < 2 {
        return Err(Error::Config("the game needs at least two balls".into()));
    }
    let l = config_sh.outer_radius;
    let (a, b) = game.region;
    if !(a >= 2.0 * config_sh.length_scale && a < b && b <= l) {
        return Err(Error::Config(format!("game region [{a}, {b}] must lie in (2, L)")));
    }
    let masses = |cfg: &HatConfig| -> Result<(f64, f64)> {
        let f = ball_field(cfg)?;
        Ok((region_mass(&f, game.region, cfg.quad_tol)?, region_mass(&f, (0.0, l), cfg.quad_tol)?))
    };
    let (a_em, c_em) = masses(config_empty)?;
    let (a_sh, c_sh) = masses(config_sh)?;
    let (mu_em, mu_sh) = (a_em / c_em, a_sh / c_sh);
    Ok(GameReport { a_em, c_em, a_sh, c_sh, mu_em, mu_sh, expected_profit: (mu_sh - mu_em) / game.n_balls as f64 })
}

/// Fraction of the probability mass inside the hidden ball.
pub fn charge_qprime(field: &dyn RadialDensity, config: &HatConfig) -> Result<f64> {
    let tol = config.quad_tol;
    let inner = region_mass(field, (0.0, config.hidden_radius()), tol)?;
    let total = region_mass(field, (0.0, field.outer_radius()), tol)?;
    Ok(inner / total)
}

/// A radial density supported on `[0, extent]`.
#[derive(Clone)]
pub struct Density {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub extent: f64,
    pub breakpoints: Vec<f64>,
}

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density").field("extent", &self.extent).field("breakpoints", &self.breakpoints).finish()
    }
}

impl Density {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, extent: f64, breakpoints: Vec<f64>) -> Self {
        Density { f: Arc::new(f), extent, breakpoints }
    }

    /// Unit mass spread uniformly over the ball of radius `delta`.
    pub fn uniform_ball(delta: f64) -> Self {
        let rho = 3.0 / (4.0 * PI * delta.powi(3));
        Density::new(move |r| if r <= delta { rho } else { 0.0 }, delta, vec![])
    }

    /// `δ⁻³ dens(r/δ)`.
    pub fn dilated(&self, delta: f64) -> Self {
        let f = self.f.clone();
        Density {
            f: Arc::new(move |r| f(r / delta) / delta.powi(3)),
            extent: self.extent * delta,
            breakpoints: self.breakpoints.iter().map(|b| b * delta).collect(),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r > self.extent {
            0.0
        } else {
            (self.f)(r)
        }
    }

    pub fn mass(&self, tol: f64) -> Result<f64> {
        quad::integrate(|r| 4.0 * PI * r * r * self.eval(r), 0.0, self.extent, &self.breakpoints, tol)
    }

    /// Density of an s-wave eigenfunction, `w |u|²` normalised to unit mass;
    /// `w` is the weight multiplying the energy, so first-order shifts read `∫ dens V`.
    pub fn from_solution(sol: &RadialSolution, tol: f64) -> Result<Self> {
        let profile = sol.profile.clone();
        let extent = profile.outer_radius();
        let bps = profile.breakpoints();
        let (_, top) = sol.eval_scaled(extent)?;
        // Work relative to a fixed exponent so huge interior amplitudes stay finite.
        let shift = top.exp.max(sol.eval_scaled(0.0)?.0.exp);
        let inv = Scaled::new(Complex64::new(1.0, 0.0), -shift);
        let unnorm = sol.clone().scaled(inv);
        let raw = move |r: f64| -> f64 {
            let u = unnorm.value(r).map(|v| v.norm_sqr()).unwrap_or(0.0);
            profile.weight(r) * u
        };
        let mass = quad::integrate(|r| 4.0 * PI * r * r * raw(r), 0.0, extent, &bps, tol)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Domain("density has no mass".into()));
        }
        Ok(Density::new(move |r| raw(r) / mass, extent, bps))
    }
}

/// `∫₀^r 4π s² dens(s) ds`.
fn enclosed(d: &Density, r: f64, tol: f64) -> Result<f64> {
    quad::integrate(|s| 4.0 * PI * s * s * d.eval(s), 0.0, r.min(d.extent), &d.breakpoints, tol)
}

/// `V(r) = (1/r) ∫₀^r 4π s² dens ds + ∫_r^∞ 4π s dens ds`.
pub fn coulomb_veff(d: &Density, r: f64, tol: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("r = {r} must be non-negative")));
    }
    let outer = if r < d.extent {
        quad::integrate(|s| 4.0 * PI * s * d.eval(s), r, d.extent, &d.breakpoints, tol)?
    } else {
        0.0
    };
    let inner = if r > 0.0 { enclosed(d, r, tol)? / r } else { 0.0 };
    Ok(inner + outer)
}

/// `E₁ = ½ ∫ 4π r² dens V dr`.
pub fn perturbation_e1(d: &Density, tol: f64) -> Result<f64> {
    let table = VeffTable::new(d, 2000, tol)?;
    quad::integrate(|r| 2.0 * PI * r * r * d.eval(r) * table.eval(r), 0.0, d.extent, &table.r, tol)
}

/// `E₁` of the empty ball's s-wave eigenfunction.
pub fn e1_no_sh(config_empty: &HatConfig) -> Result<f64> {
    e1_of(config_empty)
}

/// `E₁` of a ball's s-wave eigenfunction.
pub fn e1_of(config: &HatConfig) -> Result<f64> {
    let d = Density::from_solution(&solve_radial(config)?.solution, config.quad_tol)?;
    perturbation_e1(&d, config.quad_tol)
}

/// Tabulated `V_eff` with exact derivatives, interpolated by cubic Hermite.
#[derive(Debug, Clone)]
pub struct VeffTable {
    r: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
    total: f64,
}

impl VeffTable {
    /// Table on `[0, extent]` with about `n` uniform nodes plus the density breakpoints.
    pub fn new(d: &Density, n: usize, tol: f64) -> Result<Self> {
        let n = n.max(2);
        let mut r: Vec<f64> = (0..=n).map(|k| d.extent * k as f64 / n as f64).collect();
        r.extend(d.breakpoints.iter().copied().filter(|&b| b > 0.0 && b < d.extent));
        r.sort_by(f64::total_cmp);
        r.dedup();
        // Cumulative mass and the outer integral, cell by cell.
        let mut m = vec![0.0; r.len()];
        let mut t = vec![0.0; r.len()];
        for k in 1..r.len() {
            m[k] = m[k - 1] + quad::integrate(|s| 4.0 * PI * s * s * d.eval(s), r[k - 1], r[k], &[], tol)?;
        }
        for k in (0..r.len() - 1).rev() {
            t[k] = t[k + 1] + quad::integrate(|s| 4.0 * PI * s * d.eval(s), r[k], r[k + 1], &[], tol)?;
        }
        let v: Vec<f64> = (0..r.len()).map(|k| if r[k] > 0.0 { m[k] / r[k] } else { 0.0 } + t[k]).collect();
        let dv: Vec<f64> = (0..r.len()).map(|k| if r[k] > 0.0 { -m[k] / (r[k] * r[k]) } else { 0.0 }).collect();
        let total = *m.last().unwrap();
        Ok(VeffTable { r, v, dv, total })
    }

    fn cell(&self, r: f64) -> usize {
        self.r.partition_point(|&x| x <= r).clamp(1, self.r.len() - 1)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let ext = *self.r.last().unwrap();
        if r >= ext {
            return self.total / r;
        }
        let k = self.cell(r);
        let (a, b) = (self.r[k - 1], self.r[k]);
        let h = b - a;
        let t = (r - a) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        self.v[k - 1] * h00 + self.dv[k - 1] * h * h10 + self.v[k] * h01 + self.dv[k] * h * h11
    }
}

#[derive(Debug, Clone)]
pub struct CoulombSolution {
    pub energy: f64,
    pub solution: RadialSolution,
}

fn eigen_mismatch(config: &HatConfig, energy: f64, extra: &ExtraPotential) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.energy = energy;
    let profile = material_profile(&cfg)?.with_extra(extra.clone());
    let sol = regular_solution(&profile, 0, Engine::Direct, &ode_options(&cfg))?;
    let l = cfg.outer_radius;
    let (u, flux) = sol.state_scaled(l)?;
    if u.is_zero() {
        return Ok(0.0);
    }
    let size = u.ln_abs().max(flux.scale(Complex64::new(1.0 / (l * l), 0.0)).ln_abs());
    Ok(Scaled::new(u.mant, u.exp - size).value().re)
}

/// Dirichlet s-wave eigenvalue on `B_L` with the extra potential `a V_eff`,
/// taken nearest the first-order prediction `E + 2 a E₁`. The configured `E`
/// is the unperturbed eigenvalue.
pub fn solve_with_coulomb(config: &HatConfig, a: f64, veff: &VeffTable, e1: f64) -> Result<CoulombSolution> {
    let e = config.energy;
    let table = Arc::new(veff.clone());
    let extra = ExtraPotential(Arc::new(move |r| a * table.eval(r)));
    let energy = if a == 0.0 {
        e
    } else {
        let pred = e + 2.0 * a * e1;
        let w = (pred - e).abs().max(1e-9 * e);
        let (lo, hi) = (pred - w, pred + w);
        let steps = 32;
        let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
        let vals = grid.iter().map(|&x| eigen_mismatch(config, x, &extra)).collect::<Result<Vec<_>>>()?;
        let mut best: Option<f64> = None;
        for k in 0..steps {
            let root = if vals[k] == 0.0 {
                Some(grid[k])
            } else if vals[k].signum() != vals[k + 1].signum() {
                Some(crate::roots::brent(|x| eigen_mismatch(config, x, &extra), grid[k], grid[k + 1], 1e-13 * e)?.root)
            } else {
                None
            };
            if let Some(r) = root {
                if best.is_none_or(|b| (r - pred).abs() < (b - pred).abs()) {
                    best = Some(r);
                }
            }
        }
        best.ok_or_else(|| {
            Error::Convergence(format!("no eigenvalue within {w:e} of the first-order prediction {pred}"))
        })?
    };
    let mut cfg = config.clone();
    cfg.energy = energy;
    let profile = material_profile(&cfg)?.with_extra(extra);
    let solution = regular_solution(&profile, 0, Engine::Direct, &ode_options(&cfg))?;
    Ok(CoulombSolution { energy, solution })
}

/// Central-difference `dE/da` at `a = 0` next to the first-order value `2 E₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeCheck {
    pub e1: f64,
    /// Coupling step `a` used on each side.
    pub step: f64,
    pub finite_difference: f64,
    pub first_order: f64,
}

/// Compares `(E(a) - E(-a)) / 2a` with `2 E₁`, with `a` chosen so that the
/// predicted shift is `rel_shift E`.
pub fn coulomb_slope(config: &HatConfig, rel_shift: f64) -> Result<SlopeCheck> {
    let d = Density::from_solution(&solve_radial(config)?.solution, config.quad_tol)?;
    let table = VeffTable::new(&d, 2000, config.quad_tol)?;
    let e1 =
        quad::integrate(|r| 2.0 * PI * r * r * d.eval(r) * table.eval(r), 0.0, d.extent, &table.r, config.quad_tol)?;
    let step = rel_shift * config.energy / e1;
    let up = solve_with_coulomb(config, step, &table, e1)?.energy;
    let down = solve_with_coulomb(config, -step, &table, e1)?.energy;
    Ok(SlopeCheck { e1, step, finite_difference: (up - down) / (2.0 * step), first_order: 2.0 * e1 })
}

/// Shells `(R₀/2, R₀)` with `τ₂ = −50 (0.8/R₀)²`: the eigen device shrunk
/// inside a fixed cloak, used for the `E₁` amplification trend.
pub fn shrunk_device(base: &HatConfig, r0: f64) -> HatConfig {
    let mut c = base.clone();
    let k = (0.8 / r0).powi(2);
    c.shells = vec![
        crate::cloakmodel::Shell { radius: r0 / 2.0, tau: 0.0 },
        crate::cloakmodel::Shell { radius: r0, tau: -50.0 * k },
    ];
    c
}
