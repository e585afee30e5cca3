//! Heterostructure realisation of a hat potential: length rescaling,
//! two-level quantisation, four-material mixing ratios, layer stacks and a
//! BenDaniel–Duke s-wave solver.
//!
//! Units have `ħ² = 2`, so a layer of mass `m` and band edge `V` obeys
//! `-∇·(1/m)∇ψ + (V - E)ψ = 0`.

use crate::cloakmodel::{cloaked_potential_q, ExtraPotential, HatConfig, Medium, RadialProfile, Region};
use crate::error::{Error, Result};
use crate::ode::OdeOptions;
use crate::quad;
use crate::radialode::{regular_solution, Engine, RadialSolution};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Tolerance used when validating ratios and the linear system residual.
const RATIO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub m: f64,
    pub v: f64,
}

/// Four materials sorted by effective mass, and the reference mass `m₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    pub materials: [Material; 4],
    pub m0: f64,
}

impl MaterialTable {
    pub fn new(masses: [f64; 4], potentials: [f64; 4], m0: f64) -> Result<Self> {
        if masses.iter().any(|m| !(*m > 0.0)) || !(m0 > 0.0) {
            return Err(Error::Config("effective masses must be positive".into()));
        }
        if masses.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("masses must satisfy m1 <= m2 <= m3 <= m4".into()));
        }
        if m0 < masses[0] || m0 > masses[3] {
            return Err(Error::Config("reference mass must lie in [m1, m4]".into()));
        }
        if potentials.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("band edges must be finite".into()));
        }
        let materials = std::array::from_fn(|i| Material { m: masses[i], v: potentials[i] });
        Ok(MaterialTable { materials, m0 })
    }

    /// Checks that the band edges bracket `[v_min, v_max]`.
    pub fn covers(&self, v_min: f64, v_max: f64) -> Result<()> {
        let hi = self.materials.iter().map(|m| m.v).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.materials.iter().map(|m| m.v).fold(f64::INFINITY, f64::min);
        if hi < v_max || lo > v_min {
            return Err(Error::Config(format!(
                "band edges [{lo}, {hi}] do not cover the target range [{v_min}, {v_max}]"
            )));
        }
        Ok(())
    }
}

/// Isotropic radial potential supported in `[0, support]`.
#[derive(Clone)]
pub struct RadialPotential {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: f64,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialPotential {{ support: {} }}", self.support)
    }
}

impl RadialPotential {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, support: f64) -> Self {
        RadialPotential { f: Arc::new(f), support }
    }

    /// Zero beyond the support.
    pub fn eval(&self, r: f64) -> f64 {
        if r > self.support {
            0.0
        } else {
            (self.f)(r)
        }
    }

    /// Sampled `(min, max)` over the support.
    pub fn range(&self, samples: usize) -> (f64, f64) {
        (0..=samples)
            .map(|k| self.eval(self.support * k as f64 / samples as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// The shell potential `Q` of a device with its steps smoothed by `tanh`
/// over `width`; cut off `12 width` beyond the last shell.
pub fn hat_potential(config: &HatConfig, width: f64) -> Result<RadialPotential> {
    config.validate()?;
    if !(width > 0.0) {
        return Err(Error::Config("mollifier width must be positive".into()));
    }
    let steps: Vec<(f64, f64)> = config
        .shells
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let inside =
                cloaked_potential_q(0.5 * (s.radius + if k == 0 { 0.0 } else { config.shells[k - 1].radius }), config);
            let outside =
                config.shells.get(k + 1).map_or(0.0, |t| cloaked_potential_q(0.5 * (s.radius + t.radius), config));
            (s.radius, inside - outside)
        })
        .collect();
    let support = config.shell_outer() + 12.0 * width;
    Ok(RadialPotential::new(
        move |r| steps.iter().map(|&(s, jump)| jump * 0.5 * (1.0 + ((s - r) / width).tanh())).sum(),
        support,
    ))
}

/// `V_ℓ(r) = ℓ⁻² V(r/ℓ)` and `E_ℓ = ℓ⁻² E`.
pub fn scale_hat(potential: &RadialPotential, energy: f64, ell: f64) -> Result<(RadialPotential, f64)> {
    if !(ell > 0.0) {
        return Err(Error::Config(format!("length scale must be positive, got {ell}")));
    }
    let f = potential.f.clone();
    let e2 = ell * ell;
    Ok((RadialPotential::new(move |r| f(r / ell) / e2, potential.support * ell), energy / e2))
}

/// One spherical layer; `material` is the 1-based table index, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub material: Option<usize>,
    pub inner: f64,
    pub outer: f64,
    pub m: f64,
    pub v: f64,
}

/// Contiguous layers starting at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    /// Mass of the surrounding medium (band edge 0).
    pub m0: f64,
}

impl LayerStack {
    pub fn outer_radius(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.outer)
    }

    /// Layers up to `radius`, padded with the reference medium.
    fn padded(&self, radius: f64) -> Result<Vec<Layer>> {
        let outer = self.outer_radius();
        if radius < outer * (1.0 - 1e-14) {
            return Err(Error::Domain(format!("radius {radius} lies inside the stack (outer radius {outer})")));
        }
        let mut layers = self.layers.clone();
        if radius > outer {
            layers.push(Layer { material: None, inner: outer, outer: radius, m: self.m0, v: 0.0 });
        }
        Ok(layers)
    }

    /// Band edge at `r` (0 outside the stack).
    pub fn potential_at(&self, r: f64) -> f64 {
        let k = self.layers.partition_point(|l| l.outer <= r);
        self.layers.get(k).map_or(0.0, |l| l.v)
    }
}

/// Replaces `V` on `n` uniform cells of its support by a wall of height
/// `v_plus` or a well of depth `v_minus` followed by a zero layer, with the
/// duty cycle matching the cell average of `V`.
pub fn quantize_two_level(potential: &RadialPotential, n: usize, v_plus: f64, v_minus: f64) -> Result<LayerStack> {
    if n == 0 || !(potential.support > 0.0) {
        return Err(Error::Config("quantisation needs at least one cell of positive width".into()));
    }
    let (lo, hi) = potential.range(64 * n);
    if v_plus < hi || v_minus < -lo {
        return Err(Error::Config(format!(
            "caps V+ = {v_plus}, V- = {v_minus} do not cover the potential range [{lo}, {hi}]"
        )));
    }
    let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    let h = potential.support / n as f64;
    let mut layers = Vec::with_capacity(2 * n);
    for k in 0..n {
        let a = k as f64 * h;
        let b = if k + 1 == n { potential.support } else { a + h };
        // The offset makes the tolerance relative to the potential's scale.
        let avg = quad::integrate(|r| potential.eval(r) + scale, a, b, &[], 1e-13)? / (b - a) - scale;
        let (level, duty) = if avg > 0.0 {
            (v_plus, avg / v_plus)
        } else if avg < 0.0 {
            (-v_minus, -avg / v_minus)
        } else {
            (0.0, 0.0)
        };
        let split = a + duty.min(1.0) * (b - a);
        for (inner, outer, v) in [(a, split, level), (split, b, 0.0)] {
            if outer > inner {
                layers.push(Layer { material: None, inner, outer, m: 1.0, v });
            }
        }
    }
    Ok(LayerStack { layers, m0: 1.0 })
}

/// Volume fractions `ℓ₁..ℓ₄` with unit sum, arithmetic and harmonic mean
/// mass `m₀`, and mean band edge `v_target`. Degenerate systems get the
/// minimum-norm solution.
pub fn layer_ratios(v_target: f64, table: &MaterialTable) -> Result<[f64; 4]> {
    let ms = table.materials;
    let a = Matrix4::from_fn(|i, j| match i {
        0 => 1.0,
        1 => ms[j].m,
        2 => 1.0 / ms[j].m,
        _ => ms[j].v,
    });
    let b = Vector4::new(1.0, table.m0, 1.0 / table.m0, v_target);
    let svd = a.svd(true, true);
    let eps = RATIO_TOL * svd.singular_values.max();
    let x = svd.solve(&b, eps).map_err(|e| Error::Infeasible(e.to_string()))?;
    let resid = (a * x - b).abs();
    let scale = b.abs().max().max(1.0);
    if resid.max() > 1e-10 * scale {
        return Err(Error::Infeasible(format!("mixing system is inconsistent for V = {v_target}")));
    }
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        if x[i] < -RATIO_TOL || x[i] > 1.0 + RATIO_TOL {
            return Err(Error::Infeasible(format!("ratio l{} = {} outside [0, 1] for V = {v_target}", i + 1, x[i])));
        }
        *o = x[i].clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Stack of `4J` layers cycling through the materials: layer `j` (1-based)
/// uses material `j mod 4` and has width `extent ℓ_i(R(j-1)) / J`, so
/// `extent = 1/2` gives widths `ℓ/(2J)`. Zero-width layers are dropped.
pub fn build_stack<F>(ratios: F, j: usize, extent: f64, table: &MaterialTable) -> Result<LayerStack>
where
    F: Fn(f64) -> Result<[f64; 4]>,
{
    if j == 0 || !(extent > 0.0) {
        return Err(Error::Config("stack needs J >= 1 and a positive extent".into()));
    }
    let mut layers = Vec::with_capacity(4 * j);
    let mut r = 0.0;
    for idx in 1..=4 * j {
        let i = (idx - 1) % 4;
        let width = extent * ratios(r)?[i] / j as f64;
        if width > 1e-15 * extent {
            let mat = table.materials[i];
            layers.push(Layer { material: Some(i + 1), inner: r, outer: r + width, m: mat.m, v: mat.v });
            r += width;
        }
    }
    Ok(LayerStack { layers, m0: table.m0 })
}

/// State of the BenDaniel–Duke s-wave sweep, with `u = f/r`.
#[derive(Debug, Clone)]
pub struct BddSweep {
    /// Interface radii, excluding 0 and the final radius.
    pub interfaces: Vec<f64>,
    /// `(1/m) r² u'` on both sides of each interface, in the sweep's running scale.
    pub fluxes: Vec<(f64, f64)>,
    /// `u'/u` just outside the final radius, in the reference medium.
    pub dtn: f64,
}

/// `(cos-like, sin-like / k)` for `f'' + k² f = 0` over a width `d`.
fn propagators(k2: f64, d: f64) -> (f64, f64, f64) {
    if k2 > 0.0 {
        let k = k2.sqrt();
        let (s, c) = (k * d).sin_cos();
        (c, s / k, -k * s)
    } else if k2 < 0.0 {
        let k = (-k2).sqrt();
        let (s, c) = ((k * d).sinh(), (k * d).cosh());
        (c, s / k, k * s)
    } else {
        (1.0, d, 0.0)
    }
}

/// Regular s-wave solution through the stack (padded to `radius`),
/// matching `u` and `(1/m) u'` at every interface.
pub fn bdd_sweep(stack: &LayerStack, energy: f64, radius: f64) -> Result<BddSweep> {
    let layers = stack.padded(radius)?;
    // f = r u starts as sin(k r)/k ~ r.
    let (mut f, mut df) = (0.0, 1.0);
    let mut interfaces = Vec::with_capacity(layers.len());
    let mut fluxes = Vec::with_capacity(layers.len());
    for (idx, l) in layers.iter().enumerate() {
        let (c, s, ks) = propagators(l.m * (energy - l.v), l.outer - l.inner);
        let (nf, ndf) = (c * f + s * df, ks * f + c * df);
        let norm = nf.abs().max(ndf.abs() * l.outer);
        (f, df) = (nf / norm, ndf / norm);
        if let Some(next) = layers.get(idx + 1) {
            let r = l.outer;
            let left = (r * df - f) / l.m;
            df = f / r + (next.m / l.m) * (df - f / r);
            let right = (r * df - f) / next.m;
            interfaces.push(r);
            fluxes.push((left, right));
        }
    }
    let last = layers.last().unwrap();
    let r = last.outer;
    if f.abs() < 1e-10 * (df * r).abs() {
        return Err(Error::Resonance(format!("u vanishes at r = {r} for E = {energy}")));
    }
    // Flux continuity into the reference medium.
    let dtn = (stack.m0 / last.m) * (df / f - 1.0 / r);
    Ok(BddSweep { interfaces, fluxes, dtn })
}

/// `u'/u` of the regular s-wave solution at `radius`.
pub fn bdd_dtn(stack: &LayerStack, energy: f64, radius: f64) -> Result<Complex64> {
    Ok(Complex64::new(bdd_sweep(stack, energy, radius)?.dtn, 0.0))
}

/// The stack as a radial profile with `σ = 1/m` and energy shift `-V`.
pub fn stack_profile(stack: &LayerStack, energy: f64, radius: f64) -> Result<RadialProfile> {
    let regions = stack
        .padded(radius)?
        .iter()
        .map(|l| Region {
            inner: l.inner,
            outer: l.outer,
            medium: Medium::Uniform { sigma: 1.0 / l.m, weight: 1.0, shift: -l.v },
        })
        .collect();
    RadialProfile::new(regions, energy)
}

/// Regular solution of order `n` through the stack, via the general radial engine.
pub fn bdd_solve(stack: &LayerStack, energy: f64, radius: f64, n: usize) -> Result<RadialSolution> {
    regular_solution(&stack_profile(stack, energy, radius)?, n, Engine::Auto, &OdeOptions::default())
}

/// Regular s-wave solution for a smooth potential in the reference medium.
pub fn smooth_solution(potential: &RadialPotential, m0: f64, energy: f64, radius: f64) -> Result<RadialSolution> {
    let v = potential.clone();
    let region =
        Region { inner: 0.0, outer: radius, medium: Medium::Uniform { sigma: 1.0 / m0, weight: 1.0, shift: 0.0 } };
    let profile = RadialProfile::new(vec![region], energy)?.with_extra(ExtraPotential(Arc::new(move |r| v.eval(r))));
    regular_solution(&profile, 0, Engine::Auto, &OdeOptions::default())
}

pub fn smooth_dtn(potential: &RadialPotential, m0: f64, energy: f64, radius: f64) -> Result<Complex64> {
    let sol = smooth_solution(potential, m0, energy, radius)?;
    let u = sol.value(radius)?;
    if u.norm() < 1e-10 * (sol.derivative(radius)?.norm() * radius) {
        return Err(Error::Resonance(format!("u vanishes at r = {radius} for E = {energy}")));
    }
    Ok(sol.derivative(radius)? / u)
}

/// Mean and variance of the Maxwell–Boltzmann energy above the band edge.
pub fn thermal_window(e_c: f64, temperature: f64, k_b: f64) -> Result<(f64, f64)> {
    if !(temperature >= 0.0) || !(k_b > 0.0) {
        return Err(Error::Config("need T >= 0 and k_B > 0".into()));
    }
    let kt = k_b * temperature;
    Ok((e_c + 1.5 * kt, 1.5 * kt * kt))
}

/// The `ℓ` for which a device designed at `energy` operates at `target`.
pub fn design_length_scale(energy: f64, target: f64) -> Result<f64> {
    if !(energy > 0.0 && target > 0.0) {
        return Err(Error::Config("design energies must be positive".into()));
    }
    Ok((energy / target).sqrt())
}

/// A smooth target potential to be built from a material table.
#[derive(Debug, Clone)]
pub struct HeteroDesign {
    pub target: RadialPotential,
    pub table: MaterialTable,
    pub energy: f64,
    /// Nominal stack radius passed to [`build_stack`].
    pub extent: f64,
    /// Radius at which DtN values are compared; must exceed every stack.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub j: usize,
    pub layers: usize,
    pub dtn: f64,
    /// `|DtN(stack) - DtN(target)|`.
    pub error: f64,
    /// Relative L² difference of the s-wave solutions normalised at `radius`.
    pub l2_error: f64,
}

impl HeteroDesign {
    pub fn ratios(&self, r: f64) -> Result<[f64; 4]> {
        layer_ratios(self.target.eval(r), &self.table)
    }

    pub fn stack(&self, j: usize) -> Result<LayerStack> {
        let (lo, hi) = self.target.range(4096);
        self.table.covers(lo, hi)?;
        build_stack(|r| self.ratios(r), j, self.extent, &self.table)
    }

    /// Stack-versus-target comparison for each `J`, computed in parallel.
    pub fn convergence(&self, js: &[usize]) -> Result<Vec<ConvergenceRow>> {
        let smooth = smooth_solution(&self.target, self.table.m0, self.energy, self.radius)?;
        let target_dtn = (smooth.derivative(self.radius)? / smooth.value(self.radius)?).re;
        let su = smooth.value(self.radius)?;
        js.par_iter()
            .map(|&j| {
                let stack = self.stack(j)?;
                let dtn = bdd_sweep(&stack, self.energy, self.radius)?.dtn;
                let sol = bdd_solve(&stack, self.energy, self.radius, 0)?;
                let bu = sol.value(self.radius)?;
                let edges: Vec<f64> = stack.layers.iter().map(|l| l.outer).collect();
                let diff = quad::integrate(
                    |r| {
                        let a = sol.value(r).unwrap_or_default() / bu;
                        let b = smooth.value(r).unwrap_or_default() / su;
                        (a - b).norm_sqr() * r * r
                    },
                    0.0,
                    self.radius,
                    &edges,
                    1e-10,
                )?;
                let norm = quad::integrate(
                    |r| (smooth.value(r).unwrap_or_default() / su).norm_sqr() * r * r,
                    0.0,
                    self.radius,
                    &[],
                    1e-10,
                )?;
                Ok(ConvergenceRow {
                    j,
                    layers: stack.layers.len(),
                    dtn,
                    error: (dtn - target_dtn).abs(),
                    l2_error: (diff / norm).sqrt(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_stack_has_free_dtn() {
        let table = MaterialTable::new([1.0; 4], [0.0; 4], 1.0).unwrap();
        let stack = build_stack(|_| Ok([0.25; 4]), 4, 1.0, &table).unwrap();
        let k = 1.3f64;
        let dtn = bdd_dtn(&stack, k * k, 2.0).unwrap().re;
        // u = sin(kr)/r.
        let x = k * 2.0;
        let want = k * x.cos() / x.sin() - 0.5;
        assert!((dtn - want).abs() < 1e-12);
    }
}
