use hatsim_core::cloakmodel::{material_profile, HatConfig, Medium, RadialProfile, Region};
use hatsim_core::ode::OdeOptions;
use hatsim_core::radialode::{
    dtn_harmonic, integrate, propagate, regular_solution, transfer_matrix, CauchyData, Engine, RadialSolution,
};
use hatsim_core::roots::brent;
use hatsim_core::tuner::{dirichlet_mismatch, find_tau1_dirichlet, TunerOptions};
use hatsim_core::{Complex64, Error};
use proptest::prelude::*;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn eigen_config() -> HatConfig {
    HatConfig::two_shell(0.01, 2.0 * std::f64::consts::PI, 4.0, 0.6, 12.9016, 0.8, -50.0)
}

fn shell_profile(e: f64) -> RadialProfile {
    let regions = vec![
        Region { inner: 0.0, outer: 0.6, medium: Medium::Uniform { sigma: 1.0, weight: 1.0, shift: 9.0 } },
        Region { inner: 0.6, outer: 0.8, medium: Medium::Uniform { sigma: 1.0, weight: 1.0, shift: -50.0 } },
        Region { inner: 0.8, outer: 1.7, medium: Medium::Uniform { sigma: 0.5, weight: 2.0, shift: 0.0 } },
        Region { inner: 1.7, outer: 4.0, medium: Medium::free() },
    ];
    RadialProfile::new(regions, e).unwrap()
}

fn j0(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn j1(x: f64) -> f64 {
    x.sin() / (x * x) - x.cos() / x
}

fn sup_rel(a: &RadialSolution, b: &RadialSolution, radii: &[f64]) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for &r in radii {
        let (ua, ub) = (a.value(r).unwrap(), b.value(r).unwrap());
        num = num.max((ua - ub).norm());
        den = den.max(ua.norm());
    }
    num / den
}

#[test]
fn engines_agree_on_layered_profile() {
    let p = shell_profile(4.0);
    let opts = OdeOptions::default();
    let radii: Vec<f64> = (1..=80).map(|k| 0.05 * k as f64).collect();
    for n in [0, 1, 3, 8, 20] {
        let a = regular_solution(&p, n, Engine::Auto, &opts).unwrap();
        let d = regular_solution(&p, n, Engine::Direct, &opts).unwrap();
        let err = sup_rel(&a, &d, &radii);
        assert!(err < 1e-8, "n = {n}: {err:e}");
    }
}

#[test]
fn engines_agree_through_the_cloak_layer() {
    let p = material_profile(&eigen_config()).unwrap();
    let opts = OdeOptions::default();
    let radii: Vec<f64> = (1..=120).map(|k| 0.05 * k as f64).collect();
    for n in [0, 2, 5] {
        let a = regular_solution(&p, n, Engine::Auto, &opts).unwrap();
        let d = regular_solution(&p, n, Engine::Direct, &opts).unwrap();
        let err = sup_rel(&a, &d, &radii);
        assert!(err < 1e-8, "n = {n}: {err:e}");
    }
}

#[test]
fn inward_free_space_reaches_j0() {
    let l = 2.0 * std::f64::consts::PI;
    let p = RadialProfile::new(vec![Region { inner: 0.0, outer: l, medium: Medium::free() }], 4.0).unwrap();
    let from = CauchyData::new(
        l,
        c(j0(2.0 * l)),
        c(2.0 * ((2.0 * l).cos() / (2.0 * l) - (2.0 * l).sin() / (2.0 * l).powi(2))),
    );
    let sol = integrate(&p, 0, &from, 1.0, &OdeOptions::default()).unwrap();
    assert!((sol.value(1.0).unwrap().re - 0.4546487134128409).abs() < 1e-8);
    let back = propagate(&p, 0, &from, 1.0, &OdeOptions::default()).unwrap();
    assert!((back.u.re * back.log_scale.exp() - 0.4546487134128409).abs() < 1e-12);
}

#[test]
fn regular_start_follows_j1() {
    let p = RadialProfile::new(vec![Region { inner: 0.0, outer: 3.0, medium: Medium::free() }], 4.0).unwrap();
    let x = 0.02;
    let from = CauchyData::new(0.01, c(j1(x)), c(2.0 * (j0(x) - 2.0 * j1(x) / x)));
    let sol = integrate(&p, 1, &from, 1.0, &OdeOptions::default()).unwrap();
    assert!((sol.value(1.0).unwrap().re - j1(2.0)).abs() < 1e-8);
}

#[test]
fn uniform_region_matches_transfer_matrix() {
    let p = shell_profile(4.0);
    let opts = OdeOptions::default();
    let from = CauchyData::new(0.1, c(0.3), c(-1.2));
    let sol = integrate(&p, 2, &from, 0.55, &opts).unwrap();
    let (u, f) = sol.state_scaled(0.55).unwrap();
    let m = transfer_matrix(&p, 2, 0.1, 0.55, &opts).unwrap();
    let f0 = c(-1.2 * 0.01);
    let mu = (
        m.entry(0, 0).value() * 0.3 + m.entry(0, 1).value() * f0,
        m.entry(1, 0).value() * 0.3 + m.entry(1, 1).value() * f0,
    );
    assert!((mu.0 - u.value()).norm() < 1e-9 * u.abs().max(1.0));
    assert!((mu.1 - f.value()).norm() < 1e-9 * f.abs().max(1.0));
}

#[test]
fn state_is_continuous_across_interfaces() {
    let cfg = eigen_config();
    let p = material_profile(&cfg).unwrap();
    let sol = regular_solution(&p, 0, Engine::Auto, &OdeOptions::default()).unwrap();
    for seg in sol.segments.windows(2) {
        let r = seg[0].outer;
        let left = seg[0].clone();
        let right = seg[1].clone();
        let (ul, fl) = RadialSolution { n: 0, segments: vec![left], profile: p.clone() }.state_scaled(r).unwrap();
        let (ur, fr) = RadialSolution { n: 0, segments: vec![right], profile: p.clone() }.state_scaled(r).unwrap();
        assert!((ul - ur).abs() <= 1e-12 * ul.abs().max(fl.abs()), "u jumps at {r}");
        assert!((fl - fr).abs() <= 1e-12 * ul.abs().max(fl.abs()), "flux jumps at {r}");
    }
}

#[test]
fn inward_data_outside_the_shells_ignore_tau1() {
    let l = 2.0 * std::f64::consts::PI;
    let w = 2.0;
    let from = CauchyData::new(l, c(j0(w * l)), c(w * ((w * l).cos() / (w * l) - (w * l).sin() / (w * l).powi(2))));
    let opts = OdeOptions::default();
    let mut out = Vec::new();
    for tau in [3.0, 12.9016] {
        let p = material_profile(&eigen_config().with_tau1(tau)).unwrap();
        out.push(propagate(&p, 0, &from, 0.8, &opts).unwrap());
    }
    let v = |d: &CauchyData| (d.u * d.log_scale.exp(), d.du_dr * d.log_scale.exp());
    let (a, b) = (v(&out[0]), v(&out[1]));
    assert!((a.0 - b.0).norm() <= 1e-12 * a.0.norm().max(a.1.norm()));
    assert!((a.1 - b.1).norm() <= 1e-12 * a.0.norm().max(a.1.norm()));
}

#[test]
fn empty_ball_dtn_is_free() {
    let cfg = HatConfig { outer_radius: 5.0, ..eigen_config().empty_ball() };
    let x: f64 = 10.0;
    let expect = 2.0 * ((x.cos() / x - x.sin() / (x * x)) / j0(x));
    let got = dtn_harmonic(&cfg, 0).unwrap();
    assert!((got.re - expect).abs() < 1e-12 && got.im == 0.0);
    // ωL = 4π: u(L) = 0 for the free ball.
    assert!(matches!(dtn_harmonic(&eigen_config().empty_ball(), 0), Err(Error::Resonance(_))));
}

#[test]
fn higher_harmonic_dtn_approaches_free_value_as_rho_shrinks() {
    let free = |n: usize| {
        let cfg = HatConfig::two_shell(0.04, 5.0, 4.0, 0.6, 12.9016, 0.8, -50.0).empty_ball();
        dtn_harmonic(&cfg, n).unwrap()
    };
    for n in [1, 2] {
        let f = free(n);
        let mut prev = f64::INFINITY;
        for rho in [0.04, 0.02, 0.01] {
            let cfg = HatConfig::two_shell(rho, 5.0, 4.0, 0.6, 12.9016, 0.8, -50.0);
            let d = (dtn_harmonic(&cfg, n).unwrap() - f).norm();
            assert!(d < prev, "n = {n}, rho = {rho}: {d:e} not below {prev:e}");
            prev = d;
        }
    }
}

#[test]
fn dirichlet_resonance_raises() {
    let cfg = HatConfig::two_shell(0.01, 5.0, 4.0, 0.6, 0.0, 0.8, -25.0);
    let rough = find_tau1_dirichlet(&cfg, (0.0, 40.0), &TunerOptions::default()).unwrap();
    let step = 1e-3;
    let root = brent(|t| dirichlet_mismatch(t, &cfg), rough.tau1 - step, rough.tau1 + step, 1e-15).unwrap();
    assert!(matches!(dtn_harmonic(&cfg.with_tau1(root.root), 0), Err(Error::Resonance(_))));
    assert!(dtn_harmonic(&cfg.with_tau1(root.root + 0.05), 0).is_ok());
}

fn liouville_profile() -> RadialProfile {
    shell_profile(4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transfer_matrices_compose(a in 0.01f64..1.3, b in 0.01f64..1.3, cc in 0.01f64..4.0, n in 0usize..12) {
        let mut r = [a, a + b, (a + b + cc).min(4.0)];
        r.sort_by(f64::total_cmp);
        let p = liouville_profile();
        let o = OdeOptions::default();
        let m1 = transfer_matrix(&p, n, r[0], r[1], &o).unwrap();
        let m2 = transfer_matrix(&p, n, r[1], r[2], &o).unwrap();
        let m = transfer_matrix(&p, n, r[0], r[2], &o).unwrap();
        let prod = m2.compose(&m1);
        for i in 0..2 {
            for j in 0..2 {
                let d = (prod.entry(i, j) - m.entry(i, j)).abs();
                prop_assert!(d <= 1e-10 * m.log_scale.exp(), "{i}{j}: {d:e}");
            }
        }
    }

    #[test]
    fn transfer_determinant_follows_liouville(ra in 0.05f64..3.9, rb in 0.05f64..3.9, n in 0usize..10) {
        // In (u, F) variables the map has unit determinant; in (u, u') this is σ_a r_a² / (σ_b r_b²).
        let p = liouville_profile();
        let m = transfer_matrix(&p, n, ra, rb, &OdeOptions::default()).unwrap();
        let det_uf = m.det();
        let (sa, sb) = (p.sigma_r(ra), p.sigma_r(rb));
        let det_uu = det_uf * (sa * ra * ra) / (sb * rb * rb);
        prop_assert!((det_uf - 1.0).norm() < 1e-8 * (2.0 * m.log_scale).exp().max(1.0));
        prop_assert!((det_uu - (sa * ra * ra) / (sb * rb * rb)).norm() < 1e-8 * (2.0 * m.log_scale).exp().max(1.0) * (sa * ra * ra) / (sb * rb * rb));
    }

    #[test]
    fn flux_is_conserved(re in -2.0f64..2.0, im in -2.0f64..2.0, n in 0usize..6, direct in any::<bool>()) {
        let p = shell_profile(4.0);
        let from = CauchyData::new(4.0, Complex64::new(1.0, 0.3), Complex64::new(re, im));
        let o = OdeOptions::default();
        let sol = if direct { integrate(&p, n, &from, 0.2, &o).unwrap() } else {
            hatsim_core::radialode::regular_solution(&p, n, Engine::Auto, &o).unwrap()
        };
        // Returns the flux and the local size |u||F| that sets its rounding level.
        let flux = |r: f64| {
            let (u, f) = sol.state_scaled(r).unwrap();
            ((u.conj() * f).value().im, u.abs() * f.abs())
        };
        let (f0, s0) = flux(3.9);
        for r in [0.3, 0.59, 0.61, 0.7, 1.0, 1.69, 1.71, 2.5, 3.5] {
            let (fr, sr) = flux(r);
            prop_assert!((fr - f0).abs() < 1e-8 * s0.max(sr), "r = {r}");
        }
    }

    #[test]
    fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 0usize..5) {
        let p = shell_profile(4.0);
        let o = OdeOptions::default();
        let d1 = CauchyData::new(3.0, c(1.0), c(0.0));
        let d2 = CauchyData::new(3.0, c(0.0), c(1.0));
        let d = CauchyData::new(3.0, c(a), c(b));
        let s1 = integrate(&p, n, &d1, 0.3, &o).unwrap();
        let s2 = integrate(&p, n, &d2, 0.3, &o).unwrap();
        let s = integrate(&p, n, &d, 0.3, &o).unwrap();
        for r in [0.3, 0.7, 1.2, 2.9] {
            let lin = s1.value(r).unwrap() * a + s2.value(r).unwrap() * b;
            let v = s.value(r).unwrap();
            let size = s1.value(r).unwrap().norm() * a.abs() + s2.value(r).unwrap().norm() * b.abs();
            prop_assert!((lin - v).norm() <= 1e-8 * size.max(1e-300));
        }
        let twice = integrate(&p, n, &CauchyData::new(3.0, c(2.0 * a), c(2.0 * b)), 0.3, &o).unwrap();
        let (v2, v1) = (twice.value(0.5).unwrap(), s.value(0.5).unwrap());
        let size = s1.value(0.5).unwrap().norm() * a.abs() + s2.value(0.5).unwrap().norm() * b.abs();
        prop_assert!((v2 - v1 * 2.0).norm() <= 1e-13 * size.max(1e-300));
    }

    #[test]
    fn regular_branch_vanishes_like_r_to_the_n(n in 1usize..15, direct in any::<bool>()) {
        let p = shell_profile(4.0);
        let engine = if direct { Engine::Direct } else { Engine::Auto };
        let sol = regular_solution(&p, n, engine, &OdeOptions::default()).unwrap();
        let r1 = 2e-3;
        let r2 = 4e-3;
        let ratio = sol.value(r2).unwrap().norm() / sol.value(r1).unwrap().norm();
        prop_assert!((ratio.log2() - n as f64).abs() < 1e-3, "n = {n}: {}", ratio.log2());
    }
}
