use hatsim_core::cloakmodel::HatConfig;
use hatsim_core::fieldsolve::{solve_dirichlet_radial, solve_eigen_radial, solve_radial, EffectiveField};
use hatsim_core::observables::{
    ball_field, charge_qprime, coulomb_slope, coulomb_veff, e1_no_sh, e1_of, monte_game, perturbation_e1,
    probabilities, region_mass, shrunk_device, solve_with_coulomb, strength, Ball, Density, GameSpec, RadialDensity,
    VeffTable,
};
use hatsim_core::scaled::Scaled;
use hatsim_core::tuner::{find_tau1_sh, TunerOptions};
use hatsim_core::{Complex64, Error, Result};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

const TAU_SH: f64 = 12.90162469315908;

fn sh() -> HatConfig {
    HatConfig::two_shell(0.01, 2.0 * PI, 4.0, 0.6, TAU_SH, 0.8, -50.0)
}

fn regions() -> Vec<(String, (f64, f64))> {
    vec![("A".to_string(), (3.0, 2.0 * PI)), ("B".to_string(), (2.0, 2.0 * PI))]
}

#[test]
fn empty_ball_probability_has_a_closed_form() {
    let f = ball_field(&sh().empty_ball()).unwrap();
    let total = region_mass(&f, (0.0, 2.0 * PI), 1e-12).unwrap();
    let a = region_mass(&f, (3.0, 2.0 * PI), 1e-12).unwrap();
    // ∫ sin²(2r) dr = r/2 − sin(4r)/8.
    let exact = ((2.0 * PI - 3.0) / 2.0 + 12f64.sin() / 8.0) / PI;
    assert!((a / total - exact).abs() < 1e-10);
    assert!((exact - 0.5012).abs() < 1e-4);
}

#[test]
fn region_mass_edge_cases() {
    let f = ball_field(&sh()).unwrap();
    assert_eq!(region_mass(&f, (1.3, 1.3), 1e-10).unwrap(), 0.0);
    assert!(matches!(region_mass(&f, (1.0, 7.0), 1e-10), Err(Error::Domain(_))));
    let total = region_mass(&f, (0.0, 2.0 * PI), 1e-12).unwrap();
    let scaled = {
        let s = solve_radial(&sh()).unwrap();
        let mut s2 = s.clone();
        s2.solution.scale(Scaled::from_real(1.0 / total.sqrt()));
        EffectiveField::radial(s2, &sh()).unwrap()
    };
    assert!((region_mass(&scaled, (0.0, 2.0 * PI), 1e-12).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn masses_partition_the_ball() {
    for cfg in [sh(), sh().empty_ball()] {
        let f = ball_field(&cfg).unwrap();
        let parts: f64 =
            [(0.0, 1.0), (1.0, 2.0), (2.0, 2.0 * PI)].iter().map(|&iv| region_mass(&f, iv, 1e-12).unwrap()).sum();
        let total = region_mass(&f, (0.0, 2.0 * PI), 1e-12).unwrap();
        assert!((parts - total).abs() < 1e-8 * total);
    }
}

#[test]
fn probabilities_ignore_the_field_normalisation() {
    let cfg = sh();
    let base = solve_radial(&cfg).unwrap();
    let mut other = base.clone();
    other.solution.scale(Scaled::from_complex(Complex64::new(-2.5, 7.0)));
    let (f1, f2) = (EffectiveField::radial(base, &cfg).unwrap(), EffectiveField::radial(other, &cfg).unwrap());
    let p = |f: &EffectiveField| {
        region_mass(f, (3.0, 2.0 * PI), 1e-12).unwrap() / region_mass(f, (0.0, 2.0 * PI), 1e-12).unwrap()
    };
    assert!((p(&f1) - p(&f2)).abs() < 1e-12);
}

#[test]
fn probability_table_values() {
    let t = probabilities(&sh().empty_ball(), &sh(), &regions()).unwrap();
    let close = |v: f64, want: f64| (v - want).abs() < 0.01;
    assert!(close(t.probability("A", Ball::Empty).unwrap(), 0.5021));
    assert!(close(t.probability("A", Ball::Hat).unwrap(), 0.1355));
    assert!(close(t.probability("B", Ball::Empty).unwrap(), 0.7196));
    assert!(close(t.probability("B", Ball::Hat).unwrap(), 0.1941));
    let (ce, cs) = (t.conditional("A", Ball::Empty).unwrap(), t.conditional("A", Ball::Hat).unwrap());
    assert!(close(ce, 0.6977) && close(cs, 0.6977));
    assert!((ce - cs).abs() < 1e-3);
    assert_eq!(t.conditional("B", Ball::Hat).unwrap(), 1.0);
}

#[test]
fn mismatched_balls_are_rejected() {
    let mut other = sh().empty_ball();
    other.outer_radius = 5.0;
    assert!(matches!(probabilities(&other, &sh(), &regions()), Err(Error::Config(_))));
}

#[test]
fn exterior_conditionals_agree_to_first_order() {
    let mut prev = f64::INFINITY;
    for rho in [0.04, 0.02, 0.01] {
        let cfg = HatConfig::two_shell(rho, 5.0, 4.0, 0.6, 3.0, 0.8, -50.0);
        let t = probabilities(&cfg.empty_ball(), &cfg, &[("A".into(), (3.0, 5.0))]).unwrap();
        let gap = (t.conditional("A", Ball::Empty).unwrap() - t.conditional("A", Ball::Hat).unwrap()).abs();
        assert!(gap < prev, "rho = {rho}: {gap}");
        prev = gap;
    }
    assert!(prev < 0.02);
}

#[test]
fn strength_of_a_trivial_interior() {
    let cfg = HatConfig::two_shell(0.01, 5.0, 4.0, 0.6, 0.0, 0.8, 0.0);
    let norm2 = PI * (0.5 - 4f64.sin() / 8.0);
    let j = 2f64.sin() / 2.0;
    assert!((strength(&cfg).unwrap() - norm2 / (j * j)).abs() < 1e-9);
}

#[test]
fn strength_grows_with_the_wall_depth() {
    let o = TunerOptions::default();
    let mut s = Vec::new();
    for tau2 in [-25.0, -50.0] {
        let cfg = HatConfig::two_shell(0.01, 2.0 * PI, 4.0, 0.6, 0.0, 0.8, tau2);
        let t = find_tau1_sh(&cfg, (0.0, 40.0), &o).unwrap().tau1;
        s.push(strength(&cfg.with_tau1(t)).unwrap());
    }
    assert!(s[1] > s[0], "{s:?}");
}

#[test]
fn strength_predicts_the_trapped_mass() {
    let cfg = sh();
    let hat = solve_eigen_radial(&cfg).unwrap();
    let empty = solve_eigen_radial(&cfg.empty_ball()).unwrap();
    let inside = region_mass(&EffectiveField::radial(hat, &cfg).unwrap(), (0.0, 1.0), 1e-12).unwrap();
    let u0 = empty.value(0.0).unwrap().norm();
    let predicted = u0 * u0 * strength(&cfg).unwrap();
    assert!((inside / predicted - 1.0).abs() < 0.02, "{inside} vs {predicted}");
}

#[test]
fn monte_game_expectations() {
    let game = GameSpec { n_balls: 3, region: (3.0, 2.0 * PI) };
    let fair = monte_game(&game, &sh(), &sh()).unwrap();
    assert_eq!(fair.expected_profit, 0.0);
    let r = monte_game(&game, &sh().empty_ball(), &sh()).unwrap();
    assert!((r.a_em - r.a_sh).abs() < 1e-3 * r.a_em);
    assert!(r.mu_sh < r.mu_em);
    assert!((r.expected_profit - (r.mu_sh - r.mu_em) / 3.0).abs() < 1e-15);
    let bad = GameSpec { n_balls: 3, region: (1.5, 3.0) };
    assert!(matches!(monte_game(&bad, &sh().empty_ball(), &sh()), Err(Error::Config(_))));
    assert!(matches!(monte_game(&GameSpec { n_balls: 1, ..game }, &sh(), &sh()), Err(Error::Config(_))));
}

struct Confined;

impl RadialDensity for Confined {
    fn density(&self, r: f64) -> Result<f64> {
        Ok(if r < 0.9 { (0.9 - r).powi(2) } else { 0.0 })
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.9]
    }
    fn outer_radius(&self) -> f64 {
        2.0 * PI
    }
}

#[test]
fn trapped_charge_fraction() {
    assert!((charge_qprime(&Confined, &sh()).unwrap() - 1.0).abs() < 1e-12);
    let empty = ball_field(&sh().empty_ball()).unwrap();
    let q = charge_qprime(&empty, &sh()).unwrap();
    let direct = region_mass(&empty, (0.0, 1.0), 1e-10).unwrap() / region_mass(&empty, (0.0, 2.0 * PI), 1e-10).unwrap();
    assert!((q - direct).abs() < 1e-12);
    let hat = charge_qprime(&ball_field(&sh()).unwrap(), &sh()).unwrap();
    assert!(hat > 2.0 * q, "{hat} vs {q}");
    let t = probabilities(&sh().empty_ball(), &sh(), &regions()).unwrap();
    assert!(hat < 1.0 - t.probability("B", Ball::Hat).unwrap());
}

#[test]
fn uniform_ball_potential() {
    let delta = 0.3;
    let d = Density::uniform_ball(delta);
    for r in [0.3, 0.5, 2.0, 10.0] {
        assert!((coulomb_veff(&d, r, 1e-12).unwrap() - 1.0 / r).abs() < 1e-10);
    }
    assert!((coulomb_veff(&d, 0.0, 1e-12).unwrap() - 1.5 / delta).abs() < 1e-10);
    let table = VeffTable::new(&d, 500, 1e-12).unwrap();
    for r in [0.0, 0.1, 0.29, 0.31, 4.0] {
        assert!((table.eval(r) - coulomb_veff(&d, r, 1e-12).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn concentrated_density_looks_like_a_point_charge() {
    let q = 0.37;
    let w = 0.01;
    let d = Density::new(move |r| q * 3.0 / (4.0 * PI * w * w * w) * if r <= w { 1.0 } else { 0.0 }, w, vec![]);
    for r in [1.0, 3.0] {
        assert!((coulomb_veff(&d, r, 1e-12).unwrap() - q / r).abs() < 1e-10);
    }
}

#[test]
fn uniform_ball_self_energy() {
    for delta in [0.05, 0.3, 2.0] {
        let e1 = perturbation_e1(&Density::uniform_ball(delta), 1e-12).unwrap();
        assert!((e1 - 0.6 / delta).abs() < 1e-6 / delta, "{e1}");
    }
}

#[test]
fn self_energy_matches_a_monte_carlo_double_integral() {
    let delta = 0.5;
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut point = || loop {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0f64..1.0)];
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            break p.map(|v| v * delta);
        }
    };
    let n = 400_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let (x, y) = (point(), point());
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        acc += 1.0 / d;
    }
    let mc = 0.5 * acc / n as f64;
    let e1 = perturbation_e1(&Density::uniform_ball(delta), 1e-12).unwrap();
    assert!((mc - e1).abs() < 0.01 * e1, "{mc} vs {e1}");
}

#[test]
fn self_energy_scales_inversely_with_size() {
    let base = Density::new(|r| if r <= 1.0 { 15.0 / (8.0 * PI) * (1.0 - r * r) } else { 0.0 }, 1.0, vec![]);
    assert!((base.mass(1e-12).unwrap() - 1.0).abs() < 1e-12);
    let e = perturbation_e1(&base, 1e-12).unwrap();
    for delta in [0.1, 0.5, 4.0] {
        let ed = perturbation_e1(&base.dilated(delta), 1e-12).unwrap();
        assert!((ed * delta - e).abs() < 1e-8 * e);
    }
}

#[test]
fn hat_amplifies_the_interaction_as_it_shrinks() {
    let e1_empty = e1_no_sh(&sh().empty_ball()).unwrap();
    assert!(e1_of(&sh()).unwrap() > e1_empty);
    let mut prev = 0.0;
    for r0 in [0.4, 0.2, 0.1] {
        let c = shrunk_device(&sh(), r0);
        let k = (0.8f64 / r0).powi(2);
        let opts = TunerOptions { scan_step: 0.25 * k, ..TunerOptions::default() };
        let t = find_tau1_sh(&c, (0.0, 40.0 * k), &opts).unwrap().tau1;
        let ratio = e1_of(&c.with_tau1(t)).unwrap() / e1_empty;
        assert!(ratio > prev, "R0 = {r0}: {ratio}");
        prev = ratio;
    }
}

#[test]
fn coulomb_eigenvalue_shift_follows_first_order_theory() {
    for cfg in [sh().empty_ball(), sh()] {
        let c = coulomb_slope(&cfg, 1e-3).unwrap();
        assert!((c.finite_difference / c.first_order - 1.0).abs() < 0.05, "{c:?}");
    }
}

#[test]
fn coulomb_solve_edge_cases() {
    let cfg = sh().empty_ball();
    let d = Density::uniform_ball(1.0);
    let table = VeffTable::new(&d, 100, 1e-10).unwrap();
    assert_eq!(solve_with_coulomb(&cfg, 0.0, &table, 0.6).unwrap().energy, cfg.energy);
    // A predictor on the wrong side of the true shift finds nothing nearby.
    let wrong = solve_with_coulomb(&cfg, 1e-3, &table, -0.6);
    assert!(matches!(wrong, Err(Error::Convergence(_))), "{wrong:?}");
}

#[test]
fn dirichlet_field_feeds_the_same_density() {
    let cfg = HatConfig::two_shell(0.01, 5.0, 4.0, 0.6, 3.0, 0.8, -50.0);
    let s = solve_dirichlet_radial(&cfg, Complex64::new(2.0, 0.0)).unwrap();
    let d = Density::from_solution(&s.solution, 1e-10).unwrap();
    assert!((d.mass(1e-12).unwrap() - 1.0).abs() < 1e-9);
}
