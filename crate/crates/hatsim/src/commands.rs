use crate::config::{RunConfig, Source};
use crate::error::{CliError, CliResult};
use crate::output::{num, CsvSink};
use hatsim_core::cloakmodel::HatConfig;
use hatsim_core::fieldsolve::{effective_field, solve_plane_wave, solve_radial, EffectiveField};
use hatsim_core::hetero::{
    bdd_dtn, design_length_scale, hat_potential, scale_hat, thermal_window, HeteroDesign, MaterialTable,
};
use hatsim_core::observables::{
    ball_field, charge_qprime, coulomb_slope, e1_no_sh, monte_game, probabilities, strength, Density, GameSpec,
    VeffTable,
};
use hatsim_core::tuner::{classify_mode, find_tau1_resonance, find_tau1_sh, TunerOptions};
use hatsim_core::{Complex64, Error};

/// A cut through the ball: the plane `coord = value` or a coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    Plane { axis: usize, value: f64 },
    Axis(usize),
}

fn axis_index(name: &str) -> CliResult<usize> {
    match name.trim() {
        "x" => Ok(0),
        "y" => Ok(1),
        "z" => Ok(2),
        other => Err(CliError::Validation(format!("unknown axis `{other}` (expected x, y or z)"))),
    }
}

pub fn parse_plane(spec: &str) -> CliResult<Cut> {
    let (axis, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("plane must look like `z=0`, got `{spec}`")))?;
    let value: f64 = value.trim().parse().map_err(|_| CliError::Validation(format!("bad plane offset in `{spec}`")))?;
    Ok(Cut::Plane { axis: axis_index(axis)?, value })
}

pub fn parse_axis(spec: &str) -> CliResult<Cut> {
    Ok(Cut::Axis(axis_index(spec)?))
}

pub struct Context {
    pub cfg: RunConfig,
    pub sink: CsvSink,
}

impl Context {
    fn tuner(&self) -> TunerOptions {
        TunerOptions { scan_step: self.cfg.run.scan_step, tol: self.cfg.run.tune_tol, ..TunerOptions::default() }
    }

    /// The device with `tau1` filled in, tuning onto the hat root if needed.
    fn device(&mut self) -> CliResult<HatConfig> {
        if self.cfg.tau1_given || self.cfg.hat.shells.is_empty() {
            return Ok(self.cfg.hat.clone());
        }
        let root = find_tau1_sh(&self.cfg.hat, self.cfg.run.bracket, &self.tuner())?;
        self.sink.note(format!("tau1 tuned: {}", num(root.tau1)));
        println!("tau1_sh={:.10}", root.tau1);
        self.cfg.tau1_given = true;
        self.cfg.hat = self.cfg.hat.with_tau1(root.tau1);
        Ok(self.cfg.hat.clone())
    }

    fn radii(&self, from: f64, to: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect()
    }
}

pub fn tune(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.cfg.hat.clone();
    let opts = ctx.tuner();
    let bracket = ctx.cfg.run.bracket;
    let th = ctx.cfg.run.thresholds;
    let sh = find_tau1_sh(&cfg, bracket, &opts)?;
    println!("tau1_sh={:.10}", sh.tau1);
    let mut reports = vec![classify_mode(sh.tau1, &cfg, &th)?];
    match find_tau1_resonance(&cfg, bracket, &opts) {
        Ok(r) => {
            println!("tau1_res={:.10}", r.tau1);
            reports.push(classify_mode(r.tau1, &cfg, &th)?);
        }
        Err(Error::NoRoot(_)) => println!("tau1_res=none"),
        Err(e) => return Err(e.into()),
    }
    if let Some(t) = ctx.cfg.run.cloak_tau {
        reports.push(classify_mode(t, &cfg, &th)?);
    }
    for r in &reports {
        println!("mode[{}]={}", num(r.tau1), r.mode.label());
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![r.mode.label().to_string(), num(r.tau1), num(r.far_field_residual), num(r.interior_amplitude)])
        .collect();
    ctx.sink.write("tune.csv", &["mode", "tau1", "residual", "interior_amplitude"], &rows, &[])?;
    Ok(())
}

fn radial_rows(field: &EffectiveField, radii: &[f64]) -> CliResult<Vec<Vec<String>>> {
    let values = effective_field(field, &radii.iter().map(|&r| [r, 0.0, 0.0]).collect::<Vec<_>>())?;
    Ok(radii.iter().zip(values).map(|(&r, v)| vec![num(r), num(v.re), num(v.im), num(v.norm())]).collect())
}

fn probs_rows(ctx: &mut Context) -> CliResult<Vec<Vec<String>>> {
    let cfg = ctx.device()?;
    let table = probabilities(&cfg.empty_ball(), &cfg, &ctx.cfg.regions)?;
    let mut rows = Vec::new();
    for r in &table.rows {
        println!("P[{}|{}]={:.6}", r.name, r.ball.label(), r.probability);
        rows.push(vec![r.name.clone(), r.ball.label().into(), num(r.mass), num(r.total), num(r.probability)]);
    }
    for c in &table.conditionals {
        let mass = table.rows.iter().find(|r| r.name == c.name && r.ball == c.ball).map_or(f64::NAN, |r| r.mass);
        println!("P[{}|{}, exterior]={:.6}", c.name, c.ball.label(), c.probability);
        rows.push(vec![
            format!("{}|exterior", c.name),
            c.ball.label().into(),
            num(mass),
            num(mass / c.probability),
            num(c.probability),
        ]);
    }
    Ok(rows)
}

const PROB_HEADER: [&str; 5] = ["region", "ball", "mass", "total", "probability"];

pub fn probs(ctx: &mut Context) -> CliResult<()> {
    let rows = probs_rows(ctx)?;
    ctx.sink.write("probs.csv", &PROB_HEADER, &rows, &[])?;
    Ok(())
}

pub fn eigen(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.device()?;
    let radii = ctx.radii(0.0, cfg.outer_radius, ctx.cfg.run.radial_points);
    for (name, c) in [("field_sh.csv", cfg.clone()), ("field_empty.csv", cfg.empty_ball())] {
        let rows = radial_rows(&ball_field(&c)?, &radii)?;
        ctx.sink.write(name, &["r", "re", "im", "abs"], &rows, &[])?;
    }
    if !cfg.shells.is_empty() {
        println!("strength={:.8}", strength(&cfg)?);
    }
    let rows = probs_rows(ctx)?;
    ctx.sink.write("probs.csv", &PROB_HEADER, &rows, &[])?;
    Ok(())
}

pub fn monte(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.device()?;
    let name = ctx.cfg.run.monte_region.clone();
    let region = ctx
        .cfg
        .regions
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, r)| *r)
        .ok_or_else(|| CliError::Validation(format!("monte_region `{name}` is not defined in [regions]")))?;
    let game = GameSpec { n_balls: ctx.cfg.run.monte_balls, region };
    let r = monte_game(&game, &cfg.empty_ball(), &cfg)?;
    println!("mu_em={:.8}\nmu_sh={:.8}\nexpected_profit={:.8}", r.mu_em, r.mu_sh, r.expected_profit);
    let header = ["a_em", "c_em", "a_sh", "c_sh", "mu_em", "mu_sh", "expected_profit"];
    let row = [r.a_em, r.c_em, r.a_sh, r.c_sh, r.mu_em, r.mu_sh, r.expected_profit].map(num).to_vec();
    ctx.sink.write("monte.csv", &header, &[row], &[format!("balls: {}, region: {name}", game.n_balls)])?;
    Ok(())
}

pub fn interact(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.device()?;
    let slope = coulomb_slope(&cfg, ctx.cfg.run.coulomb_shift)?;
    let e1_empty = e1_no_sh(&cfg.empty_ball())?;
    let qprime = charge_qprime(&ball_field(&cfg)?, &cfg)?;
    let summary = [
        ("e1_sh", slope.e1),
        ("e1_empty", e1_empty),
        ("e1_ratio", slope.e1 / e1_empty),
        ("qprime", qprime),
        ("coupling_step", slope.step),
        ("slope_finite_difference", slope.finite_difference),
        ("slope_first_order", slope.first_order),
    ];
    for (k, v) in summary {
        println!("{k}={v:.8}");
    }
    let rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    ctx.sink.write("interact.csv", &["quantity", "value"], &rows, &[])?;
    let d = Density::from_solution(&solve_radial(&cfg)?.solution, cfg.quad_tol)?;
    let table = VeffTable::new(&d, 2000, cfg.quad_tol)?;
    let rows: Vec<Vec<String>> = ctx
        .radii(0.0, cfg.outer_radius, ctx.cfg.run.radial_points)
        .into_iter()
        .map(|r| vec![num(r), num(table.eval(r))])
        .collect();
    ctx.sink.write("veff.csv", &["r", "veff"], &rows, &[])?;
    Ok(())
}

pub fn hetero(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.device()?;
    let p = ctx.cfg.hetero.clone();
    let (target, energy) = scale_hat(&hat_potential(&cfg, p.width)?, cfg.energy, p.ell)?;
    let table = MaterialTable::new(p.masses, p.potentials, p.m0)?;
    let extent = p.extent.unwrap_or(target.support);
    let design = HeteroDesign { target, table, energy, extent, radius: p.radius_factor * extent };
    println!("energy_scaled={:.8}", energy);

    let ratio_rows = ctx
        .radii(0.0, extent, ctx.cfg.run.radial_points)
        .into_iter()
        .map(|r| {
            let l = design.ratios(r)?;
            Ok(vec![num(r), num(design.target.eval(r)), num(l[0]), num(l[1]), num(l[2]), num(l[3])])
        })
        .collect::<CliResult<Vec<_>>>()?;
    ctx.sink.write("ratios.csv", &["r", "v_target", "l1", "l2", "l3", "l4"], &ratio_rows, &[])?;

    let stack = design.stack(p.stack_j)?;
    let rows: Vec<Vec<String>> = stack
        .layers
        .iter()
        .map(|l| vec![l.material.map_or("0".into(), |m| m.to_string()), num(l.inner), num(l.outer), num(l.m), num(l.v)])
        .collect();
    let units = vec![
        "units: hbar^2 = 2, masses relative to m0, lengths in device units times ell".to_string(),
        format!("J: {}, ell: {}", p.stack_j, num(p.ell)),
    ];
    ctx.sink.write("stack.csv", &["material_index", "r_inner", "r_outer", "m", "V"], &rows, &units)?;
    println!("stack_dtn={:.8}", bdd_dtn(&stack, energy, design.radius)?.re);

    let conv = design.convergence(&p.js)?;
    for r in &conv {
        println!("J={} error={:.3e} l2_error={:.3e}", r.j, r.error, r.l2_error);
    }
    let rows: Vec<Vec<String>> = conv
        .iter()
        .map(|r| vec![r.j.to_string(), r.layers.to_string(), num(r.dtn), num(r.error), num(r.l2_error)])
        .collect();
    ctx.sink.write("convergence.csv", &["j", "layers", "dtn", "error", "l2_error"], &rows, &[])?;

    if p.temperature > 0.0 {
        let (e_av, var) = thermal_window(0.0, p.temperature, p.k_b)?;
        println!("thermal_mean={:.8}\nthermal_variance={:.8}", e_av, var);
        println!("design_ell={:.8}", design_length_scale(cfg.energy, e_av)?);
    }
    Ok(())
}

fn grid_field(cfg: &HatConfig, source: Source, direction: [f64; 3]) -> CliResult<EffectiveField> {
    Ok(match source {
        Source::Radial => ball_field(cfg)?,
        Source::Plane => EffectiveField::plane_wave(&solve_plane_wave(cfg, direction)?, cfg)?,
    })
}

fn dump_cut(ctx: &Context, field: &EffectiveField, cut: Cut, n: usize, name: &str) -> CliResult<()> {
    let l = field.outer_radius;
    let coords = ctx.radii(-l, l, n);
    // Stay strictly inside the ball, where the field is defined.
    let inside = |x: &[f64; 3]| x.iter().map(|v| v * v).sum::<f64>().sqrt() < l * (1.0 - 1e-12);
    match cut {
        Cut::Plane { axis, value } => {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let (a, b) = (a.min(b), a.max(b));
            let mut pts = Vec::new();
            for &u in &coords {
                for &v in &coords {
                    let mut x = [0.0; 3];
                    x[axis] = value;
                    x[a] = u;
                    x[b] = v;
                    if inside(&x) {
                        pts.push(x);
                    }
                }
            }
            let vals = effective_field(field, &pts)?;
            let rows: Vec<Vec<String>> = pts
                .iter()
                .zip(vals)
                .map(|(x, v)| vec![num(x[a]), num(x[b]), num(v.re), num(v.im), num(v.norm())])
                .collect();
            let meta = [format!("plane: {}={}", ["x", "y", "z"][axis], num(value))];
            ctx.sink.write(name, &["x", "y", "re", "im", "abs"], &rows, &meta)?;
        }
        Cut::Axis(axis) => {
            let pts: Vec<[f64; 3]> = coords
                .iter()
                .map(|&t| {
                    let mut x = [0.0; 3];
                    x[axis] = t;
                    x
                })
                .filter(inside)
                .collect();
            let vals = effective_field(field, &pts)?;
            let rows: Vec<Vec<String>> = pts
                .iter()
                .zip(vals)
                .map(|(x, v): (&[f64; 3], Complex64)| vec![num(x[axis]), num(v.re), num(v.im), num(v.norm())])
                .collect();
            let meta = [format!("axis: {}", ["x", "y", "z"][axis])];
            ctx.sink.write(name, &["r", "re", "im", "abs"], &rows, &meta)?;
        }
    }
    Ok(())
}

pub fn scatter(ctx: &mut Context, cut: Option<Cut>, grid: Option<usize>) -> CliResult<()> {
    let cfg = ctx.device()?;
    let pw = solve_plane_wave(&cfg, ctx.cfg.run.direction)?;
    println!("far_field_residual={:.6e}", pw.far_field_residual()?);
    println!("truncation_warning={}", pw.truncation_warning);
    let rows: Vec<Vec<String>> = pw
        .scattering_coefficients()
        .iter()
        .enumerate()
        .map(|(n, c)| vec![n.to_string(), num(c.re), num(c.im), num(c.norm())])
        .collect();
    ctx.sink.write("coefficients.csv", &["n", "re", "im", "abs"], &rows, &[])?;
    if let Some(cut) = cut {
        let field = EffectiveField::plane_wave(&pw, &cfg)?;
        dump_cut(ctx, &field, cut, grid.unwrap_or(ctx.cfg.run.grid), "scatter_grid.csv")?;
    }
    Ok(())
}

pub fn field_dump(ctx: &mut Context, cut: Cut, grid: Option<usize>) -> CliResult<()> {
    let cfg = ctx.device()?;
    let field = grid_field(&cfg, ctx.cfg.run.source, ctx.cfg.run.direction)?;
    dump_cut(ctx, &field, cut, grid.unwrap_or(ctx.cfg.run.grid), "field.csv")
}
