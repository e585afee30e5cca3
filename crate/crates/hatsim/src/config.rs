use crate::error::{CliError, CliResult};
use crate::ini::{self, Entry, Section};
use hatsim_core::cloakmodel::{CloakModel, HatConfig, LayerWeight, Shell, ShellConvention};
use hatsim_core::tuner::ModeThresholds;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Shown by `--help`.
pub const CONFIG_HELP: &str = "\
CONFIG FILE (INI; '#' or ';' comments; unknown keys are rejected)

[cloak]
  model = pushforward | printed | none     (default pushforward)
  rho = <0 < rho < 2>                      (required unless model = none)
  layer_weight = mollified | ideal         (default mollified)
  length_scale = <ell > 0>                 (default 1)

[shells]
  convention = additive | kappa            (default additive)
  s1, s2, ... = shell outer radii, strictly increasing
  tau1, tau2, ... = shell values; tau1 may be omitted and is then tuned

[run]
  L = <outer radius>                       (required)
  E = <energy > 0>                         (required)
  n_max = 30            ode_tol = 1e-10     quad_tol = 1e-10
  bracket = lo, hi      (default -500, 500) scan_step = 0.25    tune_tol = 1e-6
  hat_tol = 1e-3        amp_threshold = 1.0 cloak_tau = <optional tau1 to classify>
  direction = 0, 0, 1   (plane-wave incidence)
  source = radial | plane                  (field-dump input, default radial)
  grid = 201            radial_points = 401
  monte_balls = 3       monte_region = A
  coulomb_shift = 1e-3  (relative energy shift for the slope check)
  workers = <threads>   output = <directory for CSV files, default .>

[regions]
  <name> = a, b         (default A = 3, L and B = 2, L)

[hetero]
  ell = 10              width = 0.05
  masses = m1, m2, m3, m4                  (default 0.5, 1, 1, 2)
  potentials = V1, V2, V3, V4              (default 0, -0.1, 0.3, 0)
  m0 = 1                j = 8, 16, 32, 64   stack_j = <largest j>
  extent = <stack extent, default the target support>
  radius_factor = 1.3   (DtN comparison radius / extent)
  temperature = 0       k_b = 1
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Radial,
    Plane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub bracket: (f64, f64),
    pub scan_step: f64,
    pub tune_tol: f64,
    pub thresholds: ModeThresholds,
    pub cloak_tau: Option<f64>,
    pub direction: [f64; 3],
    pub source: Source,
    pub grid: usize,
    pub radial_points: usize,
    pub monte_balls: usize,
    pub monte_region: String,
    pub coulomb_shift: f64,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroParams {
    pub ell: f64,
    pub width: f64,
    pub masses: [f64; 4],
    pub potentials: [f64; 4],
    pub m0: f64,
    pub js: Vec<usize>,
    pub stack_j: usize,
    pub extent: Option<f64>,
    pub radius_factor: f64,
    pub temperature: f64,
    pub k_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hat: HatConfig,
    /// Whether `tau1` was given; otherwise subcommands tune it first.
    pub tau1_given: bool,
    pub run: RunParams,
    pub regions: Vec<(String, (f64, f64))>,
    pub hetero: HeteroParams,
    pub sha256: String,
}

/// Typed access to one section; remembers which keys were read.
struct Fields<'a> {
    section: &'a str,
    entries: &'a [Entry],
    used: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(sections: &'a [Section], name: &'a str) -> Self {
        let entries = sections.iter().find(|s| s.name == name).map_or(&[][..], |s| &s.entries[..]);
        Fields { section: name, entries, used: BTreeSet::new() }
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.entries.iter().find(|e| e.key == key)?;
        self.used.insert(&e.key);
        Some(e)
    }

    fn f64(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.entry(key).map(|e| number(e, &e.value)).transpose()
    }

    fn f64_or(&mut self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> CliResult<usize> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| {
                CliError::parse(e.line, format!("`{key}` must be a non-negative integer, got `{}`", e.value))
            }),
        }
    }

    fn list(&mut self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.split(',').map(|v| number(e, v.trim())).collect::<CliResult<Vec<_>>>().map(Some),
        }
    }

    fn fixed<const N: usize>(&mut self, key: &str) -> CliResult<Option<[f64; N]>> {
        let line = self.entries.iter().find(|e| e.key == key).map_or(0, |e| e.line);
        match self.list(key)? {
            None => Ok(None),
            Some(v) => v.try_into().map(Some).map_err(|v: Vec<f64>| {
                CliError::parse(line, format!("`{key}` needs {N} comma-separated values, got {}", v.len()))
            }),
        }
    }

    fn word(&mut self, key: &str, default: &'a str) -> &'a str {
        self.entry(key).map_or(default, |e| e.value.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|e| e.key == key).map_or(0, |e| e.line)
    }

    fn finish(self) -> CliResult<()> {
        match self.entries.iter().find(|e| !self.used.contains(e.key.as_str())) {
            Some(e) => Err(CliError::parse(e.line, format!("unknown key `{}` in [{}]", e.key, self.section))),
            None => Ok(()),
        }
    }
}

fn number(e: &Entry, text: &str) -> CliResult<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::parse(e.line, format!("`{}`: `{text}` is not a finite number", e.key)))
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation(message.into())
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let bytes = std::fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| invalid("config file is not UTF-8"))?;
    let mut cfg = parse_str(&text)?;
    cfg.sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(cfg)
}

pub fn parse_str(text: &str) -> CliResult<RunConfig> {
    let sections = ini::parse(text)?;
    const KNOWN: [&str; 5] = ["cloak", "shells", "run", "regions", "hetero"];
    if let Some(s) = sections.iter().find(|s| !KNOWN.contains(&s.name.as_str())) {
        return Err(CliError::parse(s.line, format!("unknown section [{}]", s.name)));
    }

    let mut run = Fields::new(&sections, "run");
    let outer_radius = run.f64("L")?.ok_or_else(|| invalid("missing required key `L` in [run]"))?;
    let energy = run.f64("E")?.ok_or_else(|| invalid("missing required key `E` in [run]"))?;

    let mut cloak = Fields::new(&sections, "cloak");
    let model = match cloak.word("model", "pushforward") {
        "pushforward" => CloakModel::Pushforward,
        "printed" => CloakModel::Printed,
        "none" => CloakModel::None,
        other => return Err(CliError::parse(cloak.line_of("model"), format!("unknown cloak model `{other}`"))),
    };
    let rho = match (cloak.f64("rho")?, model) {
        (Some(r), _) => r,
        (None, CloakModel::None) => 0.0,
        (None, _) => return Err(invalid("missing required key `rho` in [cloak]")),
    };
    let layer_weight = match cloak.word("layer_weight", "mollified") {
        "mollified" => LayerWeight::Mollified,
        "ideal" => LayerWeight::Ideal,
        other => return Err(CliError::parse(cloak.line_of("layer_weight"), format!("unknown layer weight `{other}`"))),
    };
    let length_scale = cloak.f64_or("length_scale", 1.0)?;
    cloak.finish()?;

    let mut sh = Fields::new(&sections, "shells");
    let convention = match sh.word("convention", "additive") {
        "additive" => ShellConvention::Additive,
        "kappa" => ShellConvention::Kappa,
        other => return Err(CliError::parse(sh.line_of("convention"), format!("unknown shell convention `{other}`"))),
    };
    let mut shells = Vec::new();
    let mut tau1_given = true;
    for k in 1.. {
        let Some(radius) = sh.f64(&format!("s{k}"))? else { break };
        let tau = match sh.f64(&format!("tau{k}"))? {
            Some(t) => t,
            None if k == 1 => {
                tau1_given = false;
                0.0
            }
            None => return Err(invalid(format!("missing required key `tau{k}` in [shells]"))),
        };
        shells.push(Shell { radius, tau });
    }
    sh.finish()?;

    let mut hat = HatConfig::new(rho, outer_radius, shells, energy);
    hat.cloak = model;
    hat.layer_weight = layer_weight;
    hat.length_scale = length_scale;
    hat.convention = convention;
    hat.n_max = run.usize_or("n_max", hat.n_max)?;
    hat.ode_tol = run.f64_or("ode_tol", hat.ode_tol)?;
    hat.quad_tol = run.f64_or("quad_tol", hat.quad_tol)?;
    hat.validate().map_err(|e| invalid(e.to_string()))?;

    let bracket = run.fixed::<2>("bracket")?.map_or(hatsim_core::tuner::DEFAULT_BRACKET, |[a, b]| (a, b));
    if !(bracket.0 < bracket.1) {
        return Err(invalid("bracket must satisfy lo < hi"));
    }
    let defaults = ModeThresholds::default();
    let source = match run.word("source", "radial") {
        "radial" => Source::Radial,
        "plane" => Source::Plane,
        other => return Err(CliError::parse(run.line_of("source"), format!("unknown field source `{other}`"))),
    };
    let params = RunParams {
        bracket,
        scan_step: run.f64_or("scan_step", 0.25)?,
        tune_tol: run.f64_or("tune_tol", 1e-6)?,
        thresholds: ModeThresholds {
            hat_tol: run.f64_or("hat_tol", defaults.hat_tol)?,
            amp_threshold: run.f64_or("amp_threshold", defaults.amp_threshold)?,
        },
        cloak_tau: run.f64("cloak_tau")?,
        direction: run.fixed::<3>("direction")?.unwrap_or([0.0, 0.0, 1.0]),
        source,
        grid: run.usize_or("grid", 201)?,
        radial_points: run.usize_or("radial_points", 401)?,
        monte_balls: run.usize_or("monte_balls", 3)?,
        monte_region: run.word("monte_region", "A").to_string(),
        coulomb_shift: run.f64_or("coulomb_shift", 1e-3)?,
        workers: run
            .entry("workers")
            .map(|e| {
                e.value.parse::<usize>().map_err(|_| CliError::parse(e.line, "`workers` must be a positive integer"))
            })
            .transpose()?,
        output: run.entry("output").map(|e| PathBuf::from(&e.value)),
    };
    run.finish()?;
    if !(params.scan_step > 0.0) || !(params.tune_tol > 0.0) {
        return Err(invalid("scan_step and tune_tol must be positive"));
    }
    if params.grid < 2 || params.radial_points < 2 {
        return Err(invalid("grid and radial_points must be at least 2"));
    }
    if params.workers == Some(0) {
        return Err(invalid("workers must be at least 1"));
    }
    if params.direction.iter().map(|d| d * d).sum::<f64>() == 0.0 {
        return Err(invalid("direction must be non-zero"));
    }

    let region_section = sections.iter().find(|s| s.name == "regions");
    let regions = match region_section {
        None => vec![("A".to_string(), (3.0, outer_radius)), ("B".to_string(), (2.0, outer_radius))],
        Some(s) => {
            let mut out = Vec::new();
            for e in &s.entries {
                let v = e.value.split(',').map(|t| number(e, t.trim())).collect::<CliResult<Vec<_>>>()?;
                let [a, b] = v[..] else {
                    return Err(CliError::parse(e.line, format!("region `{}` needs `a, b`", e.key)));
                };
                if !(0.0 <= a && a < b && b <= outer_radius) {
                    return Err(invalid(format!("region `{}` must satisfy 0 <= a < b <= L", e.key)));
                }
                out.push((e.key.clone(), (a, b)));
            }
            out
        }
    };

    let mut he = Fields::new(&sections, "hetero");
    let js: Vec<usize> = match he.list("j")? {
        None => vec![8, 16, 32, 64],
        Some(v) => v
            .iter()
            .map(|&x| {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(invalid("`j` entries must be positive integers"))
                }
            })
            .collect::<CliResult<_>>()?,
    };
    let hetero = HeteroParams {
        ell: he.f64_or("ell", 10.0)?,
        width: he.f64_or("width", 0.05)?,
        masses: he.fixed::<4>("masses")?.unwrap_or([0.5, 1.0, 1.0, 2.0]),
        potentials: he.fixed::<4>("potentials")?.unwrap_or([0.0, -0.1, 0.3, 0.0]),
        m0: he.f64_or("m0", 1.0)?,
        stack_j: he.usize_or("stack_j", js.iter().copied().max().unwrap_or(1))?,
        js,
        extent: he.f64("extent")?,
        radius_factor: he.f64_or("radius_factor", 1.3)?,
        temperature: he.f64_or("temperature", 0.0)?,
        k_b: he.f64_or("k_b", 1.0)?,
    };
    he.finish()?;
    if hetero.js.is_empty()
        || hetero.stack_j == 0
        || !(hetero.ell > 0.0)
        || !(hetero.width > 0.0)
        || !(hetero.radius_factor >= 1.0)
    {
        return Err(invalid("[hetero] needs j >= 1, ell > 0, width > 0 and radius_factor >= 1"));
    }

    Ok(RunConfig { hat, tau1_given, run: params, regions, hetero, sha256: String::new() })
}
