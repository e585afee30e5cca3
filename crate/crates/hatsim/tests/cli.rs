use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn hatsim(args: &[&str], out: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hatsim"));
    cmd.args(args).arg("--out").arg(out).env_remove("HATSIM_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn hatsim")
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len() + 1..].parse().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("bad.ini");
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn tune_reports_hat_and_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fig3.ini");
    let out = hatsim(&["tune", cfg.to_str().unwrap()], dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sh = stdout_value(&out, "tau1_sh");
    let res = stdout_value(&out, "tau1_res");
    assert!((sh - 12.9016).abs() < 1e-3, "{sh}");
    assert!(res > sh && res - sh < 0.1, "{res}");
    let rows = csv_rows(&dir.path().join("tune.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "hat");
}

#[test]
fn probs_match_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fig3.ini");
    let out = hatsim(&["probs", cfg.to_str().unwrap()], dir.path(), &[]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("probs.csv"));
    let get = |region: &str, ball: &str| -> f64 {
        rows.iter().find(|r| r[0] == region && r[1] == ball).map(|r| r[4].parse().unwrap()).unwrap()
    };
    for (region, ball, want) in
        [("A", "empty", 0.5021), ("B", "empty", 0.7196), ("A", "sh", 0.1355), ("B", "sh", 0.1941)]
    {
        let got = get(region, ball);
        assert!((got - want).abs() <= 0.01, "{region}|{ball}: {got} vs {want}");
    }
    let text = std::fs::read_to_string(dir.path().join("probs.csv")).unwrap();
    assert!(text.starts_with("# hatsim "));
    assert!(text.contains("# command: probs\n"));
    assert!(text.contains("# config_sha256: "));
}

#[test]
fn output_is_identical_across_worker_counts() {
    let cfg = example("fig1.ini");
    let cfg = cfg.to_str().unwrap();
    let args = ["scatter", cfg, "--plane", "z=0", "--grid", "41"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(hatsim(&[&args[..], &["--workers", "1"]].concat(), a.path(), &[]).status.success());
    assert!(hatsim(&[&args[..], &["--workers", "4"]].concat(), b.path(), &[]).status.success());
    assert!(hatsim(&args, c.path(), &[("HATSIM_WORKERS", "3")]).status.success());
    for name in ["coefficients.csv", "scatter_grid.csv"] {
        let one = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(one, std::fs::read(b.path().join(name)).unwrap(), "{name}");
        assert_eq!(one, std::fs::read(c.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn hetero_convergence_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fig2.ini");
    let out = hatsim(&["hetero", cfg.to_str().unwrap()], dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("convergence.csv"));
    let errors: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(errors.len(), 4);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let stack = csv_rows(&dir.path().join("stack.csv"));
    assert!(stack.windows(2).all(|w| w[0][2] == w[1][1]), "layers must be contiguous");
}

#[test]
fn field_dump_axis_stays_inside_ball() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fig3.ini");
    let out = hatsim(&["field-dump", cfg.to_str().unwrap(), "--axis", "x", "--grid", "51"], dir.path(), &[]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("field.csv"));
    assert_eq!(rows.len(), 49);
    assert!(rows.iter().all(|r| r[0].parse::<f64>().unwrap().abs() < std::f64::consts::TAU));
}

#[test]
fn parse_error_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "[cloak]\nrho = 0.01\n[shells\ns1 = 0.6\n");
    let out = hatsim(&["tune", p.to_str().unwrap()], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: parse: line 3"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("fig3.ini")).unwrap().replace("[run]\n", "[run]\nbogus = 1\n");
    let p = write_config(dir.path(), &text);
    let out = hatsim(&["tune", p.to_str().unwrap()], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn missing_energy_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = std::fs::read_to_string(example("fig3.ini"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("E "))
        .map(|l| format!("{l}\n"))
        .collect();
    let p = write_config(dir.path(), &text);
    let out = hatsim(&["tune", p.to_str().unwrap()], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: validation:"));
}

#[test]
fn empty_bracket_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("fig3.ini")).unwrap().replace("bracket = 0, 40", "bracket = 100, 101");
    let p = write_config(dir.path(), &text);
    let out = hatsim(&["tune", p.to_str().unwrap()], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_worker_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fig3.ini");
    let out = hatsim(&["tune", cfg.to_str().unwrap()], dir.path(), &[("HATSIM_WORKERS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
}
