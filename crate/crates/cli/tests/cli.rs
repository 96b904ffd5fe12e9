use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_geospread"));
    c.env_remove("GEOSPREAD_SEED");
    c
}

fn write_config(dir: &Path, name: &str, body: &str, out: &Path) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("output_dir = {:?}\n{body}", out.display().to_string())).unwrap();
    path
}

fn run(config: &Path) -> Output {
    bin().arg("run").arg(config).output().unwrap()
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("summary.txt")).unwrap()
}

fn value(summary: &str, key: &str) -> String {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in\n{summary}"))
        .to_string()
}

const HARMONIC_2: &str = r#"
[system]
n_dof = 2
potential = { type = "harmonic", omegas = [1.0, 1.4142135623730951] }

[initial]
q = [1.0, 0.0]
p = [0.0, 1.0]
"#;

const HARMONIC_1: &str = r#"
[system]
n_dof = 1
potential = { type = "harmonic", omegas = [1.0] }

[initial]
q = [0.0]
p = [1.0]
"#;

#[test]
fn trajectory_run_writes_schema_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let body = format!("kind = \"trajectory\"\nemit_svg = true\n{HARMONIC_2}\n[run]\nt_max = 10.0\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let cfg = write_config(tmp.path(), "t.toml", &body, out);
        let o = run(&cfg);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,q_1,q_2,p_1,p_2,T,V,E,s_jacobi,q_extra"
    );
    assert_eq!(csv.lines().count(), 1 + 1 + 1000);
    assert_eq!(csv, fs::read_to_string(b.join("trajectory.csv")).unwrap());
    assert!(fs::read_to_string(a.join("trajectory.svg")).unwrap().starts_with("<svg"));
    let s = summary(&a);
    assert_eq!(value(&s, "pass"), "1");
    assert!(value(&s, "affine_deviation").parse::<f64>().unwrap() < 1e-8);
}

#[test]
fn tangent_lyapunov_on_harmonic_passes_threshold() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let body = format!(
        "kind = \"tangent_lyapunov\"\n{HARMONIC_2}\n[run]\nt_max = 1000.0\ndt = 1e-2\n\n[thresholds]\nlambda_t_final = {{ max = 1e-2 }}\n"
    );
    let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(value(&s, "threshold.lambda_t_final").starts_with("pass"));
    let csv = fs::read_to_string(out.join("exponent.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,s_jacobi,lambda_t,lambda_s,renorm_count");
}

#[test]
fn failing_threshold_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let body = format!(
        "kind = \"tangent_lyapunov\"\n{HARMONIC_2}\n[run]\nt_max = 10.0\n\n[thresholds]\nlambda_t_final = {{ min = 1.0 }}\n"
    );
    let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(value(&summary(&out), "pass"), "0");
}

#[test]
fn seed_env_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let body = format!("kind = \"tangent_lyapunov\"\n{HARMONIC_2}\n[run]\nt_max = 5.0\n");
    let mut csvs = Vec::new();
    for (name, seed) in [("x", None), ("y", Some("7")), ("z", Some("7"))] {
        let out = tmp.path().join(name);
        let cfg = write_config(tmp.path(), "c.toml", &body, &out);
        let mut cmd = bin();
        if let Some(s) = seed {
            cmd.env("GEOSPREAD_SEED", s);
        }
        assert!(cmd.arg("run").arg(&cfg).status().unwrap().success());
        assert_eq!(value(&summary(&out), "seed"), seed.unwrap_or("20240901"));
        csvs.push(fs::read_to_string(out.join("exponent.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1]);
    assert_eq!(csvs[1], csvs[2]);
}

#[test]
fn jacobi_singularity_is_not_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let body = format!("kind = \"jacobi_lyapunov\"\n{HARMONIC_1}\n[run]\nt_max = 10.0\n");
    let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(value(&s, "singular_flag"), "1.0000000000000000e0");
    let t: f64 = value(&s, "singular_t").parse().unwrap();
    assert!((t - std::f64::consts::FRAC_PI_2).abs() <= 1e-3);
    let csv = fs::read_to_string(out.join("exponent.csv")).unwrap();
    assert!(csv.starts_with("t,s_jacobi,lambda_t,lambda_s,renorm_count,t_guard_hits,singular_flag\n"));
    assert!(csv.trim_end().ends_with(",1,1"));
}

#[test]
fn eisenhart_relation_check_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let body = format!(
        "kind = \"relation_check\"\n{HARMONIC_2}\n[run]\nt_max = 20.0\n\n[variation]\ndirection = [0.5, 0.5, 0.5, 0.5]\narc = \"eisenhart\"\n\n[thresholds]\nmax_residual = {{ max = 1e-6 }}\n"
    );
    let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,s_jacobi,residual,ds_dtau,correction_norm,xi_t_norm,xi_g_fd_norm"
    );
}

#[test]
fn floquet_and_spectrum_runs() {
    let tmp = TempDir::new().unwrap();
    let commensurate = HARMONIC_2.replace("1.4142135623730951", "2.0");
    let out = tmp.path().join("floquet");
    let body = format!(
        "kind = \"floquet_oracle\"\n{commensurate}\n[floquet]\nperiod = 6.283185307179586\nflow = \"tangent\"\n\n[thresholds]\nmax_exponent = {{ max = 1e-6 }}\n"
    );
    let o = run(&write_config(tmp.path(), "f.toml", &body, &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("floquet.csv")).unwrap().lines().count(), 5);

    let out = tmp.path().join("spectrum");
    let body = format!(
        "kind = \"spectrum\"\n{HARMONIC_1}\n[run]\nt_max = 400.0\ndt = 1e-2\nrecord_stride = 1\n\n[thresholds]\npeak_frequency = {{ min = 1.98, max = 2.02 }}\n"
    );
    let o = run(&write_config(tmp.path(), "s.toml", &body, &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "angular_frequency,amplitude");
}

#[test]
fn unwritable_output_dir_leaves_nothing_behind() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let body = format!("kind = \"trajectory\"\n{HARMONIC_2}\n[run]\nt_max = 1.0\n");
    let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
    assert_eq!(o.status.code(), Some(3));
    let mut names: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["c.toml", "file"]);
}

#[test]
fn validation_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let bad = [
        format!("kind = \"trajectory\"\n{HARMONIC_2}\n[run]\ndt = -1.0\n"),
        format!("kind = \"trajectory\"\nbogus = 1\n{HARMONIC_2}"),
        format!("kind = \"nonsense\"\n{HARMONIC_2}"),
    ];
    for body in bad {
        let o = run(&write_config(tmp.path(), "c.toml", &body, &out));
        assert_eq!(o.status.code(), Some(1), "{body}");
    }
    assert!(!out.exists());
    assert_eq!(bin().arg("run").arg(tmp.path().join("missing.toml")).status().unwrap().code(), Some(3));
    assert_eq!(bin().arg("frobnicate").status().unwrap().code(), Some(1));
}

#[test]
fn blowup_exits_two_without_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let body = r#"kind = "trajectory"

[system]
n_dof = 2
potential = { type = "henon_heiles" }

[initial]
q = [0.0, 0.0]
p = [0.0, 50.0]

[run]
dt = 1e-2
t_max = 1000.0
"#;
    let o = run(&write_config(tmp.path(), "c.toml", body, &out));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blowup"));
    assert!(!out.exists());
}

#[test]
fn plot_subcommand() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("e.csv");
    fs::write(&csv, "t,lambda_t,lambda_s\n1,0.5,0.4\n2,0.25,0.2\n").unwrap();
    let o = bin()
        .args(["plot", csv.to_str().unwrap(), "--x", "t", "--y", "lambda_t,lambda_s"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(tmp.path().join("e.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("legend"));

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "t,lambda_t\n").unwrap();
    let o = bin()
        .args(["plot", empty.to_str().unwrap(), "--x", "t", "--y", "lambda_t"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no data rows"));
}

#[test]
fn accept_subset_prints_one_line_per_criterion() {
    let o = bin().args(["accept", "--workers", "2", "--only", "A6,A7,A5"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("PASS A6") && lines[1].starts_with("PASS A7") && lines[2].starts_with("PASS A5"));
    assert_eq!(bin().args(["accept", "--only", "A42"]).status().unwrap().code(), Some(1));
}
