// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn slowbond(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowbond"))
        .current_dir(dir)
        .args(args)
        .env("SLOWBOND_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const CAMPAIGN: &str = r#"
seed = 11

[lattice]
n = 20
L = 60
beta = 0.5
alpha = 3.0
rho = 0.5
T = 0.2
sample_times = [0.0, 0.05, 0.1, 0.15, 0.2]
replicas = 2000

[[probes]]
id = "odd"
function = { family = "branchwise", left = [{ coeffs = [-1.0], rate = 5.0 }], right = [{ coeffs = [1.0], rate = 5.0 }] }

[[probes]]
id = "m"
function = { family = "gaussian", terms = [{ coeffs = [2.0], rate = 1.0 }] }

[martingale]
function = "m"
times = [0.0, 0.1, 0.2]
"#;

fn compare_section(inputs: &[(&str, &str, &str)]) -> String {
    let mut text = String::from("\n[compare]\nfunction = \"odd\"\ntimes = [0.0, 0.05, 0.1, 0.2]\ninputs = [\n");
    for (label, dir, beta) in inputs {
        text.push_str(&format!(
            "  {{ label = \"{label}\", samples = \"{dir}/samples.csv\", beta = {beta}, alpha = 3.0, rho = 0.5 }},\n"
        ));
    }
    text.push_str("]\n");
    text
}

#[test]
fn default_line_battery_validates() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", "regime = { beta = 0.0, alpha = 1.0 }\n");
    let out = slowbond(dir.path(), &["validate", "--config", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    assert!(summary.starts_with("# slowbond validate"));
    assert!(summary.contains("gradnorm/gauss/steps=20"));
    assert!(!summary.contains(",false"));
}

#[test]
fn odd_function_fails_neumann_membership() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.toml",
        "[[battery]]\nid = \"xg\"\nfunction = { family = \"hermite_gaussian\", coeffs = [0.0, 1.0] }\n",
    );
    let out = slowbond(dir.path(), &["validate", "--config", "c.toml", "--out", "o", "--regime", "neumann"]);
    assert_eq!(code(&out), 1);
    let rows = fs::read_to_string(dir.path().join("o/validate.csv")).unwrap();
    assert!(rows.contains("membership,xg,,1.0,1e-6,false"), "{rows}");
    assert!(!rows.contains("laplacian"));
}

#[test]
fn empty_battery_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", "battery = []\n");
    let out = slowbond(dir.path(), &["validate", "--config", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("battery is empty"));
}

#[test]
fn unknown_key_names_line_and_key() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", "seed = 1\nregmie = { beta = 0.0, alpha = 1.0 }\n");
    let out = slowbond(dir.path(), &["validate", "--config", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("regmie"), "{err}");
}

#[test]
fn evolve_writes_one_sided_limits() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.toml",
        "[evolve]\nfunctions = [\"gauss\"]\ntimes = [0.1]\ngrid = { from = -1.0, to = 1.0, points = 5 }\norders = [0, 1]\n",
    );
    let out = slowbond(dir.path(), &["evolve", "--config", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("o/evolve.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "function_id,t,x,one_sided,k,value");
    // 4 off-origin points and two one-sided limits per order.
    assert_eq!(rows.len() - 1, 12);
    assert!(rows.iter().any(|r| r.starts_with("gauss,0.1,0.0,left,1,")));
}

#[test]
fn zero_replicas_writes_only_the_manifest() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", &CAMPAIGN.replace("replicas = 2000", "replicas = 0"));
    let out = slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut files: Vec<String> =
        fs::read_dir(dir.path().join("o")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["manifest.json"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["lattice"]["replicas"], 0);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", &CAMPAIGN.replace("replicas = 2000", "replicas = 50"));
    for out_dir in ["a", "b"] {
        let out = slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", out_dir]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a/samples.csv")).unwrap();
    let b = fs::read(dir.path().join("b/samples.csv")).unwrap();
    assert_eq!(a, b);

    let out = slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", "c", "--seed", "12"]);
    assert_eq!(code(&out), 0);
    let c = fs::read(dir.path().join("c/samples.csv")).unwrap();
    assert_ne!(a, c);
    assert!(String::from_utf8_lossy(&c).lines().next().unwrap().ends_with("seed=12"));
}

#[test]
fn single_regime_compare_has_no_separation_flag() {
    let dir = TempDir::new().unwrap();
    let config = format!("{CAMPAIGN}{}", compare_section(&[("line", "s", "0.5")]));
    write(dir.path(), "c.toml", &config.replace("replicas = 2000", "replicas = 400"));
    assert_eq!(code(&slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", "s"])), 0);
    let out = slowbond(dir.path(), &["compare", "--config", "c.toml", "--out", "cmp"]);
    let summary = fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    assert!(!summary.contains("separation"));
    let table = fs::read_to_string(dir.path().join("cmp/phase_table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "label,beta,t,oracle,oracle_atom,empirical,std_error,ci_low,ci_high,z,pass");
    assert_eq!(rows.len() - 1, 4);
    assert_eq!(code(&out), if summary.contains(",false") { 1 } else { 0 });
}

#[test]
fn three_regimes_separate_at_desk_scale() {
    let dir = TempDir::new().unwrap();
    let inputs = [("line", "s_line", "0.5"), ("robin", "s_robin", "1.0"), ("neumann", "s_neumann", "\"inf\"")];
    write(dir.path(), "c.toml", &format!("{CAMPAIGN}{}", compare_section(&inputs)));
    for (_, out_dir, beta) in inputs {
        let beta = beta.trim_matches('"');
        let out = slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", out_dir, "--beta", beta]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let out = slowbond(dir.path(), &["compare", "--config", "c.toml", "--out", "cmp"]);
    assert!(code(&out) < 2, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    let flag = summary.lines().find(|l| l.starts_with("separation,")).expect("separation record");
    assert!(flag.ends_with(",true"), "{flag}");
}

#[test]
fn missing_inputs_are_listed() {
    let dir = TempDir::new().unwrap();
    let config = format!("{CAMPAIGN}{}", compare_section(&[("a", "nowhere", "0.5"), ("b", "absent", "1.0")]));
    write(dir.path(), "c.toml", &config);
    let out = slowbond(dir.path(), &["compare", "--config", "c.toml", "--out", "cmp"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("nowhere/samples.csv") && err.contains("absent/samples.csv"), "{err}");
}

#[test]
fn tampered_sample_file_reports_the_row() {
    let dir = TempDir::new().unwrap();
    let config = format!("{CAMPAIGN}{}", compare_section(&[("line", "s", "0.5")]));
    write(dir.path(), "c.toml", &config.replace("replicas = 2000", "replicas = 20"));
    assert_eq!(code(&slowbond(dir.path(), &["simulate", "--config", "c.toml", "--out", "s"])), 0);
    let path = dir.path().join("s/samples.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[6] = lines[6].rsplit_once(',').unwrap().0.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = slowbond(dir.path(), &["compare", "--config", "c.toml", "--out", "cmp"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn report_collects_summaries_and_fails_on_any_failure() {
    let dir = TempDir::new().unwrap();
    let header = "# slowbond validate version=0 config_sha256=x seed=0\ntest,statistic,target,std_error,z,pass\n";
    fs::create_dir_all(dir.path().join("good")).unwrap();
    fs::create_dir_all(dir.path().join("bad")).unwrap();
    write(dir.path(), "good/summary.csv", &format!("{header}a,1.0,1.0,,,true\n"));
    write(dir.path(), "bad/summary.csv", &format!("{header}b,0.5,0.0,0.1,5.0,false\n"));

    let out = slowbond(dir.path(), &["report", "good", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = slowbond(dir.path(), &["report", "good", "bad", "--out", "r"]);
    assert_eq!(code(&out), 1);
    let text = fs::read_to_string(dir.path().join("r/report.txt")).unwrap();
    assert!(text.contains("bad:b") && text.contains("2 records, 1 failed"), "{text}");
    assert!(dir.path().join("r/report.csv").is_file());
}

#[test]
fn bad_flags_exit_with_usage() {
    let dir = TempDir::new().unwrap();
    let out = slowbond(dir.path(), &["validate", "--config", "c.toml", "--regime", "dirichlet"]);
    assert_eq!(code(&out), 2);
    let out = slowbond(dir.path(), &["validate", "--config", "absent.toml", "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.toml"));
}
