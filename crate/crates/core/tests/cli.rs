use std::path::Path;
use std::process::{Command, Output};

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starlike"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn with_config(body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, body).unwrap();
    (dir, path)
}

const STAR: &str = r#"
[graph]
kind = "sharpness"
m = 2
potential = { kind = "free" }
"#;

#[test]
fn negative_tolerance_names_the_field() {
    let (dir, cfg) = with_config(&format!("{STAR}\n[sharpness]\ndepth = 10\nmatch_tol = -1e-9\n"));
    let out = run("sharpness", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sharpness.match_tol"), "stderr: {err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn negative_eps_in_a_list_is_rejected() {
    let (dir, cfg) = with_config(&format!(
        "{STAR}\n[resolvent]\nenergies = {{ from = 0.0, to = 1.0, count = 2 }}\neps = [0.1, -0.1]\n"
    ));
    let out = run("resolvent", &cfg, &dir.path().join("o"));
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolvent.eps"));
}

#[test]
fn unknown_keys_are_rejected() {
    let (dir, cfg) = with_config(&format!("{STAR}\n[spectrum]\ndepth = 10\ndepht = 3\n"));
    let out = run("spectrum", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depht"));
}

#[test]
fn missing_section_is_reported() {
    let (dir, cfg) = with_config(STAR);
    let out = run("dims", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dims"));
}

#[test]
fn tree_command_needs_a_tree_graph() {
    let (dir, cfg) = with_config(&format!("{STAR}\n[tree]\nn_max = 5\n"));
    let out = run("tree", &cfg, &dir.path().join("o"));
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn spectrum_writes_all_artifacts() {
    let (dir, cfg) = with_config(&format!("{STAR}\n[spectrum]\ndepth = 10\n"));
    let o = dir.path().join("o");
    let out = run("spectrum", &cfg, &o);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["spectrum.csv", "spectrum.json", "spectrum_plot.csv", "spectrum_summary.json"] {
        assert!(o.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(o.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("index,eigenvalue,cluster,cluster_size\n"));
    assert!(csv.lines().count() > 20);
}
