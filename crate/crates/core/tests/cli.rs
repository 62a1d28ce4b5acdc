use std::path::Path;
use std::process::{Command, Output};

fn degenlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenlab"))
        .current_dir(dir)
        .env_remove("DEGENLAB_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn three_sphere_on_a_mode_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["--out", "o", "three-sphere", "--alpha", "1", "--r", "0.5,1,2", "--field", "mode:l=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("CHECK three_sphere PASS margin="), "{line}");
    let margin: f64 = line.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(margin > 0.0);
    assert!(dir.path().join("o/three_sphere.csv").exists());
    assert!(dir.path().join("o/three_sphere.json").exists());
}

#[test]
fn hardy_of_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["--out", "o", "hardy", "--alpha", "1", "--field", "zero"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("CHECK hardy PASS"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/hardy.json")).unwrap()).unwrap();
    for row in json["rows"].as_array().unwrap() {
        assert_eq!(row["values"]["ratio"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    std::fs::write(dir.path().join("typo.toml"), "aplha = 1\n").unwrap();
    let o = degenlab(dir.path(), &["--config", "typo.toml", "mesh"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("aplha"));

    std::fs::write(dir.path().join("bad.toml"), "alpha = 2.5\n").unwrap();
    let o = degenlab(dir.path(), &["--config", "bad.toml", "mesh"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha must lie in (0,2)"));

    let o = degenlab(dir.path(), &["--domain-radius", "1", "three-sphere", "--r", "0.5,1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // above the direct-solve threshold, so the capped CG has no fallback
    std::fs::write(dir.path().join("c.toml"), "mesh.h = 0.01\nsolver.max_iter = 3\n").unwrap();
    let o = degenlab(dir.path(), &["--config", "c.toml", "--out", "o", "solve", "--field", "mode:l=1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance far below the solver's accuracy on this grid
    std::fs::write(dir.path().join("c.toml"), "checks.tolerances.identity = 1e-9\n").unwrap();
    let o = degenlab(dir.path(), &["--config", "c.toml", "--out", "o", "frequency", "--identities", "--epsilon", "0.0625"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("CHECK derivative_identities FAIL"));
}

#[test]
fn csv_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        for cmd in [&["profile", "--field", "random:seed=4"][..], &["caccioppoli"], &["converge"]] {
            let mut args = vec!["--out", out];
            args.extend_from_slice(cmd);
            assert_eq!(degenlab(dir.path(), &args).status.code(), Some(0));
        }
    }
    for f in ["profile.csv", "caccioppoli.csv", "converge.csv", "converge_table.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn env_overrides_config_and_flag_overrides_env() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "output = \"from_config\"\nmesh.h = 0.2\n").unwrap();
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_degenlab"));
        c.current_dir(dir.path()).env_remove("DEGENLAB_OUT");
        if let Some(e) = env {
            c.env("DEGENLAB_OUT", e);
        }
        c.args(args).output().unwrap()
    };
    run(None, &["--config", "c.toml", "mesh"]);
    assert!(dir.path().join("from_config/mesh.json").exists());
    run(Some("from_env"), &["--config", "c.toml", "mesh"]);
    assert!(dir.path().join("from_env/mesh.json").exists());
    run(Some("from_env"), &["--config", "c.toml", "--out", "from_flag", "mesh"]);
    assert!(dir.path().join("from_flag/mesh.json").exists());
}

#[test]
fn solve_then_profile_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["--out", "o", "--h", "0.1", "solve", "--field", "mode:l=2", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = degenlab(dir.path(), &["--out", "o", "--h", "0.1", "profile", "--field", "file:o/field.json", "--alpha", "0.5", "--r", "0.3,0.6,0.9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("o/profile.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    for rec in rows.records() {
        let phi: f64 = rec.unwrap()[3].parse().unwrap();
        // 2 beta for (alpha, l) = (0.5, 2)
        assert!((phi / 3.531128874149275 - 1.0).abs() < 3e-2, "{phi}");
    }
    // a field saved on another mesh is refused
    let o = degenlab(dir.path(), &["--out", "o", "--h", "0.2", "profile", "--field", "file:o/field.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn propagate_writes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["--out", "o", "--h", "0.1", "propagate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/plan.json")).unwrap()).unwrap();
    assert_eq!(plan["case_tag"], "origin-inside-omega");
    assert_eq!(plan["centers"].as_array().unwrap().len(), 4);
}

#[test]
fn all_runs_a_selected_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = degenlab(dir.path(), &["--out", "o", "all", "--only", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().starts_with("criterion 7 [Caccioppoli] PASS"));
    assert!(text.contains("CHECK caccioppoli_constant_closed_form PASS"));
}
