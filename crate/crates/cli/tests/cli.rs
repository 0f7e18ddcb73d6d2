use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sldp"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_config(dir: &Path, cmd: &str, text: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, text);
    let out = dir.join("out");
    let mut args = vec![
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    sldp(&args)
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let last = text.lines().last().expect("error line");
    serde_json::from_str(last).unwrap()
}

#[test]
fn models_lists_the_six_shipped_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = sldp(&["models", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "ou",
            "periodic1d",
            "linear2d-a1",
            "linear2d-a2",
            "hopf-radial",
            "burgers1d"
        ]
    );
    assert!(v[0]["constants"]["lambda"].is_number());
    assert!(dir.path().join("models/models.json").exists());
}

#[test]
fn qpot_on_the_symmetric_linear_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        "qpot",
        "version = 1\n[model]\nname = \"linear2d-a1\"\n[qpot]\ntarget = [1.0, 0.0]\n",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/qpot/qpot.json")).unwrap())
            .unwrap();
    let value = v["converged_value"].as_f64().unwrap();
    assert!((value - 0.3).abs() < 0.006, "{value}");
    assert_eq!(v["converged"], true);
}

#[test]
fn periodic_pullback_writes_path_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        "pullback",
        "version = 1\nseed = 4\n[model]\nname = \"periodic1d\"\n[pullback]\neps = 0.01\nview = [-2.0, 2.0]\n",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/pullback/path.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x0");
    assert_eq!(csv.lines().count(), 4002);
    let diag: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/pullback/diag.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag["converged"], true);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "version = 1\n[model]\nname = \"ou\"\n[simulate]\neps = 0.1\nt_end = 1.0\nx0 = [0.5]\n";
    let o = run_config(dir.path(), "simulate", text, &["--seed", "31"]);
    assert!(o.status.success());
    let first = dir.path().join("out/simulate");
    let echo = fs::read_to_string(first.join("config.toml")).unwrap();
    assert!(echo.contains("seed = 31"));
    let again = dir.path().join("again");
    let o = sldp(&[
        "simulate",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(first.join("path.csv")).unwrap(),
        fs::read(again.join("simulate/path.csv")).unwrap()
    );
    assert_eq!(
        echo,
        fs::read_to_string(again.join("simulate/config.toml")).unwrap()
    );
}

#[test]
fn action_of_a_skeleton_path_recovers_its_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let text = format!(
        "version = 1\n[model]\nname = \"ou\"\n[skeleton]\nview = [0.0, 1.0]\ndt = 0.001\nx0 = [0.2]\n\
         [action]\npath = \"{}\"\n",
        out.join("skeleton/path.csv").display()
    );
    assert!(run_config(dir.path(), "skeleton", &text, &[])
        .status
        .success());
    let o = run_config(dir.path(), "action", &text, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("action/action.json")).unwrap()).unwrap();
    assert!(v["value"].as_f64().unwrap() < 1e-12);
    let control = fs::read_to_string(out.join("action/control.csv")).unwrap();
    assert_eq!(control.lines().count(), 1001);
    assert!(out.join("skeleton/path.csv").exists());
}

#[test]
fn unknown_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        "qpot",
        "version = 1\n[model]\nname = \"ou\"\n[qpot]\ntarget = [1.0]\nhorizon = 3.0\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "validation");
}

#[test]
fn bad_values_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "version = 2\n[model]\nname = \"ou\"\n",
        "version = 1\n[model]\nname = \"ou\"\n[pullback]\neps = -0.1\nview = [-1.0, 0.0]\n",
        "version = 1\n[model]\nname = \"nope\"\n[pullback]\neps = 0.1\nview = [-1.0, 0.0]\n",
        "version = 1\n[model]\nname = \"ou\"\nparams = { beta = 1.0 }\n[pullback]\neps = 0.1\nview = [-1.0, 0.0]\n",
        "version = 1\n[model]\nname = \"ou\"\n",
        "version = 1\n[model]\nname = \"periodic1d\"\n[qpot]\ntarget = [1.0]\n",
    ];
    for text in cases {
        let o = run_config(
            dir.path(),
            if text.contains("qpot") {
                "qpot"
            } else {
                "pullback"
            },
            text,
            &[],
        );
        assert_eq!(o.status.code(), Some(2), "{text}");
        let e = stderr_json(&o);
        assert!(e["message"]
            .as_str()
            .is_some_and(|m| !m.is_empty() && !m.contains('\n')));
    }
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        "pullback",
        "version = 1\n[model]\nname = \"hopf-radial\"\n[pullback]\neps = 0.1\nview = [-1.0, 0.0]\n\
         [pullback.options]\nblowup = 0.5\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "divergence");
}

#[test]
fn each_command_writes_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let text = "version = 1\n[model]\nname = \"ou\"\n[simulate]\neps = 0.1\nt_end = 0.5\n\
                [skeleton]\nview = [0.0, 0.5]\nx0 = [1.0]\n";
    assert!(run_config(dir.path(), "simulate", text, &[])
        .status
        .success());
    let before = fs::read(dir.path().join("out/simulate/path.csv")).unwrap();
    assert!(run_config(dir.path(), "skeleton", text, &[])
        .status
        .success());
    assert_eq!(
        before,
        fs::read(dir.path().join("out/simulate/path.csv")).unwrap()
    );
    assert!(dir.path().join("out/skeleton/path.csv").exists());
}
