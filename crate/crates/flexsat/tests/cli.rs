//! End-to-end tests of the `flexsat` binary: exit codes, scenario
//! diagnostics, run determinism, and bit-exact continuation from an
//! emitted CSV row.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_flexsat")
}

fn shipped_scenario() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/default.scn")
}

fn run(args: &[&str]) -> Output {
    Command::new(exe()).args(args).output().expect("spawn flexsat")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Minimal scenario body shared by the tests that need a writable file.
fn scenario_text(extra: &str) -> String {
    format!(
        "params.ell = 2.0\n\
         params.ell0 = 0.5\n\
         params.ei = 40.0\n\
         params.rho_a = 1.2\n\
         params.i1 = 8.0\n\
         params.i2 = 10.0\n\
         params.i3 = 6.0\n\
         params.omega0 = 1.13e-3\n\
         sim.record_every = 100\n\
         {extra}"
    )
}

fn write_file(path: &Path, text: &str) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn simulate_without_scenario_is_a_usage_error() {
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--scenario"), "{}", stderr(&out));
}

#[test]
fn unknown_scenario_key_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    write_file(&path, &scenario_text("sim.dampping = 0.5\n"));
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("sim.dampping"), "{err}");
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn missing_mandatory_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.scn");
    write_file(&path, "params.ell = 2.0\n");
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("params."), "{}", stderr(&out));
}

#[test]
fn verify_passes_on_the_builtin_scenario() {
    let out = Command::new(exe())
        .arg("verify")
        .env_remove("FLEXSAT_SEED")
        .output()
        .expect("spawn flexsat");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches(": PASS").count(), 5, "{text}");
    for name in [
        "equilibrium-residual",
        "decay-identity",
        "control-consistency",
        "basis-orthonormality",
        "fd-cross-check",
    ] {
        assert!(text.contains(name), "missing {name} in {text}");
    }
    assert!(text.contains("seed 42"), "{text}");
}

#[test]
fn verify_seed_comes_from_the_environment() {
    let run_seeded = |seed: &str| {
        Command::new(exe())
            .arg("verify")
            .env("FLEXSAT_SEED", seed)
            .output()
            .expect("spawn flexsat")
    };
    let a = run_seeded("7");
    let b = run_seeded("7");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("seed 7"));

    let bad = run_seeded("not-a-seed");
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("FLEXSAT_SEED"), "{}", stderr(&bad));
}

#[test]
fn equilibrium_reports_a_passing_residual() {
    let out = run(&["equilibrium"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("residual: PASS"), "{text}");
    assert!(text.contains("omega = "), "{text}");
}

#[test]
fn modes_table_follows_the_mode_count() {
    let out = run(&["modes"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("beta*l"), "{text}");
    // Header + 4 data rows + stability line.
    assert_eq!(text.lines().count(), 6, "{text}");

    let out = run(&["modes", "--modes", "2"]);
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn oversized_step_warns_then_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("div.csv");
    let out = run(&[
        "simulate",
        "--scenario",
        shipped_scenario(),
        "--dt",
        "1.0",
        "--t-end",
        "60",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("stability bound"), "{err}");
    assert!(err.contains("divergence at t ="), "{err}");
}

#[test]
fn shipped_scenario_runs_and_writes_the_declared_format() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run.csv");
    let out = run(&[
        "simulate",
        "--scenario",
        shipped_scenario(),
        "--t-end",
        "0.2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("wrote "), "{}", stdout(&out));

    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# format=1"));
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,a1_1,"));
    assert!(header.ends_with("taug3"));
    // dt 1e-3 over 0.2 s with stride 100: rows at t = 0, 0.1, 0.2.
    assert_eq!(lines.count(), 3);
}

#[test]
fn continuation_from_an_emitted_row_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("leg.scn");
    write_file(&scn, &scenario_text("init.delta = 1e-3\n"));

    let run_leg = |args: &[&str], out_path: &Path| -> Vec<String> {
        let mut all = vec!["simulate", "--scenario", scn.to_str().unwrap(), "--out"];
        all.push(out_path.to_str().unwrap());
        all.extend_from_slice(args);
        let out = run(&all);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = std::fs::read_to_string(out_path).unwrap();
        text.lines().skip(2).map(str::to_owned).collect()
    };

    // One full run to 0.4 s and a half run to 0.2 s.
    let full = run_leg(&["--t-end", "0.4"], &dir.path().join("full.csv"));
    let half = run_leg(&["--t-end", "0.2"], &dir.path().join("half.csv"));

    // Restart from the half run's final state row, pasted verbatim.
    let handoff = half.last().unwrap();
    let tokens: Vec<&str> = handoff.split(',').collect();
    let n_state = 4 * 4 + 7;
    let state = tokens[1..1 + n_state].join(" ");
    let scn2 = dir.path().join("leg2.scn");
    write_file(&scn2, &scenario_text(&format!("init.state = {state}\n")));
    let out2 = dir.path().join("cont.csv");
    let cont_out = Command::new(exe())
        .args([
            "simulate",
            "--scenario",
            scn2.to_str().unwrap(),
            "--t-end",
            "0.2",
            "--out",
            out2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(cont_out.status.code(), Some(0), "{}", stderr(&cont_out));
    // No renormalization warning: the handoff quaternion re-enters untouched.
    assert!(!stderr(&cont_out).contains("warning"), "{}", stderr(&cont_out));

    let cont: Vec<String> = std::fs::read_to_string(&out2)
        .unwrap()
        .lines()
        .skip(2)
        .map(str::to_owned)
        .collect();

    // The continued run's rows must match the full run's later rows in every
    // state column, as text (hence bit for bit).
    assert_eq!(full.len(), 5);
    assert_eq!(cont.len(), 3);
    for (full_row, cont_row) in full[2..].iter().zip(cont.iter()) {
        let a: Vec<&str> = full_row.split(',').collect();
        let b: Vec<&str> = cont_row.split(',').collect();
        assert_eq!(&a[1..1 + n_state], &b[1..1 + n_state]);
    }
}

#[test]
fn two_runs_of_the_same_scenario_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |name: &str| {
        let path = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--scenario",
            shipped_scenario(),
            "--t-end",
            "0.3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        std::fs::read(&path).unwrap()
    };
    assert_eq!(mk("a.csv"), mk("b.csv"));
}
