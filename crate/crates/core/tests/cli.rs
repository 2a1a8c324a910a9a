use std::path::Path;
use std::process::{Command, Output};

fn cqdae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqdae")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--method", "bdf2", "--steps", "32"];
    let a = cqdae(&args);
    let b = cqdae(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("t,y1,y2,newton_iters\n"));
    assert_eq!(text.lines().count(), 34);
}

#[test]
fn offline_and_online_are_separate_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.cqw");
    let out = dir.path().join("traj.csv");
    let w = w.to_str().unwrap();
    let o = cqdae(&["weights", "--method", "radau3", "--steps", "128", "--out", w]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert!(report.contains("L = 384"), "{report}");
    let header = std::fs::read_to_string(w).unwrap();
    assert!(header.starts_with("CQW kind=rk m_or_s=3 p=1 q=1 N=128"));
    assert_eq!(header.lines().count(), 129);
    assert_eq!(header.lines().nth(1).unwrap().split_whitespace().count(), 9);

    let o = cqdae(&[
        "simulate", "--method", "radau3", "--steps", "128", "--weights-file", w, "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("online transfer evaluations = 0"));
    assert!(Path::new(&out).exists());

    let o = cqdae(&["simulate", "--method", "radau2", "--steps", "128", "--weights-file", w]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight table"));
}

#[test]
fn compare_coupled_and_reduced() {
    let o = cqdae(&["compare", "--method", "radau2", "--steps", "64"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("relative sup distance")).unwrap();
    let d: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(d <= 1e-9, "{text}");
}

#[test]
fn convergence_reports_slopes() {
    let o = cqdae(&["convergence", "--method", "bdf2", "--solver", "coupled"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("tau,steps,err_sup,err_final\n"));
    let line = text.lines().find(|l| l.starts_with("slope (final time)")).unwrap();
    let s: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((s - 2.0).abs() <= 0.2, "{text}");
}

#[test]
fn netlist_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("rl.net");
    std::fs::write(&net, "V1 in 0 sin 2 6.0\nR1 in out 1.5\nL1 out 0 0.25\n").unwrap();
    let o = cqdae(&["simulate", "--netlist", net.to_str().unwrap(), "--steps", "10", "--solver", "coupled"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("t,y1,y2,y3,y4,newton_iters"));

    std::fs::write(&net, "V1 in 0 sin 2 6.0\nR1 in out\n").unwrap();
    let o = cqdae(&["simulate", "--netlist", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(cqdae(&["simulate", "--tau", "0.3"]).status.code(), Some(2));
    assert_eq!(cqdae(&["simulate", "--contour", "wide"]).status.code(), Some(2));
}

#[test]
fn diode_overflow_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("d.net");
    std::fs::write(&net, "V1 1 0 sin 1000 6.0\nD1 1 2 1e-6 40\nR1 2 0 1e-3\n").unwrap();
    let o = cqdae(&["simulate", "--netlist", net.to_str().unwrap(), "--steps", "20"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_and_bode() {
    let o = cqdae(&["fit"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["a = ", "R1 = ", "R2 = ", "L1 = "] {
        assert!(text.contains(key), "{text}");
    }
    let o = cqdae(&["bode", "--points", "5"]);
    assert_eq!(stdout(&o).lines().count(), 6);
}
