use std::process::Command;

fn ergorate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ergorate")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(ergorate(&["spectral", "--out", out]).status.code(), Some(2));
    assert_eq!(ergorate(&["spectral", "--scenario", "ou", "--set", "grid.nn=3", "--out", out]).status.code(), Some(2));
    let o = ergorate(&[
        "verify",
        "--set",
        "potential=power:0.5",
        "--set",
        "lyapunov.candidate=expr:1+x1^2",
        "--set",
        "lyapunov.n=3",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none(), "failed runs write nothing");
}

#[test]
fn verify_hand_certificate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ou.cfg");
    std::fs::write(
        &cfg,
        "potential = quadratic:1\n[lyapunov]\ncandidate = expr:1 + x1^2\nphi = linear:1\nb = 1\nset = ball:1.4142135623730951\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ergorate(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timestamp"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("certificate.txt")).unwrap();
    assert!(text.contains("INVALID"), "{text}");
    assert!(!text.contains("# created"));
    let resolved = std::fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("lyapunov.b = 1\n"), "{resolved}");
}

#[test]
fn rates_flags_and_psi_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ergorate(&["rates", "--phi", "linear:2", "--t", "0..1..3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let psi = std::fs::read_to_string(dir.path().join("psi.csv")).unwrap();
    let last = psi.lines().last().unwrap();
    let v: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - (-2f64).exp() / 2.0).abs() < 1e-8, "{last}");
}
