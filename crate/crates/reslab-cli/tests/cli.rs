use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reslab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8")
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

#[test]
fn scatter_on_free_potential_is_fully_transparent() {
    let out = run(&["scatter", "--potential", "free", "--kmin", "0.5", "--kmax", "5", "--knum", "10"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&stdout(&out));
    assert_eq!(header, ["k", "re_a", "im_a", "re_b_plus", "im_b_plus", "T", "R_plus"]);
    assert_eq!(rows.len(), 10);
    for row in rows {
        assert_eq!(row[5], 1.0, "T must be exactly 1 for the free potential");
        assert_eq!(row[6], 0.0);
    }
}

#[test]
fn identical_invocations_give_byte_identical_csv() {
    let args = ["scatter", "--ell", "1", "--delta", "1", "--lambda", "30", "--kmin", "1", "--kmax", "9", "--knum", "64"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn threads_flag_does_not_change_results() {
    let base = ["resonances", "--ell", "1", "--delta", "1", "--lambda", "30", "--kmin", "1", "--kmax", "4.5"];
    let single: Vec<String> = [&base[..], &["--threads", "1"]].concat().iter().map(|s| s.to_string()).collect();
    let multi: Vec<String> = [&base[..], &["--threads", "3"]].concat().iter().map(|s| s.to_string()).collect();
    let a = bin().args(&single).output().unwrap();
    let b = bin().args(&multi).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn resonances_match_frozen_ladder() {
    let out = run(&["resonances", "--ell", "1", "--delta", "1", "--lambda", "30", "--kmin", "1", "--kmax", "4.5", "--max-im", "0.1"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&stdout(&out));
    assert_eq!(header, ["re_z", "im_z", "E", "Gamma", "Gamma_SI", "channel"]);
    assert_eq!(rows.len(), 3);
    assert!((rows[0][0] - 1.326221735).abs() < 1e-8);
    assert!((rows[1][0] - 2.638866883).abs() < 1e-8);
    assert!((rows[1][3] - 2.110722e-4).abs() < 1e-9);
    let text = stdout(&out);
    assert!(text.contains("even") && text.contains("odd"));
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = std::env::temp_dir().join("reslab-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path: PathBuf = dir.join("run.conf");
    std::fs::write(&path, "# toy well\npotential = doublewell\nell = 1\ndelta = 1\nlambda = 30\n").unwrap();

    let from_config = run(&["resonances", "--config", path.to_str().unwrap(), "--kmin", "1", "--kmax", "1.5"]);
    assert!(from_config.status.success());
    let (_, rows) = parse_csv(&stdout(&from_config));
    assert!((rows[0][0] - 1.326221735).abs() < 1e-8);

    // the flag overrides delta from the file: different root
    let with_flag = run(&[
        "resonances", "--config", path.to_str().unwrap(), "--delta", "0.6", "--lambda", "18",
        "--kmin", "1", "--kmax", "1.5",
    ]);
    assert!(with_flag.status.success());
    let (_, rows) = parse_csv(&stdout(&with_flag));
    assert!((rows[0][0] - 1.264504376).abs() < 1e-7, "got {}", rows[0][0]);
}

#[test]
fn unknown_potential_kind_is_a_config_error() {
    let out = run(&["scatter", "--potential", "morse"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error code=2"), "stderr: {err}");
}

#[test]
fn missing_resonance_is_a_numeric_error() {
    let out = run(&["gamow", "--potential", "free", "--kmin", "1", "--kmax", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error code=3"), "stderr: {err}");
}

#[test]
fn u234_benchmark_passes_and_reports_rate() {
    let out = run(&["u234"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let get = |key: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split('=').nth(1))
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(f64::NAN)
    };
    assert!((get("re_z_natural") - 7.487241926018988).abs() < 1e-10);
    assert!((get("gamma_si_per_s") / 1.3361e-13 - 1.0).abs() < 1e-3);
    assert!(get("relative_deviation") < 1e-3);
}

#[test]
fn transform_line_shape_tracks_pole_model() {
    let out = run(&[
        "transform", "--ell", "1", "--delta", "1", "--lambda", "30",
        "--kmin", "1.2", "--kmax", "1.5", "--knum", "21", "--half-widths", "8",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&stdout(&out));
    assert_eq!(header, ["k", "abs_psihat_plus", "abs_eta"]);
    assert_eq!(rows.len(), 21);
    for row in &rows {
        let rel = (row[1] / row[2] - 1.0).abs();
        assert!(rel < 0.05, "k = {}: |psihat| {} vs |eta| {}", row[0], row[1], row[2]);
    }
}

#[test]
fn gamow_profile_is_sup_normalized() {
    let out = run(&[
        "gamow", "--ell", "1", "--delta", "1", "--lambda", "30",
        "--kmin", "1", "--kmax", "1.5", "--xmin", "-1", "--xmax", "1", "--xnum", "401",
    ]);
    assert!(out.status.success());
    let (_, rows) = parse_csv(&stdout(&out));
    let sup = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    assert!((sup - 1.0).abs() < 1e-4, "sup {sup}");
}

#[test]
fn evolve_emits_profile_rows() {
    let out = run(&[
        "evolve", "--ell", "1", "--delta", "0.4", "--lambda", "20",
        "--kmin", "2.2", "--kmax", "2.9", "--tmin", "0", "--tmax", "1.0", "--tnum", "3",
        "--xnum", "11", "--tol", "1e-3",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&stdout(&out));
    assert_eq!(header, ["t", "x", "re_psi", "im_psi", "abs2"]);
    assert_eq!(rows.len(), 3 * 11);
    // |psi|^2 column is consistent
    for row in &rows {
        assert!((row[2] * row[2] + row[3] * row[3] - row[4]).abs() < 1e-12);
    }
}
