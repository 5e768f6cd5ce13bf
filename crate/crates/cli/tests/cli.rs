use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fbstab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbstab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("FBSTAB_THREADS")
        .output()
        .expect("binary runs")
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbstab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Closed-form shifted unit sphere as a graph over the unit sphere.
fn shifted_sphere(z: [f64; 3], w: [f64; 3]) -> f64 {
    let zw = z[0] * w[0] + z[1] * w[1] + z[2] * w[2];
    let zz = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    zw + (1.0 - zz + zw * zw).sqrt() - 1.0
}

#[test]
fn stationary_reference_model() {
    let dir = TempDir::new().unwrap();
    let out = fbstab(&["stationary", "--reference", "--grid-n", "256"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&dir.path().join("stationary.json"));
    assert!((v["R_s"].as_f64().unwrap() - 1.0).abs() < 1e-8, "{v}");
    let slope = 1.0 / 1f64.tanh() - 1.0;
    assert!((v["sigma_prime_boundary"].as_f64().unwrap() - slope).abs() < 1e-7);
    let (header, rows) = csv(&dir.path().join("stationary.csv"));
    assert_eq!(header, ["r", "sigma_s", "p_s"]);
    assert_eq!(rows.len(), 257);
    for row in rows.iter().skip(1) {
        let exact = row[0].sinh() / (row[0] * 1f64.sinh());
        assert!((row[1] - exact).abs() < 1e-7, "{row:?}");
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let st = 3.0 * (1.0 / 1f64.tanh() - 1.0);
    let cfg = write_config(
        dir.path(),
        "m.cfg",
        &format!("# reference model\nn = 3\nf = sigma\ng = sigma - {st:?}\nsigma_bar = 1\ngrid_n = 128\nformat = csv\n"),
    );
    let out = fbstab(&["stationary", "--config", &cfg, "--grid-n", "64"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(csv(&dir.path().join("stationary.csv")).1.len(), 65);
    assert!(!dir.path().join("stationary.json").exists());
    let out = fbstab(&["stationary", "--config", &cfg, "--set", "format=json"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("stationary.json").exists());
}

#[test]
fn broken_model_exits_2_naming_the_assumption() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "n = 3\nf = sigma - 1\ng = sigma - 0.5\nsigma_bar = 1\n");
    let out = fbstab(&["stationary", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("(A1)"), "{}", stderr(&out));
    let out = fbstab(&["stationary", "--reference", "--set", "f=sigma +"], dir.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "miss.cfg", "n = 3\nf = sigma\nsigma_bar = 1\n");
    let out = fbstab(&["stationary", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`g`"), "{}", stderr(&out));
    for args in [
        &["stationary", "--reference", "--grid-n", "1000"][..],
        &["stationary", "--reference", "--set", "grdi_n=512"],
        &["stationary", "--reference", "--set", "oops"],
        &["stationary", "--config", "/nonexistent/fbstab.cfg"],
        &["translate", "--shift", "0.2,0,0"],
    ] {
        let out = fbstab(args, dir.path());
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
    assert_eq!(code(&bare(&["no-such-command"])), 1);
    assert_eq!(code(&bare(&["--help"])), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_fbstab"))
        .args(["check", "--list"])
        .env("FBSTAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn spectrum_verdicts() {
    let dir = TempDir::new().unwrap();
    let above = dir.path().join("above");
    let out = fbstab(
        &["spectrum", "--reference", "--gamma-factor", "2", "--c", "1e-3", "--k-max", "16", "--grid-n", "512"],
        &above,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&above.join("spectrum.json"));
    assert_eq!(v["verdict"], "stable (gamma > gamma_star)");
    assert_eq!(v["argmax_k"], 2);
    assert!(v["unstable_modes"].as_array().unwrap().is_empty());
    assert!(v["max_lambda"].as_f64().unwrap() < 0.0);
    let (header, rows) = csv(&above.join("spectrum.csv"));
    assert_eq!(header, ["k", "lambda_k", "a_k", "d_k", "ubar_1", "gamma_k", "alpha_k", "lambda"]);
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[1][7], 0.0);

    let below = dir.path().join("below");
    let out = fbstab(&["spectrum", "--reference", "--gamma-factor", "0.5", "--k-max", "16"], &below);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&below.join("spectrum.json"));
    assert_eq!(v["verdict"], "unstable");
    assert!(v["unstable_modes"].as_array().unwrap().contains(&Value::from(2)));
    assert!(v["c0"].is_null());
    assert!(stdout(&out).contains("verdict: unstable, alpha_k > 0 for k = 2"));
    let (header, _) = csv(&below.join("spectrum.csv"));
    assert_eq!(header.len(), 7);
}

#[test]
fn gamma_star_independent_of_k_max() {
    let dir = TempDir::new().unwrap();
    let star = |k_max: &str| {
        let d = dir.path().join(k_max);
        let out = fbstab(&["spectrum", "--reference", "--k-max", k_max, "--format", "json"], &d);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        json(&d.join("spectrum.json"))["gamma_star"].as_f64().unwrap()
    };
    assert_eq!(star("8"), star("64"));
}

#[test]
fn eigen_table() {
    let dir = TempDir::new().unwrap();
    let out = fbstab(
        &["eigen", "--reference", "--gamma-factor", "2", "--modes", "0,1,2", "--c-list", "1e-3,1e-2", "--grid-n", "512"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&dir.path().join("eigen.csv"));
    assert_eq!(header, ["k", "c", "gamma", "alpha_k", "mu", "lambda", "iterations", "residual"]);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!((r[5] - (r[3] + r[1] * r[4])).abs() < 1e-15, "{r:?}");
        if r[0] == 1.0 {
            assert_eq!(r[5], 0.0);
        } else {
            assert!(r[5] < 0.0);
        }
    }
}

#[test]
fn radial_run_and_empty_horizon() {
    let dir = TempDir::new().unwrap();
    let out = fbstab(
        &["simulate", "radial", "--reference", "--set", "c=1e-3", "--grid-n", "256", "--t-end", "100", "--stride", "500"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&dir.path().join("radial.csv"));
    assert_eq!(header, ["t", "R", "sigma_err"]);
    assert_eq!(rows.len(), 21);
    assert!((rows[0][1] - 1.1).abs() < 1e-9);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    let v = json(&dir.path().join("radial.json"));
    let rate = v["rate"].as_f64().unwrap();
    assert!(rate > 0.03 && rate < 0.045, "{v}");

    let empty = dir.path().join("empty");
    let out = fbstab(&["simulate", "radial", "--reference", "--grid-n", "128", "--t-end", "0"], &empty);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(csv(&empty.join("radial.csv")).1.len(), 1);
    let out = fbstab(&["simulate", "mode", "--reference", "--grid-n", "128", "--t-end", "0"], &empty);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(csv(&empty.join("mode_k2.csv")).1.len(), 1);
}

#[test]
fn mode_run_matches_fixed_point() {
    let dir = TempDir::new().unwrap();
    let out = fbstab(
        &["simulate", "mode", "--reference", "--gamma-factor", "2", "--k", "0", "--grid-n", "512", "--stride", "10"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&dir.path().join("mode_k0.json"));
    let lambda = v["lambda"].as_f64().unwrap();
    assert!((v["dominant_re"].as_f64().unwrap() - lambda).abs() < 1e-3 * lambda.abs(), "{v}");
    assert!((v["measured_rate"].as_f64().unwrap() + lambda).abs() < 1e-2 * lambda.abs(), "{v}");
    assert_eq!(v["k"], 0);
    let (header, rows) = csv(&dir.path().join("mode_k0.csv"));
    assert_eq!(header, ["t", "norm"]);
    assert_eq!(rows[0], [0.0, 1.0]);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let runs = [
        &["eigen", "--reference", "--gamma-factor", "2", "--modes", "0,2,3,4", "--grid-n", "256"][..],
        &["simulate", "radial", "--reference", "--set", "c=1e-2", "--grid-n", "128", "--t-end", "5"],
        &["translate", "--shift", "0.01,-0.02,0.005"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("{i}a"));
        let b = dir.path().join(format!("{i}b"));
        assert_eq!(code(&fbstab(args, &a)), 0);
        assert_eq!(code(&fbstab(args, &b)), 0);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{args:?} {name:?}");
        }
    }
}

#[test]
fn translate_sphere_and_back() {
    let dir = TempDir::new().unwrap();
    let z = [0.01, -0.02, 0.005];
    let fwd = dir.path().join("fwd");
    let out = fbstab(&["translate", "--shift", "0.01,-0.02,0.005"], &fwd);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&fwd.join("graph_samples.csv"));
    assert_eq!(header, ["theta", "phi", "rho"]);
    for r in &rows {
        let w = [r[0].sin() * r[1].cos(), r[0].sin() * r[1].sin(), r[0].cos()];
        assert!((r[2] - shifted_sphere(z, w)).abs() < 1e-9, "{r:?}");
    }
    let (header, coeffs) = csv(&fwd.join("graph.csv"));
    assert_eq!(header, ["k", "l", "b_kl"]);
    assert_eq!(coeffs.len(), 17 * 17);

    let back = dir.path().join("back");
    let input = fwd.join("graph.csv");
    let out = fbstab(
        &["translate", "--input", input.to_str().unwrap(), "--shift", "-0.01,0.02,-0.005"],
        &back,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&back.join("graph.json"));
    assert!(v["sup_norm_out"].as_f64().unwrap() < 1e-6, "{v}");

    let circle = dir.path().join("circle");
    let out = fbstab(&["translate", "--set", "n=2"], &circle);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&circle.join("graph_samples.csv"));
    assert_eq!(header, ["theta", "rho"]);
    for r in &rows {
        let w = [r[0].cos(), r[0].sin(), 0.0];
        assert!((r[1] - shifted_sphere([0.02, 0.0, 0.0], w)).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn cm_demo_report() {
    let dir = TempDir::new().unwrap();
    let out = fbstab(&["cm-demo", "--r0", "1.2", "--set", "theta0=0.4"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&dir.path().join("cm.json"));
    assert_eq!(v["kernel_dim"], 1);
    assert!((v["omega_minus"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["sigma_hat"][0].as_f64().unwrap() - 0.4).abs() < 1e-6);
    assert!((v["rate_measured"].as_f64().unwrap() - 1.0).abs() < 0.02);
}

#[test]
fn check_list_and_selection() {
    let out = bare(&["check", "--list"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().next().unwrap().trim_start().starts_with("1 "));

    let out = bare(&["check", "--only", "1,9"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).matches("[PASS]").count(), 2);
    assert_eq!(code(&bare(&["check", "--only", "11"])), 1);
}

#[test]
fn coarse_grid_fails_the_check() {
    let out = bare(&["check", "--grid-n", "64", "--only", "6"]);
    assert_eq!(code(&out), 4, "{}", stdout(&out));
    assert!(stdout(&out).contains("[FAIL]"));
    assert!(stderr(&out).contains("criterion 6"), "{}", stderr(&out));
}
