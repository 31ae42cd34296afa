use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pendular");

fn preset() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/sro.cfg")).unwrap()
}

/// Writes `text` as a config in `dir` and returns its path.
fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn short(text: &str) -> String {
    text.replace("dt_ps = 0.25", "dt_ps = 0.5\nduration_ns = 2.0")
        .replace("max_iter = 600", "max_iter = 3")
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// Data rows of a CSV written by the tool, comment header stripped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn levels_reports_cosine_elements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &preset());
    let o = run(&["levels"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&dir.path().join("out/levels.csv"));
    assert!((num(&r[0][6]) - 0.480).abs() < 0.0005);
    assert!((num(&r[1][6]) - 0.579).abs() < 0.0005);
}

#[test]
fn levels_at_zero_field_gives_free_rotor_transition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &preset().replace("epsilon1_kv_cm = 4.4", "epsilon1_kv_cm = 0.0"),
    );
    let o = run(&["levels"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&dir.path().join("out/levels.csv"));
    assert!((num(&r[0][8]) - 1.0 / 3f64.sqrt()).abs() < 1e-6);
}

#[test]
fn malformed_key_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &preset().replace("r12_nm = 50.0", "r12_nm = 50.0\nspacing = 3.0"),
    );
    let o = run(&["levels"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spacing"));
}

#[test]
fn missing_config_exits_2() {
    let o = Command::new(BIN).arg("levels").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN).arg("bogus-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ratio_map_grid_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset()
        .replace(
            "x = { start = 0.0, stop = 6.0, step = 0.25 }",
            "x = { start = 0.0, stop = 2.0, step = 1.0 }",
        )
        .replace(
            "x_prime_minus_x = { start = 0.0, stop = 3.0, step = 0.25 }",
            "x_prime_minus_x = { start = 0.0, stop = 1.0, step = 1.0 }",
        );
    let cfg = config(dir.path(), &text);
    let o = run(&["ratio-map"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&dir.path().join("out/ratio_map.csv"));
    assert_eq!(r.len(), 6);
    let at = |x: f64, d: f64| {
        r.iter()
            .find(|row| num(&row[0]) == x && num(&row[1]) == d)
            .map(|row| num(&row[2]))
            .unwrap()
    };
    assert!((at(2.0, 1.0) - 0.511).abs() < 0.002);
    assert!(at(0.0, 0.0).abs() < 1e-12);
    assert!(dir.path().join("out/ratio_map.svg").exists());
}

#[test]
fn ratio_map_empty_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset().replace(
        "x = { start = 0.0, stop = 6.0, step = 0.25 }",
        "x = { start = 3.0, stop = 1.0, step = 0.5 }",
    );
    let cfg = config(dir.path(), &text);
    assert_eq!(
        run(&["ratio-map"], &cfg, &dir.path().join("out"))
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn identity_gate_converges_at_first_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let text = short(&preset()).replace("amplitude_kv_cm = 0.1", "amplitude_kv_cm = 0.0");
    let cfg = config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&["optimize", "--gate", "identity"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = fs::read_to_string(out.join("summary_IDENTITY.toml")).unwrap();
    assert!(summary.contains("iterations = 1\n"));
    assert!(summary.contains("converged = true"));
    assert!(out.join("pulse_IDENTITY.svg").exists());
    let trace = rows(&out.join("trace_IDENTITY.csv"));
    assert_eq!(trace.len(), 2);
}

#[test]
fn unconverged_run_exits_4_with_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &short(&preset()).replace("max_iter = 3", "max_iter = 1"),
    );
    let out = dir.path().join("out");
    let o = run(&["optimize"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    let pulse = rows(&out.join("pulse_CNOT.csv"));
    assert_eq!(pulse.len(), 4001);
    assert_eq!(num(&pulse[0][1]), 0.0);
    assert_eq!(num(&pulse[4000][1]), 0.0);
    assert!(out.join("summary_CNOT.toml").exists());
    let header = fs::read_to_string(out.join("trace_CNOT.csv")).unwrap();
    assert!(header.starts_with(&format!("# pendular {}", env!("CARGO_PKG_VERSION"))));
    assert!(header.contains("# r12_nm = 50.0"));
    assert!(header.contains("iter,fidelity,avg_prob,objective,max_field_kV_cm"));
}

#[test]
fn magic_angle_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = (1.0f64 / 3f64.sqrt()).acos().to_degrees();
    let cfg = config(
        dir.path(),
        &preset().replace("alpha_deg = 90.0", &format!("alpha_deg = {alpha}")),
    );
    let o = run(&["optimize"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unresolvable"));
}

#[test]
fn strict_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = short(&preset()).replace("enveloped = true", "enveloped = true\nnoise_kv_cm = 0.02");
    let cfg = config(dir.path(), &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = Command::new(BIN)
            .args(["optimize", "--strict-reduction", "--seed", "11", "--out"])
            .arg(out)
            .arg("--config")
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(matches!(o.status.code(), Some(0) | Some(4)));
    }
    for f in ["pulse_CNOT.csv", "trace_CNOT.csv", "summary_CNOT.toml"] {
        let strip = |p: PathBuf| -> String {
            fs::read_to_string(p)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("# output"))
                .collect()
        };
        assert_eq!(strip(a.join(f)), strip(b.join(f)), "{f}");
    }
    let header = fs::read_to_string(a.join("pulse_CNOT.csv")).unwrap();
    assert!(header.contains("# seed = 11"));
    assert!(header.contains("reduction = \"strict\""));
}

#[test]
fn locked_output_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &preset());
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".pendular.lock"), "1").unwrap();
    let o = run(&["levels"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("levels.csv").exists());
}

fn write_pulse(path: &Path, dt_ps: f64, samples: &[f64]) {
    let mut s = String::from("# test pulse\nt_ns,E_kV_cm\n");
    for (n, e) in samples.iter().enumerate() {
        s.push_str(&format!("{},{}\n", n as f64 * dt_ps / 1000.0, e));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn zero_pulse_keeps_eigenstate_populations_flat() {
    let dir = tempfile::tempdir().unwrap();
    let pulse = dir.path().join("zero.csv");
    write_pulse(&pulse, 0.25, &vec![0.0; 4001]);
    // |00⟩ is not an exact pair eigenstate; the dipole coupling admixes
    // neighbours at the 1e-6 level.
    let text = preset().replace(
        "initial_state = [[0.0, 0.0], [0.5, 0.0], [0.8660254037844386, 0.0], [0.0, 0.0]]",
        "initial_state = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]",
    );
    let cfg = config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["propagate", "--pulse"])
        .arg(&pulse)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = rows(&out.join("populations.csv"));
    assert_eq!(r.len(), 4000 / 40 + 1);
    for row in &r {
        assert!(num(&row[1]) > 1.0 - 1e-4);
    }
}

#[test]
fn mismatched_pulse_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let pulse = dir.path().join("p.csv");
    write_pulse(&pulse, 0.5, &[0.0, 0.1, 0.0]);
    let cfg = config(dir.path(), &preset());
    let o = Command::new(BIN)
        .args(["propagate", "--pulse"])
        .arg(&pulse)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn pair_info_reports_shift_and_duration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &preset());
    let out = dir.path().join("out");
    assert_eq!(run(&["pair-info"], &cfg, &out).status.code(), Some(0));
    let text = fs::read_to_string(out.join("pair_info.toml")).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let v: toml::Table = body.parse().unwrap();
    let dw = v["delta_omega_approx_mhz"].as_float().unwrap();
    let t = v["default_duration_ns"].as_float().unwrap();
    assert!((dw - 51.0).abs() < 5.1);
    assert!((31.0..35.0).contains(&t));
}
