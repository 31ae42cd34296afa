use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pendular_ffi::*;

fn sro() -> *mut PdPair {
    let mut pair = ptr::null_mut();
    let s = unsafe {
        pd_pair_new(
            c"SrO".as_ptr(),
            0.33,
            8.9,
            4.4,
            6.6,
            50.0,
            90.0,
            2,
            &mut pair,
        )
    };
    assert_eq!(s, PdStatus::Ok);
    assert!(!pair.is_null());
    pair
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        pd_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn pair_queries() {
    let pair = sro();
    unsafe {
        assert_eq!(pd_pair_dim(pair), 4);
        let mut q = PdSiteQubit::default();
        assert_eq!(pd_pair_site(pair, 2, &mut q), PdStatus::Ok);
        assert!((q.c0 - 0.579).abs() < 0.005);
        assert!((q.c1 + 0.164).abs() < 0.005);
        let mut dw = 0.0;
        assert_eq!(pd_pair_delta_omega_mhz(pair, &mut dw), PdStatus::Ok);
        assert!((dw - 51.0).abs() < 5.1);
        let mut t = 0.0;
        assert_eq!(pd_pair_default_duration_ns(pair, &mut t), PdStatus::Ok);
        assert!((31.0..35.0).contains(&t));
        pd_pair_free(pair);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut pair = ptr::null_mut();
        let s = pd_pair_new(ptr::null(), -1.0, 8.9, 4.4, 6.6, 50.0, 90.0, 2, &mut pair);
        assert_eq!(s, PdStatus::Config);
        assert!(pair.is_null());
        assert!(
            last_error().contains("rotational constant"),
            "{}",
            last_error()
        );

        assert_eq!(
            pd_pair_site(ptr::null(), 1, &mut PdSiteQubit::default()),
            PdStatus::NullPointer
        );
        assert_eq!(pd_pair_dim(ptr::null()), 0);
        assert!(pd_result_fidelity(ptr::null()).is_nan());
        pd_pair_free(ptr::null_mut());
        pd_result_free(ptr::null_mut());

        let mut magic = ptr::null_mut();
        let alpha = (1.0f64 / 3f64.sqrt()).acos().to_degrees();
        assert_eq!(
            pd_pair_new(ptr::null(), 0.33, 8.9, 4.4, 6.6, 50.0, alpha, 2, &mut magic),
            PdStatus::Ok
        );
        let mut t = 0.0;
        assert_eq!(
            pd_pair_default_duration_ns(magic, &mut t),
            PdStatus::UnresolvableSites
        );
        pd_pair_free(magic);
    }
}

#[test]
fn last_error_truncates() {
    unsafe {
        pd_pair_site(ptr::null(), 1, ptr::null_mut());
        let full = pd_last_error_message(ptr::null_mut(), 0);
        let mut buf = [1 as std::ffi::c_char; 4];
        assert_eq!(pd_last_error_message(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
    }
}

#[test]
fn optimize_identity_and_copy_pulse() {
    let pair = sro();
    unsafe {
        let mut cfg = std::mem::zeroed::<PdOptimizerConfig>();
        assert_eq!(pd_optimizer_config_default(&mut cfg), PdStatus::Ok);
        cfg.dt_ps = 0.5;
        cfg.duration_ns = 1.0;
        cfg.max_iter = 3;
        cfg.initial_amplitude_kv_cm = 0.0;
        let mut res = ptr::null_mut();
        assert_eq!(
            pd_optimize(pair, PdGate::Identity, &cfg, &mut res),
            PdStatus::Ok
        );
        assert!(pd_result_converged(res));
        assert_eq!(pd_result_iterations(res), 1);
        assert!((pd_result_fidelity(res) - 1.0).abs() < 1e-12);
        assert!(pd_result_avg_probability(res) >= pd_result_fidelity(res) - 1e-12);
        assert_eq!(pd_result_dt_ps(res), 0.5);

        let mut len = 0usize;
        assert_eq!(
            pd_result_pulse(res, ptr::null_mut(), &mut len),
            PdStatus::BufferTooSmall
        );
        assert_eq!(len, 2001);
        let mut buf = vec![1.0; len];
        assert_eq!(
            pd_result_pulse(res, buf.as_mut_ptr(), &mut len),
            PdStatus::Ok
        );
        assert!(buf.iter().all(|e| e.abs() < 1e-12));
        pd_result_free(res);

        cfg.max_iter = 0;
        assert_eq!(
            pd_optimize(pair, PdGate::Cnot, &cfg, &mut res),
            PdStatus::Config
        );
        pd_pair_free(pair);
    }
}

#[test]
fn propagate_rejects_bad_input() {
    let pair = sro();
    unsafe {
        let pulse = [0.0, 0.3, 0.0];
        let (mut re, mut im) = ([2.0, 0.0, 0.0, 0.0], [0.0; 4]);
        let s = pd_propagate(
            pair,
            pulse.as_ptr(),
            3,
            0.25,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            4,
        );
        assert_eq!(s, PdStatus::Contract);
        re[0] = 1.0;
        let s = pd_propagate(
            pair,
            pulse.as_ptr(),
            3,
            0.25,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            3,
        );
        assert_eq!(s, PdStatus::Contract);
        let bad = [0.1, 0.3, 0.0];
        let s = pd_propagate(
            pair,
            bad.as_ptr(),
            3,
            0.25,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            4,
        );
        assert_eq!(s, PdStatus::Contract);
        pd_pair_free(pair);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(pd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the generated header and static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/pendular.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "pd_pair_new",
        "pd_optimize",
        "pd_propagate",
        "pd_last_error_message",
        "PD_STATUS_OK",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libpendular_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link test: no static library or C compiler");
        return;
    }
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("pendular_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    assert!(
        run.status.success(),
        "smoke exited with {:?}",
        run.status.code()
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")), "{stdout}");
}
