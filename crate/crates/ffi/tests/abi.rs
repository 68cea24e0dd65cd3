use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use opalg_ffi::*;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/models")
}

fn cfile(name: &str) -> CString {
    CString::new(std::fs::read_to_string(models().join(name)).unwrap()).unwrap()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        opalg_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn system(model: &str, state: Option<&str>) -> *mut OpalgPricingSystem {
    let m = cfile(model);
    let s = state.map(cfile);
    let mut sys = ptr::null_mut();
    let st = unsafe { opalg_pricing_system_new(m.as_ptr(), s.as_ref().map_or(ptr::null(), |s| s.as_ptr()), &mut sys) };
    assert_eq!(st, OpalgStatus::Ok, "{}", last_error());
    sys
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(opalg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn pricing_round_trip() {
    let sys = system("twoblock4.json", Some("twoblock4_state.json"));
    let (mut dim, mut horizon) = (0, 0);
    unsafe {
        assert_eq!(opalg_pricing_system_shape(sys, &mut dim, &mut horizon), OpalgStatus::Ok);
        assert_eq!((dim, horizon), (4, 2));

        let claim = cfile("claim4.json");
        let mut out = vec![0.0; 32];
        let mut written = 0;
        assert_eq!(opalg_price(sys, 1.0, claim.as_ptr(), out.as_mut_ptr(), out.len(), &mut written), OpalgStatus::Ok);
        assert_eq!(written, 32);
        let lib = opalg::pricing::PricingSystem::new(
            opalg::algebra::AlgebraModel::from_json_str(cfile("twoblock4.json").to_str().unwrap()).unwrap(),
            opalg::states::DensityState::from_json_str(cfile("twoblock4_state.json").to_str().unwrap()).unwrap(),
        )
        .unwrap();
        let x: opalg::linalg::ComplexMatrix = serde_json::from_str(claim.to_str().unwrap()).unwrap();
        let expected = lib.price(&x, 2).unwrap();
        for (k, z) in expected.as_slice().iter().enumerate() {
            assert_eq!((out[2 * k], out[2 * k + 1]), (z.re, z.im));
        }
        let mut small = [0.0; 4];
        assert_eq!(opalg_price(sys, 0.5, claim.as_ptr(), small.as_mut_ptr(), 4, &mut written), OpalgStatus::BufferTooSmall);
        assert_eq!(written, 32);

        let mut ce = vec![0.0; 32];
        assert_eq!(opalg_conditional_expectation(sys, 0.0, claim.as_ptr(), ce.as_mut_ptr(), 32, &mut written), OpalgStatus::Ok);
        // E_0 is a multiple of the identity
        assert!((ce[0] - ce[2 * 5]).abs() < 1e-12 && ce[2].abs() < 1e-12);

        assert_eq!(opalg_price(sys, 0.3, claim.as_ptr(), out.as_mut_ptr(), 32, &mut written), OpalgStatus::Validation);
        assert!(last_error().starts_with("UnknownTime"), "{}", last_error());

        let (mut passed, mut failed) = (0, 0);
        assert_eq!(opalg_check(sys, 1, 0.0, &mut passed, &mut failed), OpalgStatus::Ok);
        assert!(passed > 10 && failed == 0);
        assert_eq!(opalg_check(sys, 1, 1e-30, &mut passed, &mut failed), OpalgStatus::CheckFailed);
        assert!(failed > 0);
        opalg_pricing_system_free(sys);
    }
}

#[test]
fn invalid_input_is_reported_not_panicked() {
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(opalg_pricing_system_new(ptr::null(), ptr::null(), &mut sys), OpalgStatus::NullPointer);
        assert!(sys.is_null());
        let bad = c("{\"block_dims\": [1, 1], \"times\": \"never\"}");
        assert_eq!(opalg_pricing_system_new(bad.as_ptr(), ptr::null(), &mut sys), OpalgStatus::Validation);
        assert!(last_error().contains("times"), "{}", last_error());
        let m = cfile("diagonal4.json");
        let s = cfile("cq2x2_state.json");
        let ok = cfile("cq2x2.json");
        let st2 = cfile("damping.json");
        // a 2 × 2 "state" against a 4 × 4 model
        assert_eq!(opalg_pricing_system_new(m.as_ptr(), st2.as_ptr(), &mut sys), OpalgStatus::Validation);
        assert_eq!(opalg_pricing_system_new(ok.as_ptr(), s.as_ptr(), &mut sys), OpalgStatus::Ok);
        assert!(last_error().is_empty());
        let invalid_utf8 = [0xffu8 as c_char, 0];
        let mut v = 0.0;
        assert_eq!(opalg_price0(sys, invalid_utf8.as_ptr(), &mut v), OpalgStatus::InvalidUtf8);
        assert_eq!(opalg_price0(ptr::null(), s.as_ptr(), &mut v), OpalgStatus::NullPointer);
        opalg_pricing_system_free(sys);
        opalg_pricing_system_free(ptr::null_mut());
    }
}

#[test]
fn pricing_state_search() {
    let mut rho = [0.0; 8];
    let mut written = 0;
    unsafe {
        let feasible = cfile("gains_feasible.json");
        assert_eq!(opalg_pricing_state(feasible.as_ptr(), 0.1, 0.0, rho.as_mut_ptr(), 8, &mut written), OpalgStatus::Ok);
        assert!((rho[0] + rho[6] - 1.0).abs() < 1e-10 && rho[0] <= rho[6] + 1e-8);
        let arbitrage = cfile("gains_arbitrage.json");
        assert_eq!(opalg_pricing_state(arbitrage.as_ptr(), 0.1, 0.0, rho.as_mut_ptr(), 8, &mut written), OpalgStatus::CheckFailed);
        assert!(last_error().starts_with("Infeasible"));
    }
}

#[test]
fn jump_pricers_agree_through_the_abi() {
    let json = cfile("pm1.json");
    let payoff = c("{\"kind\": \"digital\", \"strike\": 1.0}");
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(opalg_jump_model_new(json.as_ptr(), &mut m), OpalgStatus::Ok);
        let (mut a, mut b, mut ea, mut eb) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(opalg_jump_price(m, payoff.as_ptr(), 0.5, 1.0, OpalgJumpMethod::Series, &mut a, &mut ea), OpalgStatus::Ok);
        assert_eq!(opalg_jump_price(m, payoff.as_ptr(), 0.5, 1.0, OpalgJumpMethod::Expm, &mut b, &mut eb), OpalgStatus::Ok);
        assert!((a - b).abs() <= 1e-10 && ea < 1e-9 && eb < 1e-9);
        let bad = c("{\"kind\": \"digital\", \"strike\": -1}");
        assert_eq!(opalg_jump_price(m, bad.as_ptr(), 0.5, 1.0, OpalgJumpMethod::Series, &mut a, &mut ea), OpalgStatus::Validation);
        opalg_jump_model_free(m);
    }
}

#[test]
fn errors_are_thread_local() {
    let mut sys = ptr::null_mut();
    let bad = c("[");
    unsafe {
        assert_eq!(opalg_pricing_system_new(bad.as_ptr(), ptr::null(), &mut sys), OpalgStatus::Validation);
    }
    assert!(!last_error().is_empty());
    std::thread::spawn(|| assert!(last_error().is_empty())).join().unwrap();
}

/// Builds the static library, then compiles and runs the C smoke program
/// against the generated header. Skipped only when no C compiler exists.
#[test]
fn header_compiles_and_links_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = std::process::Command::new(cargo)
        .args(["build", "--quiet", "--lib", "-p", "opalg-ffi", "--message-format=json"])
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let lib = String::from_utf8_lossy(&built.stdout)
        .lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter(|v| v["reason"] == "compiler-artifact" && v["target"]["name"] == "opalg_ffi")
        .flat_map(|v| v["filenames"].as_array().cloned().unwrap_or_default())
        .filter_map(|f| f.as_str().map(PathBuf::from))
        .find(|f| f.extension().is_some_and(|e| e == "a"))
        .expect("static library artifact");
    let out = tempfile_path("opalg_smoke");
    let status = std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let run = std::process::Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
