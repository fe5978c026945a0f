use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use edgeshed_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(es_last_error_message()) }.to_string_lossy().into_owned()
}

fn ieee24_system() -> *mut EsSystem {
    let mut scn = ptr::null_mut();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(es_scenario_ieee24(&mut scn), EsStatus::Ok);
        assert_eq!(es_scenario_system(scn, &mut sys), EsStatus::Ok);
        es_scenario_free(scn);
    }
    sys
}

#[test]
fn system_queries_match_library() {
    let sys = ieee24_system();
    let mut mw = 0.0;
    let mut t = 0.0;
    let mut df = 0.0;
    let mut rocof = 0.0;
    unsafe {
        assert_eq!(es_system_threshold_loss_mw(sys, 49.5, &mut mw), EsStatus::Ok);
        assert_eq!(es_system_t_nadir(sys, &mut t), EsStatus::Ok);
        assert_eq!(es_system_delta_f(sys, 0.2, t, &mut df), EsStatus::Ok);
        assert_eq!(es_system_rocof(sys, 0.2, 0.0, &mut rocof), EsStatus::Ok);
        es_system_free(sys);
    }
    assert!((mw - 351.9).abs() < 1e-6, "{mw}");
    assert!((t - 3.72).abs() < 1e-6, "{t}");
    assert!(df < 0.0 && rocof < 0.0);
}

#[test]
fn errors_are_reported() {
    let bad = EsSystemParams {
        h: 50.0,
        d: 2.5,
        r: 0.05,
        km: 0.95,
        fh: 0.3,
        tr: 0.1,
        s_base_mva: 100.0,
        f_nominal_hz: 50.0,
        p_load_total_mw: 100.0,
    };
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { es_system_new(&bad, &mut sys) }, EsStatus::Unsupported);
    assert!(sys.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { es_system_t_nadir(ptr::null(), &mut 0.0) }, EsStatus::NullPointer);
    assert!(last_error().contains("null"));

    let text = CString::new("name = \"x\"\n[system\n").unwrap();
    let mut scn = ptr::null_mut();
    assert_eq!(unsafe { es_scenario_from_toml(text.as_ptr(), &mut scn) }, EsStatus::Parse);
    assert!(last_error().contains("line"));

    let sys = ieee24_system();
    let mut mw = 0.0;
    assert_eq!(
        unsafe { es_system_threshold_loss_mw(sys, 50.5, &mut mw) },
        EsStatus::InvalidInput
    );
    unsafe { es_system_free(sys) };
    // freeing null is a no-op
    unsafe { es_system_free(ptr::null_mut()) };
}

#[test]
fn agent_sheds_large_loss() {
    let sys = ieee24_system();
    let mut params = std::mem::MaybeUninit::<EsSystemParams>::uninit();
    assert_eq!(unsafe { es_system_params(sys, params.as_mut_ptr()) }, EsStatus::Ok);
    let params = unsafe { params.assume_init() };
    let loss_pu = 500.0 / params.s_base_mva;
    let mut agent = ptr::null_mut();
    let status = unsafe { es_agent_new(sys, 7, 49.5, 50.0, 49.3, 0.0, &mut agent) };
    assert_eq!(status, EsStatus::Ok);

    let mut est = 0.0;
    assert_eq!(unsafe { es_agent_estimate_mw(agent, &mut est) }, EsStatus::NotReady);

    let mut first_off = None;
    for k in -6..200 {
        let t = k as f64 * 0.016;
        let mut df = 0.0;
        let mut action = EsAction::None;
        unsafe {
            es_system_delta_f(sys, if t >= 0.0 { loss_pu } else { 0.0 }, t.max(0.0), &mut df);
            assert_eq!(es_agent_ingest(agent, t, 50.0 * (1.0 + df), &mut action), EsStatus::Ok);
        }
        if action == EsAction::SwitchOff && first_off.is_none() {
            first_off = Some(t);
        }
    }
    let t_off = first_off.expect("agent switched off");
    assert!((t_off - 55.0 * 0.016).abs() < 1e-9, "{t_off}");

    let mut phase = EsPhase::Idle;
    unsafe {
        assert_eq!(es_agent_phase(agent, &mut phase), EsStatus::Ok);
        assert_eq!(phase, EsPhase::Off);
        assert_eq!(es_agent_estimate_mw(agent, &mut est), EsStatus::Ok);
    }
    assert!((est - 500.0).abs() / 500.0 < 0.01, "{est}");

    let mut action = EsAction::None;
    unsafe {
        assert_eq!(es_agent_command(agent, 10.0, 1, &mut action), EsStatus::Ok);
        assert_eq!(action, EsAction::SwitchOn);
        assert_eq!(es_agent_ingest(agent, 1.0, 50.0, &mut action), EsStatus::OutOfOrder);
        es_agent_free(agent);
        es_system_free(sys);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(es_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/edgeshed.h")).unwrap();
    for name in [
        "es_system_new",
        "es_system_free",
        "es_agent_ingest",
        "es_agent_command",
        "es_scenario_from_toml",
        "es_last_error_message",
        "typedef struct EsAgent EsAgent",
        "ES_STATUS_NO_BUNDLE",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let probe = std::env::temp_dir().join(format!("edgeshed_probe_{}.c", std::process::id()));
    std::fs::write(&probe, "#include \"edgeshed.h\"\nint main(void) { return es_version() == 0; }\n")
        .unwrap();
    let out = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&probe)
        .output();
    let _ = std::fs::remove_file(&probe);
    match out {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("no C compiler, skipped syntax check: {e}"),
    }
}
