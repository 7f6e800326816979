use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hopm_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { hopm_string_free(s) };
    out
}

fn last_error() -> Option<String> {
    let p = hopm_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn example() -> *mut HopmLibrary {
    let mut lib = ptr::null_mut();
    assert_eq!(unsafe { hopm_library_example(&mut lib) }, HopmStatus::Ok);
    lib
}

#[test]
fn load_check_and_dot() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/corpus/ocs/library");
    let mut lib = ptr::null_mut();
    assert_eq!(unsafe { hopm_library_load(c(dir).as_ptr(), &mut lib) }, HopmStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hopm_library_check(lib, &mut out) }, HopmStatus::Ok);
    assert_eq!(take(out), "[]");
    assert!(last_error().is_none());

    let mut dot = ptr::null_mut();
    assert_eq!(unsafe { hopm_graph_dot(lib, c("validate-payment").as_ptr(), &mut dot) }, HopmStatus::Ok);
    assert!(take(dot).starts_with("digraph \"validate-payment\""));
    assert_eq!(unsafe { hopm_graph_dot(lib, c("nope").as_ptr(), &mut dot) }, HopmStatus::NotFound);
    assert!(last_error().unwrap().contains("nope"));
    unsafe { hopm_library_free(lib) };
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut lib = ptr::null_mut();
    assert_eq!(unsafe { hopm_library_load(ptr::null(), &mut lib) }, HopmStatus::NullArgument);
    assert_eq!(unsafe { hopm_library_from_json(c("{").as_ptr(), &mut lib) }, HopmStatus::Parse);
    let dangling = r#"{"graphs":[{"id":"g","signature":{"inputs":[],"branches":{}},"nodes":{"s":{"kind":"start"},"x":{"kind":"atomic","activityId":"missing","inputs":[]}},"edges":[{"srcNodeId":"s","branch":"start","dstNodeId":"x"}]}]}"#;
    assert_eq!(unsafe { hopm_library_from_json(c(dangling).as_ptr(), &mut lib) }, HopmStatus::Validation);
    assert!(last_error().is_some());
    let bytes = [0xffu8, 0];
    assert_eq!(unsafe { hopm_library_load(bytes.as_ptr().cast(), &mut lib) }, HopmStatus::InvalidUtf8);
    unsafe {
        hopm_library_free(ptr::null_mut());
        hopm_run_free(ptr::null_mut());
        hopm_string_free(ptr::null_mut());
    }
}

#[test]
fn steer_a_run_through_the_abi() {
    let lib = example();
    let mut run = ptr::null_mut();
    let st = unsafe { hopm_run_start(lib, c("register-to-conference").as_ptr(), c(r#"["alice"]"#).as_ptr(), ptr::null(), &mut run) };
    assert_eq!(st, HopmStatus::Ok);
    // the run holds its own reference to the library
    unsafe { hopm_library_free(lib) };

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hopm_run_step(run, 100, &mut out) }, HopmStatus::Ok);
    assert!(take(out).contains("awaitingSelection"));
    assert_eq!(unsafe { hopm_run_step(run, 1, &mut out) }, HopmStatus::WrongState);

    let bad = c(r#"{"command":"selectVariant","var":"paymentProcess","graphId":"validate-payment"}"#);
    assert_eq!(unsafe { hopm_run_command(run, bad.as_ptr(), &mut out) }, HopmStatus::Rejected);
    assert!(take(out).contains("nonconforming"));
    assert_eq!(unsafe { hopm_run_command(run, c("{}").as_ptr(), &mut out) }, HopmStatus::Parse);

    let sel = c(r#"{"command":"selectVariant","var":"paymentProcess","graphId":"CreditCardPayment"}"#);
    assert_eq!(unsafe { hopm_run_command(run, sel.as_ptr(), &mut out) }, HopmStatus::Ok);
    assert!(take(out).contains("variantSelected"));
    assert_eq!(unsafe { hopm_run_command(run, c(r#"{"command":"resume"}"#).as_ptr(), &mut out) }, HopmStatus::Ok);
    take(out);
    assert_eq!(unsafe { hopm_run_step(run, 1000, &mut out) }, HopmStatus::Ok);
    take(out);

    assert_eq!(unsafe { hopm_run_status(run, &mut out) }, HopmStatus::Ok);
    let status: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(status["state"], "finished");
    assert_eq!(status["branch"], "registered");

    assert_eq!(unsafe { hopm_run_trace(run, 0, &mut out) }, HopmStatus::Ok);
    let trace: Vec<serde_json::Value> = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(trace.last().unwrap()["event"], "runFinished");
    unsafe { hopm_run_free(run) };
}

#[test]
fn synthesize_through_the_abi() {
    let spec = include_str!("../../core/corpus/ocs/validation-spec.json");
    let mut out = ptr::null_mut();
    let st = unsafe { hopm_synthesize(ptr::null(), c(spec).as_ptr(), c("synth").as_ptr(), &mut out) };
    assert_eq!(st, HopmStatus::Ok, "{:?}", last_error());
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["solution"]["length"], 2);
    assert_eq!(v["graph"]["implementsId"], "PaperValidation");
}

#[test]
fn header_matches_exports() {
    let h = include_str!("../include/hopm.h");
    for f in [
        "hopm_library_load",
        "hopm_library_from_json",
        "hopm_library_example",
        "hopm_library_free",
        "hopm_library_check",
        "hopm_graph_dot",
        "hopm_run_start",
        "hopm_run_free",
        "hopm_run_step",
        "hopm_run_status",
        "hopm_run_trace",
        "hopm_run_command",
        "hopm_synthesize",
        "hopm_string_free",
        "hopm_last_error",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct HopmRun HopmRun;"));
    assert!(h.contains("HOPM_STATUS_REJECTED = 7"));
}

/// Compiles a C program against the header, when a C compiler is present.
#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else { return };
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        "#include \"hopm.h\"\nint main(void) { HopmLibrary *lib = 0; HopmStatus s = hopm_library_example(&lib); hopm_library_free(lib); return s == HOPM_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(name)).find(|f| f.is_file()))
        .map(|p| p.display().to_string())
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("hopm-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
