//! C ABI over the engine.
//!
//! Libraries and runs are opaque handles. Every function returns a
//! [`HopmStatus`]; results come back through out-parameters as JSON or DOT
//! strings owned by the caller and released with [`hopm_string_free`]. The
//! message of the most recent failure on the calling thread is available
//! from [`hopm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use hopm::check::check_library;
use hopm::dot::to_dot;
use hopm::interp::{ActivityRegistry, Engine, RejectKind, Run, RunError, SteeringCommand};
use hopm::library::{Catalog, GraphLibrary};
use hopm::ocs::{self, register_stub_activities, Fixtures};
use hopm::synth::{materialize, synthesize, SynthesisSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    NotFound = 5,
    WrongState = 6,
    Rejected = 7,
    Runtime = 8,
    Panic = 9,
}

/// A loaded, validated graph library.
pub struct HopmLibrary {
    lib: Arc<GraphLibrary>,
}

/// One run, using the bundled stub activities.
pub struct HopmRun {
    run: Run,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Fail(HopmStatus, String);

type FfiResult<T> = Result<T, Fail>;

fn fail(status: HopmStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

/// Runs `f`, translating errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> HopmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HopmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HopmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(fail(HopmStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(HopmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(fail(HopmStatus::NullArgument, "out pointer is null"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(fail(HopmStatus::NullArgument, "out pointer is null"));
    }
    *out = CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw();
    Ok(())
}

unsafe fn library<'a>(p: *const HopmLibrary) -> FfiResult<&'a HopmLibrary> {
    p.as_ref().ok_or_else(|| fail(HopmStatus::NullArgument, "library handle is null"))
}

unsafe fn run_mut<'a>(p: *mut HopmRun) -> FfiResult<&'a mut HopmRun> {
    p.as_mut().ok_or_else(|| fail(HopmStatus::NullArgument, "run handle is null"))
}

fn json(v: &impl serde::Serialize) -> String {
    serde_json::to_string(v).expect("engine values serialize")
}

/// Loads a library from a JSON file or a directory of JSON files.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_library_load(path: *const c_char, out: *mut *mut HopmLibrary) -> HopmStatus {
    guard(|| {
        let path = text(path, "path")?;
        let lib = GraphLibrary::load_path(Path::new(path)).map_err(|e| fail(HopmStatus::Validation, e.to_string()))?;
        put(out, HopmLibrary { lib: Arc::new(lib) })
    })
}

/// Loads a library from a JSON document held in memory.
///
/// # Safety
/// `json_text` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_library_from_json(json_text: *const c_char, out: *mut *mut HopmLibrary) -> HopmStatus {
    guard(|| {
        let t = text(json_text, "json")?;
        let lib = GraphLibrary::from_json(t).map_err(|e| {
            let parse_only = e.0.iter().all(|e| matches!(e, hopm::library::LibraryError::Parse { .. }));
            fail(if parse_only { HopmStatus::Parse } else { HopmStatus::Validation }, e.to_string())
        })?;
        put(out, HopmLibrary { lib: Arc::new(lib) })
    })
}

/// The bundled conference-management example library.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_library_example(out: *mut *mut HopmLibrary) -> HopmStatus {
    guard(|| put(out, HopmLibrary { lib: Arc::new(ocs::library()) }))
}

/// # Safety
/// `lib` must come from a `hopm_library_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hopm_library_free(lib: *mut HopmLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Type-checks the library. `out_json` receives a JSON array of diagnostics;
/// the status is `VALIDATION` when it is nonempty.
///
/// # Safety
/// `lib` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_library_check(lib: *const HopmLibrary, out_json: *mut *mut c_char) -> HopmStatus {
    guard(|| {
        let diags = check_library(&*library(lib)?.lib);
        let n = diags.len();
        put_string(out_json, json(&diags))?;
        if n == 0 {
            Ok(())
        } else {
            Err(fail(HopmStatus::Validation, format!("{n} diagnostic(s)")))
        }
    })
}

/// DOT rendering of one service graph.
///
/// # Safety
/// `lib` must be a live handle, `graph_id` a valid C string, `out_dot` writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_graph_dot(lib: *const HopmLibrary, graph_id: *const c_char, out_dot: *mut *mut c_char) -> HopmStatus {
    guard(|| {
        let lib = library(lib)?;
        let id = text(graph_id, "graph id")?;
        let g = lib.lib.service(id).ok_or_else(|| fail(HopmStatus::NotFound, format!("unknown service graph `{id}`")))?;
        put_string(out_dot, to_dot(g))
    })
}

fn run_error(e: RunError) -> Fail {
    let status = match &e {
        RunError::UnknownGraph(_) => HopmStatus::NotFound,
        RunError::NotRunning(_) => HopmStatus::WrongState,
        RunError::Unchecked { .. } => HopmStatus::Validation,
        RunError::InputArity { .. } | RunError::InputType { .. } => HopmStatus::Parse,
        _ => HopmStatus::Runtime,
    };
    fail(status, e.to_string())
}

/// Starts a run of `graph_id`. `inputs_json` is a JSON array of input values;
/// `fixtures_json` may be null for the bundled fixture data.
///
/// # Safety
/// String arguments must be valid C strings (`fixtures_json` may be null);
/// `lib` must be live; `out` must be writable. The run keeps its own
/// reference to the library.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_start(
    lib: *const HopmLibrary,
    graph_id: *const c_char,
    inputs_json: *const c_char,
    fixtures_json: *const c_char,
    out: *mut *mut HopmRun,
) -> HopmStatus {
    guard(|| {
        let lib = library(lib)?;
        let id = text(graph_id, "graph id")?;
        let inputs: Vec<serde_json::Value> = serde_json::from_str(text(inputs_json, "inputs")?)
            .map_err(|e| fail(HopmStatus::Parse, format!("inputs: {e}")))?;
        let fixtures = match opt_text(fixtures_json, "fixtures")? {
            Some(t) => Fixtures::from_json(t).map_err(|e| fail(HopmStatus::Parse, format!("fixtures: {e}")))?,
            None => Fixtures::default_set(),
        };
        let mut registry = ActivityRegistry::new();
        register_stub_activities(&mut registry, fixtures).map_err(|e| fail(HopmStatus::Runtime, e.to_string()))?;
        let engine = Engine::new(lib.lib.clone(), Arc::new(registry));
        let run = engine.start_json(id, &inputs).map_err(run_error)?;
        put(out, HopmRun { run })
    })
}

/// # Safety
/// `run` must come from `hopm_run_start` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_free(run: *mut HopmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Produces up to `max_events` events, stopping early at a pause or the end.
/// `out_events` receives the new events as a JSON array.
///
/// # Safety
/// `run` must be live; `out_events` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_step(run: *mut HopmRun, max_events: u32, out_events: *mut *mut c_char) -> HopmStatus {
    guard(|| {
        let r = &mut run_mut(run)?.run;
        if !r.status().is_running() {
            return Err(fail(HopmStatus::WrongState, format!("run is {}", r.status().label())));
        }
        let events = r.run_until_blocked(max_events as usize);
        put_string(out_events, json(&events))
    })
}

/// The run status as JSON, e.g. `{"state":"paused","nodeId":...,"reason":{...}}`.
///
/// # Safety
/// `run` must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_status(run: *mut HopmRun, out_json: *mut *mut c_char) -> HopmStatus {
    guard(|| put_string(out_json, json(run_mut(run)?.run.status())))
}

/// Events with `seq > since` as a JSON array.
///
/// # Safety
/// `run` must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_trace(run: *mut HopmRun, since: u64, out_json: *mut *mut c_char) -> HopmStatus {
    guard(|| put_string(out_json, json(&run_mut(run)?.run.trace_since(since))))
}

/// Applies a steering command given as JSON. On acceptance `out_json`
/// receives the resulting event; on rejection it receives the rejection
/// (kind, reason, diagnostics) and the status is `WRONG_STATE` or `REJECTED`.
///
/// # Safety
/// `run` must be live, `command_json` a valid C string, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_run_command(run: *mut HopmRun, command_json: *const c_char, out_json: *mut *mut c_char) -> HopmStatus {
    guard(|| {
        let r = &mut run_mut(run)?.run;
        let cmd: SteeringCommand = serde_json::from_str(text(command_json, "command")?)
            .map_err(|e| fail(HopmStatus::Parse, format!("command: {e}")))?;
        match r.submit(cmd) {
            Ok(ev) => put_string(out_json, json(&ev)),
            Err(rej) => {
                put_string(out_json, json(&rej))?;
                let status = if rej.kind == RejectKind::WrongState { HopmStatus::WrongState } else { HopmStatus::Rejected };
                Err(fail(status, rej.reason))
            }
        }
    })
}

/// Solves a synthesis spec and materializes the first solution against `lib`
/// (or the bundled example library when `lib` is null). `out_json` receives
/// `{"solution":..., "graph":...}`.
///
/// # Safety
/// `spec_json` and `graph_id` must be valid C strings; `lib` may be null;
/// `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopm_synthesize(
    lib: *const HopmLibrary,
    spec_json: *const c_char,
    graph_id: *const c_char,
    out_json: *mut *mut c_char,
) -> HopmStatus {
    guard(|| {
        let spec = SynthesisSpec::from_json(text(spec_json, "spec")?).map_err(|e| fail(HopmStatus::Parse, e.to_string()))?;
        let id = text(graph_id, "graph id")?;
        let example;
        let cat: &GraphLibrary = match lib.as_ref() {
            Some(l) => &l.lib,
            None => {
                example = ocs::library();
                &example
            }
        };
        let sol = synthesize(&spec).map_err(|e| fail(HopmStatus::Validation, e.to_string()))?;
        let g = materialize(&sol.sequences[0], &spec, cat, id).map_err(|e| fail(HopmStatus::Validation, e.to_string()))?;
        put_string(out_json, json(&serde_json::json!({ "solution": sol, "graph": g })))
    })
}

/// Releases a string returned through an out-parameter.
///
/// # Safety
/// `s` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hopm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hopm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
