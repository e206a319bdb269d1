// SPDX-License-Identifier: Apache-2.0

//! C ABI for entailsync.
//!
//! Structured values cross the boundary as UTF-8 JSON in the same shapes the
//! CLI and HTTP service use. Every function returns an [`EsStatus`]; on
//! failure [`es_last_error`] describes what went wrong. Strings written to
//! `out` parameters belong to the caller and are released with
//! [`es_string_free`]. Handles are not thread-safe; use one per thread or
//! lock around them.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use entailsync::sim::{build_schema, RegisterDecl, RunOptions, Scenario, Session};
use entailsync::sync::{MergePlan, ReconcilerKind, Replica};
use entailsync::{wire, ActionDesc, Error, ReplicaId};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON, ids or scenario.
    Parse = 3,
    /// A plan or action was refused; nothing changed.
    Rejected = 4,
    /// No pending conflict matches the request.
    NoConflict = 5,
    /// Unknown replica, operation or register.
    NotFound = 6,
    /// The scenario has no events left.
    Finished = 7,
    /// Any other engine error.
    Failed = 8,
    /// A panic was caught at the boundary.
    Panicked = 9,
}

/// A scenario session.
pub struct EsSession {
    session: Session,
}

/// A standalone replica.
pub struct EsReplica {
    replica: Replica,
    names: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Fail(EsStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::IllegalPlan(_)
            | Error::ForeignPremise(_)
            | Error::NotInBasis { .. }
            | Error::MissingValue(_)
            | Error::WrongValueType(_)
            | Error::MissingTimestamp
            | Error::EmptyOperation
            | Error::LocalConflict(_) => EsStatus::Rejected,
            Error::NoPendingConflict(_) => EsStatus::NoConflict,
            Error::UnknownRegister(_) | Error::UnknownOperation(_) => EsStatus::NotFound,
            Error::Parse(_)
            | Error::Script(_)
            | Error::InvalidOpId(_)
            | Error::InvalidReplicaId(_) => EsStatus::Parse,
            _ => EsStatus::Failed,
        };
        set_error(e);
        Fail(status)
    }
}

fn parse_err(e: serde_json::Error) -> Fail {
    set_error(format!("parse error: {e}"));
    Fail(EsStatus::Parse)
}

fn not_found(what: impl std::fmt::Display) -> Fail {
    set_error(what);
    Fail(EsStatus::NotFound)
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsStatus::Ok,
        Ok(Err(Fail(status))) => status,
        Err(_) => {
            set_error("panic inside entailsync");
            EsStatus::Panicked
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        set_error("null string argument");
        return Err(Fail(EsStatus::NullArgument));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        Fail(EsStatus::InvalidUtf8)
    })
}

unsafe fn opt_text<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| {
        set_error("null handle");
        Fail(EsStatus::NullArgument)
    })
}

unsafe fn emit(out: *mut *mut c_char, value: impl serde::Serialize) -> Result<(), Fail> {
    if out.is_null() {
        set_error("null out pointer");
        return Err(Fail(EsStatus::NullArgument));
    }
    let s = serde_json::to_string(&value).map_err(parse_err)?;
    *out = CString::new(s).expect("JSON has no nul bytes").into_raw();
    Ok(())
}

unsafe fn emit_raw(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        set_error("null out pointer");
        return Err(Fail(EsStatus::NullArgument));
    }
    *out = CString::new(s).expect("no nul bytes").into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next entailsync call on this thread.
#[no_mangle]
pub extern "C" fn es_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from an `out` parameter of this
/// library that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn es_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a scenario from JSON text.
///
/// `seed` overrides the scenario seed when `use_seed` is true. With
/// `interactive`, conflicts wait for [`es_session_submit_plan`].
///
/// # Safety
/// `scenario_json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_new(
    scenario_json: *const c_char,
    seed: u64,
    use_seed: bool,
    interactive: bool,
    out: *mut *mut EsSession,
) -> EsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return Err(Fail(EsStatus::NullArgument));
        }
        let scenario = Scenario::from_json(text(scenario_json)?)?;
        let options = RunOptions {
            seed: use_seed.then_some(seed),
            interactive,
            ..Default::default()
        };
        let session = Session::new(scenario, options)?;
        *out = Box::into_raw(Box::new(EsSession { session }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`es_session_new`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn es_session_free(s: *mut EsSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Executes the next event and writes its outcome as JSON.
/// Returns `Finished` when no events are left.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_step(s: *mut EsSession, out: *mut *mut c_char) -> EsStatus {
    guard(|| {
        let s = handle(s)?;
        match s.session.step()? {
            Some(outcome) => emit(out, outcome),
            None => {
                set_error("scenario finished");
                Err(Fail(EsStatus::Finished))
            }
        }
    })
}

/// Executes every remaining event.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_session_run(s: *mut EsSession) -> EsStatus {
    guard(|| {
        handle(s)?.session.run()?;
        Ok(())
    })
}

/// Writes the convergence report as JSON.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_report(s: *mut EsSession, out: *mut *mut c_char) -> EsStatus {
    guard(|| emit(out, handle(s)?.session.report()?))
}

/// Writes the pending conflict groups of every replica as JSON.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_conflicts(
    s: *mut EsSession,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| emit(out, handle(s)?.session.conflicts()?))
}

/// Applies a merge plan (`trigger`, `keep`, `cancel`, `merged`) and writes
/// the resulting resolutions as JSON. `replica` may be null, in which case
/// the replica holding the trigger is used.
///
/// # Safety
/// `s` must be a live handle, `plan_json` a valid C string, `replica` null
/// or a valid C string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_submit_plan(
    s: *mut EsSession,
    replica: *const c_char,
    plan_json: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let s = handle(s)?;
        let replica = opt_text(replica)?;
        if let Some(name) = replica {
            s.session
                .replica(name)
                .map_err(|_| not_found(format!("unknown replica {name:?}")))?;
        }
        let plan: MergePlan = serde_json::from_str(text(plan_json)?).map_err(parse_err)?;
        let done = s.session.submit_plan(replica, plan)?;
        emit(out, done)
    })
}

/// Writes one replica's graph in DOT syntax.
///
/// # Safety
/// `s` must be a live handle, `replica` a valid C string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn es_session_dot(
    s: *mut EsSession,
    replica: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let s = handle(s)?;
        let name = text(replica)?;
        let r = s
            .session
            .replica(name)
            .map_err(|_| not_found(format!("unknown replica {name:?}")))?;
        emit_raw(out, entailsync::dot::to_dot(r.graph(), name))
    })
}

/// Creates a replica named `name` over registers declared as in scenarios,
/// e.g. `[{"kind": "arith"}, {"kind": "lww", "policy": "strict"}]`.
///
/// # Safety
/// `name` and `registers_json` must be valid C strings and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_new(
    name: *const c_char,
    registers_json: *const c_char,
    out: *mut *mut EsReplica,
) -> EsStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return Err(Fail(EsStatus::NullArgument));
        }
        let id = ReplicaId::new(text(name)?)?;
        let decls: Vec<RegisterDecl> =
            serde_json::from_str(text(registers_json)?).map_err(parse_err)?;
        let (schema, names) = build_schema(&decls)?;
        let replica = Replica::new(id, Arc::new(schema));
        *out = Box::into_raw(Box::new(EsReplica { replica, names }));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from [`es_replica_new`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn es_replica_free(r: *mut EsReplica) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Issues a local operation from a JSON array of actions and writes its id
/// (for example `a:3`).
///
/// # Safety
/// `r` must be a live handle, `actions_json` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_issue(
    r: *mut EsReplica,
    actions_json: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let r = handle(r)?;
        let actions: Vec<ActionDesc> =
            serde_json::from_str(text(actions_json)?).map_err(parse_err)?;
        let id = r.replica.issue(actions)?;
        emit_raw(out, id.to_string())
    })
}

/// Writes a snapshot of the replica's graph in wire JSON, ready to be
/// passed to another replica's [`es_replica_sync`].
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_publish(r: *mut EsReplica, out: *mut *mut c_char) -> EsStatus {
    guard(|| emit_raw(out, wire::to_json(&handle(r)?.replica.publish())))
}

/// Integrates a published graph. `reconciler` is `replay-all`, `lww-auto`
/// or `manual`; null means `replay-all`. Writes the sync report as JSON.
///
/// # Safety
/// `r` must be a live handle, `remote_json` a valid C string, `reconciler`
/// null or a valid C string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_sync(
    r: *mut EsReplica,
    remote_json: *const c_char,
    reconciler: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let r = handle(r)?;
        let remote = wire::from_json(text(remote_json)?)?;
        let kind: ReconcilerKind = match opt_text(reconciler)? {
            None => ReconcilerKind::default(),
            Some(name) => serde_json::from_value(serde_json::Value::from(name))
                .map_err(|_| not_found(format!("unknown reconciler {name:?}")))?,
        };
        let report = r.replica.sync(&remote, kind.build().as_ref())?;
        emit(out, report)
    })
}

/// Writes the register values as a JSON object keyed by register name.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_vals(r: *mut EsReplica, out: *mut *mut c_char) -> EsStatus {
    guard(|| {
        let r = handle(r)?;
        let vals: serde_json::Map<String, serde_json::Value> = r
            .replica
            .vals()?
            .into_iter()
            .map(|(reg, v)| (r.names[reg.0 as usize].clone(), v))
            .collect();
        emit(out, vals)
    })
}

/// Writes this replica's pending conflict groups as JSON.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_conflicts(
    r: *mut EsReplica,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| emit(out, handle(r)?.replica.conflicts()?))
}

/// Resolves the pending conflict named by the plan's `trigger` and writes
/// the resolutions as JSON.
///
/// # Safety
/// `r` must be a live handle, `plan_json` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn es_replica_resolve(
    r: *mut EsReplica,
    plan_json: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let r = handle(r)?;
        let plan: MergePlan = serde_json::from_str(text(plan_json)?).map_err(parse_err)?;
        let Some(trigger) = plan.trigger.clone() else {
            set_error("plan has no trigger");
            return Err(Fail(EsStatus::Parse));
        };
        match r.replica.resolve(&trigger, Some(plan), None)? {
            Some(done) => emit(out, done),
            None => Err(Fail::from(Error::NoPendingConflict(trigger))),
        }
    })
}
