//! C ABI over `cdn-core`.
//!
//! Every function returns a [`CdnStatus`]. On failure the message is kept
//! per thread and read with [`cdn_last_error_message`]. Handles are opaque
//! and must be released with their `_free` function. Strings passed in are
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cdn_core::dsp::{conditional_cdf, joint_pdf, ConditionalCdf};
use cdn_core::functions::validity::{check_graph, MonotonicityOptions};
use cdn_core::graph::CdnGraph;
use cdn_core::model_file::{parse_evidence, parse_model};
use cdn_core::ranking::{parse_match_log, predict, skill_mode, update_skills, MatchRecord, RatingModelParams, SkillStore};
use cdn_core::CdnError;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Model, evidence, parameter or match text failed to parse.
    Parse = 3,
    InvalidQuery = 4,
    /// The model or its parameters are invalid.
    InvalidModel = 5,
    NotATree = 6,
    ZeroEvidenceDensity = 7,
    InvalidMatch = 8,
    /// The output buffer is too small; the needed length was written.
    BufferTooSmall = 9,
    Io = 10,
    /// A panic was caught at the boundary.
    Internal = 11,
}

/// A parsed cumulative distribution network.
pub struct CdnModel {
    graph: CdnGraph,
}

/// Result of one inference call.
pub struct CdnInference {
    root_pdf: Option<f64>,
    conditional: Option<ConditionalCdf>,
}

/// Rating model parameters plus the learned player skills.
pub struct CdnRatingSession {
    params: RatingModelParams,
    skills: SkillStore,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("interior NULs were replaced"));
}

fn status_of(e: &CdnError) -> CdnStatus {
    match e {
        CdnError::Parse { .. } | CdnError::Schema { .. } => CdnStatus::Parse,
        CdnError::InvalidQuery(_) | CdnError::UnknownVariable(_) | CdnError::DomainError(_) => CdnStatus::InvalidQuery,
        CdnError::NotATree { .. } => CdnStatus::NotATree,
        CdnError::ZeroEvidenceDensity => CdnStatus::ZeroEvidenceDensity,
        CdnError::InvalidMatch(_) | CdnError::UnknownPlayer(_) | CdnError::TeamTooLarge(_) => CdnStatus::InvalidMatch,
        CdnError::Io { .. } => CdnStatus::Io,
        _ => CdnStatus::InvalidModel,
    }
}

struct Failure(CdnStatus, String);

impl From<CdnError> for Failure {
    fn from(e: CdnError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CdnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CdnStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CdnStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CdnStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CdnStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(CdnStatus::NullPointer, format!("{what} is null")))
}

fn out<T>(p: *mut T, what: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure(CdnStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(p)
    }
}

fn one_record(json: &str) -> Result<MatchRecord, Failure> {
    let mut log = parse_match_log(json)?;
    if log.records.len() != 1 {
        return Err(Failure(CdnStatus::InvalidMatch, format!("expected one match record, found {}", log.records.len())));
    }
    Ok(log.records.remove(0))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cdn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses model text into a new handle.
///
/// # Safety
/// `source` must be a NUL-terminated string and `model` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cdn_model_parse(source: *const c_char, model: *mut *mut CdnModel) -> CdnStatus {
    guard(|| {
        let model = out(model, "model")?;
        let graph = parse_model(text(source, "source")?)?;
        *model = Box::into_raw(Box::new(CdnModel { graph }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cdn_model_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cdn_model_free(model: *mut CdnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_model_variable_count(model: *const CdnModel, count: *mut usize) -> CdnStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out(count, "count")? = m.graph.variable_count();
        Ok(())
    })
}

/// Runs the structure check and the three validity conditions. `passed`
/// receives 1 when all hold and 0 otherwise.
///
/// # Safety
/// `model` must be a live handle and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_model_check(
    model: *const CdnModel,
    tolerance: f64,
    seed: u64,
    passed: *mut i32,
) -> CdnStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let passed = out(passed, "passed")?;
        let opts = MonotonicityOptions { seed, ..MonotonicityOptions::default() };
        let report = check_graph(&m.graph, tolerance, &opts)?;
        *passed = i32::from(report.passed());
        Ok(())
    })
}

/// Conditions on `evidence` (`variable = value` lines, may be empty). With
/// every variable observed the result holds the joint PDF and `query` must
/// be null; otherwise it holds the conditional CDF of `query`.
///
/// # Safety
/// `model` must be a live handle, `evidence` a NUL-terminated string,
/// `query` NUL-terminated or null, and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_infer(
    model: *const CdnModel,
    evidence: *const c_char,
    query: *const c_char,
    result: *mut *mut CdnInference,
) -> CdnStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let result = out(result, "result")?;
        let ev = parse_evidence(text(evidence, "evidence")?, &m.graph)?;
        let structure = m.graph.validate_structure();
        if !structure.is_forest() {
            let cycle = structure.cycle.as_ref().map(|c| m.graph.describe_cycle(c)).unwrap_or_default();
            return Err(CdnError::NotATree { cycle }.into());
        }
        let inference = if query.is_null() {
            if ev.len() != m.graph.variable_count() {
                return Err(Failure(CdnStatus::InvalidQuery, "a query is required unless every variable is observed".into()));
            }
            CdnInference { root_pdf: Some(joint_pdf(&m.graph, &ev)?), conditional: None }
        } else {
            let name = text(query, "query")?;
            let id = m
                .graph
                .variable_id(name)
                .ok_or_else(|| Failure(CdnStatus::InvalidQuery, format!("unknown variable `{name}`")))?;
            CdnInference { root_pdf: None, conditional: Some(conditional_cdf(&m.graph, id, &ev)?) }
        };
        *result = Box::into_raw(Box::new(inference));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`cdn_infer`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cdn_inference_free(result: *mut CdnInference) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle and `pdf` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_inference_root_pdf(result: *const CdnInference, pdf: *mut f64) -> CdnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let pdf = out(pdf, "pdf")?;
        *pdf = r
            .root_pdf
            .ok_or_else(|| Failure(CdnStatus::InvalidQuery, "the inference holds a conditional CDF".into()))?;
        Ok(())
    })
}

/// Number of support points of the conditional CDF, 0 for a joint PDF.
///
/// # Safety
/// `result` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_inference_len(result: *const CdnInference, len: *mut usize) -> CdnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        *out(len, "len")? = r.conditional.as_ref().map_or(0, |c| c.support.len());
        Ok(())
    })
}

/// One row of the conditional CDF. Any output pointer may be null.
///
/// # Safety
/// `result` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_inference_row(
    result: *const CdnInference,
    index: usize,
    support: *mut f64,
    mu: *mut f64,
    lambda: *mut f64,
    cdf: *mut f64,
) -> CdnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let c = r
            .conditional
            .as_ref()
            .ok_or_else(|| Failure(CdnStatus::InvalidQuery, "the inference holds a joint PDF".into()))?;
        if index >= c.support.len() {
            return Err(Failure(CdnStatus::InvalidQuery, format!("row {index} of {}", c.support.len())));
        }
        for (p, v) in [(support, c.support[index]), (mu, c.mu[index]), (lambda, c.lambda[index]), (cdf, c.cdf[index])] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// New rating session from parameter TOML, with no players yet.
///
/// # Safety
/// `params_toml` must be NUL-terminated and `session` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_new(
    params_toml: *const c_char,
    session: *mut *mut CdnRatingSession,
) -> CdnStatus {
    guard(|| {
        let session = out(session, "session")?;
        let params = RatingModelParams::from_toml_str(text(params_toml, "params_toml")?)?;
        let skills = SkillStore::from_params(&params)?;
        *session = Box::into_raw(Box::new(CdnRatingSession { params, skills }));
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`cdn_rating_session_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_free(session: *mut CdnRatingSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Learns from one finished game given as a JSON match record.
///
/// # Safety
/// `session` must be a live handle and `match_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_observe(session: *mut CdnRatingSession, match_json: *const c_char) -> CdnStatus {
    guard(|| {
        let s = session
            .as_mut()
            .ok_or_else(|| Failure(CdnStatus::NullPointer, "session is null".into()))?;
        let record = one_record(text(match_json, "match_json")?)?;
        for p in record.teams.iter().flatten() {
            s.skills.ensure(p);
        }
        update_skills(&record, &mut s.skills, &s.params)?;
        Ok(())
    })
}

/// Predicted team ordering, best first, for a JSON match record whose ranks
/// are ignored. `team_count` always receives the number of teams; when it
/// exceeds `capacity` the call returns `BufferTooSmall`.
///
/// # Safety
/// `session` must be a live handle, `match_json` NUL-terminated,
/// `ordering` valid for `capacity` writes and `team_count` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_predict(
    session: *const CdnRatingSession,
    match_json: *const c_char,
    ordering: *mut usize,
    capacity: usize,
    team_count: *mut usize,
) -> CdnStatus {
    guard(|| {
        let s = handle(session, "session")?;
        let team_count = out(team_count, "team_count")?;
        let record = one_record(text(match_json, "match_json")?)?;
        let p = predict(&record, &s.skills);
        *team_count = p.ordering.len();
        if p.ordering.len() > capacity {
            return Err(Failure(CdnStatus::BufferTooSmall, format!("{} teams, capacity {capacity}", p.ordering.len())));
        }
        let ordering = out(ordering, "ordering")?;
        for (i, &t) in p.ordering.iter().enumerate() {
            *ordering.add(i) = t;
        }
        Ok(())
    })
}

/// Modal performance of a player's skill; unseen players get the prior's.
///
/// # Safety
/// `session` must be a live handle, `player` NUL-terminated and `mode`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_skill_mode(
    session: *const CdnRatingSession,
    player: *const c_char,
    mode: *mut f64,
) -> CdnStatus {
    guard(|| {
        let s = handle(session, "session")?;
        let mode = out(mode, "mode")?;
        let values = s.skills.skill_or_prior(text(player, "player")?);
        *mode = s.skills.grid().point(skill_mode(values));
        Ok(())
    })
}

/// Number of players with a learned skill.
///
/// # Safety
/// `session` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn cdn_rating_session_player_count(session: *const CdnRatingSession, count: *mut usize) -> CdnStatus {
    guard(|| {
        let s = handle(session, "session")?;
        *out(count, "count")? = s.skills.len();
        Ok(())
    })
}
