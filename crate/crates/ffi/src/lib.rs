//! C ABI over model loading, ranking, explanation and the ranking metrics.
//!
//! Every function returns a [`DremStatus`]; on failure a message is kept in
//! thread-local storage and can be read with [`drem_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//!
//! Entity type codes: 0 user, 1 item, 2 word, 3 brand, 4 category.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use drem::evaluation::{average_precision, fisher_randomization, ndcg_at_10, reciprocal_rank};
use drem::explainer::{build_schema_graph, extract_explanations, ExplainOptions, Explanation};
use drem::persist::load_model;
use drem::retrieval::rank_items;
use drem::{DremError, EntityType, ModelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DremStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    UnknownId = 5,
    NumericalFailure = 6,
    Panic = 7,
}

/// A loaded model.
pub struct DremModel {
    params: ModelParams,
}

/// Explanations produced by [`drem_explain`].
pub struct DremExplanations {
    items: Vec<Explanation>,
}

/// One explanation, flattened.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DremExplanationInfo {
    pub bridge_type: u32,
    pub bridge_entity: u32,
    pub score: f64,
    pub user_hops: u32,
    pub item_hops: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &DremError) -> DremStatus {
    match e {
        DremError::Io { .. } => DremStatus::Io,
        DremError::Format(_) | DremError::Parse { .. } => DremStatus::Format,
        DremError::UnknownId { .. } => DremStatus::UnknownId,
        DremError::NonFinite { .. } => DremStatus::NumericalFailure,
        _ => DremStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Drem(DremError),
}

impl From<DremError> for Failure {
    fn from(e: DremError) -> Self {
        Failure::Drem(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DremStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DremStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            DremStatus::NullPointer
        }
        Ok(Err(Failure::Drem(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            DremStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn model<'a>(m: *const DremModel) -> Result<&'a ModelParams, Failure> {
    m.as_ref().map(|m| &m.params).ok_or(Failure::Null("model"))
}

fn entity_type(code: u32) -> Result<EntityType, Failure> {
    EntityType::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| Failure::Drem(DremError::InvalidArgument(format!("entity type code {code}"))))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn drem_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_model_load(path: *const c_char, out: *mut *mut DremModel) -> DremStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let path = CStr::from_ptr(path).to_str().map_err(|_| DremError::InvalidArgument("path is not UTF-8".into()))?;
        let params = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(DremModel { params }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`drem_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drem_model_free(model: *mut DremModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_model_dim(model: *const DremModel, out: *mut usize) -> DremStatus {
    guard(|| {
        let m = self::model(model)?;
        *out.as_mut().ok_or(Failure::Null("out"))? = m.dim();
        Ok(())
    })
}

/// Number of entities of one type.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_model_entity_count(
    model: *const DremModel,
    entity_type: u32,
    out: *mut usize,
) -> DremStatus {
    guard(|| {
        let m = self::model(model)?;
        let t = self::entity_type(entity_type)?;
        *out.as_mut().ok_or(Failure::Null("out"))? = m.schema().count(t);
        Ok(())
    })
}

/// Ranks items for a user and a query given as word ids. Writes up to `k`
/// items and scores, best first, and their number to `out_len`.
///
/// # Safety
/// `words` must hold `n_words` ids; `out_items` and `out_scores` must have
/// room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn drem_rank(
    model: *const DremModel,
    user: u32,
    words: *const u32,
    n_words: usize,
    k: usize,
    out_items: *mut u32,
    out_scores: *mut f64,
    out_len: *mut usize,
) -> DremStatus {
    guard(|| {
        let m = self::model(model)?;
        let words = slice(words, n_words, "words")?;
        if out_items.is_null() || out_scores.is_null() || out_len.is_null() {
            return Err(Failure::Null("output buffer"));
        }
        let list = rank_items(m, user, 0, words, k)?;
        for (n, &(item, score)) in list.items.iter().enumerate() {
            *out_items.add(n) = item;
            *out_scores.add(n) = score;
        }
        *out_len = list.items.len();
        Ok(())
    })
}

/// Explanations for why `item` suits `user` under the query.
///
/// # Safety
/// `words` must hold `n_words` ids and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_explain(
    model: *const DremModel,
    user: u32,
    words: *const u32,
    n_words: usize,
    item: u32,
    max_hops: usize,
    top_per_type: usize,
    beta: f64,
    out: *mut *mut DremExplanations,
) -> DremStatus {
    guard(|| {
        let m = self::model(model)?;
        let words = slice(words, n_words, "words")?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let graph = build_schema_graph(m.schema());
        let opts = ExplainOptions { max_hops, top_per_type, beta };
        let items = extract_explanations(m, &graph, user, 0, words, item, &opts)?;
        *out = Box::into_raw(Box::new(DremExplanations { items }));
        Ok(())
    })
}

/// # Safety
/// `expl` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_explanations_len(expl: *const DremExplanations, out: *mut usize) -> DremStatus {
    guard(|| {
        let e = expl.as_ref().ok_or(Failure::Null("explanations"))?;
        *out.as_mut().ok_or(Failure::Null("out"))? = e.items.len();
        Ok(())
    })
}

/// # Safety
/// `expl` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drem_explanations_get(
    expl: *const DremExplanations,
    index: usize,
    out: *mut DremExplanationInfo,
) -> DremStatus {
    guard(|| {
        let e = expl.as_ref().ok_or(Failure::Null("explanations"))?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let x = e.items.get(index).ok_or_else(|| {
            DremError::InvalidArgument(format!("index {index} is past the {} explanations", e.items.len()))
        })?;
        *out = DremExplanationInfo {
            bridge_type: x.bridge_type.index() as u32,
            bridge_entity: x.bridge_entity,
            score: x.score,
            user_hops: x.path_u.hops() as u32,
            item_hops: x.path_i.hops() as u32,
        };
        Ok(())
    })
}

/// # Safety
/// `expl` must come from [`drem_explain`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drem_explanations_free(expl: *mut DremExplanations) {
    if !expl.is_null() {
        drop(Box::from_raw(expl));
    }
}

/// Which per-list metric [`drem_metric`] computes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DremMetric {
    AveragePrecision = 0,
    ReciprocalRank = 1,
    NdcgAt10 = 2,
}

/// One metric of a ranked list of ids against a set of relevant ids.
///
/// # Safety
/// `ranked` and `relevant` must hold `n_ranked` and `n_relevant` ids.
#[no_mangle]
pub unsafe extern "C" fn drem_metric(
    metric: DremMetric,
    ranked: *const u32,
    n_ranked: usize,
    relevant: *const u32,
    n_relevant: usize,
    out: *mut f64,
) -> DremStatus {
    guard(|| {
        let ranked = slice(ranked, n_ranked, "ranked")?;
        let relevant: BTreeSet<u32> = slice(relevant, n_relevant, "relevant")?.iter().copied().collect();
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = match metric {
            DremMetric::AveragePrecision => average_precision(ranked, &relevant),
            DremMetric::ReciprocalRank => reciprocal_rank(ranked, &relevant),
            DremMetric::NdcgAt10 => ndcg_at_10(ranked, &relevant),
        };
        Ok(())
    })
}

/// Paired Fisher randomization p-value of two per-query score lists.
///
/// # Safety
/// `a` and `b` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn drem_fisher_randomization(
    a: *const f64,
    b: *const f64,
    n: usize,
    iterations: usize,
    seed: u64,
    out: *mut f64,
) -> DremStatus {
    guard(|| {
        let (a, b) = (slice(a, n, "a")?, slice(b, n, "b")?);
        *out.as_mut().ok_or(Failure::Null("out"))? = fisher_randomization(a, b, iterations, seed)?;
        Ok(())
    })
}
