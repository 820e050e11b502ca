//! C ABI over `luk-core`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Rationals cross as strings such as
//! `"3/4"`. Every fallible call returns a [`LukStatus`]; on failure the
//! message is available from [`luk_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};

use luk_core::bounds::{Budget, BoundsError};
use luk_core::construct::{construct, roundtrip_with, ConstructError};
use luk_core::extract::{extract_graph_with, ExtractError, ExtractOptions, Flavor};
use luk_core::graph::SubstitutionGraph;
use luk_core::network::NetworkError;
use luk_core::{Formula, Network, Rational};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LukStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// malformed JSON, formula or rational
    Parse = 3,
    /// input outside the domain: wrong arity or a value outside [0, 1]
    Domain = 4,
    /// network fails the non-degeneracy or shape requirements of extraction
    Degenerate = 5,
    /// graph is not in normal form
    NotNormal = 6,
    /// branch and bound exceeded `LUK_NODE_BUDGET`
    Budget = 7,
    /// a panic was caught at the boundary
    Internal = 8,
}

/// Extraction flavor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LukFlavor {
    Integer = 0,
    Rational = 1,
    Real = 2,
}

/// Opaque network handle.
pub struct LukNetwork(Network);

/// Opaque substitution graph handle.
pub struct LukGraph(SubstitutionGraph);

/// Opaque formula handle.
pub struct LukFormula(Formula);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(LukStatus, String);

impl Failure {
    fn new(status: LukStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

fn bounds_status(e: &BoundsError) -> LukStatus {
    match e {
        BoundsError::BudgetExceeded(_) => LukStatus::Budget,
        BoundsError::BadBudget(_) => LukStatus::Parse,
        BoundsError::InvalidNode(_) => LukStatus::Domain,
    }
}

impl From<ExtractError> for Failure {
    fn from(e: ExtractError) -> Self {
        let status = match &e {
            ExtractError::Bounds(b) => bounds_status(b),
            ExtractError::RangeViolation(_) => LukStatus::Domain,
            _ => LukStatus::Degenerate,
        };
        Failure::new(status, e)
    }
}

impl From<ConstructError> for Failure {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::Extract(x) => x.into(),
            ConstructError::Bounds(b) => Failure::new(bounds_status(&b), b),
            other => Failure::new(LukStatus::NotNormal, other),
        }
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        let status = match e {
            NetworkError::DimensionMismatch { .. } | NetworkError::OutOfDomain { .. } => LukStatus::Domain,
            _ => LukStatus::Parse,
        };
        Failure::new(status, e)
    }
}

/// Run `f`, record any failure and turn panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> LukStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => LukStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            LukStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(LukStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(LukStatus::InvalidUtf8, e))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(LukStatus::NullPointer, "null handle"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(LukStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(LukStatus::NullPointer, "null output pointer"));
    }
    *out = CString::new(s)
        .map_err(|e| Failure::new(LukStatus::Internal, e))?
        .into_raw();
    Ok(())
}

unsafe fn rationals(values: *const *const c_char, len: usize) -> Result<Vec<Rational>, Failure> {
    if len == 0 {
        return Ok(vec![]);
    }
    if values.is_null() {
        return Err(Failure::new(LukStatus::NullPointer, "null value array"));
    }
    std::slice::from_raw_parts(values, len)
        .iter()
        .map(|&p| {
            let s = str_arg(p)?;
            s.parse::<Rational>()
                .map_err(|e| Failure::new(LukStatus::Parse, format!("{s:?}: {e}")))
        })
        .collect()
}

fn budget() -> Result<Budget, Failure> {
    Budget::from_env().map_err(|e| Failure::new(LukStatus::Parse, e))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn luk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn luk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_network_from_json(json: *const c_char, out: *mut *mut LukNetwork) -> LukStatus {
    guard(|| {
        let net = Network::from_json(str_arg(json)?)?;
        put(out, LukNetwork(net))
    })
}

/// # Safety
/// `net` is a live handle; `out` is writable. Free the result with [`luk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn luk_network_to_json(net: *const LukNetwork, out: *mut *mut c_char) -> LukStatus {
    guard(|| put_string(out, handle(net)?.0.to_json()))
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `net` is a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn luk_network_input_dim(net: *const LukNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

/// # Safety
/// `net` comes from this library and is not used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn luk_network_free(net: *mut LukNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Exact output at a point given as `len` rational strings.
///
/// # Safety
/// `values` holds `len` NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_network_eval(
    net: *const LukNetwork,
    values: *const *const c_char,
    len: usize,
    out: *mut *mut c_char,
) -> LukStatus {
    guard(|| {
        let x = rationals(values, len)?;
        let y = handle(net)?.0.eval(&x)?;
        put_string(out, y.to_string())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_graph_from_json(json: *const c_char, out: *mut *mut LukGraph) -> LukStatus {
    guard(|| {
        let g = SubstitutionGraph::from_json(str_arg(json)?).map_err(|e| Failure::new(LukStatus::Parse, e))?;
        put(out, LukGraph(g))
    })
}

/// # Safety
/// `graph` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_graph_to_json(graph: *const LukGraph, out: *mut *mut c_char) -> LukStatus {
    guard(|| put_string(out, handle(graph)?.0.to_json()))
}

/// # Safety
/// `graph` comes from this library and is not used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn luk_graph_free(graph: *mut LukGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// The single formula the graph stands for.
///
/// # Safety
/// `graph` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_graph_represented_formula(graph: *const LukGraph, out: *mut *mut LukFormula) -> LukStatus {
    guard(|| put(out, LukFormula(handle(graph)?.0.represented_formula())))
}

/// Extract a substitution graph. Honors `LUK_NODE_BUDGET`.
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_extract(net: *const LukNetwork, flavor: LukFlavor, out: *mut *mut LukGraph) -> LukStatus {
    guard(|| {
        let flavor = match flavor {
            LukFlavor::Integer => Flavor::Integer,
            LukFlavor::Rational => Flavor::Rational,
            LukFlavor::Real => Flavor::Real,
        };
        let opts = ExtractOptions {
            budget: budget()?,
            ..ExtractOptions::new(flavor)
        };
        let g = extract_graph_with(&handle(net)?.0, opts)?;
        put(out, LukGraph(g))
    })
}

/// Build a ReLU network from a normal graph. Honors `LUK_NODE_BUDGET`.
///
/// # Safety
/// `graph` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_construct(graph: *const LukGraph, out: *mut *mut LukNetwork) -> LukStatus {
    guard(|| {
        let n = construct(&handle(graph)?.0, budget()?)?;
        put(out, LukNetwork(n))
    })
}

/// Extract then construct; `*identical` tells whether the network came back unchanged.
///
/// # Safety
/// `net` is a live handle; `identical` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_roundtrip(net: *const LukNetwork, identical: *mut bool) -> LukStatus {
    guard(|| {
        let n = &handle(net)?.0;
        let back = roundtrip_with(n, budget()?)?;
        if identical.is_null() {
            return Err(Failure::new(LukStatus::NullPointer, "null output pointer"));
        }
        *identical = &back == n;
        Ok(())
    })
}

/// Parse the s-expression syntax, e.g. `(oplus x1 (not x2))`.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_formula_parse(text: *const c_char, out: *mut *mut LukFormula) -> LukStatus {
    guard(|| {
        let f = Formula::parse(str_arg(text)?).map_err(|e| Failure::new(LukStatus::Parse, e))?;
        put(out, LukFormula(f))
    })
}

/// # Safety
/// `f` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_formula_to_string(f: *const LukFormula, out: *mut *mut c_char) -> LukStatus {
    guard(|| put_string(out, handle(f)?.0.to_string()))
}

/// Truth value at a point given as `len` rational strings.
///
/// # Safety
/// `values` holds `len` NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn luk_formula_eval(
    f: *const LukFormula,
    values: *const *const c_char,
    len: usize,
    out: *mut *mut c_char,
) -> LukStatus {
    guard(|| {
        let x = rationals(values, len)?;
        let y = handle(f)?
            .0
            .eval(&x)
            .map_err(|e| Failure::new(LukStatus::Domain, e))?;
        put_string(out, y.to_string())
    })
}

/// # Safety
/// `f` comes from this library and is not used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn luk_formula_free(f: *mut LukFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}
