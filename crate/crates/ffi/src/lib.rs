//! C ABI for nbandit: load trained snapshots, build arm indexes and select
//! arms.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Every fallible call returns an [`NbStatus`] and, on
//! failure, leaves a message readable through [`nb_last_error`] on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nbandit::ann::{ArmIndex, HnswParams};
use nbandit::fastbandit::{select_arm_fast, AscentConfig, StartDomain};
use nbandit::gan::{select_arm_gan, Generator};
use nbandit::nn::io::load_model;
use nbandit::nn::MlpModel;
use nbandit::policy::{ts_draw, ArmScorer};
use nbandit::rng::seeded;
use nbandit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyIndex = 4,
    Io = 5,
    Format = 6,
    Numerical = 7,
    Panic = 8,
}

/// A trained reward model.
pub struct NbModel {
    model: MlpModel,
}

/// An HNSW index over arm embeddings.
pub struct NbIndex {
    index: ArmIndex,
}

/// A trained arm generator.
pub struct NbGenerator {
    gen: Generator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbIndexParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbAscentParams {
    pub runs: usize,
    pub iterations: usize,
    pub step: f64,
    /// Early-stop threshold; values <= 0 disable it.
    pub stop_threshold: f64,
    pub project: bool,
    pub k_snap: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbSelection {
    pub arm_id: u64,
    pub score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(NbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => NbStatus::DimensionMismatch,
            Error::EmptyIndex => NbStatus::EmptyIndex,
            Error::Io(_) => NbStatus::Io,
            Error::Format(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => NbStatus::Format,
            Error::Numerical(_) | Error::Training(_) => NbStatus::Numerical,
            _ => NbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(NbStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside nbandit");
            NbStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(NbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(NbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(NbStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn to_path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure(NbStatus::NullPointer, "path is null".into()));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn nb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a reward model from an `MLPB` container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_load(path: *const c_char, out: *mut *mut NbModel) -> NbStatus {
    guard(|| {
        let (model, _) = load_model(to_path(path)?)?;
        write(out, Box::into_raw(Box::new(NbModel { model })), "out")
    })
}

/// # Safety
/// `model` must come from [`nb_model_load`] and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_input_dim(model: *const NbModel, out: *mut usize) -> NbStatus {
    guard(|| write(out, reference(model, "model")?.model.input_dim(), "out"))
}

/// Expectation-mode (no dropout) prediction for one input row.
///
/// # Safety
/// `input` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_predict(
    model: *const NbModel,
    input: *const f64,
    len: usize,
    out: *mut f64,
) -> NbStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let x = slice(input, len, "input")?;
        write(out, m.model.predict_value(x, None)?, "out")
    })
}

/// # Safety
/// `model` must come from [`nb_model_load`] and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn nb_model_free(model: *mut NbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads the generator stored as a `GENB` section of a model container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nb_generator_load(path: *const c_char, out: *mut *mut NbGenerator) -> NbStatus {
    guard(|| {
        let (_, sections) = load_model(to_path(path)?)?;
        let section = sections
            .iter()
            .find(|s| &s.tag == b"GENB")
            .ok_or_else(|| Failure(NbStatus::Format, "container has no GENB section".into()))?;
        let gen = Generator::from_section(section)?;
        write(out, Box::into_raw(Box::new(NbGenerator { gen })), "out")
    })
}

/// # Safety
/// `gen` must come from [`nb_generator_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nb_generator_free(gen: *mut NbGenerator) {
    if !gen.is_null() {
        drop(Box::from_raw(gen));
    }
}

#[no_mangle]
pub extern "C" fn nb_index_default_params() -> NbIndexParams {
    let p = HnswParams::default();
    NbIndexParams {
        m: p.m,
        ef_construction: p.ef_construction,
        ef_search: p.ef_search,
        seed: p.seed,
    }
}

/// Builds an index over `n` arms; `vectors` is row-major `n × dim`.
///
/// # Safety
/// `ids` must hold `n` values, `vectors` `n * dim` doubles; `params` may be
/// null for defaults; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_index_build(
    ids: *const u64,
    vectors: *const f64,
    n: usize,
    dim: usize,
    params: *const NbIndexParams,
    out: *mut *mut NbIndex,
) -> NbStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        let total = n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?;
        let ids = slice(ids, n, "ids")?;
        let data = slice(vectors, total, "vectors")?;
        let p = match params.as_ref() {
            Some(p) => HnswParams {
                m: p.m,
                ef_construction: p.ef_construction,
                ef_search: p.ef_search,
                seed: p.seed,
            },
            None => HnswParams::default(),
        };
        let index = ArmIndex::build(ids.iter().copied().zip(data.chunks(dim)), p)?;
        write(out, Box::into_raw(Box::new(NbIndex { index })), "out")
    })
}

/// # Safety
/// `index` must come from [`nb_index_build`] and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_index_len(index: *const NbIndex, out: *mut usize) -> NbStatus {
    guard(|| write(out, reference(index, "index")?.index.len(), "out"))
}

/// Up to `k` approximate nearest arms of `query`, nearest first. Writes the
/// number of results to `out_len`.
///
/// # Safety
/// `query` must hold `dim` doubles; `out_ids` and `out_distances` must have
/// room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn nb_index_query(
    index: *const NbIndex,
    query: *const f64,
    dim: usize,
    k: usize,
    out_ids: *mut u64,
    out_distances: *mut f64,
    out_len: *mut usize,
) -> NbStatus {
    guard(|| {
        let index = &reference(index, "index")?.index;
        let q = slice(query, dim, "query")?;
        if out_ids.is_null() || out_distances.is_null() {
            return Err(Failure(NbStatus::NullPointer, "output buffer is null".into()));
        }
        let hits = index.query_knn(q, k)?;
        for (i, h) in hits.iter().enumerate() {
            out_ids.add(i).write(h.id);
            out_distances.add(i).write(h.distance);
        }
        write(out_len, hits.len(), "out_len")
    })
}

/// # Safety
/// `index` must come from [`nb_index_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nb_index_free(index: *mut NbIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

fn best_exhaustive(scorer: &dyn ArmScorer, context: &[f64], index: &ArmIndex) -> Result<NbSelection, Failure> {
    if index.is_empty() {
        return Err(Error::EmptyIndex.into());
    }
    let scores = scorer.score_many(context, index.vectors(), index.dim())?;
    let mut best: Option<NbSelection> = None;
    for (&id, &score) in index.ids().iter().zip(&scores) {
        let better = match best {
            None => true,
            Some(b) => score > b.score || (score == b.score && id < b.arm_id),
        };
        if better {
            best = Some(NbSelection { arm_id: id, score });
        }
    }
    Ok(best.expect("index is nonempty"))
}

/// Thompson-sampling selection over every arm in `index`: one dropout sample
/// (rate `dropout`, seeded by `seed`) scores all arms; ties go to the lower id.
///
/// # Safety
/// `context` must hold `context_len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_select_exhaust_ts(
    model: *const NbModel,
    index: *const NbIndex,
    context: *const f64,
    context_len: usize,
    dropout: f64,
    seed: u64,
    out: *mut NbSelection,
) -> NbStatus {
    guard(|| {
        let m = &reference(model, "model")?.model;
        let index = &reference(index, "index")?.index;
        let ctx = slice(context, context_len, "context")?;
        let sample = ts_draw(m, dropout, &mut seeded(seed))?;
        write(out, best_exhaustive(&sample, ctx, index)?, "out")
    })
}

#[no_mangle]
pub extern "C" fn nb_ascent_default_params() -> NbAscentParams {
    let c = AscentConfig::default();
    NbAscentParams {
        runs: c.runs,
        iterations: c.iterations,
        step: c.step,
        stop_threshold: c.stop_threshold.unwrap_or(0.0),
        project: c.project,
        k_snap: c.k_snap,
    }
}

/// Thompson-sampling selection by multistart ascent snapped through `index`.
///
/// # Safety
/// As [`nb_select_exhaust_ts`]; `params` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn nb_select_fast_ts(
    model: *const NbModel,
    index: *const NbIndex,
    context: *const f64,
    context_len: usize,
    params: *const NbAscentParams,
    dropout: f64,
    seed: u64,
    out: *mut NbSelection,
) -> NbStatus {
    guard(|| {
        let m = &reference(model, "model")?.model;
        let index = &reference(index, "index")?.index;
        let ctx = slice(context, context_len, "context")?;
        let cfg = match params.as_ref() {
            Some(p) => AscentConfig {
                runs: p.runs,
                iterations: p.iterations,
                step: p.step,
                stop_threshold: (p.stop_threshold > 0.0).then_some(p.stop_threshold),
                start: StartDomain::UnitSphere,
                project: p.project,
                k_snap: p.k_snap,
            },
            None => AscentConfig::default(),
        };
        let mut rng = seeded(seed);
        let sample = ts_draw(m, dropout, &mut rng)?;
        let sel = select_arm_fast(&sample, ctx, index, &cfg, seed)?;
        write(
            out,
            NbSelection {
                arm_id: sel.arm_id,
                score: sel.score,
            },
            "out",
        )
    })
}

/// Thompson-sampling selection through the generator: one generated
/// embedding, its `top_k` nearest arms, the best of those under the sample.
///
/// # Safety
/// As [`nb_select_exhaust_ts`].
#[no_mangle]
pub unsafe extern "C" fn nb_select_gan_ts(
    model: *const NbModel,
    gen: *const NbGenerator,
    index: *const NbIndex,
    context: *const f64,
    context_len: usize,
    top_k: usize,
    dropout: f64,
    seed: u64,
    out: *mut NbSelection,
) -> NbStatus {
    guard(|| {
        let m = &reference(model, "model")?.model;
        let g = &reference(gen, "generator")?.gen;
        let index = &reference(index, "index")?.index;
        let ctx = slice(context, context_len, "context")?;
        let mut rng = seeded(seed);
        let sample = ts_draw(m, dropout, &mut rng)?;
        let sel = select_arm_gan(g, &sample, ctx, index, top_k, &mut rng)?;
        write(
            out,
            NbSelection {
                arm_id: sel.arm_id,
                score: sel.score,
            },
            "out",
        )
    })
}
