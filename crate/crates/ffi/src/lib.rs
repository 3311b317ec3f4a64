//! C interface to `linkmse`.
//!
//! Objects are opaque handles created by `lm_*_new`/`lm_*_read`/`lm_*_run`
//! style functions and released with the matching `lm_*_free`. Every
//! fallible call returns an [`LmStatus`]; on failure,
//! [`lm_last_error_message`] describes what went wrong on the calling
//! thread. Outputs are written through pointer arguments only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use linkmse::averaging::{average_closed_form, draw_tables, AveragedPosterior};
use linkmse::compare::CandidateSets;
use linkmse::histories::ContingencyTable;
use linkmse::linkage::{run_linkage_sampler, LinkageChain, McmcConfig, TruncationPoints};
use linkmse::mse_graphical::{
    bma_posterior, posterior_n_given_m, DecomposableModel, PriorCounts, SizePosterior, SizePrior, SizePriorKind,
};
use linkmse::mse_lcmcr::{run_lcmcr, LcmcrConfig};
use linkmse::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmSizePrior {
    Reciprocal = 0,
    Uniform = 1,
}

/// Variance split of an averaged posterior. Shares are fractions of `total`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LmDecomposition {
    pub total: f64,
    pub linkage: f64,
    pub residual: f64,
    pub linkage_share: f64,
    pub residual_share: f64,
}

pub struct LmTable(ContingencyTable);

pub struct LmPosterior(SizePosterior);

pub struct LmAveraged(AveragedPosterior);

pub struct LmCandidates {
    sets: CandidateSets,
    membership: Vec<usize>,
}

pub struct LmChain(LinkageChain);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LmStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Io { .. } | Error::Csv { .. } => LmStatus::Io,
        Error::Parse(_)
        | Error::BadDate { .. }
        | Error::DuplicateHeader { .. }
        | Error::MissingColumn { .. }
        | Error::RequiredMissing { .. }
        | Error::Missing(_) => LmStatus::Parse,
        Error::ZeroMass | Error::DegenerateChain(_) => LmStatus::Numerical,
        _ => LmStatus::InvalidArgument,
    }
}

struct Fail(LmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LmStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LmStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            LmStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out<T>(dst: *mut *mut T, value: T) -> Result<(), Fail> {
    if dst.is_null() {
        return Err(null("output pointer"));
    }
    *dst = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn size_prior(kind: LmSizePrior, n_max: u64) -> SizePrior {
    SizePrior {
        kind: match kind {
            LmSizePrior::Reciprocal => SizePriorKind::Reciprocal,
            LmSizePrior::Uniform => SizePriorKind::Uniform,
        },
        n_max,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Empty table over `k` lists.
///
/// # Safety
/// `table` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lm_table_new(k: usize, table: *mut *mut LmTable) -> LmStatus {
    guard(|| out(table, LmTable(ContingencyTable::new(k)?)))
}

/// Table from dense counts indexed by pattern bitmask (bit `j-1` set when
/// list `j` caught the individual); entry 0 is ignored.
///
/// # Safety
/// `counts` must point to `len` values; `table` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_table_from_dense(
    k: usize,
    counts: *const u64,
    len: usize,
    table: *mut *mut LmTable,
) -> LmStatus {
    guard(|| {
        let c = slice(counts, len, "counts")?;
        out(table, LmTable(ContingencyTable::from_dense(k, c)?))
    })
}

/// Reads a `pattern,count` CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `table` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_table_read_csv(path: *const c_char, table: *mut *mut LmTable) -> LmStatus {
    guard(|| {
        let p = PathBuf::from(string(path, "path")?);
        out(table, LmTable(ContingencyTable::read_csv(&p)?.0))
    })
}

/// Adds `count` individuals with capture pattern `pattern`.
///
/// # Safety
/// `table` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_table_add(table: *mut LmTable, pattern: u32, count: u64) -> LmStatus {
    guard(|| Ok(get_mut(table, "table")?.0.add(pattern, count)?))
}

/// Observed individuals, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_table_n_obs(table: *const LmTable) -> u64 {
    table.as_ref().map_or(0, |t| t.0.n_obs())
}

/// # Safety
/// `table` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lm_table_free(table: *mut LmTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Posterior of `N` under one decomposable model, named like `[1,2][3]`,
/// with constant prior counts `alpha`.
///
/// # Safety
/// `table` must come from this library, `model` must be NUL-terminated and
/// `posterior` writable.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_graphical(
    table: *const LmTable,
    model: *const c_char,
    alpha: f64,
    prior: LmSizePrior,
    n_max: u64,
    posterior: *mut *mut LmPosterior,
) -> LmStatus {
    guard(|| {
        let t = &get(table, "table")?.0;
        let m = DecomposableModel::parse(&string(model, "model")?, t.k())?;
        let a = PriorCounts::constant(t.k(), alpha)?;
        out(posterior, LmPosterior(posterior_n_given_m(t, &m, &a, &size_prior(prior, n_max))?))
    })
}

/// Model-averaged posterior over every decomposable model. When `weights`
/// is non-null, up to `weights_len` posterior model weights are written in
/// the library's model order and `num_models` (if non-null) receives the
/// model count.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_bma(
    table: *const LmTable,
    alpha: f64,
    prior: LmSizePrior,
    n_max: u64,
    posterior: *mut *mut LmPosterior,
    weights: *mut f64,
    weights_len: usize,
    num_models: *mut usize,
) -> LmStatus {
    guard(|| {
        let t = &get(table, "table")?.0;
        let a = PriorCounts::constant(t.k(), alpha)?;
        let b = bma_posterior(t, &a, &size_prior(prior, n_max))?;
        if !weights.is_null() {
            for (i, w) in b.weights.iter().take(weights_len).enumerate() {
                *weights.add(i) = *w;
            }
        }
        if !num_models.is_null() {
            *num_models = b.weights.len();
        }
        out(posterior, LmPosterior(b.mixture))
    })
}

/// Posterior of `N` from the latent-class sampler, as the pmf of its draws.
///
/// # Safety
/// `table` must come from this library and `posterior` be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_lcmcr(
    table: *const LmTable,
    strata: usize,
    iterations: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    posterior: *mut *mut LmPosterior,
) -> LmStatus {
    guard(|| {
        let t = &get(table, "table")?.0;
        let mut c = LcmcrConfig::new(iterations, burnin, thin, seed);
        c.strata = strata;
        out(posterior, LmPosterior(run_lcmcr(t, &c)?.posterior))
    })
}

/// Smallest `N` with stored probability.
///
/// # Safety
/// `posterior` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_start(posterior: *const LmPosterior) -> u64 {
    posterior.as_ref().map_or(0, |p| p.0.start)
}

/// Number of stored probabilities.
///
/// # Safety
/// `posterior` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_len(posterior: *const LmPosterior) -> usize {
    posterior.as_ref().map_or(0, |p| p.0.probs.len())
}

/// Copies up to `len` probabilities for `N = start, start + 1, ...`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_probs(posterior: *const LmPosterior, buf: *mut f64, len: usize) -> LmStatus {
    guard(|| {
        let p = &get(posterior, "posterior")?.0;
        if buf.is_null() && len > 0 {
            return Err(null("buffer"));
        }
        for (i, v) in p.probs.iter().take(len).enumerate() {
            *buf.add(i) = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `posterior` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_mean(posterior: *const LmPosterior) -> f64 {
    posterior.as_ref().map_or(f64::NAN, |p| p.0.mean())
}

/// # Safety
/// `posterior` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_variance(posterior: *const LmPosterior) -> f64 {
    posterior.as_ref().map_or(f64::NAN, |p| p.0.variance())
}

/// Equal-tailed credible interval at `level` in (0, 1).
///
/// # Safety
/// `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_interval(
    posterior: *const LmPosterior,
    level: f64,
    lower: *mut u64,
    upper: *mut u64,
) -> LmStatus {
    guard(|| {
        let p = &get(posterior, "posterior")?.0;
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("level {level} is not in (0, 1)")));
        }
        let (lo, hi) = p.interval(level);
        *get_mut(lower, "lower")? = lo;
        *get_mut(upper, "upper")? = hi;
        Ok(())
    })
}

/// # Safety
/// `posterior` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lm_posterior_free(posterior: *mut LmPosterior) {
    if !posterior.is_null() {
        drop(Box::from_raw(posterior));
    }
}

/// Equal-weight average of `count` per-draw posteriors.
///
/// # Safety
/// `posteriors` must point to `count` handles from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_average(
    posteriors: *const *const LmPosterior,
    count: usize,
    averaged: *mut *mut LmAveraged,
) -> LmStatus {
    guard(|| {
        let ps = slice(posteriors, count, "posteriors")?;
        let owned: Vec<SizePosterior> = ps
            .iter()
            .map(|&p| get(p, "posterior").map(|p| p.0.clone()))
            .collect::<Result<_, _>>()?;
        out(averaged, LmAveraged(average_closed_form(&owned)?))
    })
}

/// New handle holding the pooled posterior.
///
/// # Safety
/// `averaged` must come from this library and `posterior` be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_averaged_pooled(averaged: *const LmAveraged, posterior: *mut *mut LmPosterior) -> LmStatus {
    guard(|| out(posterior, LmPosterior(get(averaged, "averaged")?.0.pooled.clone())))
}

/// # Safety
/// `averaged` must come from this library and `decomposition` be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_averaged_decomposition(
    averaged: *const LmAveraged,
    decomposition: *mut LmDecomposition,
) -> LmStatus {
    guard(|| {
        let d = get(averaged, "averaged")?.0.decomposition;
        *get_mut(decomposition, "decomposition")? = LmDecomposition {
            total: d.total,
            linkage: d.linkage,
            residual: d.residual,
            linkage_share: d.linkage_share,
            residual_share: d.residual_share,
        };
        Ok(())
    })
}

/// # Safety
/// `averaged` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lm_averaged_free(averaged: *mut LmAveraged) {
    if !averaged.is_null() {
        drop(Box::from_raw(averaged));
    }
}

/// Loads a candidate directory written by the `compare` stage.
///
/// # Safety
/// `dir` must be NUL-terminated and `candidates` writable.
#[no_mangle]
pub unsafe extern "C" fn lm_candidates_read(dir: *const c_char, candidates: *mut *mut LmCandidates) -> LmStatus {
    guard(|| {
        let (sets, membership) = CandidateSets::read_dir(&PathBuf::from(string(dir, "dir")?))?;
        out(candidates, LmCandidates { sets, membership })
    })
}

/// # Safety
/// `candidates` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_candidates_num_pairs(candidates: *const LmCandidates) -> usize {
    candidates.as_ref().map_or(0, |c| c.sets.candidates.len())
}

/// # Safety
/// `candidates` must be null or come from this library, and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn lm_candidates_free(candidates: *mut LmCandidates) {
    if !candidates.is_null() {
        drop(Box::from_raw(candidates));
    }
}

/// Runs the partition sampler. `priors_path` may be null for untruncated
/// priors.
///
/// # Safety
/// `candidates` must come from this library, `priors_path` must be null or
/// NUL-terminated, and `chain` writable.
#[no_mangle]
pub unsafe extern "C" fn lm_link_run(
    candidates: *const LmCandidates,
    priors_path: *const c_char,
    iterations: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    chain: *mut *mut LmChain,
) -> LmStatus {
    guard(|| {
        let c = get(candidates, "candidates")?;
        let lambda = if priors_path.is_null() {
            TruncationPoints::flat(&c.sets.levels_per_field)
        } else {
            let p = PathBuf::from(string(priors_path, "priors path")?);
            TruncationPoints::read(&p, &c.sets.field_names, &c.sets.levels_per_field)?
        };
        let cfg = McmcConfig::new(iterations, burnin, thin, seed);
        out(chain, LmChain(run_linkage_sampler(&c.sets, &lambda, &cfg)?))
    })
}

/// Number of saved draws.
///
/// # Safety
/// `chain` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn lm_chain_len(chain: *const LmChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.draws.len())
}

/// Capture-history table of draw `index` over all lists.
///
/// # Safety
/// Handles must come from this library and `table` be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_chain_table(
    chain: *const LmChain,
    candidates: *const LmCandidates,
    index: usize,
    table: *mut *mut LmTable,
) -> LmStatus {
    guard(|| {
        let ch = &get(chain, "chain")?.0;
        let c = get(candidates, "candidates")?;
        let z = ch
            .draws
            .get(index)
            .ok_or_else(|| invalid(format!("draw {index} out of range")))?;
        let k = c.membership.iter().max().map_or(0, |m| m + 1);
        let lists: Vec<usize> = (1..=k).collect();
        let t = draw_tables(std::slice::from_ref(z), &c.membership, k, &lists)?.remove(0);
        out(table, LmTable(t))
    })
}

/// Writes the chain in the draw-file format.
///
/// # Safety
/// Handles must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lm_chain_write(
    chain: *const LmChain,
    candidates: *const LmCandidates,
    path: *const c_char,
) -> LmStatus {
    guard(|| {
        let ch = &get(chain, "chain")?.0;
        let c = get(candidates, "candidates")?;
        Ok(ch.write(&PathBuf::from(string(path, "path")?), &c.membership)?)
    })
}

/// # Safety
/// `chain` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lm_chain_free(chain: *mut LmChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}
