//! C ABI over the failspec library.
//!
//! Every fallible function returns an [`FsStatus`]. On failure the message
//! is kept per thread and read with [`fs_last_error_message`]. Handles are
//! opaque and released with their `_free` function. Bit vectors cross the
//! boundary as `uint8_t` arrays holding one bit per byte.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use failspec::decoders::{Backend, Decoder, DecoderConfig};
use failspec::f2linalg::BitVec;
use failspec::minweight::distance_exact;
use failspec::sampling::{sample_rate, sample_weight, transform};
use failspec::splitting::{multi_seeded_split, SplitOptions};
use failspec::system::{format_system, gen_repetition, gen_rotated_toric, gen_unrotated_toric, parse_system, read_system, DecodingSystem};
use failspec::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Dimension = 3,
    Infeasible = 4,
    BudgetExhausted = 5,
    InvalidArgument = 6,
    Parse = 7,
    Underdetermined = 8,
    NoRoot = 9,
    Io = 10,
    Serialization = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsBackend {
    Lookup = 0,
    BranchAndBound = 1,
    BpOsd0 = 2,
}

impl From<FsBackend> for Backend {
    fn from(b: FsBackend) -> Self {
        match b {
            FsBackend::Lookup => Backend::Lookup,
            FsBackend::BranchAndBound => Backend::BranchAndBound,
            FsBackend::BpOsd0 => Backend::BpOsd0,
        }
    }
}

/// A decoding system.
pub struct FsSystem(DecodingSystem);

/// A decoder bound to its own copy of a system.
pub struct FsDecoder {
    sys: DecodingSystem,
    dec: Decoder,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension(_) => FsStatus::Dimension,
            Error::Infeasible => FsStatus::Infeasible,
            Error::BudgetExhausted(_) => FsStatus::BudgetExhausted,
            Error::InvalidArgument(_) => FsStatus::InvalidArgument,
            Error::Parse { .. } => FsStatus::Parse,
            Error::Underdetermined { .. } => FsStatus::Underdetermined,
            Error::NoRoot(_) => FsStatus::NoRoot,
            Error::Io(_) => FsStatus::Io,
            Error::Json(_) | Error::Csv(_) => FsStatus::Serialization,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FsStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(FsStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => FsStatus::Ok,
        Err(Failure(status, msg)) => {
            set_error(msg);
            status
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(FsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn bits(p: *const u8, len: usize, expected: usize, what: &str) -> Result<BitVec, Failure> {
    if len != expected {
        return Err(Failure(FsStatus::Dimension, format!("{what} has length {len}, expected {expected}")));
    }
    let raw = slice(p, len, what)?;
    Ok(BitVec::from_bools(&raw.iter().map(|&b| b != 0).collect::<Vec<_>>()))
}

unsafe fn emit_system(sys: failspec::Result<DecodingSystem>, dst: *mut *mut FsSystem) -> Result<(), Failure> {
    let dst = out(dst, "out")?;
    *dst = Box::into_raw(Box::new(FsSystem(sys?)));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn fs_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_read(path: *const c_char, out: *mut *mut FsSystem) -> FsStatus {
    guard(|| emit_system(read_system(string(path, "path")?), out))
}

/// Parses the text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_parse(text: *const c_char, out: *mut *mut FsSystem) -> FsStatus {
    guard(|| emit_system(parse_system(string(text, "text")?), out))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_repetition(n: usize, out: *mut *mut FsSystem) -> FsStatus {
    guard(|| emit_system(gen_repetition(n), out))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_unrotated_toric(d1: usize, d2: usize, out: *mut *mut FsSystem) -> FsStatus {
    guard(|| emit_system(gen_unrotated_toric(d1, d2), out))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_rotated_toric(d: usize, out: *mut *mut FsSystem) -> FsStatus {
    guard(|| emit_system(gen_rotated_toric(d), out))
}

/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_system_free(sys: *mut FsSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of compressed fault columns, 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_system_num_faults(sys: *const FsSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.num_faults())
}

/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_system_num_checks(sys: *const FsSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.num_checks())
}

/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_system_num_actions(sys: *const FsSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.num_actions())
}

/// Sum of multiplicities.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_system_expanded_count(sys: *const FsSystem) -> u64 {
    sys.as_ref().map_or(0, |s| s.0.expanded_count())
}

/// Serialises to the text format. Free the result with [`fs_string_free`].
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_to_text(sys: *const FsSystem, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        let text = format_system(&borrow(sys, "sys")?.0);
        let dst = self::out(out, "out")?;
        *dst = CString::new(text).map_err(|e| Failure(FsStatus::Serialization, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Exact code distance by repeated branch-and-bound decoding.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_system_distance(sys: *const FsSystem, out: *mut usize) -> FsStatus {
    guard(|| {
        let cfg = DecoderConfig::with_backend(Backend::BranchAndBound);
        let d = distance_exact(&borrow(sys, "sys")?.0, &cfg)?.distance;
        *self::out(out, "out")? = d;
        Ok(())
    })
}

/// Builds a decoder with default settings for `backend`. The decoder keeps
/// its own copy of the system, so `sys` may be freed afterwards.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_decoder_new(sys: *const FsSystem, backend: FsBackend, out: *mut *mut FsDecoder) -> FsStatus {
    guard(|| {
        let sys = borrow(sys, "sys")?.0.clone();
        let dec = Decoder::new(&sys, &DecoderConfig::with_backend(backend.into()))?;
        *self::out(out, "out")? = Box::into_raw(Box::new(FsDecoder { sys, dec }));
        Ok(())
    })
}

/// # Safety
/// `dec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_decoder_free(dec: *mut FsDecoder) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Decodes a syndrome of `num_checks` bits into a correction of
/// `num_faults` bits.
///
/// # Safety
/// `syndrome` and `correction` must point to the given number of bytes.
#[no_mangle]
pub unsafe extern "C" fn fs_decoder_decode(
    dec: *const FsDecoder,
    syndrome: *const u8,
    syndrome_len: usize,
    correction: *mut u8,
    correction_len: usize,
) -> FsStatus {
    guard(|| {
        let d = borrow(dec, "dec")?;
        let s = bits(syndrome, syndrome_len, d.sys.num_checks(), "syndrome")?;
        let n = d.sys.num_faults();
        if correction_len != n {
            return Err(Failure(FsStatus::Dimension, format!("correction has length {correction_len}, expected {n}")));
        }
        if correction.is_null() {
            return Err(null("correction"));
        }
        let c = d.dec.decode(&s)?.correction;
        let dst = std::slice::from_raw_parts_mut(correction, n);
        for (j, b) in dst.iter_mut().enumerate() {
            *b = u8::from(c.get(j));
        }
        Ok(())
    })
}

/// Whether decoding the syndrome of `error` changes its logical action.
///
/// # Safety
/// `error` must point to `len` bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_decoder_is_failure(dec: *const FsDecoder, error: *const u8, len: usize, out: *mut bool) -> FsStatus {
    guard(|| {
        let d = borrow(dec, "dec")?;
        let e = bits(error, len, d.sys.num_faults(), "error")?;
        *self::out(out, "out")? = d.dec.is_failure(&d.sys, &e)?;
        Ok(())
    })
}

/// Failures among `trials` uniformly drawn weight-`w` expanded errors.
///
/// # Safety
/// `dec` must be a live handle and `failures` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_sample_weight(dec: *const FsDecoder, w: u64, trials: u64, seed: u64, failures: *mut u64) -> FsStatus {
    guard(|| {
        let d = borrow(dec, "dec")?;
        let (f, _) = sample_weight(&d.sys, &d.dec, w, trials, &mut ChaCha8Rng::seed_from_u64(seed))?;
        *out(failures, "failures")? = f;
        Ok(())
    })
}

/// Failures among `trials` errors drawn at global rate `p`.
///
/// # Safety
/// `dec` must be a live handle and `failures` writable.
#[no_mangle]
pub unsafe extern "C" fn fs_sample_rate(dec: *const FsDecoder, p: f64, trials: u64, seed: u64, failures: *mut u64) -> FsStatus {
    guard(|| {
        let d = borrow(dec, "dec")?;
        let est = sample_rate(&d.sys, &d.dec, p, trials, &mut ChaCha8Rng::seed_from_u64(seed))?;
        *out(failures, "failures")? = est.failures;
        Ok(())
    })
}

/// Binomial transform of a spectrum `f[0..=n]` at per-copy rate `q`.
///
/// # Safety
/// `f` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_transform(f: *const f64, len: usize, q: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        let f = slice(f, len, "f")?;
        if f.is_empty() {
            return Err(Failure(FsStatus::InvalidArgument, "spectrum is empty".into()));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Failure(FsStatus::InvalidArgument, format!("q = {q} outside [0, 1]")));
        }
        *self::out(out, "out")? = transform(|w| f[w as usize], len as u64 - 1, q);
        Ok(())
    })
}

/// Multi-seeded splitting from `p0` down to each target. Writes the mean
/// and standard deviation over the `l * m` instances for every target.
///
/// # Safety
/// `targets`, `p_hat` and `p_std` must each point to `n_targets` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_split(
    dec: *const FsDecoder,
    p0: f64,
    targets: *const f64,
    n_targets: usize,
    distance: usize,
    l: usize,
    m: usize,
    seed: u64,
    p_hat: *mut f64,
    p_std: *mut f64,
) -> FsStatus {
    guard(|| {
        let d = borrow(dec, "dec")?;
        let targets = slice(targets, n_targets, "targets")?.to_vec();
        if n_targets > 0 && (p_hat.is_null() || p_std.is_null()) {
            return Err(null("output array"));
        }
        let mut opts = SplitOptions::new(p0, targets.clone(), distance);
        opts.l = l;
        opts.m = m;
        let run = multi_seeded_split(&d.sys, &d.dec, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        for (i, &t) in targets.iter().enumerate() {
            let s = run
                .summary_at(t)
                .ok_or_else(|| Failure(FsStatus::InvalidArgument, format!("target {t} not in the schedule")))?;
            *p_hat.add(i) = s.p_hat;
            *p_std.add(i) = s.p_std;
        }
        Ok(())
    })
}
