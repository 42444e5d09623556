//! C interface to the aligner.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`SnapStatus`];
//! on failure a description is available from [`snap_last_error_message`]
//! until the next failing call on the same thread.
//!
//! An index handle may be shared by any number of aligner handles on any
//! threads. An aligner handle holds scratch space and must be used by one
//! thread at a time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use snapalign::aligner::{Aligner, AlignerParams, AlignmentResult, MaxDistance};
use snapalign::distance::{BoundedDistance, DistanceOutcome};
use snapalign::genome::{load_fasta, PackedGenome};
use snapalign::index::{Direction, SeedIndex};
use snapalign::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    ChecksumMismatch = 5,
    VersionMismatch = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapResultKind {
    SingleHit = 0,
    MultipleHits = 1,
    NotFound = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapDirection {
    Forward = 0,
    ReverseComplement = 1,
}

/// Aligner parameters. `max_distance_percent` is used when non-zero,
/// otherwise `max_distance`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapParams {
    pub seed_size: u32,
    pub seeds_to_try: u32,
    pub max_distance: u32,
    pub max_distance_percent: u32,
    pub confidence: u32,
    pub max_hits: u32,
    pub bucket_size: u32,
}

/// One alignment. `position` is 0-based in the concatenated reference;
/// `has_hit` is 0 when there is no best location. `gap` is -1 when no second
/// location was within reach.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapAlignment {
    pub kind: SnapResultKind,
    pub has_hit: u8,
    pub position: u64,
    pub direction: SnapDirection,
    pub distance: u32,
    pub gap: i32,
}

/// Reference genome plus its seed index.
pub struct SnapIndex {
    inner: Arc<(SeedIndex, PackedGenome)>,
}

/// Per-thread alignment state bound to one index.
pub struct SnapAligner {
    // Declared first so it is dropped before the index it borrows from.
    aligner: Aligner<'static>,
    _index: Arc<(SeedIndex, PackedGenome)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SnapStatus {
    match err {
        Error::Io(_) => SnapStatus::Io,
        Error::InvalidArgument(_) | Error::OutOfRange { .. } | Error::InvalidBase(_) => SnapStatus::InvalidArgument,
        Error::ChecksumMismatch => SnapStatus::ChecksumMismatch,
        Error::VersionMismatch { .. } => SnapStatus::VersionMismatch,
        _ => SnapStatus::Format,
    }
}

fn fail(err: Error) -> SnapStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Runs `f`, converting panics into [`SnapStatus::Panic`].
fn guard(f: impl FnOnce() -> SnapStatus) -> SnapStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        SnapStatus::Panic
    })
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, SnapStatus> {
    if p.is_null() {
        set_error("null path");
        return Err(SnapStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        SnapStatus::InvalidArgument
    })
}

fn params_from_c(p: &SnapParams) -> AlignerParams {
    AlignerParams {
        seed_size: p.seed_size as usize,
        seeds_to_try: p.seeds_to_try as usize,
        max_distance: if p.max_distance_percent > 0 {
            MaxDistance::PercentOfRead(p.max_distance_percent)
        } else {
            MaxDistance::Fixed(p.max_distance)
        },
        confidence: p.confidence,
        max_hits: p.max_hits as usize,
        bucket_size: p.bucket_size as u64,
        shrink_d_limit: true,
    }
}

/// Message for the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn snap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the default parameters.
///
/// # Safety
/// `out` must be null or point to writable memory for one `SnapParams`.
#[no_mangle]
pub unsafe extern "C" fn snap_params_default(out: *mut SnapParams) -> SnapStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SnapStatus::NullPointer;
    }
    let d = AlignerParams::default();
    let percent = match d.max_distance {
        MaxDistance::PercentOfRead(p) => p,
        MaxDistance::Fixed(_) => 0,
    };
    *out = SnapParams {
        seed_size: d.seed_size as u32,
        seeds_to_try: d.seeds_to_try as u32,
        max_distance: 0,
        max_distance_percent: percent,
        confidence: d.confidence,
        max_hits: d.max_hits as u32,
        bucket_size: d.bucket_size as u32,
    };
    SnapStatus::Ok
}

/// Builds an index for the FASTA file at `fasta_path`.
///
/// # Safety
/// `fasta_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snap_index_build(
    fasta_path: *const c_char,
    seed_size: u32,
    out: *mut *mut SnapIndex,
) -> SnapStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SnapStatus::NullPointer;
        }
        let path = match path_arg(fasta_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let built = File::open(path)
            .map_err(Error::from)
            .and_then(|f| load_fasta(BufReader::new(f)))
            .and_then(|g| Ok((SeedIndex::build(&g, seed_size as usize)?, g)));
        match built {
            Ok(pair) => {
                *out = Box::into_raw(Box::new(SnapIndex { inner: Arc::new(pair) }));
                SnapStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads an index file.
///
/// # Safety
/// `index_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snap_index_load(index_path: *const c_char, out: *mut *mut SnapIndex) -> SnapStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SnapStatus::NullPointer;
        }
        let path = match path_arg(index_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let loaded = File::open(path).map_err(Error::from).and_then(|f| SeedIndex::load(BufReader::new(f), None));
        match loaded {
            Ok(pair) => {
                *out = Box::into_raw(Box::new(SnapIndex { inner: Arc::new(pair) }));
                SnapStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes `index` to `index_path`.
///
/// # Safety
/// `index` must come from this library; `index_path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn snap_index_save(index: *const SnapIndex, index_path: *const c_char) -> SnapStatus {
    guard(|| {
        let Some(index) = index.as_ref() else {
            set_error("null index");
            return SnapStatus::NullPointer;
        };
        let path = match path_arg(index_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let (idx, genome) = &*index.inner;
        let saved = File::create(path).map_err(Error::from).and_then(|f| {
            let mut w = BufWriter::new(f);
            idx.save(genome, &mut w)?;
            w.flush()?;
            Ok(())
        });
        match saved {
            Ok(()) => SnapStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Length of the concatenated reference.
///
/// # Safety
/// `index` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn snap_index_genome_length(index: *const SnapIndex) -> u64 {
    index.as_ref().map_or(0, |i| i.inner.1.len())
}

/// Releases an index. Aligners created from it stay valid.
///
/// # Safety
/// `index` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn snap_index_free(index: *mut SnapIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Creates an aligner over `index`; `params` may be null for defaults.
///
/// # Safety
/// `index` must come from this library; `params` must be null or valid;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snap_aligner_new(
    index: *const SnapIndex,
    params: *const SnapParams,
    out: *mut *mut SnapAligner,
) -> SnapStatus {
    guard(|| {
        let Some(index) = index.as_ref() else {
            set_error("null index");
            return SnapStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return SnapStatus::NullPointer;
        }
        let params = params.as_ref().map_or_else(AlignerParams::default, params_from_c);
        let shared = Arc::clone(&index.inner);
        // SAFETY: the pair lives on the heap behind `shared`, which the
        // handle keeps alive for at least as long as the aligner.
        let (idx, genome): &'static (SeedIndex, PackedGenome) = &*Arc::as_ptr(&shared);
        match Aligner::new(idx, genome, params) {
            Ok(aligner) => {
                *out = Box::into_raw(Box::new(SnapAligner { aligner, _index: shared }));
                SnapStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `aligner` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn snap_aligner_free(aligner: *mut SnapAligner) {
    if !aligner.is_null() {
        drop(Box::from_raw(aligner));
    }
}

fn to_c(result: &AlignmentResult) -> SnapAlignment {
    let kind = match result {
        AlignmentResult::SingleHit { .. } => SnapResultKind::SingleHit,
        AlignmentResult::MultipleHits { .. } => SnapResultKind::MultipleHits,
        AlignmentResult::NotFound => SnapResultKind::NotFound,
    };
    let gap = match result {
        AlignmentResult::SingleHit { gap: Some(g), .. } => (*g).min(i32::MAX as u32) as i32,
        _ => -1,
    };
    let hit = result.best_hit();
    SnapAlignment {
        kind,
        has_hit: u8::from(hit.is_some()),
        position: hit.map_or(0, |h| h.position),
        direction: match hit.map(|h| h.direction) {
            Some(Direction::ReverseComplement) => SnapDirection::ReverseComplement,
            _ => SnapDirection::Forward,
        },
        distance: hit.map_or(0, |h| h.distance),
        gap,
    }
}

/// Aligns one read of `len` bases (ASCII `ACGTN`, case-insensitive).
///
/// # Safety
/// `aligner` must come from this library; `bases` must point to `len`
/// readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snap_align_read(
    aligner: *mut SnapAligner,
    bases: *const u8,
    len: usize,
    out: *mut SnapAlignment,
) -> SnapStatus {
    guard(|| {
        let Some(a) = aligner.as_mut() else {
            set_error("null aligner");
            return SnapStatus::NullPointer;
        };
        if out.is_null() || (bases.is_null() && len > 0) {
            set_error("null pointer argument");
            return SnapStatus::NullPointer;
        }
        let raw = if len == 0 { &[][..] } else { std::slice::from_raw_parts(bases, len) };
        let mut read = Vec::with_capacity(len);
        for &b in raw {
            match b.to_ascii_uppercase() {
                c @ (b'A' | b'C' | b'G' | b'T' | b'N') => read.push(c),
                other => return fail(Error::InvalidBase(other as char)),
            }
        }
        *out = to_c(&a.aligner.align(&read));
        SnapStatus::Ok
    })
}

/// Semi-global edit distance of `read` against `window` if at most
/// `d_limit`; writes the distance or -1 to `out`.
///
/// # Safety
/// `read` and `window` must point to `read_len` and `window_len` readable
/// bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snap_bounded_distance(
    read: *const u8,
    read_len: usize,
    window: *const u8,
    window_len: usize,
    d_limit: i64,
    out: *mut i64,
) -> SnapStatus {
    guard(|| {
        if out.is_null() || (read.is_null() && read_len > 0) || (window.is_null() && window_len > 0) {
            set_error("null pointer argument");
            return SnapStatus::NullPointer;
        }
        let slice = |p: *const u8, n: usize| if n == 0 { &[][..] } else { std::slice::from_raw_parts(p, n) };
        match BoundedDistance::new().compute(slice(read, read_len), slice(window, window_len), d_limit) {
            Ok(DistanceOutcome::Distance(d)) => {
                *out = d as i64;
                SnapStatus::Ok
            }
            Ok(DistanceOutcome::ExceedsLimit) => {
                *out = -1;
                SnapStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
