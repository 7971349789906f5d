//! C ABI over the captioning library.
//!
//! Every function returns an [`RcStatus`]; on failure a message is kept per
//! thread and can be fetched with [`rc_last_error`]. Models are opaque
//! handles created by [`rc_model_load`] and released by [`rc_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use reconcap::data::{preprocess_caption, sample_frames, VideoFeatures, Vocabulary};
use reconcap::metrics::{CiderVariant, MetricReport};
use reconcap::model::CaptionModel;
use reconcap::train::Checkpoint;
use reconcap::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    CorruptArtifact = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

/// Loaded checkpoint. Opaque to C.
pub struct RcModel {
    vocab: Vocabulary,
    model: CaptionModel,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RcScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: RcStatus, msg: impl Into<String>) -> RcStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> RcStatus {
    match e {
        Error::Io { .. } | Error::MissingPath(_) => RcStatus::Io,
        e if e.is_corrupt_artifact() => RcStatus::CorruptArtifact,
        _ => RcStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> RcStatus) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RcStatus::Internal, "panic inside reconcap"),
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, RcStatus> {
    if p.is_null() {
        return Err(fail(RcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `s` plus a NUL terminator into `buf`. `needed` receives the
/// required size including the terminator, even on failure.
unsafe fn write_c_string(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> RcStatus {
    let n = s.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() {
        return fail(RcStatus::NullPointer, "output buffer is null");
    }
    if len < n {
        return fail(RcStatus::BufferTooSmall, format!("buffer holds {len} bytes, {n} needed"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    RcStatus::Ok
}

/// Copies the calling thread's last error message into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn rc_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> RcStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    write_c_string(&msg, buf, len, needed)
}

/// Loads a checkpoint file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_load(path: *const c_char, out: *mut *mut RcModel) -> RcStatus {
    guard(|| {
        if out.is_null() {
            return fail(RcStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match c_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let loaded = Checkpoint::load(Path::new(path)).and_then(|ck| Ok((ck.model()?, ck.vocab)));
        match loaded {
            Ok((model, vocab)) => {
                *out = Box::into_raw(Box::new(RcModel { vocab, model }));
                RcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`rc_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_model_free(model: *mut RcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vocabulary size including reserved tokens; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_model_vocab_size(model: *const RcModel) -> usize {
    model.as_ref().map_or(0, |m| m.vocab.len())
}

/// Per-frame feature dimension; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_model_feature_dim(model: *const RcModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.cfg.feature_dim)
}

/// Captions a row-major `frames × dim` feature matrix with beam search and
/// writes the space-joined words as a NUL-terminated string.
///
/// # Safety
/// `features` must hold `frames * dim` floats; `buf` must be valid for
/// `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn rc_model_caption(
    model: *const RcModel,
    features: *const f32,
    frames: usize,
    dim: usize,
    beam: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> RcStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(RcStatus::NullPointer, "model is null");
        };
        if features.is_null() {
            return fail(RcStatus::NullPointer, "features is null");
        }
        if frames == 0 || beam == 0 || dim != m.model.cfg.feature_dim {
            return fail(
                RcStatus::InvalidArgument,
                format!(
                    "need frames >= 1, beam >= 1 and dim == {} (got {frames}, {beam}, {dim})",
                    m.model.cfg.feature_dim
                ),
            );
        }
        let Some(n) = frames.checked_mul(dim) else {
            return fail(RcStatus::InvalidArgument, "frames * dim overflows");
        };
        let data: Vec<f64> = std::slice::from_raw_parts(features, n).iter().map(|&x| x as f64).collect();
        let text = VideoFeatures::new("ffi", frames, dim, data)
            .and_then(|vf| sample_frames(&vf))
            .and_then(|v| m.model.beam(&v, beam))
            .map(|d| m.vocab.render(&d.tokens));
        match text {
            Ok(t) => write_c_string(&t, buf, len, needed),
            Err(e) => fail(RcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Scores `n` candidate captions against their references.
///
/// `references` holds the reference strings of every candidate back to back;
/// `ref_counts[i]` tells how many belong to candidate `i`. Text is cleaned
/// the same way as training captions. CIDEr uses document frequencies from
/// the supplied references.
///
/// # Safety
/// `candidates` and `ref_counts` must hold `n` entries and `references` the
/// sum of `ref_counts`; all strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_score_captions(
    candidates: *const *const c_char,
    references: *const *const c_char,
    ref_counts: *const usize,
    n: usize,
    out: *mut RcScores,
) -> RcStatus {
    guard(|| {
        if candidates.is_null() || references.is_null() || ref_counts.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument");
        }
        if n == 0 {
            return fail(RcStatus::InvalidArgument, "no candidates");
        }
        let tokens = |p: *const c_char, what: &str| -> Result<Vec<String>, RcStatus> {
            let s = c_str(p, what)?;
            // A caption that cleans to nothing scores as an empty sentence.
            Ok(preprocess_caption(s).unwrap_or_default())
        };
        let counts = std::slice::from_raw_parts(ref_counts, n);
        let mut cand_tok = Vec::with_capacity(n);
        let mut ref_tok = Vec::with_capacity(n);
        let mut next = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            match tokens(*candidates.add(i), "candidate") {
                Ok(t) => cand_tok.push(t),
                Err(s) => return s,
            }
            let mut set = Vec::with_capacity(c);
            for _ in 0..c {
                match tokens(*references.add(next), "reference") {
                    Ok(t) if !t.is_empty() => set.push(t),
                    Ok(_) => {}
                    Err(s) => return s,
                }
                next += 1;
            }
            ref_tok.push(set);
        }
        // Ids are arbitrary labels; every metric is invariant to relabeling.
        let all: Vec<Vec<String>> = cand_tok.iter().chain(ref_tok.iter().flatten()).cloned().collect();
        let vocab = match Vocabulary::build(&all, 1) {
            Ok(v) => v,
            Err(e) => return fail(RcStatus::InvalidArgument, e.to_string()),
        };
        let cands: Vec<Vec<u32>> = cand_tok.iter().map(|t| vocab.encode(t)).collect();
        let refs: Vec<Vec<Vec<u32>>> = ref_tok
            .iter()
            .map(|set| set.iter().map(|t| vocab.encode(t)).collect())
            .collect();
        match MetricReport::compute(&cands, &refs, CiderVariant::Plain) {
            Ok(r) => {
                *out = RcScores {
                    bleu4: r.bleu4,
                    rouge_l: r.rouge_l,
                    cider: r.cider,
                };
                RcStatus::Ok
            }
            Err(e) => fail(RcStatus::InvalidArgument, e.to_string()),
        }
    })
}
