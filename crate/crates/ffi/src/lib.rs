//! C ABI over the dynavis pipeline.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free`. Every fallible call returns a [`DvStatus`]; the message
//! of the most recent failure on the calling thread is available from
//! [`dv_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use dynavis::config::RunConfig;
use dynavis::dynamic::TrackReport;
use dynavis::eval::{evaluate, EvalReport};
use dynavis::image::Image;
use dynavis::io::{ClassRegistry, Frame, PanopticMask, Trajectory};
use dynavis::pipeline::{FrameOutput, Pipeline};
use dynavis::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Format = 6,
    NotEnoughData = 7,
    NoAssociations = 8,
    /// Index past the end, or nothing processed yet.
    OutOfRange = 9,
    /// Output buffer too small; the required size was reported.
    BufferTooSmall = 10,
    Internal = 11,
    Panic = 12,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> DvStatus {
    match e {
        Error::Io { .. } | Error::Image { .. } => DvStatus::Io,
        Error::Parse { .. } => DvStatus::Parse,
        Error::Format(_) | Error::UnknownClass { .. } => DvStatus::Format,
        Error::Config(_) => DvStatus::Config,
        Error::NoAssociations => DvStatus::NoAssociations,
        Error::NotEnoughData(_) => DvStatus::NotEnoughData,
        _ => DvStatus::Internal,
    }
}

fn fail(status: DvStatus, msg: impl Into<String>) -> DvStatus {
    set_error(msg);
    status
}

fn from_err(e: Error) -> DvStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, turning panics into [`DvStatus::Panic`].
fn guard(f: impl FnOnce() -> DvStatus) -> DvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DvStatus::Panic, msg)
        }
    }
}

/// Borrowed C string; null means absent.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, DvStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(DvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, DvStatus> {
    opt_str(p, what)?.ok_or_else(|| fail(DvStatus::NullPointer, format!("{what} is null")))
}

/// Copies `text` plus a terminating NUL into `buf`. `needed` (optional)
/// receives the full size including the NUL, so callers can size a retry.
unsafe fn copy_out(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> DvStatus {
    let n = text.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || cap < n {
        return fail(DvStatus::BufferTooSmall, format!("need {n} bytes, have {cap}"));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
    *buf.add(text.len()) = 0;
    DvStatus::Ok
}

/// Opaque pipeline handle.
pub struct DvPipeline {
    inner: Pipeline,
    registry: Arc<ClassRegistry>,
    trajectory: Trajectory,
    last: Option<FrameOutput>,
    next_index: usize,
    last_timestamp: f64,
}

/// Summary of one processed frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DvFrameResult {
    /// Camera to world translation.
    pub t: [f64; 3],
    /// Camera to world rotation, `qx qy qz qw`.
    pub q: [f64; 4],
    pub lost: bool,
    pub keyframe: bool,
    pub inliers: u32,
    pub tracks: u32,
    pub feedback: u32,
}

/// One object track as seen in the latest frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DvTrack {
    pub track_id: u64,
    pub class_id: u32,
    /// Panoptic code `class * 1000 + instance`.
    pub code: u32,
    pub matched: bool,
    pub dynamic: bool,
    /// Smoothed speed, m/s.
    pub speed: f64,
    pub depth: f64,
    pub bearing_deg: f64,
    pub n_points: u32,
    /// World-frame centroid.
    pub centroid: [f64; 3],
}

impl From<&TrackReport> for DvTrack {
    fn from(r: &TrackReport) -> Self {
        let c = r.centroid_world;
        Self {
            track_id: r.track_id,
            class_id: r.class_id,
            code: r.code,
            matched: r.matched,
            dynamic: r.dynamic,
            speed: r.speed,
            depth: r.depth,
            bearing_deg: r.bearing_deg,
            n_points: r.n_points as u32,
            centroid: [c.x, c.y, c.z],
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DvEval {
    pub ate_rmse: f64,
    pub rpe_t_rmse: f64,
    pub rpe_r_rmse_deg: f64,
    pub matched: u64,
}

impl From<EvalReport> for DvEval {
    fn from(r: EvalReport) -> Self {
        Self {
            ate_rmse: r.ate_rmse,
            rpe_t_rmse: r.rpe_t_rmse,
            rpe_r_rmse_deg: r.rpe_r_rmse_deg,
            matched: r.n_matched as u64,
        }
    }
}

/// Message of the latest failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a pipeline.
///
/// `config` is `key=value` text as accepted by the CLI's `--config`;
/// `classes` is the `class_id name prior_flag` table that interprets label
/// images. Either may be null for defaults / no classes.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_new(config: *const c_char, classes: *const c_char, out: *mut *mut DvPipeline) -> DvStatus {
    guard(|| {
        if out.is_null() {
            return fail(DvStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let (cfg_text, cls_text) = match (opt_str(config, "config"), opt_str(classes, "classes")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let cfg = match cfg_text.map(|t| RunConfig::parse(t, Path::new("<config>"))).transpose() {
            Ok(c) => c.unwrap_or_default(),
            Err(e) => return from_err(e),
        };
        let registry = match cls_text.map(|t| ClassRegistry::parse(t, Path::new("<classes>"))).transpose() {
            Ok(r) => Arc::new(r.unwrap_or_default()),
            Err(e) => return from_err(e),
        };
        match Pipeline::new(cfg) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DvPipeline {
                    inner,
                    registry,
                    trajectory: Trajectory::new(),
                    last: None,
                    next_index: 0,
                    last_timestamp: f64::NEG_INFINITY,
                }));
                DvStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Releases a pipeline. Null is ignored.
///
/// # Safety
/// `p` must come from [`dv_pipeline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_free(p: *mut DvPipeline) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Processes one frame.
///
/// Buffers are row-major, `width * height` pixels, and must match the
/// configured camera size: `rgb` is 3 bytes per pixel, `depth` raw sensor
/// units (meters times the depth scale, 0 = invalid), `labels` panoptic codes
/// or null for "no instances". Timestamps must increase.
///
/// # Safety
/// `p` must be a live handle, buffers must hold `width * height` elements,
/// `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_push(
    p: *mut DvPipeline,
    timestamp: f64,
    rgb: *const u8,
    depth: *const u16,
    labels: *const u32,
    width: usize,
    height: usize,
    out: *mut DvFrameResult,
) -> DvStatus {
    guard(|| {
        let Some(h) = p.as_mut() else {
            return fail(DvStatus::NullPointer, "pipeline is null");
        };
        if rgb.is_null() || depth.is_null() {
            return fail(DvStatus::NullPointer, "rgb and depth are required");
        }
        if !timestamp.is_finite() || timestamp <= h.last_timestamp {
            return fail(DvStatus::InvalidArgument, format!("timestamp {timestamp} does not increase"));
        }
        let n = match width.checked_mul(height) {
            Some(n) if n > 0 => n,
            _ => return fail(DvStatus::InvalidArgument, format!("bad size {width}x{height}")),
        };
        let rgb = std::slice::from_raw_parts(rgb, n * 3);
        let rgb_img = Image::from_vec(width, height, rgb.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect());
        let depth_img = Image::from_vec(width, height, std::slice::from_raw_parts(depth, n).to_vec());
        let mask = if labels.is_null() {
            PanopticMask::empty(width, height, h.registry.clone())
        } else {
            let l = Image::from_vec(width, height, std::slice::from_raw_parts(labels, n).to_vec());
            match PanopticMask::new(l, h.registry.clone()) {
                Ok(m) => m,
                Err(e) => return from_err(e),
            }
        };
        let frame = match Frame::new(h.next_index, timestamp, rgb_img, depth_img, mask) {
            Ok(f) => f,
            Err(e) => return from_err(e),
        };
        let res = match h.inner.step(&frame) {
            Ok(r) => r,
            Err(e) => return from_err(e),
        };
        h.next_index += 1;
        h.last_timestamp = timestamp;
        let cw = res.ego.pose.inverse();
        h.trajectory.push(timestamp, cw);
        if !out.is_null() {
            let (t, q) = cw.to_quaternion();
            *out = DvFrameResult {
                t,
                q,
                lost: res.ego.lost,
                keyframe: res.ego.keyframe,
                inliers: res.ego.inlier_matches.len() as u32,
                tracks: res.tracks.len() as u32,
                feedback: res.feedback.len() as u32,
            };
        }
        h.last = Some(res);
        DvStatus::Ok
    })
}

/// Object track `i` of the latest frame.
///
/// # Safety
/// `p` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_track(p: *const DvPipeline, i: usize, out: *mut DvTrack) -> DvStatus {
    guard(|| {
        let (Some(h), false) = (p.as_ref(), out.is_null()) else {
            return fail(DvStatus::NullPointer, "null argument");
        };
        match h.last.as_ref().and_then(|l| l.tracks.get(i)) {
            Some(r) => {
                *out = r.into();
                DvStatus::Ok
            }
            None => fail(DvStatus::OutOfRange, format!("no track {i}")),
        }
    })
}

/// Feedback sentence `i` of the latest frame, nearest first.
///
/// # Safety
/// `p` must be a live handle; `buf` holds `cap` bytes; `needed` and `risk`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_feedback(
    p: *const DvPipeline,
    i: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
    risk: *mut bool,
) -> DvStatus {
    guard(|| {
        let Some(h) = p.as_ref() else {
            return fail(DvStatus::NullPointer, "pipeline is null");
        };
        let Some(m) = h.last.as_ref().and_then(|l| l.feedback.get(i)) else {
            return fail(DvStatus::OutOfRange, format!("no feedback message {i}"));
        };
        if !risk.is_null() {
            *risk = m.risk;
        }
        copy_out(&m.text, buf, cap, needed)
    })
}

/// The whole camera trajectory so far as TUM text.
///
/// # Safety
/// As [`dv_pipeline_feedback`].
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_trajectory(p: *const DvPipeline, buf: *mut c_char, cap: usize, needed: *mut usize) -> DvStatus {
    guard(|| match p.as_ref() {
        Some(h) => copy_out(&h.trajectory.to_text(), buf, cap, needed),
        None => fail(DvStatus::NullPointer, "pipeline is null"),
    })
}

/// Frames processed and frames lost so far.
///
/// # Safety
/// `p` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn dv_pipeline_counts(p: *const DvPipeline, frames: *mut usize, lost: *mut usize) -> DvStatus {
    guard(|| {
        let Some(h) = p.as_ref() else {
            return fail(DvStatus::NullPointer, "pipeline is null");
        };
        if !frames.is_null() {
            *frames = h.inner.frames();
        }
        if !lost.is_null() {
            *lost = h.inner.lost_frames();
        }
        DvStatus::Ok
    })
}

fn eval_into(est: &Trajectory, gt: &Trajectory, tolerance: f64, out: *mut DvEval) -> DvStatus {
    match evaluate(est, gt, tolerance) {
        Ok(r) => {
            unsafe { *out = r.into() };
            DvStatus::Ok
        }
        Err(e) => from_err(e),
    }
}

/// Compares two TUM trajectory texts.
///
/// # Safety
/// Strings must be valid NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_eval_text(est: *const c_char, gt: *const c_char, tolerance: f64, out: *mut DvEval) -> DvStatus {
    guard(|| {
        if out.is_null() {
            return fail(DvStatus::NullPointer, "out is null");
        }
        let (est, gt) = match (req_str(est, "est"), req_str(gt, "gt")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let parsed = Trajectory::parse(est, Path::new("<est>")).and_then(|e| Ok((e, Trajectory::parse(gt, Path::new("<gt>"))?)));
        match parsed {
            Ok((e, g)) => eval_into(&e, &g, tolerance, out),
            Err(e) => from_err(e),
        }
    })
}

/// Compares two TUM trajectory files.
///
/// # Safety
/// As [`dv_eval_text`].
#[no_mangle]
pub unsafe extern "C" fn dv_eval_files(est_path: *const c_char, gt_path: *const c_char, tolerance: f64, out: *mut DvEval) -> DvStatus {
    guard(|| {
        if out.is_null() {
            return fail(DvStatus::NullPointer, "out is null");
        }
        let (est, gt) = match (req_str(est_path, "est_path"), req_str(gt_path, "gt_path")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let read = dynavis::io::read_trajectory(Path::new(est)).and_then(|e| Ok((e, dynavis::io::read_trajectory(Path::new(gt))?)));
        match read {
            Ok((e, g)) => eval_into(&e, &g, tolerance, out),
            Err(e) => from_err(e),
        }
    })
}
