//! C ABI for `courtreg`.
//!
//! Objects cross the boundary as opaque handles that are released with the
//! matching `cr_*_free`. Fallible functions return a [`CrStatus`]; on
//! failure a message is available from [`cr_last_error_message`] until the
//! next call on the same thread. Panics are caught and reported as
//! `CR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use courtreg::heatmap::{HeatmapTensor, DEFAULT_MIN_SUPPORT};
use courtreg::pipeline::{frame_error, EstimateConfig, FallbackReason};
use courtreg::{
    estimate_frame, is_degenerate, perspective_offsets, Error, Homography, KeypointLayout,
    RansacConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Degenerate = 5,
    NoModel = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrFallbackReason {
    None = 0,
    NoModel = 1,
    Degenerate = 2,
    TooFewKeypoints = 3,
}

/// Keypoint layout handle.
pub struct CrLayout(KeypointLayout);

/// Court-to-image homography handle.
pub struct CrHomography(Homography);

/// Heatmap tensor handle.
pub struct CrHeatmap(HeatmapTensor);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrEstimateConfig {
    pub reproj_threshold_px: f64,
    pub max_iterations: usize,
    pub min_inliers: usize,
    pub min_support: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrRegistration {
    pub inlier_count: usize,
    pub decoded_count: usize,
    pub used_fallback: bool,
    pub fallback_reason: CrFallbackReason,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Failure = (CrStatus, String);

fn from_core(e: Error) -> Failure {
    let status = match &e {
        Error::Io { .. } => CrStatus::Io,
        Error::Format(_) | Error::Json { .. } | Error::Image { .. } => CrStatus::Format,
        Error::DegenerateInput | Error::SingularHomography | Error::PointAtInfinity => {
            CrStatus::Degenerate
        }
        Error::NoModel => CrStatus::NoModel,
        _ => CrStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn null(name: &str) -> Failure {
    (CrStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CrStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CrStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next `cr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- layout ----

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cr_layout_default(out: *mut *mut CrLayout) -> CrStatus {
    guard(|| put(out, CrLayout(KeypointLayout::default())))
}

/// Parses a layout JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_layout_from_json(json: *const c_char, out: *mut *mut CrLayout) -> CrStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let layout: KeypointLayout = serde_json::from_str(text)
            .map_err(|e| (CrStatus::Format, format!("layout JSON: {e}")))?;
        put(out, CrLayout(layout))
    })
}

/// Number of classes including baskets and background; 0 for NULL.
///
/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cr_layout_num_classes(layout: *const CrLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.num_classes())
}

/// # Safety
/// `layout` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_layout_free(layout: *mut CrLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

// ---- sampling ----

/// Writes the `rows` cumulative row offsets (cm) into `out`.
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_perspective_offsets(
    width_cm: f64,
    rows: usize,
    w0_cm: f64,
    out: *mut f64,
    out_len: usize,
) -> CrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let off = perspective_offsets(width_cm, rows, w0_cm).map_err(from_core)?;
        if out_len < off.len() {
            return Err((
                CrStatus::BufferTooSmall,
                format!("need {} values, buffer holds {out_len}", off.len()),
            ));
        }
        ptr::copy_nonoverlapping(off.as_ptr(), out, off.len());
        Ok(())
    })
}

// ---- homography ----

/// Builds a court(cm) -> image(px) homography from 9 row-major values.
///
/// # Safety
/// `m` must point to 9 readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_from_array(m: *const f64, out: *mut *mut CrHomography) -> CrStatus {
    guard(|| {
        if m.is_null() {
            return Err(null("m"));
        }
        let v = std::slice::from_raw_parts(m, 9);
        let rows = [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
        let h = Homography::from_rows(rows).map_err(from_core)?;
        put(out, CrHomography(h))
    })
}

/// Writes the normalized matrix as 9 row-major values.
///
/// # Safety
/// `h` must be a live handle; `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_to_array(h: *const CrHomography, out: *mut f64) -> CrStatus {
    guard(|| {
        let h = deref(h, "h")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let flat: Vec<f64> = h.0.rows().iter().flatten().copied().collect();
        ptr::copy_nonoverlapping(flat.as_ptr(), out, 9);
        Ok(())
    })
}

/// Maps a court point (cm) to the image (px).
///
/// # Safety
/// `h` must be a live handle; `out_xy` must point to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_apply(h: *const CrHomography, x: f64, y: f64, out_xy: *mut f64) -> CrStatus {
    guard(|| {
        let h = deref(h, "h")?;
        if out_xy.is_null() {
            return Err(null("out_xy"));
        }
        let p = h.0.apply([x, y]).map_err(from_core)?;
        ptr::copy_nonoverlapping(p.as_ptr(), out_xy, 2);
        Ok(())
    })
}

/// Maps an image point (px) to the court (cm).
///
/// # Safety
/// `h` must be a live handle; `out_xy` must point to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_apply_inverse(
    h: *const CrHomography,
    x: f64,
    y: f64,
    out_xy: *mut f64,
) -> CrStatus {
    guard(|| {
        let h = deref(h, "h")?;
        if out_xy.is_null() {
            return Err(null("out_xy"));
        }
        let p = h.0.apply_inverse([x, y]).map_err(from_core)?;
        ptr::copy_nonoverlapping(p.as_ptr(), out_xy, 2);
        Ok(())
    })
}

/// Default degeneracy check on a 960x540 frame.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_is_degenerate(h: *const CrHomography, out: *mut bool) -> CrStatus {
    guard(|| {
        let h = deref(h, "h")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = is_degenerate(&h.0);
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_homography_free(h: *mut CrHomography) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---- heatmaps ----

/// Copies a channel-major `classes x height x width` score buffer.
///
/// # Safety
/// `scores` must point to `classes * height * width` readable floats;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_heatmap_from_buffer(
    scores: *const f32,
    classes: usize,
    height: usize,
    width: usize,
    stride: usize,
    out: *mut *mut CrHeatmap,
) -> CrStatus {
    guard(|| {
        if scores.is_null() {
            return Err(null("scores"));
        }
        let n = classes
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| (CrStatus::InvalidArgument, "tensor size overflows".to_string()))?;
        let data = std::slice::from_raw_parts(scores, n).to_vec();
        let t = HeatmapTensor::new(classes, height, width, stride, data).map_err(from_core)?;
        put(out, CrHeatmap(t))
    })
}

/// Reads a tensor file; label maps are expanded to one-hot scores over
/// `classes` channels.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_heatmap_read_file(
    path: *const c_char,
    classes: usize,
    stride: usize,
    out: *mut *mut CrHeatmap,
) -> CrStatus {
    guard(|| {
        let p = c_str(path, "path")?;
        let t = courtreg::io::read_heatmaps(Path::new(p), classes, stride).map_err(from_core)?;
        put(out, CrHeatmap(t))
    })
}

/// # Safety
/// `t` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_heatmap_free(t: *mut CrHeatmap) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// ---- estimation ----

#[no_mangle]
pub extern "C" fn cr_estimate_config_default() -> CrEstimateConfig {
    let r = RansacConfig::default();
    CrEstimateConfig {
        reproj_threshold_px: r.reproj_threshold_px,
        max_iterations: r.max_iterations,
        min_inliers: r.min_inliers,
        min_support: DEFAULT_MIN_SUPPORT,
        seed: r.seed,
    }
}

/// Registers one frame. `cfg` may be NULL for defaults. On success
/// `*out_h` receives a new homography handle (the fallback's copy when
/// estimation fell back) and `*out` the summary.
///
/// # Safety
/// Handles must be live; `out` and `out_h` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_frame(
    heatmap: *const CrHeatmap,
    layout: *const CrLayout,
    cfg: *const CrEstimateConfig,
    fallback: *const CrHomography,
    out: *mut CrRegistration,
    out_h: *mut *mut CrHomography,
) -> CrStatus {
    guard(|| {
        let t = deref(heatmap, "heatmap")?;
        let layout = deref(layout, "layout")?;
        let fallback = deref(fallback, "fallback")?;
        if out.is_null() || out_h.is_null() {
            return Err(null("out"));
        }
        let c = cfg.as_ref().copied().unwrap_or_else(|| cr_estimate_config_default());
        let config = EstimateConfig {
            ransac: RansacConfig {
                reproj_threshold_px: c.reproj_threshold_px,
                max_iterations: c.max_iterations,
                min_inliers: c.min_inliers,
                seed: c.seed,
                ..RansacConfig::default()
            },
            min_support: c.min_support,
            ..EstimateConfig::default()
        };
        config.ransac.validate().map_err(from_core)?;
        let r = estimate_frame(&t.0, &layout.0, &config, &fallback.0).map_err(from_core)?;
        *out = CrRegistration {
            inlier_count: r.inlier_count,
            decoded_count: r.decoded_count,
            used_fallback: r.used_fallback,
            fallback_reason: match r.fallback_reason {
                None => CrFallbackReason::None,
                Some(FallbackReason::NoModel) => CrFallbackReason::NoModel,
                Some(FallbackReason::Degenerate) => CrFallbackReason::Degenerate,
                Some(FallbackReason::TooFewKeypoints) => CrFallbackReason::TooFewKeypoints,
            },
        };
        put(out_h, CrHomography(r.homography))
    })
}

/// RMS court distance (cm) between the two homographies over the six frame
/// probes; `+inf` when a probe maps to infinity.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_frame_error(
    gt: *const CrHomography,
    est: *const CrHomography,
    frame_w: usize,
    frame_h: usize,
    out: *mut f64,
) -> CrStatus {
    guard(|| {
        let gt = deref(gt, "gt")?;
        let est = deref(est, "est")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = frame_error(&gt.0, &est.0, frame_w, frame_h);
        Ok(())
    })
}
