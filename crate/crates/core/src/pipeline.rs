//! Per-frame registration (decode, RANSAC, plausibility check, fallback)
//! and the six-probe reprojection metric aggregated over a dataset.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::court::KeypointLayout;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::heatmap::{decode_keypoints, DecodedKeypoint, HeatmapTensor, DEFAULT_MIN_SUPPORT};
use crate::homography::{
    ransac_homography, Correspondence, DegeneracyCheck, Homography, RansacConfig,
};
use crate::io::{self, nonfinite, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    NoModel,
    Degenerate,
    TooFewKeypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub homography: Homography,
    pub inlier_count: usize,
    /// Decoded keypoints usable for homography fitting.
    pub decoded_count: usize,
    pub used_fallback: bool,
    pub fallback_reason: Option<FallbackReason>,
    /// Class ids of the RANSAC inliers; empty on fallback.
    #[serde(default)]
    pub inlier_class_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub ransac: RansacConfig,
    pub min_support: usize,
    pub degeneracy: DegeneracyCheck,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            ransac: RansacConfig::default(),
            min_support: DEFAULT_MIN_SUPPORT,
            degeneracy: DegeneracyCheck::default(),
        }
    }
}

fn fallback(h: &Homography, decoded: usize, reason: FallbackReason) -> RegistrationResult {
    RegistrationResult {
        homography: h.clone(),
        inlier_count: 0,
        decoded_count: decoded,
        used_fallback: true,
        fallback_reason: Some(reason),
        inlier_class_ids: Vec::new(),
    }
}

/// Registers one frame. Estimation failures resolve to the fallback
/// homography; only a class-count mismatch is an error.
pub fn estimate_frame(
    t: &HeatmapTensor,
    layout: &KeypointLayout,
    cfg: &EstimateConfig,
    fallback_h: &Homography,
) -> Result<RegistrationResult> {
    let decoded = decode_keypoints(t, layout, cfg.min_support)?;
    // Truncated blobs pull the centroid inward; use them only when the
    // interior keypoints alone cannot determine a homography.
    let usable = |k: &&DecodedKeypoint| {
        layout
            .entry(k.class_id)
            .is_some_and(|e| e.usable_for_homography && e.court_xy_cm.is_some())
    };
    let interior = decoded.iter().filter(usable).filter(|k| !k.touches_border).count();
    let keep_border = interior < 4;
    let n_usable = decoded.iter().filter(usable).count();
    // Baskets decode like any class but have no planar position.
    let corrs: Vec<Correspondence> = decoded
        .iter()
        .filter(|k| keep_border || !k.touches_border)
        .filter_map(|k| {
            let e = layout.entry(k.class_id)?;
            match (e.usable_for_homography, e.court_xy_cm) {
                (true, Some(xy)) => Some(Correspondence {
                    class_id: k.class_id,
                    court_xy_cm: xy,
                    image_xy_px: k.image_xy,
                }),
                _ => None,
            }
        })
        .collect();

    if corrs.len() < 4 {
        return Ok(fallback(
            fallback_h,
            n_usable,
            FallbackReason::TooFewKeypoints,
        ));
    }
    let outcome = match ransac_homography(&corrs, &cfg.ransac) {
        Ok(o) => o,
        Err(Error::NoModel) => {
            return Ok(fallback(fallback_h, n_usable, FallbackReason::NoModel))
        }
        Err(e) => return Err(e),
    };
    if cfg.degeneracy.is_degenerate(&outcome.homography) {
        return Ok(fallback(
            fallback_h,
            n_usable,
            FallbackReason::Degenerate,
        ));
    }
    let inlier_class_ids = corrs
        .iter()
        .zip(&outcome.inliers)
        .filter(|(_, &ok)| ok)
        .map(|(c, _)| c.class_id)
        .collect();
    Ok(RegistrationResult {
        homography: outcome.homography,
        inlier_count: outcome.inlier_count,
        decoded_count: n_usable,
        used_fallback: false,
        fallback_reason: None,
        inlier_class_ids,
    })
}

/// The six image probes: left, center and right on the middle row and on
/// the bottom row of the frame.
pub fn default_probes(frame_w: f64, frame_h: f64) -> Vec<[f64; 2]> {
    let xs = [0.0, frame_w / 2.0, frame_w];
    let ys = [frame_h / 2.0, frame_h];
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y]))
        .collect()
}

/// RMS court-space distance between the probes mapped through both
/// homographies' image-to-court maps, `+inf` if any probe maps to infinity.
pub fn frame_error_at(gt: &Homography, est: &Homography, probes: &[[f64; 2]]) -> f64 {
    let mut sum = 0.0;
    for &p in probes {
        match (gt.apply_inverse(p), est.apply_inverse(p)) {
            (Ok(a), Ok(b)) => sum += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2),
            _ => return f64::INFINITY,
        }
    }
    (sum / probes.len() as f64).sqrt()
}

pub fn frame_error(gt: &Homography, est: &Homography, frame_w: usize, frame_h: usize) -> f64 {
    frame_error_at(gt, est, &default_probes(frame_w as f64, frame_h as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    #[serde(with = "nonfinite")]
    pub error_cm: f64,
    pub used_fallback: bool,
    pub fallback_reason: Option<FallbackReason>,
    pub inlier_count: usize,
    pub decoded_count: usize,
    /// Set when the frame's files could not be loaded; such frames are
    /// excluded from the statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Errors of the evaluated frames, in manifest order.
    #[serde(with = "nonfinite::vec")]
    pub per_frame_error_cm: Vec<f64>,
    /// Mean of the per-frame errors.
    #[serde(with = "nonfinite")]
    pub mean_error_cm: f64,
    /// Root of the mean squared error over all probes of all frames.
    #[serde(with = "nonfinite")]
    pub global_rms_cm: f64,
    pub pct_below_100cm: f64,
    pub fallback_count: usize,
    pub failure_count: usize,
    pub frames: Vec<FrameRecord>,
}

impl EvaluationReport {
    pub fn from_records(frames: Vec<FrameRecord>) -> Self {
        let errors: Vec<f64> = frames
            .iter()
            .filter(|f| f.failure.is_none())
            .map(|f| f.error_cm)
            .collect();
        let n = errors.len() as f64;
        let (mean, rms, pct) = if errors.is_empty() {
            (f64::NAN, f64::NAN, 0.0)
        } else {
            (
                errors.iter().sum::<f64>() / n,
                (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
                100.0 * errors.iter().filter(|&&e| e < 100.0).count() as f64 / n,
            )
        };
        EvaluationReport {
            per_frame_error_cm: errors,
            mean_error_cm: mean,
            global_rms_cm: rms,
            pct_below_100cm: pct,
            fallback_count: frames
                .iter()
                .filter(|f| f.failure.is_none() && f.used_fallback)
                .count(),
            failure_count: frames.iter().filter(|f| f.failure.is_some()).count(),
            frames,
        }
    }
}

/// Registers one frame against its ground truth.
pub fn evaluate_frame(
    id: &str,
    t: &HeatmapTensor,
    gt: &Homography,
    layout: &KeypointLayout,
    cfg: &EstimateConfig,
    fallback_h: &Homography,
    frame_size: [usize; 2],
) -> Result<FrameRecord> {
    let r = estimate_frame(t, layout, cfg, fallback_h)?;
    Ok(FrameRecord {
        id: id.to_string(),
        error_cm: frame_error(gt, &r.homography, frame_size[0], frame_size[1]),
        used_fallback: r.used_fallback,
        fallback_reason: r.fallback_reason,
        inlier_count: r.inlier_count,
        decoded_count: r.decoded_count,
        failure: None,
    })
}

fn stride_for(frame_size: [usize; 2], t_width: usize, t_height: usize) -> Result<usize> {
    let stride = frame_size[0] / t_width.max(1);
    if stride == 0 || stride * t_width != frame_size[0] || frame_size[1] / stride != t_height {
        return Err(Error::ShapeMismatch(format!(
            "heatmap {t_width}x{t_height} does not tile a {}x{} frame",
            frame_size[0], frame_size[1]
        )));
    }
    Ok(stride)
}

fn load_and_evaluate(
    index: usize,
    base: &Path,
    manifest: &Manifest,
    layout: &KeypointLayout,
    cfg: &EstimateConfig,
    fallback_h: &Homography,
) -> FrameRecord {
    let frame = &manifest.frames[index];
    let run = || -> Result<FrameRecord> {
        let gt: Homography = io::read_json(&Manifest::resolve(base, &frame.gt_homography))?;
        let mut t = io::read_heatmaps(
            &Manifest::resolve(base, &frame.heatmaps),
            layout.num_classes(),
            1,
        )?;
        t.stride = stride_for(manifest.frame_size, t.width(), t.height())?;
        let mut frame_cfg = *cfg;
        frame_cfg.ransac.seed = derive_seed(cfg.ransac.seed, index as u64);
        evaluate_frame(
            &frame.id,
            &t,
            &gt,
            layout,
            &frame_cfg,
            fallback_h,
            manifest.frame_size,
        )
    };
    run().unwrap_or_else(|e| FrameRecord {
        id: frame.id.clone(),
        error_cm: f64::INFINITY,
        used_fallback: false,
        fallback_reason: None,
        inlier_count: 0,
        decoded_count: 0,
        failure: Some(e.to_string()),
    })
}

/// Evaluates every manifest frame. Frame `i` uses the RANSAC seed derived
/// from `(cfg.ransac.seed, i)`, so the report does not depend on `jobs`.
pub fn evaluate_dataset(
    manifest: &Manifest,
    base_dir: &Path,
    layout: &KeypointLayout,
    cfg: &EstimateConfig,
    fallback_h: &Homography,
    jobs: usize,
) -> Result<EvaluationReport> {
    if manifest.frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.ransac.validate()?;
    let run = || {
        (0..manifest.frames.len())
            .into_par_iter()
            .map(|i| load_and_evaluate(i, base_dir, manifest, layout, cfg, fallback_h))
            .collect::<Vec<_>>()
    };
    let records = if jobs == 1 {
        (0..manifest.frames.len())
            .map(|i| load_and_evaluate(i, base_dir, manifest, layout, cfg, fallback_h))
            .collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run)
    };
    Ok(EvaluationReport::from_records(records))
}

/// Reads a manifest and evaluates it, resolving paths against the
/// manifest's directory.
pub fn evaluate_manifest_file(
    manifest_path: &Path,
    layout: &KeypointLayout,
    cfg: &EstimateConfig,
    fallback_h: &Homography,
    jobs: usize,
) -> Result<EvaluationReport> {
    let manifest: Manifest = io::read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    evaluate_dataset(&manifest, base, layout, cfg, fallback_h, jobs)
}
