//! Basketball court registration from keypoint heatmaps.
//!
//! The pipeline decodes per-class heatmaps into keypoint image positions,
//! fits a court-to-image homography with seeded RANSAC over normalized DLT,
//! rejects implausible estimates in favour of a fallback, and scores the
//! result by reprojecting six image probes onto the court.
//!
//! - [`court`]: court frame, perspective-aware keypoint grid, flip permutation
//! - [`heatmap`]: ground-truth rendering, center-of-mass decoding, weighted loss
//! - [`homography`]: DLT, RANSAC, degeneracy check, average homography
//! - [`pipeline`]: per-frame estimation and dataset evaluation
//! - [`synth`]: synthetic views and corruptions for end-to-end checks
//! - [`io`]: tensor container and JSON documents
//! - [`overlay`]: court line rendering for visual inspection

pub mod court;
pub mod error;
pub mod heatmap;
pub mod homography;
pub mod io;
pub mod overlay;
pub mod pipeline;
pub mod synth;

pub use court::{
    build_layout, flip_permutation, perspective_offsets, CameraSide, ClassRole, CourtLine,
    CourtTemplate, KeypointEntry, KeypointLayout, SamplingSpec,
};
pub use error::{Error, FormatError, Result};
pub use heatmap::{
    decode_keypoints, render_gt_class_map, weighted_ce_loss, ClassMap, DecodedKeypoint,
    HeatmapTensor,
};
pub use homography::{
    average_homography, dlt_homography, is_degenerate, ransac_homography, Correspondence,
    DegeneracyCheck, Homography, RansacConfig,
};
pub use pipeline::{
    estimate_frame, evaluate_dataset, frame_error, EstimateConfig, EvaluationReport,
    FallbackReason, RegistrationResult,
};

/// Seed for item `index` of a run seeded with `master`, via two rounds of
/// splitmix64 finalization.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}
