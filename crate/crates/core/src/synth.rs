//! Synthetic ground truth: broadcast-like side views of the court, rendered
//! class maps, controlled corruptions, and on-disk datasets that the
//! evaluator consumes.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::court::{ClassRole, KeypointLayout};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::heatmap::{
    heatmap_size, projected_centers, render_gt_class_map, ClassMap, HeatmapTensor,
    DEFAULT_DISK_RADIUS_PX, DEFAULT_STRIDE,
};
use crate::homography::{average_homography, DegeneracyCheck, Homography};
use crate::io::{self, Manifest, ManifestFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewSamplerConfig {
    pub focal_px: [f64; 2],
    pub camera_height_cm: [f64; 2],
    /// Distance behind the camera-side sideline.
    pub camera_distance_cm: [f64; 2],
    /// Offset along the court length from the court center.
    pub lateral_offset_cm: [f64; 2],
    pub look_at_x_cm: [f64; 2],
    pub look_at_y_cm: [f64; 2],
    pub min_visible_keypoints: usize,
    pub frame_size: [usize; 2],
    pub max_attempts: usize,
}

impl Default for ViewSamplerConfig {
    fn default() -> Self {
        ViewSamplerConfig {
            focal_px: [900.0, 1600.0],
            camera_height_cm: [400.0, 900.0],
            camera_distance_cm: [800.0, 2500.0],
            lateral_offset_cm: [-800.0, 800.0],
            look_at_x_cm: [1000.0, 1800.0],
            look_at_y_cm: [350.0, 1150.0],
            min_visible_keypoints: 20,
            frame_size: [960, 540],
            max_attempts: 100,
        }
    }
}

impl ViewSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("focal_px", self.focal_px),
            ("camera_height_cm", self.camera_height_cm),
            ("camera_distance_cm", self.camera_distance_cm),
            ("lateral_offset_cm", self.lateral_offset_cm),
            ("look_at_x_cm", self.look_at_x_cm),
            ("look_at_y_cm", self.look_at_y_cm),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if !(self.focal_px[0] > 0.0) || !(self.camera_height_cm[0] > 0.0) {
            return Err(Error::InvalidConfig(
                "focal length and camera height must be positive".into(),
            ));
        }
        if self.min_visible_keypoints < 4 {
            return Err(Error::InvalidConfig("min_visible_keypoints must be >= 4".into()));
        }
        if self.frame_size[0] == 0 || self.frame_size[1] == 0 || self.max_attempts == 0 {
            return Err(Error::InvalidConfig(
                "frame size and attempt budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Pinhole camera at `center` looking at `target` with zero roll,
/// restricted to the `z = 0` plane.
pub fn look_at_homography(
    focal_px: f64,
    principal: [f64; 2],
    center: [f64; 3],
    target: [f64; 3],
) -> Result<Homography> {
    let c = Vector3::from(center);
    let forward = (Vector3::from(target) - c).normalize();
    let right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        return Err(Error::InvalidConfig("camera looks straight down".into()));
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let t = -(r * c);
    let k = Matrix3::new(
        focal_px,
        0.0,
        principal[0],
        0.0,
        focal_px,
        principal[1],
        0.0,
        0.0,
        1.0,
    );
    let plane = Matrix3::from_columns(&[r.column(0).into(), r.column(1).into(), t]);
    Homography::new(k * plane)
}

/// Signed area of the court's image outline, positive for a non-mirrored
/// view (image y points down).
pub fn view_orientation(h: &Homography, layout: &KeypointLayout) -> f64 {
    let (l, w) = (layout.template.length_cm, layout.template.width_cm);
    let corners = [[0.0, 0.0], [l, 0.0], [l, w], [0.0, w]];
    let Ok(img) = corners
        .iter()
        .map(|&c| h.apply(c))
        .collect::<Result<Vec<_>>>()
    else {
        return f64::NAN;
    };
    let mut area = 0.0;
    for i in 0..4 {
        let (a, b) = (img[i], img[(i + 1) % 4]);
        area += a[0] * b[1] - b[0] * a[1];
    }
    -area / 2.0
}

pub fn visible_keypoints(h: &Homography, layout: &KeypointLayout, frame_size: [usize; 2]) -> usize {
    let (fw, fh) = (frame_size[0] as f64, frame_size[1] as f64);
    projected_centers(layout, h)
        .iter()
        .filter(|(_, p)| p[0] >= 0.0 && p[0] < fw && p[1] >= 0.0 && p[1] < fh)
        .count()
}

/// Acceptance test for a sampled view.
pub fn is_plausible_view(h: &Homography, layout: &KeypointLayout, cfg: &ViewSamplerConfig) -> bool {
    let (l, w) = (layout.template.length_cm, layout.template.width_cm);
    let (fw, fh) = (cfg.frame_size[0] as f64, cfg.frame_size[1] as f64);
    let corners = [[0.0, 0.0], [l, 0.0], [l, w], [0.0, w]];
    for c in corners {
        // whole court in front of the camera
        if !(h.projective_depth(c) > 0.0) {
            return false;
        }
        let Ok(p) = h.apply(c) else { return false };
        if (p[0] - fw / 2.0).abs() > 2.0 * fw || (p[1] - fh / 2.0).abs() > 2.0 * fh {
            return false;
        }
    }
    if !(view_orientation(h, layout) > 0.0) {
        return false;
    }
    if visible_keypoints(h, layout, cfg.frame_size) < cfg.min_visible_keypoints {
        return false;
    }
    let probes = DegeneracyCheck {
        probe_a: [fw / 4.0, fh / 2.0],
        probe_b: [3.0 * fw / 4.0, fh / 2.0],
        ..DegeneracyCheck::default()
    };
    !probes.is_degenerate(h)
}

/// Samples a court-to-image homography for a camera above and behind the
/// camera-side sideline, resampling until the view is plausible.
pub fn sample_view_homography(
    cfg: &ViewSamplerConfig,
    layout: &KeypointLayout,
    rng: &mut impl Rng,
) -> Result<Homography> {
    cfg.validate()?;
    let (l, w) = (layout.template.length_cm, layout.template.width_cm);
    for _ in 0..cfg.max_attempts {
        let focal = uniform(rng, cfg.focal_px);
        let height = uniform(rng, cfg.camera_height_cm);
        let distance = uniform(rng, cfg.camera_distance_cm);
        let lateral = uniform(rng, cfg.lateral_offset_cm);
        let tx = uniform(rng, cfg.look_at_x_cm);
        let ty = uniform(rng, cfg.look_at_y_cm);
        let camera_y = match layout.spec.camera_side {
            crate::court::CameraSide::YZero => -distance,
            crate::court::CameraSide::YMax => w + distance,
        };
        let center = [l / 2.0 + lateral, camera_y, height];
        let principal = [
            cfg.frame_size[0] as f64 / 2.0,
            cfg.frame_size[1] as f64 / 2.0,
        ];
        let Ok(h) = look_at_homography(focal, principal, center, [tx, ty, 0.0]) else {
            continue;
        };
        if is_plausible_view(&h, layout, cfg) {
            return Ok(h);
        }
    }
    Err(Error::RejectionBudgetExhausted(cfg.max_attempts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    /// Probability that a keypoint's disk is erased.
    pub dropout_rate: f64,
    /// Standard deviation of the disk displacement, heatmap pixels.
    pub jitter_sigma_px: f64,
    pub false_blob_count: usize,
    pub blob_radius_px: usize,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            dropout_rate: 0.0,
            jitter_sigma_px: 0.0,
            false_blob_count: 0,
            blob_radius_px: DEFAULT_DISK_RADIUS_PX,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {} outside [0, 1]",
                self.dropout_rate
            )));
        }
        if !(self.jitter_sigma_px >= 0.0) || !self.jitter_sigma_px.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "jitter sigma {} must be finite and non-negative",
                self.jitter_sigma_px
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.dropout_rate == 0.0 && self.jitter_sigma_px == 0.0 && self.false_blob_count == 0
    }
}

/// What changed under a corruption pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorruptionLog {
    pub dropped: Vec<usize>,
    pub shifts: Vec<(usize, [i64; 2])>,
    pub blobs: Vec<(usize, [f64; 2])>,
}

/// Drops, shifts and adds keypoint disks in a class map. Shifts are whole
/// heatmap pixels (the Gaussian draw is rounded). Deterministic per seed.
pub fn corrupt_class_map(
    m: &ClassMap,
    layout: &KeypointLayout,
    cfg: &CorruptionConfig,
) -> Result<(ClassMap, CorruptionLog)> {
    cfg.validate()?;
    let bg = layout.background_id() as u16;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = (cfg.jitter_sigma_px > 0.0)
        .then(|| Normal::new(0.0, cfg.jitter_sigma_px).expect("validated sigma"));

    let mut pixels: Vec<Vec<(i64, i64)>> = vec![Vec::new(); layout.num_classes()];
    for y in 0..m.height {
        for x in 0..m.width {
            let l = m.labels[y * m.width + x];
            if l != bg && (l as usize) < pixels.len() {
                pixels[l as usize].push((x as i64, y as i64));
            }
        }
    }

    let mut out = ClassMap::filled(m.height, m.width, bg);
    let mut log = CorruptionLog::default();
    let (w, h) = (m.width as i64, m.height as i64);
    for (class, px) in pixels.iter().enumerate() {
        if px.is_empty() {
            continue;
        }
        if rng.random::<f64>() < cfg.dropout_rate {
            log.dropped.push(class);
            continue;
        }
        let shift = match &jitter {
            Some(d) => [
                d.sample(&mut rng).round() as i64,
                d.sample(&mut rng).round() as i64,
            ],
            None => [0, 0],
        };
        if shift != [0, 0] {
            log.shifts.push((class, shift));
        }
        for &(x, y) in px {
            let (nx, ny) = (x + shift[0], y + shift[1]);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let i = (ny * w + nx) as usize;
            // earlier (lower-id) disks keep contested pixels
            if out.labels[i] == bg {
                out.labels[i] = class as u16;
            }
        }
    }

    let keypoint_classes: Vec<usize> = layout
        .entries()
        .iter()
        .filter(|e| e.role != ClassRole::Background)
        .map(|e| e.id)
        .collect();
    let r = cfg.blob_radius_px as i64;
    for _ in 0..cfg.false_blob_count {
        let class = keypoint_classes[rng.random_range(0..keypoint_classes.len())];
        let c = [
            rng.random_range(0.0..m.width as f64),
            rng.random_range(0.0..m.height as f64),
        ];
        log.blobs.push((class, c));
        let (cx, cy) = (c[0].round() as i64, c[1].round() as i64);
        for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(w - 1) {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    out.labels[(y * w + x) as usize] = class as u16;
                }
            }
        }
    }
    Ok((out, log))
}

/// How class maps are turned into tensor files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorEncoding {
    OneHot,
    SoftBlob { sigma_px: f64 },
    /// Hard labels in the compact `u16` label-map container.
    Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub layout: KeypointLayout,
    pub view: ViewSamplerConfig,
    pub corruption: CorruptionConfig,
    pub stride: usize,
    pub radius_px: usize,
    pub encoding: TensorEncoding,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            layout: KeypointLayout::default(),
            view: ViewSamplerConfig::default(),
            corruption: CorruptionConfig::default(),
            stride: DEFAULT_STRIDE,
            radius_px: DEFAULT_DISK_RADIUS_PX,
            encoding: TensorEncoding::OneHot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub homography: Homography,
    pub clean: ClassMap,
    pub corrupted: ClassMap,
}

impl SyntheticFrame {
    pub fn tensor(&self, opts: &SynthOptions) -> Result<HeatmapTensor> {
        let classes = opts.layout.num_classes();
        match opts.encoding {
            TensorEncoding::SoftBlob { sigma_px } => HeatmapTensor::soft_blobs(
                &self.corrupted,
                classes,
                opts.layout.background_id(),
                opts.stride,
                sigma_px,
            ),
            _ => HeatmapTensor::one_hot(&self.corrupted, classes, opts.stride),
        }
    }

    fn file_bytes(&self, opts: &SynthOptions) -> Result<Vec<u8>> {
        Ok(match opts.encoding {
            TensorEncoding::Labels => io::encode_labels(&self.corrupted),
            _ => io::encode_scores(&self.tensor(opts)?),
        })
    }
}

/// Frame `index` of a dataset: the view is drawn from seed
/// `derive(master, 2 * index)`, the corruption from `derive(master, 2 * index + 1)`.
pub fn generate_frame(index: u64, master_seed: u64, opts: &SynthOptions) -> Result<SyntheticFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, 2 * index));
    let homography = sample_view_homography(&opts.view, &opts.layout, &mut rng)?;
    let input = (opts.view.frame_size[0], opts.view.frame_size[1]);
    let clean = render_gt_class_map(&opts.layout, &homography, input, opts.stride, opts.radius_px)?;
    let corrupted = if opts.corruption.is_identity() {
        clean.clone()
    } else {
        let cfg = CorruptionConfig {
            seed: derive_seed(master_seed, 2 * index + 1),
            ..opts.corruption
        };
        corrupt_class_map(&clean, &opts.layout, &cfg)?.0
    };
    Ok(SyntheticFrame {
        homography,
        clean,
        corrupted,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LAYOUT_FILE: &str = "layout.json";
pub const FALLBACK_FILE: &str = "fallback.json";

/// Writes `n` frames plus `manifest.json`, `layout.json` and
/// `fallback.json` (the average of the generated ground truths) under
/// `out_dir`. Output bytes depend only on the arguments, not on `jobs`.
pub fn generate_dataset(
    n: usize,
    opts: &SynthOptions,
    out_dir: &Path,
    master_seed: u64,
    jobs: usize,
) -> Result<Manifest> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    let (hw, hh) = heatmap_size(
        (opts.view.frame_size[0], opts.view.frame_size[1]),
        opts.stride,
    );
    if hw * opts.stride != opts.view.frame_size[0] || hh * opts.stride != opts.view.frame_size[1]
    {
        return Err(Error::InvalidConfig(format!(
            "stride {} does not divide the frame size {:?}",
            opts.stride, opts.view.frame_size
        )));
    }
    let ext = match opts.encoding {
        TensorEncoding::Labels => "labels",
        _ => "kchm",
    };
    let write_one = |i: usize| -> Result<(ManifestFrame, Homography)> {
        let frame = generate_frame(i as u64, master_seed, opts)?;
        let id = format!("frame_{i:05}");
        let heatmaps = PathBuf::from("frames").join(format!("{id}.{ext}"));
        let gt = PathBuf::from("frames").join(format!("{id}_gt.json"));
        io::write_bytes(&out_dir.join(&heatmaps), &frame.file_bytes(opts)?)?;
        io::write_json(&out_dir.join(&gt), &frame.homography)?;
        Ok((
            ManifestFrame {
                id,
                heatmaps,
                gt_homography: gt,
                image: None,
            },
            frame.homography,
        ))
    };
    let results: Vec<Result<(ManifestFrame, Homography)>> = if jobs == 1 {
        (0..n).map(write_one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(|| (0..n).into_par_iter().map(write_one).collect())
    };
    let (frames, gts): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();

    let manifest = Manifest {
        frames,
        frame_size: opts.view.frame_size,
    };
    io::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    io::write_json(&out_dir.join(LAYOUT_FILE), &opts.layout)?;
    io::write_json(
        &out_dir.join(FALLBACK_FILE),
        &average_homography(&gts, &opts.layout)?,
    )?;
    Ok(manifest)
}
