//! Per-class score grids at heatmap resolution: ground-truth rendering,
//! keypoint decoding by center of mass, and the class-weighted
//! cross-entropy used to score predictions.

use serde::{Deserialize, Serialize};

use crate::court::{ClassRole, KeypointLayout};
use crate::error::{Error, Result};
use crate::homography::Homography;

pub const DEFAULT_STRIDE: usize = 4;
pub const DEFAULT_DISK_RADIUS_PX: usize = 10;
pub const DEFAULT_MIN_SUPPORT: usize = 3;
pub const KEYPOINT_CLASS_WEIGHT: f64 = 1000.0;
pub const BACKGROUND_CLASS_WEIGHT: f64 = 1.0;

const LOG_CLAMP: f64 = 1e-12;
const NORMALIZED_TOL: f64 = 1e-4;

/// Class scores laid out channel-major, then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapTensor {
    classes: usize,
    height: usize,
    width: usize,
    /// Input-to-heatmap downscale factor.
    pub stride: usize,
    scores: Vec<f32>,
}

impl HeatmapTensor {
    pub fn new(
        classes: usize,
        height: usize,
        width: usize,
        stride: usize,
        scores: Vec<f32>,
    ) -> Result<Self> {
        if classes == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "tensor dimensions must be positive, got {classes}x{height}x{width}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        if scores.len() != classes * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} scores for a {classes}x{height}x{width} tensor",
                scores.len()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("tensor scores must be finite".into()));
        }
        Ok(HeatmapTensor {
            classes,
            height,
            width,
            stride,
            scores,
        })
    }

    pub fn zeros(classes: usize, height: usize, width: usize, stride: usize) -> Result<Self> {
        Self::new(
            classes,
            height,
            width,
            stride,
            vec![0.0; classes * height * width],
        )
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn channel(&self, class: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.scores[class * n..(class + 1) * n]
    }

    pub fn get(&self, class: usize, y: usize, x: usize) -> f32 {
        self.scores[(class * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, class: usize, y: usize, x: usize, v: f32) {
        self.scores[(class * self.height + y) * self.width + x] = v;
    }

    /// One-hot scores from hard labels.
    pub fn one_hot(map: &ClassMap, classes: usize, stride: usize) -> Result<Self> {
        if let Some(bad) = map.labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::ClassCountMismatch {
                expected: classes,
                got: *bad as usize + 1,
            });
        }
        let mut t = Self::zeros(classes, map.height, map.width, stride)?;
        let n = map.height * map.width;
        for (i, &l) in map.labels.iter().enumerate() {
            t.scores[l as usize * n + i] = 1.0;
        }
        Ok(t)
    }

    /// Soft scores from hard labels: each labeled pixel gets
    /// `0.5 + 0.5 * exp(-d^2 / 2 sigma^2)` for its class, `d` being the
    /// distance to the centroid of the class's pixels, with the remainder
    /// on the background. Per-pixel argmax equals the hard label.
    pub fn soft_blobs(
        map: &ClassMap,
        classes: usize,
        background: usize,
        stride: usize,
        sigma_px: f64,
    ) -> Result<Self> {
        let mut t = Self::one_hot(map, classes, stride)?;
        let centroids = map.class_centroids(classes);
        let n = map.height * map.width;
        for y in 0..map.height {
            for x in 0..map.width {
                let i = y * map.width + x;
                let l = map.labels[i] as usize;
                if l == background {
                    continue;
                }
                let Some([cx, cy]) = centroids[l] else { continue };
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let p = 0.5 + 0.5 * (-d2 / (2.0 * sigma_px * sigma_px)).exp();
                t.scores[l * n + i] = p as f32;
                t.scores[background * n + i] = (1.0 - p) as f32;
            }
        }
        Ok(t)
    }

    /// True if every pixel's scores are non-negative and sum to one.
    pub fn is_normalized(&self) -> bool {
        self.first_unnormalized_pixel().is_none()
    }

    fn first_unnormalized_pixel(&self) -> Option<(usize, f64)> {
        let n = self.height * self.width;
        let mut sums = vec![0.0f64; n];
        for c in 0..self.classes {
            for (i, &v) in self.channel(c).iter().enumerate() {
                if v < 0.0 {
                    return Some((i, f64::NAN));
                }
                sums[i] += v as f64;
            }
        }
        sums.iter()
            .enumerate()
            .find(|(_, &s)| (s - 1.0).abs() > NORMALIZED_TOL)
            .map(|(i, &s)| (i, s))
    }

    /// Mirrors every channel left-right.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for c in 0..self.classes {
            for y in 0..self.height {
                let row = (c * self.height + y) * self.width;
                out.scores[row..row + self.width].reverse();
            }
        }
        out
    }

    /// Moves channel `k` to channel `perm[k]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.classes {
            return Err(Error::ClassCountMismatch {
                expected: self.classes,
                got: perm.len(),
            });
        }
        let n = self.height * self.width;
        let mut out = self.clone();
        for (src, &dst) in perm.iter().enumerate() {
            out.scores[dst * n..(dst + 1) * n].copy_from_slice(self.channel(src));
        }
        Ok(out)
    }

    /// Per-pixel winning class and its score. Ties go to the lower class id;
    /// pixels whose best score is not positive get no class.
    pub fn argmax(&self) -> (Vec<Option<u16>>, Vec<f32>) {
        let n = self.height * self.width;
        let mut best = vec![0.0f32; n];
        let mut label: Vec<Option<u16>> = vec![None; n];
        for c in 0..self.classes {
            for (i, &v) in self.channel(c).iter().enumerate() {
                if v > best[i] {
                    best[i] = v;
                    label[i] = Some(c as u16);
                }
            }
        }
        (label, best)
    }
}

/// Hard per-pixel class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u16>,
}

impl ClassMap {
    pub fn filled(height: usize, width: usize, label: u16) -> Self {
        ClassMap {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.labels.len() != self.height * self.width {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {}x{} map",
                self.labels.len(),
                self.height,
                self.width
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::ClassCountMismatch {
                expected: classes,
                got: *bad as usize + 1,
            });
        }
        Ok(())
    }

    /// Unweighted centroid of each class's pixels, `None` for absent classes.
    pub fn class_centroids(&self, classes: usize) -> Vec<Option<[f64; 2]>> {
        let mut acc = vec![(0.0f64, 0.0f64, 0usize); classes];
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.labels[y * self.width + x] as usize;
                if l < classes {
                    acc[l].0 += x as f64;
                    acc[l].1 += y as f64;
                    acc[l].2 += 1;
                }
            }
        }
        acc.into_iter()
            .map(|(sx, sy, n)| (n > 0).then(|| [sx / n as f64, sy / n as f64]))
            .collect()
    }
}

/// Heatmap coordinates of an input-resolution point.
pub fn input_to_heatmap(p: [f64; 2], stride: usize) -> [f64; 2] {
    let s = stride as f64;
    let off = (s - 1.0) / 2.0;
    [(p[0] - off) / s, (p[1] - off) / s]
}

/// Input-resolution coordinates of a heatmap point.
pub fn heatmap_to_input(p: [f64; 2], stride: usize) -> [f64; 2] {
    let s = stride as f64;
    let off = (s - 1.0) / 2.0;
    [s * p[0] + off, s * p[1] + off]
}

/// Heatmap grid size for an input frame.
pub fn heatmap_size(input_size: (usize, usize), stride: usize) -> (usize, usize) {
    (input_size.0 / stride, input_size.1 / stride)
}

/// Paints disks of `radius_px` (at heatmap resolution): a pixel belongs to
/// a disk when its distance to the center is at most the radius, and the
/// pixel nearest the center always does. Where disks overlap the pixel goes
/// to the nearer center, then to the lower id.
pub fn paint_disks(
    width: usize,
    height: usize,
    background: u16,
    centers: &[(u16, [f64; 2])],
    radius_px: usize,
) -> ClassMap {
    let mut map = ClassMap::filled(height, width, background);
    let mut best_d2 = vec![f64::INFINITY; width * height];
    let r = radius_px as f64;
    let (w, h) = (width as i64, height as i64);
    for &(class, [cx, cy]) in centers {
        if !cx.is_finite() || !cy.is_finite() {
            continue;
        }
        if cx < -r - 0.5 || cy < -r - 0.5 || cx > (w - 1) as f64 + r + 0.5 || cy > (h - 1) as f64 + r + 0.5
        {
            continue;
        }
        let (rx, ry) = (cx.round() as i64, cy.round() as i64);
        let x0 = ((cx - r).floor() as i64).max(0);
        let x1 = ((cx + r).ceil() as i64).min(w - 1);
        let y0 = ((cy - r).floor() as i64).max(0);
        let y1 = ((cy + r).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                if d2 > r * r && (x, y) != (rx, ry) {
                    continue;
                }
                let i = (y * w + x) as usize;
                let cur = map.labels[i];
                if d2 < best_d2[i] || (d2 == best_d2[i] && class < cur) {
                    best_d2[i] = d2;
                    map.labels[i] = class;
                }
            }
        }
    }
    map
}

/// Number of lattice pixels in a disk of the given radius.
pub fn disk_pixel_count(radius_px: usize) -> usize {
    let r = radius_px as i64;
    (-r..=r)
        .map(|dy| (-r..=r).filter(|dx| dx * dx + dy * dy <= r * r).count())
        .sum()
}

/// Ground-truth class map for a frame seen through `court_to_image`.
pub fn render_gt_class_map(
    layout: &KeypointLayout,
    court_to_image: &Homography,
    input_size: (usize, usize),
    stride: usize,
    radius_px: usize,
) -> Result<ClassMap> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    let (w, h) = heatmap_size(input_size, stride);
    if w == 0 || h == 0 {
        return Err(Error::InvalidConfig(format!(
            "input {}x{} is smaller than one stride",
            input_size.0, input_size.1
        )));
    }
    let centers: Vec<(u16, [f64; 2])> = projected_centers(layout, court_to_image)
        .into_iter()
        .map(|(id, p)| (id as u16, input_to_heatmap(p, stride)))
        .collect();
    Ok(paint_disks(
        w,
        h,
        layout.background_id() as u16,
        &centers,
        radius_px,
    ))
}

/// Image positions of the planar keypoints, skipping points at infinity.
pub fn projected_centers(layout: &KeypointLayout, court_to_image: &Homography) -> Vec<(usize, [f64; 2])> {
    layout
        .court_points()
        .filter_map(|(id, xy)| court_to_image.apply(xy).ok().map(|p| (id, p)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedKeypoint {
    pub class_id: usize,
    /// Position at input resolution, pixels.
    pub image_xy: [f64; 2],
    /// Number of contributing heatmap pixels.
    pub support: usize,
    /// Mean winning score over the support.
    pub score: f64,
    /// The support reaches the heatmap edge, so the blob may be truncated.
    #[serde(default)]
    pub touches_border: bool,
}

/// Score-weighted center of mass of each keypoint class's argmax region.
/// Output is ordered by class id.
pub fn decode_keypoints(
    t: &HeatmapTensor,
    layout: &KeypointLayout,
    min_support: usize,
) -> Result<Vec<DecodedKeypoint>> {
    if t.classes() != layout.num_classes() {
        return Err(Error::ClassCountMismatch {
            expected: layout.num_classes(),
            got: t.classes(),
        });
    }
    let background = layout.background_id();
    let (labels, best) = t.argmax();
    // (sum w, sum w*x, sum w*y, count)
    let mut acc = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); t.classes()];
    let mut border = vec![false; t.classes()];
    for y in 0..t.height() {
        for x in 0..t.width() {
            let i = y * t.width() + x;
            let Some(l) = labels[i] else { continue };
            let l = l as usize;
            if l == background {
                continue;
            }
            let w = best[i] as f64;
            let a = &mut acc[l];
            a.0 += w;
            a.1 += w * x as f64;
            a.2 += w * y as f64;
            a.3 += 1;
            if x == 0 || y == 0 || x + 1 == t.width() || y + 1 == t.height() {
                border[l] = true;
            }
        }
    }
    let min_support = min_support.max(1);
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|&(id, (_, _, _, n))| {
            n >= min_support && layout.entry(id).map(|e| e.role) != Some(ClassRole::Background)
        })
        .map(|(id, (sw, sx, sy, n))| DecodedKeypoint {
            class_id: id,
            image_xy: heatmap_to_input([sx / sw, sy / sw], t.stride),
            support: n,
            score: sw / n as f64,
            touches_border: border[id],
        })
        .collect())
}

/// Class weights: 1000 on keypoint classes, 1 on the background.
pub fn default_class_weights(layout: &KeypointLayout) -> Vec<f64> {
    layout
        .entries()
        .iter()
        .map(|e| match e.role {
            ClassRole::Background => BACKGROUND_CLASS_WEIGHT,
            _ => KEYPOINT_CLASS_WEIGHT,
        })
        .collect()
}

/// Class-weighted cross-entropy of `pred` against hard labels, averaged
/// over pixels. Scores are clamped at 1e-12 before the log.
pub fn weighted_ce_loss(
    pred: &HeatmapTensor,
    gt: &ClassMap,
    alpha: &[f64],
    strict: bool,
) -> Result<f64> {
    if pred.height() != gt.height || pred.width() != gt.width {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height,
            gt.width
        )));
    }
    if alpha.len() != pred.classes() {
        return Err(Error::ClassCountMismatch {
            expected: pred.classes(),
            got: alpha.len(),
        });
    }
    gt.validate(pred.classes())?;
    if strict {
        if let Some((pixel, sum)) = pred.first_unnormalized_pixel() {
            return Err(Error::NotNormalized { pixel, sum });
        }
    }
    let n = gt.height * gt.width;
    let total: f64 = gt
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let l = l as usize;
            let p = (pred.scores[l * n + i] as f64).max(LOG_CLAMP);
            -alpha[l] * p.ln()
        })
        .sum();
    Ok(total / n as f64)
}
