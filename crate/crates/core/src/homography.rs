//! Planar homographies between the court plane (cm) and the image (px):
//! normalized DLT fitting, seeded RANSAC, the plausibility check used to
//! reject broken estimates, and the dataset-average fallback.

use nalgebra::{DMatrix, Matrix3, SMatrix, Vector3};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::court::KeypointLayout;
use crate::error::{Error, Result};

const SINGULAR_DET: f64 = 1e-12;
const INFINITY_W: f64 = 1e-12;
const NULLSPACE_REL_TOL: f64 = 1e-9;
const COLLINEAR_SIN_TOL: f64 = 1e-9;

/// Court-to-image projective map. Stored with `h[2][2] = 1` when possible,
/// otherwise with unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    inv: Matrix3<f64>,
}

fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    if m[(2, 2)].abs() > 1e-12 * norm {
        m / m[(2, 2)]
    } else {
        m / norm
    }
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) || m.norm() == 0.0 {
            return Err(Error::SingularHomography);
        }
        let m = normalize(m);
        if m.determinant().abs() <= SINGULAR_DET {
            return Err(Error::SingularHomography);
        }
        let inv = m.try_inverse().ok_or(Error::SingularHomography)?;
        Ok(Homography {
            m,
            inv: normalize(inv),
        })
    }

    pub fn identity() -> Self {
        Homography::new(Matrix3::identity()).unwrap()
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Homography::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Image-to-court map.
    pub fn inverse_matrix(&self) -> &Matrix3<f64> {
        &self.inv
    }

    /// The homography that maps image to court, wrapped as a `Homography`.
    pub fn inverse(&self) -> Homography {
        Homography {
            m: self.inv,
            inv: self.m,
        }
    }

    /// Court point to image point.
    pub fn apply(&self, court_xy: [f64; 2]) -> Result<[f64; 2]> {
        project(&self.m, court_xy)
    }

    /// Image point to court point.
    pub fn apply_inverse(&self, image_xy: [f64; 2]) -> Result<[f64; 2]> {
        project(&self.inv, image_xy)
    }

    /// Homogeneous scale `w` of the projected court point, in the normalized
    /// matrix's units. Its sign tells which side of the vanishing line the
    /// point falls on.
    pub fn projective_depth(&self, court_xy: [f64; 2]) -> f64 {
        self.m[(2, 0)] * court_xy[0] + self.m[(2, 1)] * court_xy[1] + self.m[(2, 2)]
    }

    /// `a.compose(b)` applies `b` first, then `a`.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.m * other.m)
    }
}

fn project(m: &Matrix3<f64>, p: [f64; 2]) -> Result<[f64; 2]> {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    if v.z.abs() <= INFINITY_W || !v.z.is_finite() {
        return Err(Error::PointAtInfinity);
    }
    Ok([v.x / v.z, v.y / v.z])
}

#[derive(Serialize, Deserialize)]
struct HomographyDoc {
    direction: String,
    units: String,
    h: [[f64; 3]; 3],
}

impl Serialize for Homography {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HomographyDoc {
            direction: "court_to_image".into(),
            units: "cm_to_px".into(),
            h: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = HomographyDoc::deserialize(d)?;
        if doc.direction != "court_to_image" {
            return Err(D::Error::custom(format!(
                "unsupported direction {:?}",
                doc.direction
            )));
        }
        if doc.units != "cm_to_px" {
            return Err(D::Error::custom(format!("unsupported units {:?}", doc.units)));
        }
        Homography::from_rows(doc.h).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub class_id: usize,
    pub court_xy_cm: [f64; 2],
    pub image_xy_px: [f64; 2],
}

/// Similarity transform moving the centroid to the origin and the mean
/// distance from it to sqrt(2).
fn conditioning(points: impl Iterator<Item = [f64; 2]> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |(ax, ay), p| (ax + p[0], ay + p[1]));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateInput);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply_affine(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    [
        t[(0, 0)] * p[0] + t[(0, 2)],
        t[(1, 1)] * p[1] + t[(1, 2)],
    ]
}

fn fill_rows<F: FnMut(usize, [f64; 9])>(src: &[[f64; 2]], dst: &[[f64; 2]], mut put: F) {
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let ([x, y], [u, v]) = (*s, *d);
        put(2 * i, [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        put(2 * i + 1, [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
}

/// Right singular vector of the smallest singular value, after checking the
/// null space is one-dimensional.
fn null_vector(singular: &[f64], v_t_row: impl Fn(usize) -> [f64; 9]) -> Result<[f64; 9]> {
    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[a].total_cmp(&singular[b]));
    let (smallest, second) = (order[0], order[1]);
    let largest = singular[*order.last().unwrap()];
    if singular[second] - singular[smallest] <= NULLSPACE_REL_TOL * largest {
        return Err(Error::DegenerateInput);
    }
    Ok(v_t_row(smallest))
}

fn sin_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let (vx, vy) = (c[0] - a[0], c[1] - a[1]);
    let denom = ux.hypot(uy) * vx.hypot(vy);
    if denom == 0.0 {
        return 0.0;
    }
    (ux * vy - uy * vx).abs() / denom
}

/// True if any three of the four points are (numerically) collinear.
pub fn has_collinear_triple(p: &[[f64; 2]; 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .any(|&[a, b, c]| sin_angle(p[a], p[b], p[c]) <= COLLINEAR_SIN_TOL)
}

/// Normalized direct linear transform over point pairs.
pub fn dlt_points(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source points vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 4 {
        return Err(Error::TooFewCorrespondences(n));
    }
    if n == 4 && has_collinear_triple(&[src[0], src[1], src[2], src[3]]) {
        return Err(Error::DegenerateInput);
    }

    let t_src = conditioning(src.iter().copied())?;
    let t_dst = conditioning(dst.iter().copied())?;
    let src_n: Vec<[f64; 2]> = src.iter().map(|p| apply_affine(&t_src, *p)).collect();
    let dst_n: Vec<[f64; 2]> = dst.iter().map(|p| apply_affine(&t_dst, *p)).collect();

    let h = if n == 4 {
        // 8 equations; pad to a square system so the SVD exposes the null vector.
        let mut a = SMatrix::<f64, 9, 9>::zeros();
        fill_rows(&src_n, &dst_n, |r, row| {
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        });
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        null_vector(svd.singular_values.as_slice(), |i| {
            std::array::from_fn(|c| v_t[(i, c)])
        })?
    } else {
        let mut a = DMatrix::<f64>::zeros(2 * n, 9);
        fill_rows(&src_n, &dst_n, |r, row| {
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        });
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        null_vector(svd.singular_values.as_slice(), |i| {
            std::array::from_fn(|c| v_t[(i, c)])
        })?
    };

    let hn = Matrix3::from_row_slice(&h);
    let t_dst_inv = t_dst.try_inverse().ok_or(Error::DegenerateInput)?;
    Homography::new(t_dst_inv * hn * t_src).map_err(|_| Error::DegenerateInput)
}

/// DLT fit from court points to image points.
pub fn dlt_homography(corrs: &[Correspondence]) -> Result<Homography> {
    let src: Vec<[f64; 2]> = corrs.iter().map(|c| c.court_xy_cm).collect();
    let dst: Vec<[f64; 2]> = corrs.iter().map(|c| c.image_xy_px).collect();
    dlt_points(&src, &dst)
}

/// Forward reprojection distance in pixels, `+inf` when the court point
/// maps to infinity.
pub fn reprojection_error(h: &Homography, c: &Correspondence) -> f64 {
    match h.apply(c.court_xy_cm) {
        Ok([u, v]) => (u - c.image_xy_px[0]).hypot(v - c.image_xy_px[1]),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub reproj_threshold_px: f64,
    pub max_iterations: usize,
    pub min_inliers: usize,
    pub seed: u64,
    /// Stop once the standard 99 %-confidence iteration bound is met.
    pub adaptive: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            reproj_threshold_px: 35.0,
            max_iterations: 2000,
            min_inliers: 4,
            seed: 0,
            adaptive: false,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reproj_threshold_px > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reprojection threshold must be positive, got {}",
                self.reproj_threshold_px
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    /// Iterations actually run.
    pub iterations: usize,
}

struct Score {
    count: usize,
    mean_error: f64,
}

fn score(h: &Homography, corrs: &[Correspondence], threshold: f64) -> Score {
    let mut count = 0;
    let mut sum = 0.0;
    for c in corrs {
        let e = reprojection_error(h, c);
        if e < threshold {
            count += 1;
            sum += e;
        }
    }
    Score {
        count,
        mean_error: if count > 0 { sum / count as f64 } else { f64::INFINITY },
    }
}

fn better(a: &Score, b: &Score) -> bool {
    a.count > b.count || (a.count == b.count && a.mean_error < b.mean_error)
}

/// Seeded RANSAC over minimal 4-point DLT fits, followed by a refit on the
/// consensus set. Identical inputs and seed give bit-identical results.
pub fn ransac_homography(corrs: &[Correspondence], cfg: &RansacConfig) -> Result<RansacOutcome> {
    cfg.validate()?;
    let n = corrs.len();
    if n < 4 {
        return Err(Error::TooFewCorrespondences(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Homography, Score)> = None;
    let mut iterations = 0;
    let mut required = cfg.max_iterations;

    while iterations < required.min(cfg.max_iterations) {
        iterations += 1;
        let sample = index::sample(&mut rng, n, 4);
        let picked: [Correspondence; 4] = std::array::from_fn(|i| corrs[sample.index(i)]);
        let court = picked.map(|c| c.court_xy_cm);
        if has_collinear_triple(&court) {
            continue;
        }
        let Ok(h) = dlt_homography(&picked) else {
            continue;
        };
        let s = score(&h, corrs, cfg.reproj_threshold_px);
        if best.as_ref().is_none_or(|(_, b)| better(&s, b)) {
            if cfg.adaptive {
                required = adaptive_bound(s.count as f64 / n as f64);
            }
            best = Some((h, s));
        }
    }

    let Some((sample_model, sample_score)) = best else {
        return Err(Error::NoModel);
    };
    if sample_score.count < cfg.min_inliers.max(4) {
        return Err(Error::NoModel);
    }

    let consensus: Vec<Correspondence> = corrs
        .iter()
        .filter(|c| reprojection_error(&sample_model, c) < cfg.reproj_threshold_px)
        .copied()
        .collect();
    // The refit replaces the sample model unless it loses support.
    let model = match dlt_homography(&consensus) {
        Ok(refit) if score(&refit, corrs, cfg.reproj_threshold_px).count >= sample_score.count => {
            refit
        }
        _ => sample_model,
    };

    let inliers: Vec<bool> = corrs
        .iter()
        .map(|c| reprojection_error(&model, c) < cfg.reproj_threshold_px)
        .collect();
    let inlier_count = inliers.iter().filter(|&&b| b).count();
    Ok(RansacOutcome {
        homography: model,
        inliers,
        inlier_count,
        iterations,
    })
}

fn adaptive_bound(inlier_ratio: f64) -> usize {
    let p_good = inlier_ratio.powi(4);
    if p_good >= 1.0 {
        return 1;
    }
    if p_good <= 0.0 {
        return usize::MAX;
    }
    let k = (1.0f64 - 0.99).ln() / (1.0 - p_good).ln();
    k.ceil().max(1.0) as usize
}

/// Plausibility check on an estimate: two image probes on the middle row
/// are mapped to the court and must land less than `max_dist_cm` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyCheck {
    pub probe_a: [f64; 2],
    pub probe_b: [f64; 2],
    pub max_dist_cm: f64,
}

impl Default for DegeneracyCheck {
    fn default() -> Self {
        DegeneracyCheck {
            probe_a: [240.0, 270.0],
            probe_b: [720.0, 270.0],
            max_dist_cm: 1800.0,
        }
    }
}

impl DegeneracyCheck {
    /// Court-space distance between the two probes, `+inf` if either maps
    /// to infinity.
    pub fn probe_distance(&self, h: &Homography) -> f64 {
        match (h.apply_inverse(self.probe_a), h.apply_inverse(self.probe_b)) {
            (Ok(a), Ok(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
            _ => f64::INFINITY,
        }
    }

    pub fn is_degenerate(&self, h: &Homography) -> bool {
        let d = self.probe_distance(h);
        !(d < self.max_dist_cm)
    }
}

pub fn is_degenerate(h: &Homography) -> bool {
    DegeneracyCheck::default().is_degenerate(h)
}

/// Fallback homography: projects every usable court keypoint through each
/// homography, averages the image positions, and refits.
pub fn average_homography(hs: &[Homography], layout: &KeypointLayout) -> Result<Homography> {
    if hs.is_empty() {
        return Err(Error::EmptyHomographyList);
    }
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (_, xy) in layout.court_points() {
        let mut acc = [0.0, 0.0];
        for h in hs {
            let p = h.apply(xy)?;
            acc[0] += p[0];
            acc[1] += p[1];
        }
        src.push(xy);
        dst.push([acc[0] / hs.len() as f64, acc[1] / hs.len() as f64]);
    }
    dlt_points(&src, &dst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn corr(court: [f64; 2], image: [f64; 2]) -> Correspondence {
        Correspondence {
            class_id: 0,
            court_xy_cm: court,
            image_xy_px: image,
        }
    }

    #[test]
    fn unit_square_identity() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let h = dlt_points(&sq, &sq).unwrap();
        let id = Matrix3::<f64>::identity();
        assert!((h.matrix() - id).amax() < 1e-9, "{}", h.matrix());
    }

    #[test]
    fn court_corners_exact() {
        let court = [[0.0, 0.0], [2800.0, 0.0], [2800.0, 1500.0], [0.0, 1500.0]];
        let image = [[100.0, 500.0], [860.0, 480.0], [700.0, 120.0], [180.0, 130.0]];
        let h = dlt_points(&court, &image).unwrap();
        for (c, i) in court.iter().zip(image) {
            let p = h.apply(*c).unwrap();
            assert!((p[0] - i[0]).hypot(p[1] - i[1]) < 1e-6);
        }
    }

    #[test]
    fn collinear_points_rejected() {
        let court = [[0.0, 0.0], [100.0, 0.0], [200.0, 0.0], [300.0, 0.0]];
        let image = [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]];
        assert!(matches!(
            dlt_points(&court, &image),
            Err(Error::DegenerateInput)
        ));
        // many points, all on one line
        let court: Vec<_> = (0..8).map(|i| [i as f64 * 50.0, 2.0 * i as f64]).collect();
        let image: Vec<_> = (0..8).map(|i| [i as f64, 3.0]).collect();
        assert!(dlt_points(&court, &image).is_err());
    }

    #[test]
    fn too_few_points() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            dlt_points(&p, &p),
            Err(Error::TooFewCorrespondences(3))
        ));
        let corrs: Vec<_> = p.iter().map(|&q| corr(q, q)).collect();
        assert!(matches!(
            ransac_homography(&corrs, &RansacConfig::default()),
            Err(Error::TooFewCorrespondences(3))
        ));
    }

    #[test]
    fn apply_identity_and_translation() {
        let id = Homography::identity();
        assert_eq!(id.apply([3.5, -2.0]).unwrap(), [3.5, -2.0]);
        let t = Homography::from_rows([[1.0, 0.0, 7.0], [0.0, 1.0, -4.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(t.apply([0.0, 0.0]).unwrap(), [7.0, -4.0]);
        assert_eq!(t.apply_inverse([7.0, -4.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn apply_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(h.apply([-1.0, 5.0]), Err(Error::PointAtInfinity)));
    }

    #[test]
    fn apply_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 200 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let Ok(h) = Homography::new(m) else { continue };
            let p = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let (Ok(q), true) = (h.apply(p), h.matrix().determinant().abs() > 1e-3) else {
                continue;
            };
            let Ok(back) = h.apply_inverse(q) else { continue };
            let tol = 1e-9 * (1.0 + p[0].abs().max(p[1].abs()));
            if q[0].abs().max(q[1].abs()) > 1e6 {
                continue;
            }
            assert!((back[0] - p[0]).abs() < tol * 1e3 && (back[1] - p[1]).abs() < tol * 1e3);
            checked += 1;
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(Homography::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Homography::new(Matrix3::from_element(f64::NAN)).is_err());
    }

    #[test]
    fn normalization_sets_h33() {
        let h = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h.rows()[2][2], 1.0);
        assert_eq!(h.rows()[0][0], 1.0);
        let h = Homography::from_rows([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(h.is_err());
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!((h.matrix().norm() - 1.0).abs() < 1e-12);
    }

    fn scale_image_to_court(cm_per_px: f64) -> Homography {
        let s = 1.0 / cm_per_px;
        Homography::from_rows([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn degeneracy_closed_form() {
        let check = DegeneracyCheck::default();
        let h = scale_image_to_court(2.5);
        assert!((check.probe_distance(&h) - 1200.0).abs() < 1e-9);
        assert!(!is_degenerate(&h));
        let h = scale_image_to_court(4.0);
        assert!((check.probe_distance(&h) - 1920.0).abs() < 1e-9);
        assert!(is_degenerate(&h));
        assert!(!is_degenerate(&Homography::identity()));
        // exactly at threshold counts as degenerate
        assert!(is_degenerate(&scale_image_to_court(3.75)));
    }

    #[test]
    fn degeneracy_probe_at_infinity() {
        // image -> court sends the x = 480 column to infinity; probes straddle it
        let inv = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0 / 240.0, 0.0, -1.0);
        let h = Homography::new(inv.try_inverse().unwrap()).unwrap();
        let check = DegeneracyCheck {
            probe_a: [240.0, 270.0],
            ..Default::default()
        };
        assert!(check.probe_distance(&h).is_infinite());
        assert!(check.is_degenerate(&h));
    }

    fn sample_h() -> Homography {
        let court = [[0.0, 0.0], [2800.0, 0.0], [2800.0, 1500.0], [0.0, 1500.0]];
        let image = [[100.0, 500.0], [860.0, 480.0], [700.0, 120.0], [180.0, 130.0]];
        dlt_points(&court, &image).unwrap()
    }

    #[test]
    fn average_of_one_and_two() {
        let layout = KeypointLayout::default();
        let h = sample_h();
        for hs in [vec![h.clone()], vec![h.clone(), h.clone()]] {
            let avg = average_homography(&hs, &layout).unwrap();
            for (_, xy) in layout.court_points() {
                let a = avg.apply(xy).unwrap();
                let b = h.apply(xy).unwrap();
                assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-6);
            }
        }
        assert!(matches!(
            average_homography(&[], &layout),
            Err(Error::EmptyHomographyList)
        ));
    }

    #[test]
    fn average_of_translated_pair_is_midpoint() {
        let layout = KeypointLayout::default();
        let h = sample_h();
        let shift = |dx: f64| {
            let t = Homography::from_rows([[1.0, 0.0, dx], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .unwrap();
            t.compose(&h).unwrap()
        };
        let avg = average_homography(&[shift(10.0), shift(-10.0)], &layout).unwrap();
        for (_, xy) in layout.court_points() {
            let a = avg.apply(xy).unwrap();
            let b = h.apply(xy).unwrap();
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-6);
        }
    }

    #[test]
    fn ransac_exact_data() {
        let layout = KeypointLayout::default();
        let h = sample_h();
        let corrs: Vec<_> = layout
            .court_points()
            .map(|(id, xy)| Correspondence {
                class_id: id,
                court_xy_cm: xy,
                image_xy_px: h.apply(xy).unwrap(),
            })
            .collect();
        let out = ransac_homography(&corrs, &RansacConfig::default()).unwrap();
        assert_eq!(out.inlier_count, 91);
        assert!(out.inliers.iter().all(|&b| b));
        assert!((out.homography.matrix() - h.matrix()).amax() < 1e-8);
        assert_eq!(out.iterations, 2000);
    }

    #[test]
    fn ransac_adaptive_stops_early() {
        let layout = KeypointLayout::default();
        let h = sample_h();
        let corrs: Vec<_> = layout
            .court_points()
            .map(|(id, xy)| Correspondence {
                class_id: id,
                court_xy_cm: xy,
                image_xy_px: h.apply(xy).unwrap(),
            })
            .collect();
        let cfg = RansacConfig {
            adaptive: true,
            ..Default::default()
        };
        let out = ransac_homography(&corrs, &cfg).unwrap();
        assert!(out.iterations < 10);
        assert_eq!(out.inlier_count, 91);
    }

    #[test]
    fn ransac_no_model_when_min_inliers_unreachable() {
        let layout = KeypointLayout::default();
        let h = sample_h();
        let corrs: Vec<_> = layout
            .court_points()
            .take(10)
            .map(|(id, xy)| Correspondence {
                class_id: id,
                court_xy_cm: xy,
                image_xy_px: h.apply(xy).unwrap(),
            })
            .collect();
        let cfg = RansacConfig {
            min_inliers: 11,
            ..Default::default()
        };
        assert!(matches!(ransac_homography(&corrs, &cfg), Err(Error::NoModel)));
    }

    #[test]
    fn ransac_all_collinear_is_no_model() {
        let corrs: Vec<_> = (0..6)
            .map(|i| corr([i as f64 * 100.0, 0.0], [i as f64 * 10.0, 5.0]))
            .collect();
        assert!(matches!(
            ransac_homography(&corrs, &RansacConfig::default()),
            Err(Error::NoModel)
        ));
    }

    #[test]
    fn ransac_rejects_bad_config() {
        let corrs: Vec<_> = (0..4)
            .map(|i| corr([i as f64, (i * i) as f64], [i as f64, 1.0]))
            .collect();
        let cfg = RansacConfig {
            reproj_threshold_px: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            ransac_homography(&corrs, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn homography_json_schema() {
        let h = sample_h();
        let v = serde_json::to_value(&h).unwrap();
        assert_eq!(v["direction"], "court_to_image");
        assert_eq!(v["units"], "cm_to_px");
        assert_eq!(v["h"][2][2], 1.0);
        let back: Homography = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(back.rows(), h.rows());

        let mut bad = v;
        bad["direction"] = "image_to_court".into();
        assert!(serde_json::from_value::<Homography>(bad).is_err());
    }
}
