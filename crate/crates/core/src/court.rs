//! Court coordinate frame, perspective-aware keypoint grid and the
//! horizontal-flip permutation over keypoint classes.
//!
//! The court frame has its origin at the camera-side left corner. `x` runs
//! along the court length in `[0, length_cm]`, `y` along the width in
//! `[0, width_cm]`. All distances are centimeters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIBA_LENGTH_CM: f64 = 2800.0;
pub const FIBA_WIDTH_CM: f64 = 1500.0;
pub const DEFAULT_ROWS: usize = 7;
pub const DEFAULT_COLS: usize = 13;
pub const DEFAULT_W0_CM: f64 = 175.0;

/// A drawable court marking in court coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CourtLine {
    Segment {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// Circular arc swept counter-clockwise from `start_deg` to `end_deg`.
    Arc {
        center: [f64; 2],
        radius_cm: f64,
        start_deg: f64,
        end_deg: f64,
    },
}

impl CourtLine {
    fn endpoints(&self) -> [[f64; 2]; 2] {
        match *self {
            CourtLine::Segment { from, to } => [from, to],
            CourtLine::Arc {
                center,
                radius_cm,
                start_deg,
                end_deg,
            } => {
                let at = |deg: f64| {
                    let t = deg.to_radians();
                    [
                        center[0] + radius_cm * t.cos(),
                        center[1] + radius_cm * t.sin(),
                    ]
                };
                [at(start_deg), at(end_deg)]
            }
        }
    }

    /// Points along the marking, spaced at most `step_cm` apart.
    pub fn polyline(&self, step_cm: f64) -> Vec<[f64; 2]> {
        match *self {
            CourtLine::Segment { from, to } => {
                let len = (to[0] - from[0]).hypot(to[1] - from[1]);
                let n = ((len / step_cm).ceil() as usize).max(1);
                (0..=n)
                    .map(|i| {
                        let t = i as f64 / n as f64;
                        [
                            from[0] + t * (to[0] - from[0]),
                            from[1] + t * (to[1] - from[1]),
                        ]
                    })
                    .collect()
            }
            CourtLine::Arc {
                center,
                radius_cm,
                start_deg,
                end_deg,
            } => {
                let sweep = (end_deg - start_deg).to_radians();
                let len = (sweep * radius_cm).abs();
                let n = ((len / step_cm).ceil() as usize).max(1);
                (0..=n)
                    .map(|i| {
                        let t = start_deg.to_radians() + sweep * i as f64 / n as f64;
                        [
                            center[0] + radius_cm * t.cos(),
                            center[1] + radius_cm * t.sin(),
                        ]
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourtTemplate {
    pub length_cm: f64,
    pub width_cm: f64,
    pub lines: Vec<CourtLine>,
}

impl CourtTemplate {
    /// A court of the given size marked with its boundary and halfway line.
    pub fn new(length_cm: f64, width_cm: f64) -> Result<Self> {
        let (l, w) = (length_cm, width_cm);
        let seg = |from, to| CourtLine::Segment { from, to };
        let template = CourtTemplate {
            length_cm,
            width_cm,
            lines: vec![
                seg([0.0, 0.0], [l, 0.0]),
                seg([l, 0.0], [l, w]),
                seg([l, w], [0.0, w]),
                seg([0.0, w], [0.0, 0.0]),
                seg([l / 2.0, 0.0], [l / 2.0, w]),
            ],
        };
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_cm > 0.0 && self.width_cm > 0.0) {
            return Err(Error::InvalidTemplate(format!(
                "dimensions must be positive, got {} x {}",
                self.length_cm, self.width_cm
            )));
        }
        // Arc endpoints go through trig, so allow a hair of slack.
        let eps = 1e-9 * self.length_cm.max(self.width_cm);
        for (i, line) in self.lines.iter().enumerate() {
            for p in line.endpoints() {
                let inside = p[0] >= -eps
                    && p[0] <= self.length_cm + eps
                    && p[1] >= -eps
                    && p[1] <= self.width_cm + eps;
                if !inside {
                    return Err(Error::InvalidTemplate(format!(
                        "line {i} endpoint ({}, {}) lies outside the court",
                        p[0], p[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for CourtTemplate {
    fn default() -> Self {
        CourtTemplate::new(FIBA_LENGTH_CM, FIBA_WIDTH_CM).expect("FIBA dimensions are valid")
    }
}

/// Which sideline the broadcast camera sits behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraSide {
    YZero,
    YMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Points along the court width axis.
    pub rows: usize,
    /// Points along the court length axis.
    pub cols: usize,
    /// Gap between the two rows nearest the camera.
    pub w0_cm: f64,
    pub camera_side: CameraSide,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            w0_cm: DEFAULT_W0_CM,
            camera_side: CameraSide::YZero,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 {
            return Err(Error::InvalidSampling(format!(
                "rows must be >= 3, got {}",
                self.rows
            )));
        }
        if self.cols < 2 {
            return Err(Error::InvalidSampling(format!(
                "cols must be >= 2, got {}",
                self.cols
            )));
        }
        if !(self.w0_cm > 0.0) {
            return Err(Error::InvalidSampling(format!(
                "w0_cm must be positive, got {}",
                self.w0_cm
            )));
        }
        Ok(())
    }

    pub fn num_court_points(&self) -> usize {
        self.rows * self.cols
    }
}

/// Common difference of the row-gap progression for a court of width
/// `width_cm` sampled with `rows` points and first gap `w0_cm`.
pub fn common_difference(width_cm: f64, rows: usize, w0_cm: f64) -> f64 {
    let n = rows as f64;
    2.0 / (n - 2.0) * (width_cm / (n - 1.0) - w0_cm)
}

/// Cumulative row offsets along the width axis, starting at the camera
/// side. Consecutive gaps form the arithmetic progression `w0 + i * r`
/// whose sum is exactly `width_cm`.
pub fn perspective_offsets(width_cm: f64, rows: usize, w0_cm: f64) -> Result<Vec<f64>> {
    if rows < 3 {
        return Err(Error::InvalidSampling(format!(
            "rows must be >= 3, got {rows}"
        )));
    }
    if !(width_cm > 0.0) {
        return Err(Error::InvalidSampling(format!(
            "width must be positive, got {width_cm}"
        )));
    }
    if !(w0_cm > 0.0) {
        return Err(Error::InvalidSampling(format!(
            "w0 must be positive, got {w0_cm}"
        )));
    }
    let r = common_difference(width_cm, rows, w0_cm);
    for i in 0..rows - 1 {
        let gap = w0_cm + i as f64 * r;
        if gap <= 0.0 {
            return Err(Error::NonPositiveGap { index: i, gap });
        }
    }
    // Closed-form partial sums; the last one equals the width algebraically.
    let mut offsets: Vec<f64> = (0..rows)
        .map(|i| {
            let i = i as f64;
            i * w0_cm + r * i * (i - 1.0) / 2.0
        })
        .collect();
    offsets[rows - 1] = width_cm;
    Ok(offsets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRole {
    Court,
    Basket,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointEntry {
    pub id: usize,
    #[serde(rename = "xy_cm")]
    pub court_xy_cm: Option<[f64; 2]>,
    pub role: ClassRole,
    #[serde(rename = "usable")]
    pub usable_for_homography: bool,
}

/// The class set a heatmap model predicts: planar court keypoints, the two
/// baskets, and the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutDoc")]
pub struct KeypointLayout {
    pub template: CourtTemplate,
    pub spec: SamplingSpec,
    entries: Vec<KeypointEntry>,
}

#[derive(Deserialize)]
struct LayoutDoc {
    template: CourtTemplate,
    spec: SamplingSpec,
    entries: Vec<KeypointEntry>,
}

impl TryFrom<LayoutDoc> for KeypointLayout {
    type Error = Error;

    fn try_from(doc: LayoutDoc) -> Result<Self> {
        let layout = KeypointLayout {
            template: doc.template,
            spec: doc.spec,
            entries: doc.entries,
        };
        layout.validate()?;
        Ok(layout)
    }
}

impl Default for KeypointLayout {
    fn default() -> Self {
        build_layout(&CourtTemplate::default(), &SamplingSpec::default())
            .expect("default sampling is valid")
    }
}

impl KeypointLayout {
    pub fn entries(&self) -> &[KeypointEntry] {
        &self.entries
    }

    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn background_id(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn entry(&self, id: usize) -> Option<&KeypointEntry> {
        self.entries.get(id)
    }

    /// `(id, court_xy)` for every class usable for homography fitting.
    pub fn court_points(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.entries.iter().filter_map(|e| {
            if e.usable_for_homography {
                e.court_xy_cm.map(|xy| (e.id, xy))
            } else {
                None
            }
        })
    }

    pub fn basket_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .filter(|e| e.role == ClassRole::Basket)
            .map(|e| e.id)
    }

    fn validate(&self) -> Result<()> {
        self.template.validate()?;
        self.spec.validate()?;
        let bad = |msg: String| Err(Error::InvalidLayout(msg));
        if self.entries.is_empty() {
            return bad("no entries".into());
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.id != i {
                return bad(format!("entry {i} has id {}, ids must be dense", e.id));
            }
            match e.role {
                ClassRole::Court => {
                    if !e.usable_for_homography {
                        return bad(format!("court entry {i} must be usable"));
                    }
                    let Some([x, y]) = e.court_xy_cm else {
                        return bad(format!("court entry {i} has no court position"));
                    };
                    let t = &self.template;
                    if !(0.0..=t.length_cm).contains(&x) || !(0.0..=t.width_cm).contains(&y) {
                        return bad(format!("court entry {i} lies outside the court"));
                    }
                }
                ClassRole::Basket if e.usable_for_homography => {
                    return bad(format!("basket entry {i} cannot be usable"));
                }
                ClassRole::Background if i + 1 != self.entries.len() => {
                    return bad(format!("background entry {i} must be the last id"));
                }
                _ => {}
            }
        }
        if self.entries.last().map(|e| e.role) != Some(ClassRole::Background) {
            return bad("last entry must be the background".into());
        }
        let court = self.spec.num_court_points();
        let court_ok = self.entries[..court.min(self.entries.len())]
            .iter()
            .all(|e| e.role == ClassRole::Court);
        if !court_ok
            || self
                .entries
                .iter()
                .filter(|e| e.role == ClassRole::Court)
                .count()
                != court
        {
            return bad(format!(
                "expected court entries at ids 0..{court} for a {}x{} grid",
                self.spec.rows, self.spec.cols
            ));
        }
        let baskets = self.basket_ids().count();
        if baskets != 0 && baskets != 2 {
            return bad(format!("expected 0 or 2 basket entries, found {baskets}"));
        }
        Ok(())
    }
}

/// Lays out court keypoints row-major from the camera side
/// (`id = row * cols + col`), then the left and right baskets, then the
/// background class.
pub fn build_layout(template: &CourtTemplate, spec: &SamplingSpec) -> Result<KeypointLayout> {
    template.validate()?;
    spec.validate()?;
    let offsets = perspective_offsets(template.width_cm, spec.rows, spec.w0_cm)?;
    let col_gap = template.length_cm / (spec.cols - 1) as f64;

    let mut entries = Vec::with_capacity(spec.num_court_points() + 3);
    for (row, off) in offsets.iter().enumerate() {
        let y = match spec.camera_side {
            CameraSide::YZero => *off,
            CameraSide::YMax => template.width_cm - off,
        };
        for col in 0..spec.cols {
            let x = if col + 1 == spec.cols {
                template.length_cm
            } else {
                col as f64 * col_gap
            };
            entries.push(KeypointEntry {
                id: row * spec.cols + col,
                court_xy_cm: Some([x, y]),
                role: ClassRole::Court,
                usable_for_homography: true,
            });
        }
    }
    for _ in 0..2 {
        entries.push(KeypointEntry {
            id: entries.len(),
            court_xy_cm: None,
            role: ClassRole::Basket,
            usable_for_homography: false,
        });
    }
    entries.push(KeypointEntry {
        id: entries.len(),
        court_xy_cm: None,
        role: ClassRole::Background,
        usable_for_homography: false,
    });

    Ok(KeypointLayout {
        template: template.clone(),
        spec: *spec,
        entries,
    })
}

/// Class permutation induced by mirroring the image left-right:
/// `perm[id]` is the class that `id` becomes after the flip.
pub fn flip_permutation(layout: &KeypointLayout) -> Vec<usize> {
    let cols = layout.spec.cols;
    let court = layout.spec.num_court_points();
    let baskets: Vec<usize> = layout.basket_ids().collect();
    (0..layout.num_classes())
        .map(|id| {
            if id < court {
                let (row, col) = (id / cols, id % cols);
                row * cols + (cols - 1 - col)
            } else if let [a, b] = baskets[..] {
                if id == a {
                    b
                } else if id == b {
                    a
                } else {
                    id
                }
            } else {
                id
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaps(offsets: &[f64]) -> Vec<f64> {
        offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    #[test]
    fn offsets_default_progression() {
        let off = perspective_offsets(1500.0, 7, 175.0).unwrap();
        let expected = [0.0, 175.0, 380.0, 615.0, 880.0, 1175.0, 1500.0];
        for (a, b) in off.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{off:?}");
        }
        assert!((common_difference(1500.0, 7, 175.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn offsets_uniform_when_w0_matches_mean_gap() {
        let off = perspective_offsets(1500.0, 7, 250.0).unwrap();
        assert_eq!(common_difference(1500.0, 7, 250.0), 0.0);
        for g in gaps(&off) {
            assert!((g - 250.0).abs() < 1e-9);
        }
    }

    #[test]
    fn offsets_three_rows() {
        let off = perspective_offsets(1000.0, 3, 400.0).unwrap();
        assert_eq!(off, vec![0.0, 400.0, 1000.0]);
        // r = 2 * (500 - 900) = -800, second gap 100 is still positive
        let off = perspective_offsets(1000.0, 3, 900.0).unwrap();
        assert!((off[1] - 900.0).abs() < 1e-9);
    }

    #[test]
    fn offsets_reject_negative_gap() {
        match perspective_offsets(1000.0, 3, 1100.0) {
            Err(Error::NonPositiveGap { index, gap }) => {
                assert_eq!(index, 1);
                assert!((gap + 100.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offsets_reject_too_few_rows() {
        assert!(matches!(
            perspective_offsets(1500.0, 2, 175.0),
            Err(Error::InvalidSampling(_))
        ));
        assert!(perspective_offsets(1500.0, 7, 0.0).is_err());
        assert!(perspective_offsets(-1.0, 7, 10.0).is_err());
    }

    #[test]
    fn default_layout_shape() {
        let layout = KeypointLayout::default();
        assert_eq!(layout.num_classes(), 94);
        assert_eq!(layout.court_points().count(), 91);
        assert_eq!(layout.basket_ids().collect::<Vec<_>>(), vec![91, 92]);
        assert_eq!(layout.background_id(), 93);
        let xy = |id: usize| layout.entry(id).unwrap().court_xy_cm.unwrap();
        assert_eq!(xy(0), [0.0, 0.0]);
        assert_eq!(xy(12), [2800.0, 0.0]);
        assert_eq!(xy(90), [2800.0, 1500.0]);
        for col in 0..13 {
            assert!((xy(13 + col)[1] - 175.0).abs() < 1e-9);
        }
    }

    #[test]
    fn camera_side_y_max_mirrors_rows() {
        let spec = SamplingSpec {
            camera_side: CameraSide::YMax,
            ..SamplingSpec::default()
        };
        let layout = build_layout(&CourtTemplate::default(), &spec).unwrap();
        let xy = |id: usize| layout.entry(id).unwrap().court_xy_cm.unwrap();
        assert_eq!(xy(0), [0.0, 1500.0]);
        assert!((xy(13)[1] - 1325.0).abs() < 1e-9);
    }

    #[test]
    fn flip_examples() {
        let layout = KeypointLayout::default();
        let perm = flip_permutation(&layout);
        assert_eq!(perm[0], 12);
        assert_eq!(perm[12], 0);
        assert_eq!(perm[91], 92);
        assert_eq!(perm[92], 91);
        assert_eq!(perm[93], 93);
        for (id, &p) in perm.iter().enumerate() {
            assert_eq!(perm[p], id);
        }
    }

    #[test]
    fn flip_mirrors_court_positions() {
        let layout = KeypointLayout::default();
        let perm = flip_permutation(&layout);
        for (id, [x, y]) in layout.court_points() {
            let e = layout.entry(perm[id]).unwrap();
            assert_eq!(e.role, ClassRole::Court);
            let [fx, fy] = e.court_xy_cm.unwrap();
            assert!((fx - (2800.0 - x)).abs() < 1e-9);
            assert_eq!(fy, y);
        }
    }

    #[test]
    fn template_rejects_out_of_court_line() {
        let mut t = CourtTemplate::default();
        t.lines.push(CourtLine::Segment {
            from: [0.0, 0.0],
            to: [2900.0, 0.0],
        });
        assert!(matches!(t.validate(), Err(Error::InvalidTemplate(_))));
        let mut t = CourtTemplate::default();
        t.lines.push(CourtLine::Arc {
            center: [1400.0, 750.0],
            radius_cm: 180.0,
            start_deg: 0.0,
            end_deg: 360.0,
        });
        t.validate().unwrap();
    }

    #[test]
    fn layout_json_roundtrip_and_validation() {
        let layout = KeypointLayout::default();
        let json = serde_json::to_string(&layout).unwrap();
        let back: KeypointLayout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layout);

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["entries"][91]["usable"] = serde_json::Value::Bool(true);
        assert!(serde_json::from_value::<KeypointLayout>(v).is_err());
    }

    #[test]
    fn layout_json_field_names() {
        let v = serde_json::to_value(KeypointLayout::default()).unwrap();
        assert_eq!(v["spec"]["camera_side"], "y_zero");
        assert_eq!(v["spec"]["rows"], 7);
        assert_eq!(v["entries"][0]["role"], "court");
        assert_eq!(v["entries"][93]["xy_cm"], serde_json::Value::Null);
        assert_eq!(v["template"]["lines"][0]["kind"], "segment");
    }
}
