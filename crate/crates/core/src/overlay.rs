//! Draws court markings onto an image through a court-to-image homography.

use image::{Rgb, RgbImage};

use crate::court::CourtTemplate;
use crate::homography::Homography;

pub const LINE_COLOR: Rgb<u8> = Rgb([255, 0, 255]);
pub const STROKE_PX: u32 = 2;

const SAMPLE_STEP_CM: f64 = 5.0;

fn stamp(img: &mut RgbImage, x: f64, y: f64, stroke: u32, color: Rgb<u8>) {
    let half = stroke as f64 / 2.0;
    let x0 = (x - half).round() as i64;
    let y0 = (y - half).round() as i64;
    for dy in 0..stroke as i64 {
        for dx in 0..stroke as i64 {
            let (px, py) = (x0 + dx, y0 + dy);
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, color);
            }
        }
    }
}

/// Rasterizes every template line through `h`. Pieces that leave the
/// visible half-plane or map to infinity are skipped.
pub fn draw_template(
    img: &mut RgbImage,
    h: &Homography,
    template: &CourtTemplate,
    stroke: u32,
    color: Rgb<u8>,
) {
    let limit = 4.0 * (img.width().max(img.height()) as f64);
    for line in &template.lines {
        let pts: Vec<Option<[f64; 2]>> = line
            .polyline(SAMPLE_STEP_CM)
            .into_iter()
            .map(|c| {
                if h.projective_depth(c) <= 0.0 {
                    return None;
                }
                h.apply(c).ok().filter(|p| p[0].abs() < limit && p[1].abs() < limit)
            })
            .collect();
        for pair in pts.windows(2) {
            let (Some(a), Some(b)) = (pair[0], pair[1]) else {
                continue;
            };
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let steps = (len * 2.0).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                stamp(
                    img,
                    a[0] + t * (b[0] - a[0]),
                    a[1] + t * (b[1] - a[1]),
                    stroke,
                    color,
                );
            }
        }
    }
}
