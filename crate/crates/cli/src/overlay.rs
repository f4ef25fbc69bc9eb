//! Static per-frame skeleton renderings with track id labels.

use std::path::Path;

use image::{Rgb, RgbImage};
use posetrack::skeleton::{Pose, SkeletonSpec};

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

/// 3x5 digit glyphs, one row per entry, high bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const GLYPH_SCALE: i64 = 2;

pub fn color(track_id: Option<u64>) -> Rgb<u8> {
    match track_id {
        Some(id) => Rgb(PALETTE[(id % PALETTE.len() as u64) as usize]),
        None => Rgb([200, 200, 200]),
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham line, clipped per pixel.
pub fn line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), c: Rgb<u8>) {
    let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
    let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, c);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn dot(img: &mut RgbImage, at: (f64, f64), c: Rgb<u8>) {
    let (x, y) = (at.0.round() as i64, at.1.round() as i64);
    for v in -1..=1 {
        for u in -1..=1 {
            put(img, x + u, y + v, c);
        }
    }
}

pub fn label(img: &mut RgbImage, x: i64, y: i64, text: &str, c: Rgb<u8>) {
    let mut cx = x;
    for ch in text.chars() {
        if let Some(d) = ch.to_digit(10) {
            for (row, bits) in DIGITS[d as usize].iter().enumerate() {
                for col in 0..3 {
                    if bits & (0b100 >> col) != 0 {
                        for v in 0..GLYPH_SCALE {
                            for u in 0..GLYPH_SCALE {
                                put(img, cx + col * GLYPH_SCALE + u, y + row as i64 * GLYPH_SCALE + v, c);
                            }
                        }
                    }
                }
            }
        }
        cx += 4 * GLYPH_SCALE;
    }
}

pub fn draw_pose(img: &mut RgbImage, pose: &Pose, spec: &SkeletonSpec, track_id: Option<u64>) {
    let c = color(track_id);
    for &(a, b) in &spec.edges {
        if let (Some(p), Some(q)) = (pose.keypoints[a], pose.keypoints[b]) {
            line(img, (p.x, p.y), (q.x, q.y), c);
        }
    }
    for k in pose.keypoints.iter().flatten() {
        dot(img, (k.x, k.y), c);
    }
    if let Some(id) = track_id {
        let x = pose.bbox.x_min.round() as i64;
        let y = pose.bbox.y_min.round() as i64 - 6 * GLYPH_SCALE;
        label(img, x, y.max(0), &id.to_string(), c);
    }
}

pub fn render(width: u32, height: u32, poses: &[(Option<u64>, &Pose)], spec: &SkeletonSpec) -> RgbImage {
    let mut img = RgbImage::new(width, height);
    for (id, pose) in poses {
        draw_pose(&mut img, pose, spec, *id);
    }
    img
}

pub fn save(img: &RgbImage, path: &Path) -> Result<(), image::ImageError> {
    img.save_with_format(path, image::ImageFormat::Png)
}
