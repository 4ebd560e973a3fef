//! Seeded synthetic datasets in IDX layout: stroke-rendered handwritten-style
//! digits and smiley faces. Keeps the full pipeline runnable on machines
//! without the reference image corpora.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

type Point = (f64, f64);

/// Renders `count` samples of `size x size` grayscale images with labels.
pub fn generate(
    kind: &str,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<(Vec<Vec<u8>>, Vec<u8>), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = (i % 10) as u8;
        let strokes = match kind {
            "digits" => digit_strokes(label, &mut rng),
            "smileys" => smiley_strokes(label, &mut rng),
            other => {
                return Err(CliError::Config(format!("unknown synth kind {:?}", other)))
            }
        };
        let thickness = 0.05 + rng.gen::<f64>() * 0.03;
        images.push(rasterize(&strokes, size, thickness));
        labels.push(label);
    }
    Ok((images, labels))
}

pub fn write_idx_images(
    path: &Path,
    images: &[Vec<u8>],
    size: usize,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&0x0000_0803u32.to_be_bytes())?;
    file.write_all(&(images.len() as u32).to_be_bytes())?;
    file.write_all(&(size as u32).to_be_bytes())?;
    file.write_all(&(size as u32).to_be_bytes())?;
    for img in images {
        file.write_all(img)?;
    }
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&0x0000_0801u32.to_be_bytes())?;
    file.write_all(&(labels.len() as u32).to_be_bytes())?;
    file.write_all(labels)?;
    Ok(())
}

/// Distance-to-stroke rasterizer with half-pixel anti-aliasing.
fn rasterize(strokes: &[Vec<Point>], size: usize, thickness: f64) -> Vec<u8> {
    let aa = 0.75 / size as f64;
    let mut out = Vec::with_capacity(size * size);
    for py in 0..size {
        for px in 0..size {
            let p = ((px as f64 + 0.5) / size as f64, (py as f64 + 0.5) / size as f64);
            let mut d = f64::INFINITY;
            for stroke in strokes {
                for seg in stroke.windows(2) {
                    d = d.min(segment_distance(p, seg[0], seg[1]));
                }
            }
            let v = ((thickness - d) / aa).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 { ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (dx, dy) = (p.0 - (a.0 + t * abx), p.1 - (a.1 + t * aby));
    (dx * dx + dy * dy).sqrt()
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64, n: usize) -> Vec<Point> {
    (0..=n)
        .map(|i| {
            let a = a0 + (a1 - a0) * i as f64 / n as f64;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn jitter(strokes: Vec<Vec<Point>>, rng: &mut ChaCha8Rng) -> Vec<Vec<Point>> {
    use std::f64::consts::TAU;
    let angle = (rng.gen::<f64>() - 0.5) * 0.24;
    let scale_x = 0.78 + rng.gen::<f64>() * 0.26;
    let scale_y = 0.78 + rng.gen::<f64>() * 0.26;
    let shear = (rng.gen::<f64>() - 0.5) * 0.2;
    let dx = (rng.gen::<f64>() - 0.5) * 0.12;
    let dy = (rng.gen::<f64>() - 0.5) * 0.12;
    let (sin, cos) = (angle % TAU).sin_cos();
    strokes
        .into_iter()
        .map(|stroke| {
            stroke
                .into_iter()
                .map(|(x, y)| {
                    let (x, y) = (x - 0.5, y - 0.5);
                    let (x, y) = (x + shear * y, y);
                    let (x, y) = (x * scale_x, y * scale_y);
                    let (x, y) = (x * cos - y * sin, x * sin + y * cos);
                    (x + 0.5 + dx, y + 0.5 + dy)
                })
                .collect()
        })
        .collect()
}

fn digit_strokes(digit: u8, rng: &mut ChaCha8Rng) -> Vec<Vec<Point>> {
    use std::f64::consts::TAU;
    let strokes: Vec<Vec<Point>> = match digit {
        0 => vec![ellipse(0.5, 0.5, 0.26, 0.38, 0.0, TAU, 24)],
        1 => vec![vec![(0.4, 0.24), (0.55, 0.1), (0.55, 0.9)]],
        2 => vec![vec![
            (0.27, 0.3),
            (0.32, 0.14),
            (0.5, 0.1),
            (0.68, 0.17),
            (0.71, 0.34),
            (0.58, 0.52),
            (0.4, 0.68),
            (0.27, 0.88),
            (0.75, 0.88),
        ]],
        3 => vec![vec![
            (0.3, 0.16),
            (0.5, 0.1),
            (0.66, 0.2),
            (0.66, 0.32),
            (0.49, 0.46),
            (0.66, 0.58),
            (0.66, 0.76),
            (0.5, 0.9),
            (0.3, 0.84),
        ]],
        4 => vec![
            vec![(0.62, 0.1), (0.26, 0.6), (0.78, 0.6)],
            vec![(0.62, 0.32), (0.62, 0.9)],
        ],
        5 => vec![vec![
            (0.7, 0.12),
            (0.32, 0.12),
            (0.29, 0.45),
            (0.5, 0.4),
            (0.68, 0.5),
            (0.69, 0.72),
            (0.52, 0.88),
            (0.3, 0.8),
        ]],
        6 => vec![vec![
            (0.64, 0.12),
            (0.44, 0.2),
            (0.32, 0.44),
            (0.3, 0.68),
            (0.44, 0.88),
            (0.62, 0.83),
            (0.7, 0.66),
            (0.6, 0.5),
            (0.43, 0.5),
            (0.33, 0.62),
        ]],
        7 => vec![
            vec![(0.26, 0.12), (0.74, 0.12), (0.45, 0.9)],
            vec![(0.38, 0.5), (0.6, 0.5)],
        ],
        8 => vec![
            ellipse(0.5, 0.3, 0.19, 0.18, 0.0, TAU, 20),
            ellipse(0.5, 0.67, 0.23, 0.21, 0.0, TAU, 20),
        ],
        _ => vec![
            ellipse(0.53, 0.32, 0.2, 0.2, 0.0, TAU, 20),
            vec![(0.73, 0.34), (0.69, 0.62), (0.58, 0.9)],
        ],
    };
    jitter(strokes, rng)
}

/// Faces with label-dependent mouth curvature and eye style, ten variants.
fn smiley_strokes(variant: u8, rng: &mut ChaCha8Rng) -> Vec<Vec<Point>> {
    use std::f64::consts::TAU;
    let curve = [-0.14, -0.07, 0.0, 0.08, 0.16][(variant % 5) as usize];
    let line_eyes = variant >= 5;
    let r = 0.36 + (rng.gen::<f64>() - 0.5) * 0.05;
    let mut strokes = vec![ellipse(0.5, 0.5, r, r, 0.0, TAU, 28)];
    for &ex in &[0.38, 0.62] {
        if line_eyes {
            strokes.push(vec![(ex, 0.36), (ex, 0.46)]);
        } else {
            strokes.push(ellipse(ex, 0.4, 0.035, 0.035, 0.0, TAU, 8));
        }
    }
    let mouth: Vec<Point> = (0..=10)
        .map(|i| {
            let t = i as f64 / 10.0;
            let x = 0.34 + 0.32 * t;
            let y = 0.66 + curve * (4.0 * t * (1.0 - t) - 0.5);
            (x, y)
        })
        .collect();
    strokes.push(mouth);
    jitter(strokes, rng)
}
