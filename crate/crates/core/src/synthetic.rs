//! Toy face / non-face windows for exercising the trainer.
//!
//! A "face" is a bright oval with two dark eye blobs, a brighter nose bridge
//! and a dark mouth bar, under random gain, offset, jitter and noise.
//! Non-faces mix noise, gradients, stripes, random blocks, blobs and
//! face-like distractors (flipped layout, missing eyes).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::GrayImage;

fn ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
}

fn finish(rng: &mut impl Rng, side: u32, noise: f64, f: impl Fn(f64, f64) -> f64) -> GrayImage {
    let vals: Vec<f64> = (0..side * side)
        .map(|i| {
            let (x, y) = ((i % side) as f64 + 0.5, (i / side) as f64 + 0.5);
            f(x, y) + rng.random_range(-noise..=noise)
        })
        .collect();
    GrayImage::new(side, side, vals.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()).expect("square buffer")
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Face,
    /// Mouth above the eyes.
    Flipped,
    /// Oval and mouth, no eyes.
    NoEyes,
    /// Only the left eye.
    OneEye,
}

fn face_like(rng: &mut impl Rng, side: u32, layout: Layout) -> GrayImage {
    let u = side as f64 / 24.0;
    let base = rng.random_range(70.0..170.0);
    let contrast = rng.random_range(30.0..60.0);
    let dx = rng.random_range(-1.0..=1.0) * u;
    let dy = rng.random_range(-1.0..=1.0) * u;
    let bg = base - contrast * rng.random_range(0.4..1.0);
    let noise = rng.random_range(2.0..10.0);
    let (eye_y, mouth_y) = if layout == Layout::Flipped { (16.0, 6.0) } else { (9.0, 17.0) };
    finish(rng, side, noise, move |x, y| {
        let (x, y) = (x - dx, y - dy);
        if !ellipse(x, y, 12.0 * u, 12.5 * u, 10.0 * u, 12.0 * u) {
            return bg;
        }
        let left_eye = ellipse(x, y, 7.5 * u, eye_y * u, 3.0 * u, 1.8 * u);
        let right_eye = ellipse(x, y, 16.5 * u, eye_y * u, 3.0 * u, 1.8 * u);
        let eye = match layout {
            Layout::NoEyes => false,
            Layout::OneEye => left_eye,
            _ => left_eye || right_eye,
        };
        if eye {
            base - contrast
        } else if layout != Layout::Flipped && (10.5 * u..13.5 * u).contains(&x) && (8.0 * u..15.0 * u).contains(&y) {
            base + 0.6 * contrast
        } else if (8.0 * u..16.0 * u).contains(&x) && (mouth_y * u..(mouth_y + 2.0) * u).contains(&y) {
            base - 0.8 * contrast
        } else {
            base + 0.3 * contrast
        }
    })
}

/// A face-like window of `side`×`side` pixels.
pub fn face_window(rng: &mut impl Rng, side: u32) -> GrayImage {
    face_like(rng, side, Layout::Face)
}

/// A window drawn from one of several non-face texture families.
pub fn nonface_window(rng: &mut impl Rng, side: u32) -> GrayImage {
    let s = side as f64;
    let base = rng.random_range(40.0..200.0);
    let amp = rng.random_range(10.0..70.0);
    match rng.random_range(0..8) {
        5 => face_like(rng, side, Layout::Flipped),
        6 => face_like(rng, side, Layout::NoEyes),
        7 => face_like(rng, side, Layout::OneEye),
        0 => finish(rng, side, amp, move |_, _| base),
        1 => {
            let (gx, gy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            finish(rng, side, 6.0, move |x, y| base + amp * (gx * (x / s - 0.5) + gy * (y / s - 0.5)) * 2.0)
        }
        2 => {
            let period = rng.random_range(3.0..12.0);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (c, sn) = (theta.cos(), theta.sin());
            finish(rng, side, 6.0, move |x, y| base + amp * ((x * c + y * sn) * std::f64::consts::TAU / period).sin())
        }
        3 => {
            let blocks: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(1..5))
                .map(|_| {
                    let (x0, y0) = (rng.random_range(0.0..s), rng.random_range(0.0..s));
                    (x0, y0, x0 + rng.random_range(2.0..s), y0 + rng.random_range(2.0..s), rng.random_range(-1.0..1.0) * amp)
                })
                .collect();
            finish(rng, side, 6.0, move |x, y| {
                base + blocks.iter().filter(|b| x >= b.0 && x < b.2 && y >= b.1 && y < b.3).map(|b| b.4).sum::<f64>()
            })
        }
        _ => {
            let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..6))
                .map(|_| (rng.random_range(0.0..s), rng.random_range(0.0..s), rng.random_range(1.5..s / 3.0), rng.random_range(-1.0..1.0) * amp))
                .collect();
            finish(rng, side, 6.0, move |x, y| {
                base + blobs.iter().filter(|b| ellipse(x, y, b.0, b.1, b.2, b.2)).map(|b| b.3).sum::<f64>()
            })
        }
    }
}

/// `n_pos` faces and `n_neg` non-faces, reproducible from `seed`.
pub fn sample_set(seed: u64, side: u32, n_pos: usize, n_neg: usize) -> (Vec<GrayImage>, Vec<GrayImage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = (0..n_pos).map(|_| face_window(&mut rng, side)).collect();
    let neg = (0..n_neg).map(|_| nonface_window(&mut rng, side)).collect();
    (pos, neg)
}
