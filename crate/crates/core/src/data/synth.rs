//! Seeded synthetic datasets for fast, network-free experiments.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixedpoint::{quantize_raw, QFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SynthKind {
    /// 4 classes in 16 dimensions, each class a mixture of two Gaussian blobs.
    Blobs,
    /// Two-input XOR; the first four samples are the exact corners.
    Xor,
    /// 8x8 images: "faces" (two eyes above a mouth) against scrambled parts.
    FaceLike,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Blobs => "blobs",
            SynthKind::Xor => "xor",
            SynthKind::FaceLike => "face-like",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SynthKind::Blobs),
            "xor" => Ok(SynthKind::Xor),
            "face-like" | "face" | "facelike" => Ok(SynthKind::FaceLike),
            other => Err(Error::Precondition(format!(
                "unknown synthetic dataset {other:?}"
            ))),
        }
    }
}

pub fn synth_dataset(kind: SynthKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Precondition("synthetic dataset needs n > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dim, classes, reals, labels) = match kind {
        SynthKind::Xor => xor(n, &mut rng),
        SynthKind::Blobs => blobs(n, &mut rng),
        SynthKind::FaceLike => face_like(n, &mut rng),
    };
    let fmt = QFormat::INPUT;
    let inputs = reals.iter().map(|&x| quantize_raw(x, fmt) as u16).collect();
    Dataset::new(
        format!("synth:{kind}:{n}:{seed}"),
        fmt,
        dim,
        classes,
        inputs,
        labels,
    )
}

/// Balanced labels in a seeded random order.
fn balanced_labels(n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
    labels.shuffle(rng);
    labels
}

type Generated = (usize, usize, Vec<f64>, Vec<u8>);

fn xor(n: usize, rng: &mut ChaCha8Rng) -> Generated {
    const CORNERS: [(f64, f64, u8); 4] =
        [(0.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)];
    let noise = Normal::new(0.0, 0.08).unwrap();
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, label) = CORNERS[i % 4];
        if i < 4 {
            x.extend([a, b]);
        } else {
            x.extend([a + noise.sample(rng), b + noise.sample(rng)]);
        }
        y.push(label);
    }
    (2, 2, x, y)
}

const BLOB_LAYOUT_SEED: u64 = 0x5eed_b10b;

fn blobs(n: usize, rng: &mut ChaCha8Rng) -> Generated {
    const DIM: usize = 16;
    const CLASSES: usize = 4;
    const MODES: usize = 2;
    // The class layout is fixed so that splits drawn with different seeds
    // share one distribution; the seed only drives sampling.
    let mut layout = ChaCha8Rng::seed_from_u64(BLOB_LAYOUT_SEED);
    let centers: Vec<Vec<f64>> = (0..CLASSES * MODES)
        .map(|_| (0..DIM).map(|_| layout.gen_range(0.15..0.85)).collect())
        .collect();
    let noise = Normal::new(0.0, 0.16).unwrap();
    let labels = balanced_labels(n, CLASSES, rng);
    let mut x = Vec::with_capacity(DIM * n);
    for &label in &labels {
        let mode = rng.gen_range(0..MODES);
        let c = &centers[usize::from(label) * MODES + mode];
        x.extend(c.iter().map(|&m| m + noise.sample(rng)));
    }
    (DIM, CLASSES, x, labels)
}

const SIDE: usize = 8;

fn stamp(img: &mut [f64], row: isize, col: isize, h: isize, w: isize, value: f64) {
    for r in row..row + h {
        for c in col..col + w {
            if (0..SIDE as isize).contains(&r) && (0..SIDE as isize).contains(&c) {
                img[r as usize * SIDE + c as usize] = value;
            }
        }
    }
}

fn face_like(n: usize, rng: &mut ChaCha8Rng) -> Generated {
    let pixel_noise = Normal::new(0.0, 0.14).unwrap();
    let labels = balanced_labels(n, 2, rng);
    let mut x = Vec::with_capacity(SIDE * SIDE * n);
    for &label in &labels {
        let background = rng.gen_range(0.45..0.8);
        let dark = background - rng.gen_range(0.25..0.45);
        let mut img = vec![background; SIDE * SIDE];
        let dr = rng.gen_range(-1isize..=1);
        let dc = rng.gen_range(-1isize..=1);
        if label == 1 {
            // Two eyes on one row, mouth centred below them.
            let gap = rng.gen_range(3isize..=4);
            stamp(&mut img, 1 + dr, 1 + dc, 2, 2, dark);
            stamp(&mut img, 1 + dr, 1 + dc + gap, 2, 2, dark);
            stamp(&mut img, 5 + dr, 2 + dc, 1, 3 + gap / 4, dark);
        } else {
            // The same parts in a broken arrangement.
            match rng.gen_range(0..4) {
                0 => {
                    // mouth above the eyes
                    stamp(&mut img, 1 + dr, 2 + dc, 1, 4, dark);
                    stamp(&mut img, 4 + dr, 1 + dc, 2, 2, dark);
                    stamp(&mut img, 4 + dr, 5 + dc, 2, 2, dark);
                }
                1 => {
                    // eyes stacked vertically
                    stamp(&mut img, 1 + dr, 2 + dc, 2, 2, dark);
                    stamp(&mut img, 4 + dr, 2 + dc, 2, 2, dark);
                    stamp(&mut img, 3 + dr, 5 + dc, 1, 3, dark);
                }
                2 => {
                    // one eye missing
                    stamp(&mut img, 1 + dr, 1 + dc + rng.gen_range(0..=4), 2, 2, dark);
                    stamp(&mut img, 5 + dr, 2 + dc, 1, 4, dark);
                }
                _ => {
                    // three blobs at random
                    for _ in 0..3 {
                        let r = rng.gen_range(0..SIDE as isize - 1);
                        let c = rng.gen_range(0..SIDE as isize - 1);
                        stamp(&mut img, r, c, 2, 2, dark);
                    }
                }
            }
        }
        x.extend(img.iter().map(|&p| p + pixel_noise.sample(rng)));
    }
    (SIDE * SIDE, 2, x, labels)
}
