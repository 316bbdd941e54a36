use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChartError, ChartMask, ChartType, Mark};
use crate::raster::{BinaryGrid, FloatGrid};

/// Largest tolerated movement of a bar's value edge or a line's per-column
/// centroid, in pixels.
pub const INTEGRITY_LIMIT_PX: f64 = 2.0;

/// Fraction of a line's columns that must keep foreground after augmenting.
const MIN_LINE_COVERAGE: f64 = 0.9;

/// Shape augmentations for chart masks.
///
/// Safe ranges: Gaussian `sigma` in [0, 3] px; motion blur `length` in
/// [0, 9] px at any `angle` in [0, π); warp `amplitude` in [0, 4] px with
/// `wavelength` of at least 64 px. The warp amplitude is peak-to-peak: the
/// vertical displacement is `amplitude / 2 · sin(2πx / wavelength + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    GaussianBlur { sigma: f64 },
    MotionBlur { length: f64, angle: f64 },
    Warp { amplitude: f64, wavelength: f64 },
}

impl AugmentOp {
    pub const MAX_SIGMA: f64 = 3.0;
    pub const MAX_MOTION_LENGTH: f64 = 9.0;
    pub const MAX_WARP_AMPLITUDE: f64 = 4.0;
    pub const MIN_WARP_WAVELENGTH: f64 = 64.0;
    pub const MAX_WARP_WAVELENGTH: f64 = 256.0;

    /// Draws an operation uniformly within the safe ranges.
    pub fn sample(rng: &mut impl Rng) -> AugmentOp {
        match rng.random_range(0..3) {
            0 => AugmentOp::GaussianBlur {
                sigma: rng.random_range(0.0..=Self::MAX_SIGMA),
            },
            1 => AugmentOp::MotionBlur {
                length: rng.random_range(0.0..=Self::MAX_MOTION_LENGTH),
                angle: rng.random_range(0.0..PI),
            },
            _ => AugmentOp::Warp {
                amplitude: rng.random_range(0.0..=Self::MAX_WARP_AMPLITUDE),
                wavelength: rng.random_range(Self::MIN_WARP_WAVELENGTH..=Self::MAX_WARP_WAVELENGTH),
            },
        }
    }

    pub fn within_safe_range(&self) -> bool {
        match *self {
            AugmentOp::GaussianBlur { sigma } => (0.0..=Self::MAX_SIGMA).contains(&sigma),
            AugmentOp::MotionBlur { length, angle } => {
                (0.0..=Self::MAX_MOTION_LENGTH).contains(&length) && (0.0..PI).contains(&angle)
            }
            AugmentOp::Warp {
                amplitude,
                wavelength,
            } => (0.0..=Self::MAX_WARP_AMPLITUDE).contains(&amplitude) && wavelength >= Self::MIN_WARP_WAVELENGTH,
        }
    }

    /// Same operation at half strength.
    pub fn halved(&self) -> AugmentOp {
        match *self {
            AugmentOp::GaussianBlur { sigma } => AugmentOp::GaussianBlur { sigma: sigma / 2.0 },
            AugmentOp::MotionBlur { length, angle } => AugmentOp::MotionBlur {
                length: length / 2.0,
                angle,
            },
            AugmentOp::Warp {
                amplitude,
                wavelength,
            } => AugmentOp::Warp {
                amplitude: amplitude / 2.0,
                wavelength,
            },
        }
    }

    fn validate(&self) -> Result<(), ChartError> {
        let ok = match *self {
            AugmentOp::GaussianBlur { sigma } => sigma >= 0.0 && sigma.is_finite(),
            AugmentOp::MotionBlur { length, angle } => length >= 0.0 && length.is_finite() && angle.is_finite(),
            AugmentOp::Warp {
                amplitude,
                wavelength,
            } => amplitude >= 0.0 && amplitude.is_finite() && wavelength > 0.0 && wavelength.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ChartError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Applies one augmentation, re-binarizes at 0.5 and checks the
/// data-integrity guard. `seed` only drives the warp phase.
pub fn augment(mask: &ChartMask, op: &AugmentOp, seed: u64) -> Result<ChartMask, ChartError> {
    op.validate()?;
    let src = mask.pixels.to_float();
    let out = match *op {
        AugmentOp::GaussianBlur { sigma } => {
            if sigma == 0.0 {
                return Ok(mask.clone());
            }
            gaussian_blur(&src, sigma)
        }
        AugmentOp::MotionBlur { length, angle } => motion_blur(&src, length, angle),
        AugmentOp::Warp {
            amplitude,
            wavelength,
        } => {
            let phase = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..TAU);
            warp(&src, amplitude, wavelength, phase)
        }
    };
    let pixels = out.binarize(0.5);
    let shift = integrity_shift(mask, &pixels);
    if shift > INTEGRITY_LIMIT_PX {
        return Err(ChartError::IntegrityViolated {
            shift,
            limit: INTEGRITY_LIMIT_PX,
        });
    }
    Ok(mask.with_pixels(pixels))
}

fn gaussian_blur(src: &FloatGrid, sigma: f64) -> FloatGrid {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (w, h) = src.dims();
    let read = |g: &FloatGrid, x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            g.get(x as u32, y as u32)
        }
    };
    let horizontal = FloatGrid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wt)| wt * read(src, x as i64 + k as i64 - radius, y as i64))
            .sum()
    });
    FloatGrid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wt)| wt * read(&horizontal, x as i64, y as i64 + k as i64 - radius))
            .sum()
    })
}

fn motion_blur(src: &FloatGrid, length: f64, angle: f64) -> FloatGrid {
    let taps = (length.ceil() as usize).max(1);
    let step = length / taps as f64;
    let (dx, dy) = (angle.cos(), angle.sin());
    let offsets: Vec<f64> = (0..taps)
        .map(|k| -length / 2.0 + step * (k as f64 + 0.5))
        .collect();
    let (w, h) = src.dims();
    FloatGrid::from_fn(w, h, |x, y| {
        offsets
            .iter()
            .map(|t| src.sample_zero_fill(x as f64 + t * dx, y as f64 + t * dy))
            .sum::<f64>()
            / taps as f64
    })
}

fn warp(src: &FloatGrid, amplitude: f64, wavelength: f64, phase: f64) -> FloatGrid {
    let (w, h) = src.dims();
    let shifts: Vec<f64> = (0..w)
        .map(|x| amplitude / 2.0 * (TAU * (x as f64 + 0.5) / wavelength + phase).sin())
        .collect();
    FloatGrid::from_fn(w, h, |x, y| src.sample_zero_fill(x as f64, y as f64 - shifts[x as usize]))
}

/// Largest data-edge displacement between a mask and an augmented raster:
/// bar value edges (median over each bar's columns) and line centroids
/// (median of the per-column centroid shifts). Pie and scatter masks carry no positional guard and report 0.
pub fn integrity_shift(before: &ChartMask, after: &BinaryGrid) -> f64 {
    match before.geometry.chart_type {
        ChartType::Bar => bar_edge_shift(before, after),
        ChartType::Line => line_centroid_shift(&before.pixels, after),
        ChartType::Pie | ChartType::Scatter => 0.0,
    }
}

fn bar_edge_shift(before: &ChartMask, after: &BinaryGrid) -> f64 {
    let (w, h) = before.pixels.dims();
    let baseline = before.geometry.baseline.unwrap_or(h as f64).round().clamp(0.0, h as f64) as u32;
    let mut worst: f64 = 0.0;
    for mark in &before.geometry.marks {
        let Mark::BarRect(r) = mark else { continue };
        let c0 = (r.x - 0.5).ceil().max(0.0) as u32;
        let c1 = ((r.right() - 0.5).floor() as i64).min(w as i64 - 1);
        if c1 < c0 as i64 {
            continue;
        }
        let upward = r.y < baseline as f64;
        let edge = |grid: &BinaryGrid| -> f64 {
            let mut rows: Vec<u32> = (c0..=c1 as u32)
                .map(|x| {
                    if upward {
                        (0..baseline).find(|&y| grid.get(x, y)).unwrap_or(baseline)
                    } else {
                        (baseline..h).rev().find(|&y| grid.get(x, y)).map_or(baseline, |y| y + 1)
                    }
                })
                .collect();
            rows.sort_unstable();
            rows[rows.len() / 2] as f64
        };
        worst = worst.max((edge(&before.pixels) - edge(after)).abs());
    }
    worst
}

fn column_centroid(grid: &BinaryGrid, x: u32) -> Option<f64> {
    let (sum, n) = (0..grid.height())
        .filter(|&y| grid.get(x, y))
        .fold((0.0, 0usize), |(s, n), y| (s + y as f64, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn line_centroid_shift(before: &BinaryGrid, after: &BinaryGrid) -> f64 {
    let mut defined = 0usize;
    let mut shifts = Vec::new();
    for x in 0..before.width() {
        let Some(b) = column_centroid(before, x) else { continue };
        defined += 1;
        if let Some(a) = column_centroid(after, x) {
            shifts.push((a - b).abs());
        }
    }
    if defined > 0 && (shifts.len() as f64) < MIN_LINE_COVERAGE * defined as f64 {
        return f64::INFINITY;
    }
    if shifts.is_empty() {
        return 0.0;
    }
    shifts.sort_unstable_by(f64::total_cmp);
    shifts[shifts.len() / 2]
}
