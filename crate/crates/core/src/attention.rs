//! Attention-side image math.
//!
//! * scaled dot-product cross-attention (`softmax(QKᵀ/√d)·V`);
//! * the strict above-mean object mask of an `N×N` token attention grid and
//!   its application to a generated image;
//! * object refinement through a segmentation provider;
//! * foreground condition fusion: a dense rotation/scale search that places
//!   the attention map inside the chart mask;
//! * background condition fusion from the attention-weighted dominant colour.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{ChartGeometry, ChartMask, Mark, Point};
use crate::raster::{BinaryGrid, FloatGrid, RasterImage, Rgb};

/// Side of the middle-layer attention grid.
pub const GRID_SIDE: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image must be square, got {width}x{height}")]
    NonSquareImage { width: u32, height: u32 },
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("invalid attention grid: {0}")]
    InvalidGrid(String),
    #[error("object has already been refined")]
    NotCoarse,
    #[error("segmentation provider unavailable: {0}")]
    ProviderUnavailable(String),
}

pub struct AttentionInputs {
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Projection width used in the `1/√d` scaling.
    pub d: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionOutput {
    /// `scores · V`, `n_q × c`.
    pub output: DMatrix<f64>,
    /// Row-stochastic `n_q × n_k`.
    pub scores: DMatrix<f64>,
}

pub fn cross_attention(inputs: &AttentionInputs) -> Result<AttentionOutput, AttentionError> {
    let AttentionInputs { q, k, v, d } = inputs;
    if *d == 0 {
        return Err(AttentionError::DimensionMismatch("d must be at least 1".into()));
    }
    if q.ncols() != *d || k.ncols() != *d {
        return Err(AttentionError::DimensionMismatch(format!(
            "Q is {}x{}, K is {}x{}, d = {d}",
            q.nrows(),
            q.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    if k.nrows() == 0 || k.nrows() != v.nrows() {
        return Err(AttentionError::DimensionMismatch(format!(
            "K has {} rows, V has {}",
            k.nrows(),
            v.nrows()
        )));
    }
    let mut scores = (q * k.transpose()) / (*d as f64).sqrt();
    for mut row in scores.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|s| *s = (*s - max).exp());
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|s| *s /= total);
    }
    let output = &scores * v;
    Ok(AttentionOutput { output, scores })
}

/// Attention of one prompt token over an `N×N` latent grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionGrid {
    pub token: String,
    values: FloatGrid,
}

impl AttentionGrid {
    pub fn new(token: impl Into<String>, side: u32, values: Vec<f64>) -> Result<Self, AttentionError> {
        if side == 0 {
            return Err(AttentionError::InvalidGrid("side must be positive".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(AttentionError::InvalidGrid(format!("value {bad} is not finite and non-negative")));
        }
        let values = FloatGrid::from_values(side, side, values).ok_or_else(|| {
            AttentionError::InvalidGrid(format!("expected {} values for side {side}", side * side))
        })?;
        Ok(AttentionGrid {
            token: token.into(),
            values,
        })
    }

    pub fn side(&self) -> u32 {
        self.values.width()
    }

    pub fn values(&self) -> &FloatGrid {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values.get(x, y)
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    pub fn scaled(&self, c: f64) -> AttentionGrid {
        AttentionGrid {
            token: self.token.clone(),
            values: self.values.scale(c),
        }
    }

    /// Bilinear upsample without binarization.
    pub fn upsample(&self, width: u32, height: u32) -> FloatGrid {
        self.values.resize_bilinear(width, height)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectMask {
    pub bits: BinaryGrid,
}

/// Cells strictly above the grid mean. A uniform grid yields an empty mask.
pub fn threshold_mask(grid: &AttentionGrid) -> ObjectMask {
    let side = grid.side();
    let mean = grid.values.sum() / (side * side) as f64;
    // The rounded mean of equal values can land below them; no cell can be
    // above the mean unless it is above the minimum.
    let min = grid.values.values().iter().copied().fold(f64::INFINITY, f64::min);
    ObjectMask {
        bits: BinaryGrid::from_fn(side, side, |x, y| {
            let v = grid.get(x, y);
            v > mean && v > min
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedObject {
    pub image: RasterImage,
    pub coarse: bool,
}

/// Cuts the masked object out of a square image: the mask is upsampled to
/// the image size and re-binarized at 0.5; colour is copied, alpha is 255
/// inside and 0 outside.
pub fn apply_mask(mask: &ObjectMask, image: &RasterImage) -> Result<ExtractedObject, AttentionError> {
    let (w, h) = image.dims();
    if w != h {
        return Err(AttentionError::NonSquareImage { width: w, height: h });
    }
    let support = mask.bits.resize(w, h);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_alpha(x, y, if support.get(x, y) { 255 } else { 0 });
        }
    }
    Ok(ExtractedObject {
        image: out,
        coarse: true,
    })
}

/// Produces an alpha matte (`width × height` bytes, row-major) for an image.
pub trait SegmentationProvider: Send + Sync {
    fn alpha_matte(&self, image: &RasterImage) -> Result<Vec<u8>, AttentionError>;
}

/// Built-in refiner: keeps the largest 4-connected opaque component and
/// halves alpha on its one-pixel boundary.
#[derive(Clone, Copy, Debug, Default)]
pub struct LargestComponent;

impl SegmentationProvider for LargestComponent {
    fn alpha_matte(&self, image: &RasterImage) -> Result<Vec<u8>, AttentionError> {
        let (w, h) = image.dims();
        let opaque = BinaryGrid::from_fn(w, h, |x, y| image.alpha(x, y) > 0);
        let keep = largest_component(&opaque);
        let mut matte = vec![0u8; w as usize * h as usize];
        for y in 0..h {
            for x in 0..w {
                if !keep.get(x, y) {
                    continue;
                }
                let edge = neighbors4(x, y, w, h).any(|(nx, ny)| !keep.get(nx, ny));
                let a = image.alpha(x, y);
                matte[(y * w + x) as usize] = if edge { a / 2 } else { a };
            }
        }
        Ok(matte)
    }
}

fn neighbors4(x: u32, y: u32, w: u32, h: u32) -> impl Iterator<Item = (u32, u32)> {
    let (x, y) = (x as i64, y as i64);
    [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
        .into_iter()
        .filter(move |&(nx, ny)| nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
        .map(|(nx, ny)| (nx as u32, ny as u32))
}

/// Largest 4-connected component; the first found in row-major order wins
/// ties.
pub fn largest_component(grid: &BinaryGrid) -> BinaryGrid {
    let (w, h) = grid.dims();
    let mut label = vec![0u32; w as usize * h as usize];
    let mut best = (0u32, 0usize);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !grid.get(x, y) || label[(y * w + x) as usize] != 0 {
                continue;
            }
            next += 1;
            let mut size = 0usize;
            label[(y * w + x) as usize] = next;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                size += 1;
                for (nx, ny) in neighbors4(cx, cy, w, h) {
                    let i = (ny * w + nx) as usize;
                    if grid.get(nx, ny) && label[i] == 0 {
                        label[i] = next;
                        stack.push((nx, ny));
                    }
                }
            }
            if size > best.1 {
                best = (next, size);
            }
        }
    }
    BinaryGrid::from_bits(w, h, label.iter().map(|&l| l != 0 && l == best.0).collect())
        .expect("label buffer matches grid")
}

/// Removes residual background from a coarse object. Whatever the provider
/// returns, the result alpha never exceeds the coarse alpha.
pub fn refine_object(
    obj: &ExtractedObject,
    refiner: &dyn SegmentationProvider,
) -> Result<ExtractedObject, AttentionError> {
    if !obj.coarse {
        return Err(AttentionError::NotCoarse);
    }
    let (w, h) = obj.image.dims();
    let matte = refiner.alpha_matte(&obj.image)?;
    if matte.len() != w as usize * h as usize {
        return Err(AttentionError::DimensionMismatch(format!(
            "matte has {} values for a {w}x{h} image",
            matte.len()
        )));
    }
    let mut image = obj.image.clone();
    for y in 0..h {
        for x in 0..w {
            let a = image.alpha(x, y).min(matte[(y * w + x) as usize]);
            image.set_alpha(x, y, a);
        }
    }
    Ok(ExtractedObject { image, coarse: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    /// Rotation in radians.
    pub theta: f64,
    /// Uniform scale, positive.
    pub scale: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams { theta: 0.0, scale: 1.0 };
}

pub const ANGLE_STEPS: usize = 19;
pub const SCALE_STEPS: usize = 21;

/// The fusion search lattice in its fixed evaluation order: θ from -π/4 to
/// π/4 in steps of π/36, and for each θ, s from 0.5 to 1.5 in steps of 0.05.
pub fn search_lattice() -> impl Iterator<Item = AffineParams> {
    (0..ANGLE_STEPS).flat_map(|i| {
        let theta = (i as f64 - 9.0) * PI / 36.0;
        (0..SCALE_STEPS).map(move |j| AffineParams {
            theta,
            scale: (10 + j) as f64 / 20.0,
        })
    })
}

struct Transform {
    cos: f64,
    sin: f64,
    inv_scale: f64,
    cx: f64,
    cy: f64,
}

impl Transform {
    fn new(params: AffineParams, width: u32, height: u32) -> Self {
        Transform {
            cos: params.theta.cos(),
            sin: params.theta.sin(),
            inv_scale: 1.0 / params.scale,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    /// Value of the transformed map at output pixel `(x, y)`: the inverse
    /// rotation and scale about the canvas centre, then a zero-fill bilinear
    /// read.
    #[inline]
    fn sample(&self, src: &FloatGrid, x: u32, y: u32) -> f64 {
        let px = x as f64 + 0.5 - self.cx;
        let py = y as f64 + 0.5 - self.cy;
        let qx = (self.cos * px + self.sin * py) * self.inv_scale + self.cx;
        let qy = (-self.sin * px + self.cos * py) * self.inv_scale + self.cy;
        src.sample_zero_fill(qx - 0.5, qy - 0.5)
    }
}

/// Rotates and scales a map about its centre; content leaving the canvas is
/// dropped and uncovered area reads zero.
pub fn transform_map(src: &FloatGrid, params: AffineParams) -> FloatGrid {
    let (w, h) = src.dims();
    let t = Transform::new(params, w, h);
    FloatGrid::from_fn(w, h, |x, y| t.sample(src, x, y))
}

/// Condition image handed to image-to-image generation. Channels are RGB in
/// `[0, 1]`; pixels outside the chart mask are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedConditionImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
    pub params: AffineParams,
    /// Per-mark parameters when fused mark by mark.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mark_params: Vec<(usize, AffineParams)>,
    /// Attention mass captured inside the mask.
    pub objective: f64,
}

impl FusedConditionImage {
    pub fn support(&self) -> BinaryGrid {
        BinaryGrid::from_bits(
            self.width,
            self.height,
            self.pixels.iter().map(|p| p.iter().any(|&c| c > 0.0)).collect(),
        )
        .expect("pixel buffer matches dimensions")
    }

    pub fn to_raster(&self) -> RasterImage {
        let data = self
            .pixels
            .iter()
            .flat_map(|p| {
                let c = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                [c(p[0]), c(p[1]), c(p[2]), 255]
            })
            .collect();
        RasterImage::from_rgba(self.width, self.height, data).expect("pixel buffer matches dimensions")
    }
}

struct FusionResult {
    params: AffineParams,
    objective: f64,
    product: FloatGrid,
}

/// Orders candidates: larger objective, then smaller |θ|, then s closer to 1.
fn better(candidate: (f64, AffineParams), incumbent: (f64, AffineParams)) -> bool {
    let (co, cp) = candidate;
    let (io, ip) = incumbent;
    if co != io {
        return co > io;
    }
    let (ct, it) = (cp.theta.abs(), ip.theta.abs());
    if ct != it {
        return ct < it;
    }
    (cp.scale - 1.0).abs() < (ip.scale - 1.0).abs()
}

fn fuse_map(mask: &BinaryGrid, attention: &FloatGrid) -> FusionResult {
    let (w, h) = mask.dims();
    let ones: Vec<(u32, u32)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.get(x, y))
        .collect();
    let mut best: Option<(f64, AffineParams)> = None;
    for params in search_lattice() {
        let t = Transform::new(params, w, h);
        let objective: f64 = ones.iter().map(|&(x, y)| t.sample(attention, x, y)).sum();
        if best.is_none_or(|b| better((objective, params), b)) {
            best = Some((objective, params));
        }
    }
    let (objective, params) = best.expect("lattice is non-empty");
    let t = Transform::new(params, w, h);
    let product = FloatGrid::from_fn(w, h, |x, y| if mask.get(x, y) { t.sample(attention, x, y) } else { 0.0 });
    FusionResult {
        params,
        objective,
        product,
    }
}

fn normalized_gray(product: &FloatGrid) -> Vec<[f64; 3]> {
    let max = product.max();
    product
        .values()
        .iter()
        .map(|&v| {
            let g = if max > 0.0 { v / max } else { 0.0 };
            [g, g, g]
        })
        .collect()
}

/// Places the upsampled attention map inside the whole chart mask under the
/// rotation/scale that captures the most attention mass.
pub fn fuse_foreground(chart_mask: &ChartMask, grid: &AttentionGrid) -> Result<FusedConditionImage, AttentionError> {
    let mask = &chart_mask.pixels;
    if mask.is_empty() {
        return Err(AttentionError::EmptyMask);
    }
    let (w, h) = mask.dims();
    let fused = fuse_map(mask, &grid.upsample(w, h));
    Ok(FusedConditionImage {
        width: w,
        height: h,
        pixels: normalized_gray(&fused.product),
        params: fused.params,
        mark_params: Vec::new(),
        objective: fused.objective,
    })
}

/// Fuses each mark separately on a crop around the mask pixels it owns, so
/// off-centre marks receive a full, locally placed attention map.
pub fn fuse_foreground_per_mark(
    chart_mask: &ChartMask,
    grid: &AttentionGrid,
) -> Result<FusedConditionImage, AttentionError> {
    let mask = &chart_mask.pixels;
    if mask.is_empty() {
        return Err(AttentionError::EmptyMask);
    }
    let (w, h) = mask.dims();
    let geometry = &chart_mask.geometry;
    if geometry.marks.is_empty() {
        return fuse_foreground(chart_mask, grid);
    }
    let owners = assign_owners(mask, geometry);
    let mut product = FloatGrid::zeros(w, h);
    let mut mark_params = Vec::new();
    let mut objective = 0.0;
    for mark in 0..geometry.marks.len() {
        let owned: Vec<(u32, u32)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| owners[(y * w + x) as usize] == Some(mark))
            .collect();
        let Some(&(fx, fy)) = owned.first() else { continue };
        let (mut x0, mut y0, mut x1, mut y1) = (fx, fy, fx, fy);
        for &(x, y) in &owned {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (cw, ch) = (x1 - x0 + 1, y1 - y0 + 1);
        let local = BinaryGrid::from_fn(cw, ch, |x, y| owners[((y + y0) * w + x + x0) as usize] == Some(mark));
        let fused = fuse_map(&local, &grid.upsample(cw, ch));
        for &(x, y) in &owned {
            product.set(x, y, fused.product.get(x - x0, y - y0));
        }
        objective += fused.objective;
        mark_params.push((mark, fused.params));
    }
    Ok(FusedConditionImage {
        width: w,
        height: h,
        pixels: normalized_gray(&product),
        params: mark_params.first().map_or(AffineParams::IDENTITY, |p| p.1),
        mark_params,
        objective,
    })
}

/// Distance from a point to the region a mark covers (0 inside).
fn mark_distance(mark: &Mark, p: Point) -> f64 {
    match mark {
        Mark::BarRect(r) => {
            let dx = (r.x - p.x).max(p.x - r.right()).max(0.0);
            let dy = (r.y - p.y).max(p.y - r.bottom()).max(0.0);
            dx.hypot(dy)
        }
        Mark::LinePolyline { points } => crate::chart::polyline_distance(p, points),
        Mark::PieSector {
            center,
            radius,
            start_angle,
            end_angle,
        } => {
            let sweep = end_angle - start_angle;
            let a = (p.y - center.y).atan2(p.x - center.x);
            if sweep >= 2.0 * PI || (a - start_angle).rem_euclid(2.0 * PI) < sweep {
                (p.distance(*center) - radius).max(0.0)
            } else {
                let ray = |phi: f64| Point::new(center.x + radius * phi.cos(), center.y + radius * phi.sin());
                crate::chart::polyline_distance(p, &[ray(*start_angle), *center, ray(*end_angle)])
            }
        }
        Mark::ScatterBubble { center, radius } => (p.distance(*center) - radius).max(0.0),
    }
}

fn assign_owners(mask: &BinaryGrid, geometry: &ChartGeometry) -> Vec<Option<usize>> {
    let (w, h) = mask.dims();
    let mut owners = vec![None; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            owners[(y * w + x) as usize] = geometry
                .marks
                .iter()
                .enumerate()
                .map(|(i, m)| (i, mark_distance(m, p)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i);
        }
    }
    owners
}

/// Attention-weighted mean colour over the pixels whose upsampled attention
/// exceeds the grid mean; the plain mean when no pixel qualifies.
pub fn dominant_color(grid: &AttentionGrid, image: &RasterImage) -> Result<Rgb, AttentionError> {
    let (w, h) = image.dims();
    if w != h {
        return Err(AttentionError::NonSquareImage { width: w, height: h });
    }
    let up = grid.upsample(w, h);
    let mean = grid.mean();
    let mut acc = [0.0f64; 3];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let a = up.get(x, y);
            if a > mean {
                let p = image.pixel(x, y);
                (0..3).for_each(|c| acc[c] += a * p[c] as f64);
                total += a;
            }
        }
    }
    if total <= 0.0 {
        acc = [0.0; 3];
        for p in image.pixels() {
            (0..3).for_each(|c| acc[c] += p[c] as f64);
        }
        total = (w * h) as f64;
    }
    Ok([
        (acc[0] / total).round() as u8,
        (acc[1] / total).round() as u8,
        (acc[2] / total).round() as u8,
    ])
}

/// Colour mask: the chart mask painted in `color`, zero elsewhere.
pub fn fuse_background(chart_mask: &ChartMask, color: Rgb) -> Result<FusedConditionImage, AttentionError> {
    let mask = &chart_mask.pixels;
    if mask.is_empty() {
        return Err(AttentionError::EmptyMask);
    }
    let c = [color[0] as f64 / 255.0, color[1] as f64 / 255.0, color[2] as f64 / 255.0];
    Ok(FusedConditionImage {
        width: mask.width(),
        height: mask.height(),
        pixels: mask.bits().iter().map(|&b| if b { c } else { [0.0; 3] }).collect(),
        params: AffineParams::IDENTITY,
        mark_params: Vec::new(),
        objective: mask.count_ones() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(side: u32, f: impl Fn(u32, u32) -> f64) -> AttentionGrid {
        let values = (0..side * side).map(|i| f(i % side, i / side)).collect();
        AttentionGrid::new("obj", side, values).unwrap()
    }

    #[test]
    fn singleton_key_gives_unit_scores() {
        let inputs = AttentionInputs {
            q: DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.5]),
            k: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v: DMatrix::from_row_slice(1, 3, &[4.0, 5.0, 6.0]),
            d: 2,
        };
        let out = cross_attention(&inputs).unwrap();
        assert!(out.scores.iter().all(|&s| s == 1.0));
        for r in 0..2 {
            assert_eq!(out.output.row(r).iter().copied().collect::<Vec<_>>(), [4.0, 5.0, 6.0]);
        }
    }

    #[test]
    fn zero_query_gives_uniform_scores() {
        let inputs = AttentionInputs {
            q: DMatrix::zeros(3, 4),
            k: DMatrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64),
            v: DMatrix::from_fn(5, 2, |i, _| i as f64),
            d: 4,
        };
        let out = cross_attention(&inputs).unwrap();
        assert!(out.scores.iter().all(|&s| (s - 0.2).abs() < 1e-15));
    }

    #[test]
    fn mismatched_inner_dimension_is_rejected() {
        let inputs = AttentionInputs {
            q: DMatrix::zeros(2, 3),
            k: DMatrix::zeros(2, 4),
            v: DMatrix::zeros(2, 1),
            d: 3,
        };
        assert!(matches!(cross_attention(&inputs), Err(AttentionError::DimensionMismatch(_))));
    }

    #[test]
    fn threshold_of_corner_peak() {
        let g = AttentionGrid::new("t", 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let m = threshold_mask(&g);
        assert_eq!(m.bits.bits(), &[true, false, false, false]);
    }

    #[test]
    fn uniform_grid_gives_empty_mask() {
        let m = threshold_mask(&grid(16, |_, _| 0.7));
        assert!(m.bits.is_empty());
    }

    #[test]
    fn negative_attention_is_invalid() {
        assert!(AttentionGrid::new("t", 1, vec![-0.5]).is_err());
        assert!(AttentionGrid::new("t", 2, vec![0.5]).is_err());
    }

    #[test]
    fn full_mask_keeps_image() {
        let img = RasterImage::filled(32, 32, [9, 8, 7, 255]);
        let mask = ObjectMask {
            bits: BinaryGrid::from_fn(16, 16, |_, _| true),
        };
        assert_eq!(apply_mask(&mask, &img).unwrap().image, img);
    }

    #[test]
    fn empty_mask_is_fully_transparent() {
        let img = RasterImage::filled(32, 32, [9, 8, 7, 255]);
        let out = apply_mask(&ObjectMask { bits: BinaryGrid::new(16, 16) }, &img).unwrap();
        assert!(out.image.pixels().all(|p| p[3] == 0));
    }

    #[test]
    fn non_square_image_is_rejected() {
        let img = RasterImage::filled(32, 16, [0; 4]);
        assert_eq!(
            apply_mask(&ObjectMask { bits: BinaryGrid::new(16, 16) }, &img).unwrap_err(),
            AttentionError::NonSquareImage { width: 32, height: 16 }
        );
    }

    struct Everything;
    impl SegmentationProvider for Everything {
        fn alpha_matte(&self, image: &RasterImage) -> Result<Vec<u8>, AttentionError> {
            Ok(vec![255; (image.width() * image.height()) as usize])
        }
    }

    #[test]
    fn superset_matte_cannot_add_pixels() {
        let mut img = RasterImage::filled(8, 8, [1, 2, 3, 0]);
        img.set_alpha(2, 2, 255);
        let obj = ExtractedObject {
            image: img.clone(),
            coarse: true,
        };
        let out = refine_object(&obj, &Everything).unwrap();
        assert_eq!(out.image, img);
        assert!(!out.coarse);
        assert_eq!(refine_object(&out, &Everything).unwrap_err(), AttentionError::NotCoarse);
    }

    #[test]
    fn fallback_on_single_component_only_feathers() {
        let mut img = RasterImage::filled(10, 10, [5, 5, 5, 0]);
        for y in 2..7 {
            for x in 3..8 {
                img.set_alpha(x, y, 255);
            }
        }
        let out = refine_object(&ExtractedObject { image: img.clone(), coarse: true }, &LargestComponent).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                let inside = (3..8).contains(&x) && (2..7).contains(&y);
                let interior = (4..7).contains(&x) && (3..6).contains(&y);
                let expected = if interior { 255 } else if inside { 127 } else { 0 };
                assert_eq!(out.image.alpha(x, y), expected, "({x},{y})");
            }
        }
    }

    #[test]
    fn lattice_has_399_points_with_exact_identity() {
        let pts: Vec<_> = search_lattice().collect();
        assert_eq!(pts.len(), 399);
        assert!(pts.contains(&AffineParams::IDENTITY));
        assert!((pts[0].theta + PI / 4.0).abs() < 1e-15 && pts[0].scale == 0.5);
    }

    #[test]
    fn identity_transform_is_exact() {
        let g = FloatGrid::from_fn(12, 12, |x, y| (x * 7 + y * 3) as f64);
        assert_eq!(transform_map(&g, AffineParams::IDENTITY), g);
    }

    #[test]
    fn solid_image_dominant_color() {
        let img = RasterImage::filled(32, 32, [255, 0, 0, 255]);
        let g = grid(16, |x, y| (x + y) as f64);
        assert_eq!(dominant_color(&g, &img).unwrap(), [255, 0, 0]);
    }

    #[test]
    fn uniform_grid_dominant_color_is_plain_mean() {
        let mut img = RasterImage::filled(4, 4, [0, 0, 0, 255]);
        for y in 0..4 {
            for x in 0..2 {
                img.set_pixel(x, y, [200, 100, 50, 255]);
            }
        }
        assert_eq!(dominant_color(&grid(16, |_, _| 1.0), &img).unwrap(), [100, 50, 25]);
    }
}
