//! Element replication and canvas refinement.
//!
//! Replication reuses one generated bar element for bars of other heights:
//! the element is cut into equal-height grids, the grids are rescaled so the
//! stack reaches the target height (grids that resemble the others stretch
//! more), and a low-strength image-to-image pass hides the seams.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{ChartGeometry, ChartType};
use crate::genclient::{generate, GenBackend, GenError, GenRequest};
use crate::raster::{FloatGrid, RasterImage};

pub const DEFAULT_SLICE_COUNT: usize = 5;
/// Upper bound on harmonization strength.
pub const MAX_STRENGTH: f64 = 0.5;

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 255.0;
pub const SSIM_WINDOW: u32 = 8;

/// Floor on a slice's editability weight so negative or zero mean SSIM still
/// leaves the slice a share of the rescaling.
const MIN_EDIT_WEIGHT: f64 = 1e-3;
/// Smallest per-slice scale before renormalization.
const MIN_SLICE_SCALE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModificationError {
    #[error("element height {height} is less than the slice count {count}")]
    TooShort { height: u32, count: usize },
    #[error("at least two slices are needed, got {0}")]
    TooFewSlices(usize),
    #[error("slice widths differ: {0} vs {1}")]
    SizeMismatch(u32, u32),
    #[error("strength {0} outside [0, 0.5]")]
    InvalidStrength(f64),
    #[error("target height must be at least 1")]
    ZeroTarget,
    #[error("replication needs a bar chart, got {0}")]
    UnsupportedChartType(ChartType),
    #[error("invalid replication plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Backend(#[from] GenError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSlice {
    pub image: RasterImage,
    pub index: usize,
    pub original_height: u32,
}

/// Splits an element into `count` horizontal bands; the first
/// `height % count` bands get the extra row.
pub fn cut_grids(element: &RasterImage, count: usize) -> Result<Vec<GridSlice>, ModificationError> {
    let h = element.height();
    if count == 0 || (h as usize) < count {
        return Err(ModificationError::TooShort { height: h, count });
    }
    let base = h / count as u32;
    let extra = h as usize % count;
    let mut y = 0;
    Ok((0..count)
        .map(|index| {
            let rows = base + u32::from(index < extra);
            let image = element.crop_rows(y, rows);
            y += rows;
            GridSlice {
                image,
                index,
                original_height: rows,
            }
        })
        .collect())
}

pub fn concat_slices(slices: &[GridSlice]) -> Option<RasterImage> {
    let parts: Vec<RasterImage> = slices.iter().map(|s| s.image.clone()).collect();
    RasterImage::vstack(&parts)
}

struct Integral {
    width: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> Self {
        let width = w as usize + 1;
        let mut table = vec![0.0; width * (h as usize + 1)];
        for y in 0..h as usize {
            let mut row = 0.0;
            for x in 0..w as usize {
                row += f(x as u32, y as u32);
                table[(y + 1) * width + x + 1] = table[y * width + x + 1] + row;
            }
        }
        Integral { width, table }
    }

    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let t = |x: usize, y: usize| self.table[y * self.width + x];
        t(x1, y1) - t(x0, y1) - t(x1, y0) + t(x0, y0)
    }
}

/// Mean SSIM over all 8×8 windows (stride 1) of two equally sized luminance
/// planes, using population statistics per window. Planes smaller than a
/// window in either direction are treated as one window.
pub fn ssim(a: &FloatGrid, b: &FloatGrid) -> f64 {
    assert_eq!(a.dims(), b.dims(), "ssim planes must share dimensions");
    let (w, h) = a.dims();
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let (ww, wh) = (SSIM_WINDOW.min(w) as usize, SSIM_WINDOW.min(h) as usize);
    let sa = Integral::new(w, h, |x, y| a.get(x, y));
    let sb = Integral::new(w, h, |x, y| b.get(x, y));
    let saa = Integral::new(w, h, |x, y| a.get(x, y).powi(2));
    let sbb = Integral::new(w, h, |x, y| b.get(x, y).powi(2));
    let sab = Integral::new(w, h, |x, y| a.get(x, y) * b.get(x, y));
    let n = (ww * wh) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h as usize - wh) {
        for x0 in 0..=(w as usize - ww) {
            let (x1, y1) = (x0 + ww, y0 + wh);
            let ma = sa.sum(x0, y0, x1, y1) / n;
            let mb = sb.sum(x0, y0, x1, y1) / n;
            let va = (saa.sum(x0, y0, x1, y1) / n - ma * ma).max(0.0);
            let vb = (sbb.sum(x0, y0, x1, y1) / n - mb * mb).max(0.0);
            let cov = sab.sum(x0, y0, x1, y1) / n - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Pairwise SSIM between slice luminances. Slices of unequal height (at most
/// one row apart after cutting) are compared on their common top rows.
pub fn slice_similarity(slices: &[GridSlice]) -> Result<Vec<Vec<f64>>, ModificationError> {
    if slices.len() < 2 {
        return Err(ModificationError::TooFewSlices(slices.len()));
    }
    let w = slices[0].image.width();
    if let Some(s) = slices.iter().find(|s| s.image.width() != w) {
        return Err(ModificationError::SizeMismatch(w, s.image.width()));
    }
    let rows = slices.iter().map(|s| s.image.height()).min().expect("non-empty");
    let lum: Vec<FloatGrid> = slices
        .iter()
        .map(|s| {
            let l = s.image.luminance();
            FloatGrid::from_fn(w, rows, |x, y| l.get(x, y))
        })
        .collect();
    let n = slices.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ssim(&lum[i], &lum[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Integer heights summing to `target`, proportional to `desired`, by
/// largest remainder (ties go to the earlier slice).
fn apportion(desired: &[f64], target: u32) -> Vec<u32> {
    let total: f64 = desired.iter().sum();
    let exact: Vec<f64> = desired.iter().map(|d| d / total * target as f64).collect();
    let mut out: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(target.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Vertical bilinear resampling with half-pixel centres; same height is an
/// exact copy.
pub fn resize_rows(image: &RasterImage, height: u32) -> RasterImage {
    let (w, h) = image.dims();
    let src = image.as_raw();
    let stride = w as usize * 4;
    let mut data = Vec::with_capacity(stride * height as usize);
    for j in 0..height {
        let sy = ((j as f64 + 0.5) * h as f64 / height as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h as usize - 1);
        let t = sy - y0 as f64;
        let (r0, r1) = (&src[y0 * stride..(y0 + 1) * stride], &src[y1 * stride..(y1 + 1) * stride]);
        data.extend(r0.iter().zip(r1).map(|(&a, &b)| (a as f64 * (1.0 - t) + b as f64 * t).round() as u8));
    }
    RasterImage::from_rgba(w, height, data).expect("buffer matches size")
}

/// Per-slice output heights for a target height. Weights are each slice's
/// mean SSIM against the others (floored, normalized); slice `i` is scaled by
/// `1 + (r − 1)·n·wᵢ` with `r = target / total`, then all heights are
/// renormalized to hit the target exactly.
pub fn warp_heights(slices: &[GridSlice], target: u32) -> Result<Vec<u32>, ModificationError> {
    if target == 0 {
        return Err(ModificationError::ZeroTarget);
    }
    let n = slices.len();
    let heights: Vec<f64> = slices.iter().map(|s| s.image.height() as f64).collect();
    let total: f64 = heights.iter().sum();
    let weights = if n < 2 {
        vec![1.0; n]
    } else {
        let m = slice_similarity(slices)?;
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                let mean = (0..n).filter(|&j| j != i).map(|j| m[i][j]).sum::<f64>() / (n - 1) as f64;
                mean.max(MIN_EDIT_WEIGHT)
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|w| w / sum).collect()
    };
    let r = target as f64 / total;
    let desired: Vec<f64> = heights
        .iter()
        .zip(&weights)
        .map(|(h, w)| h * (1.0 + (r - 1.0) * n as f64 * w).max(MIN_SLICE_SCALE))
        .collect();
    Ok(apportion(&desired, target))
}

pub fn warp_to_height(slices: &[GridSlice], target: u32) -> Result<RasterImage, ModificationError> {
    let heights = warp_heights(slices, target)?;
    let parts: Vec<RasterImage> = slices
        .iter()
        .zip(&heights)
        .filter(|(_, &h)| h > 0)
        .map(|(s, &h)| resize_rows(&s.image, h))
        .collect();
    let out = RasterImage::vstack(&parts).ok_or_else(|| {
        let w = slices.first().map_or(0, |s| s.image.width());
        ModificationError::SizeMismatch(w, w)
    })?;
    Ok(out)
}

/// Prompt and seed for a harmonization pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonizePrompt {
    pub object: String,
    pub description: String,
    pub seed: u64,
}

fn check_strength(strength: f64) -> Result<(), ModificationError> {
    if (0.0..=MAX_STRENGTH).contains(&strength) {
        Ok(())
    } else {
        Err(ModificationError::InvalidStrength(strength))
    }
}

/// Low-strength image-to-image pass; the input's alpha is kept so layer
/// cut-outs stay cut out.
fn harmonize(
    image: &RasterImage,
    backend: &dyn GenBackend,
    prompt: &HarmonizePrompt,
    strength: f64,
) -> Result<RasterImage, ModificationError> {
    check_strength(strength)?;
    let request = GenRequest::img2img(&prompt.object, &prompt.description, image.clone(), strength, prompt.seed);
    let mut out = generate(&request, backend)?.image;
    for y in 0..image.height() {
        for x in 0..image.width() {
            out.set_alpha(x, y, image.alpha(x, y));
        }
    }
    Ok(out)
}

pub fn merge_seams(
    warped: &RasterImage,
    backend: &dyn GenBackend,
    prompt: &HarmonizePrompt,
    strength: f64,
) -> Result<RasterImage, ModificationError> {
    harmonize(warped, backend, prompt, strength)
}

pub fn refine_canvas(
    composite: &RasterImage,
    backend: &dyn GenBackend,
    prompt: &HarmonizePrompt,
    strength: f64,
) -> Result<RasterImage, ModificationError> {
    harmonize(composite, backend, prompt, strength)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub source_bar: usize,
    /// `(mark index, target height px)`.
    pub targets: Vec<(usize, u32)>,
    pub slice_count: usize,
}

impl ReplicationPlan {
    pub fn validate(&self, geometry: &ChartGeometry) -> Result<(), ModificationError> {
        if geometry.chart_type != ChartType::Bar {
            return Err(ModificationError::UnsupportedChartType(geometry.chart_type));
        }
        let source = bar_height(geometry, self.source_bar)
            .ok_or_else(|| ModificationError::InvalidPlan(format!("mark {} is not a bar", self.source_bar)))?;
        if self.slice_count < 2 {
            return Err(ModificationError::InvalidPlan("slice count must be at least 2".into()));
        }
        for &(mark, h) in &self.targets {
            if bar_height(geometry, mark).is_none() {
                return Err(ModificationError::InvalidPlan(format!("mark {mark} is not a bar")));
            }
            if h == 0 || h > source {
                return Err(ModificationError::InvalidPlan(format!(
                    "target height {h} for mark {mark} must be in [1, {source}]"
                )));
            }
        }
        Ok(())
    }
}

fn bar_height(geometry: &ChartGeometry, mark: usize) -> Option<u32> {
    geometry
        .bars()
        .find(|(i, _)| *i == mark)
        .map(|(_, r)| (r.height.round() as u32).max(1))
}

/// Plan that maps the tallest bar's element onto every bar.
pub fn plan_replication(geometry: &ChartGeometry) -> Result<ReplicationPlan, ModificationError> {
    if geometry.chart_type != ChartType::Bar {
        return Err(ModificationError::UnsupportedChartType(geometry.chart_type));
    }
    let source_bar = geometry
        .tallest_bar()
        .ok_or_else(|| ModificationError::InvalidPlan("chart has no bars".into()))?;
    let targets = geometry
        .bars()
        .map(|(i, _)| (i, bar_height(geometry, i).expect("bar")))
        .collect();
    Ok(ReplicationPlan {
        source_bar,
        targets,
        slice_count: DEFAULT_SLICE_COUNT,
    })
}

/// Produces one element per plan target: cut, warp to the target height and
/// merge seams. Each target uses seed `prompt.seed + mark` so copies differ.
pub fn replicate(
    element: &RasterImage,
    plan: &ReplicationPlan,
    geometry: &ChartGeometry,
    backend: &dyn GenBackend,
    prompt: &HarmonizePrompt,
    strength: f64,
) -> Result<Vec<(usize, RasterImage)>, ModificationError> {
    plan.validate(geometry)?;
    check_strength(strength)?;
    let slices = cut_grids(element, plan.slice_count)?;
    plan.targets
        .iter()
        .map(|&(mark, h)| {
            let warped = warp_to_height(&slices, h)?;
            let p = HarmonizePrompt {
                seed: prompt.seed.wrapping_add(mark as u64),
                ..prompt.clone()
            };
            Ok((mark, merge_seams(&warped, backend, &p, strength)?))
        })
        .collect()
}
