//! Data-distortion evaluation of generated elements against the plain chart.
//!
//! Line charts are compared through their central axes: per-column centroid
//! traces are box-smoothed, mapped to 8-bit profiles (top row 255, bottom row
//! 0) and compared window by window with `Sᵢ = 1 − |W_c − W_g| / 255`. Bar,
//! pie and scatter charts are compared per mark (height, angle, size).
//! Backgrounds are compared through Sobel/Otsu edges restricted to a dilated
//! chart mask.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{synthesize_mask, ChartGeometry, ChartMask, ChartType, Mark, MaskVariant};
use crate::raster::{BinaryGrid, FloatGrid, RasterImage};

pub const WINDOW_FRACTION: f64 = 0.05;
pub const BOX_FILTER_K: usize = 5;
pub const ERROR_THRESHOLD: f64 = 0.9;
pub const EDGE_DILATION_RADIUS: u32 = 6;
/// Minimum channel difference from the background colour that counts as
/// foreground in opaque images.
pub const FOREGROUND_DELTA: u8 = 24;
/// Vertical padding of trend error boxes.
const BOX_PAD: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("image has no foreground pixels")]
    EmptyForeground,
    #[error("no foreground found near mark {mark}")]
    MarkNotFound { mark: usize },
    #[error("no edges found inside the chart region")]
    NoEdgesFound,
    #[error("image size {found:?} does not match canvas {expected:?}")]
    SizeMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("invalid evaluation parameters: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window_width: u32,
    pub stride: u32,
    pub box_k: usize,
    pub error_threshold: f64,
    pub dilation_radius: u32,
}

impl EvalConfig {
    /// Window of 5% of the canvas width, non-overlapping.
    pub fn for_width(width: u32) -> Self {
        let window = ((width as f64 * WINDOW_FRACTION).round() as u32).max(1);
        EvalConfig {
            window_width: window,
            stride: window,
            box_k: BOX_FILTER_K,
            error_threshold: ERROR_THRESHOLD,
            dilation_radius: EDGE_DILATION_RADIUS,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.window_width == 0 || self.stride == 0 {
            return Err(EvalError::InvalidConfig("window and stride must be positive".into()));
        }
        if self.box_k == 0 || self.box_k % 2 == 0 {
            return Err(EvalError::InvalidConfig(format!("box filter width {} must be odd", self.box_k)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Height,
    Trend,
    Angle,
    Size,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub index: usize,
    /// Half-open column range.
    pub x_range: (u32, u32),
    pub score: f64,
    /// False when the chart has no data in the window; such windows score 1
    /// and are left out of the global mean.
    pub scored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkScore {
    pub mark: usize,
    pub expected: f64,
    pub measured: f64,
    pub score: f64,
    pub bounds: PixelRect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub global_score: f64,
    pub windows: Vec<WindowScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<MarkScore>,
    pub error_boxes: Vec<PixelRect>,
    pub metric_kind: MetricKind,
}

/// Per-column central axis; `None` where a column has no foreground.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisTrace {
    pub y_of_x: Vec<Option<f64>>,
}

impl AxisTrace {
    pub fn defined(&self) -> usize {
        self.y_of_x.iter().filter(|v| v.is_some()).count()
    }

    /// First and last defined columns.
    pub fn extent(&self) -> Option<(usize, usize)> {
        let first = self.y_of_x.iter().position(Option::is_some)?;
        let last = self.y_of_x.iter().rposition(Option::is_some)?;
        Some((first, last))
    }
}

/// Most frequent colour on the image border.
fn border_color(image: &RasterImage) -> [u8; 3] {
    let (w, h) = image.dims();
    let mut counts: std::collections::BTreeMap<[u8; 3], usize> = std::collections::BTreeMap::new();
    let mut add = |x: u32, y: u32| {
        let p = image.pixel(x, y);
        *counts.entry([p[0], p[1], p[2]]).or_default() += 1;
    };
    for x in 0..w {
        add(x, 0);
        add(x, h - 1);
    }
    for y in 0..h {
        add(0, y);
        add(w - 1, y);
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or([255, 255, 255])
}

/// Foreground separation: alpha ≥ 128 for images with transparency,
/// otherwise a visible difference from the dominant border colour.
pub fn foreground(image: &RasterImage) -> BinaryGrid {
    let (w, h) = image.dims();
    if image.has_transparency() {
        return BinaryGrid::from_fn(w, h, |x, y| image.alpha(x, y) >= 128);
    }
    let bg = border_color(image);
    BinaryGrid::from_fn(w, h, |x, y| {
        let p = image.pixel(x, y);
        (0..3).any(|c| p[c].abs_diff(bg[c]) > FOREGROUND_DELTA)
    })
}

pub fn trace_of(mask: &BinaryGrid) -> AxisTrace {
    let (w, h) = mask.dims();
    AxisTrace {
        y_of_x: (0..w)
            .map(|x| {
                let (mut sum, mut n) = (0.0, 0usize);
                for y in 0..h {
                    if mask.get(x, y) {
                        sum += y as f64;
                        n += 1;
                    }
                }
                (n > 0).then(|| sum / n as f64)
            })
            .collect(),
    }
}

/// Per-column mean row of the foreground.
pub fn extract_axis(image: &RasterImage) -> Result<AxisTrace, EvalError> {
    let trace = trace_of(&foreground(image));
    if trace.defined() == 0 {
        return Err(EvalError::EmptyForeground);
    }
    Ok(trace)
}

/// Moving average of width `k` over present values; indices are clamped to
/// the trace, and absent entries stay absent and are skipped.
pub fn box_smooth(trace: &AxisTrace, k: usize) -> AxisTrace {
    let n = trace.y_of_x.len() as i64;
    let half = (k / 2) as i64;
    AxisTrace {
        y_of_x: (0..n)
            .map(|x| {
                trace.y_of_x[x as usize]?;
                let (mut sum, mut cnt) = (0.0, 0usize);
                for d in -half..=half {
                    if let Some(v) = trace.y_of_x[(x + d).clamp(0, n - 1) as usize] {
                        sum += v;
                        cnt += 1;
                    }
                }
                Some(sum / cnt as f64)
            })
            .collect(),
    }
}

fn profile(row: f64, height: u32) -> f64 {
    if height <= 1 {
        return 255.0;
    }
    255.0 * (1.0 - row / (height - 1) as f64)
}

fn mean<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Window comparison of two raw traces on a `width × height` canvas.
/// Windows tile `[0, width)`; each is scored on the columns where the chart
/// trace is present. A window where the chart has data and the generated
/// trace has none scores 0.
pub fn trend_score_traces(
    chart: &AxisTrace,
    generated: &AxisTrace,
    height: u32,
    config: &EvalConfig,
) -> Result<DistortionReport, EvalError> {
    config.validate()?;
    let width = chart.y_of_x.len() as u32;
    if generated.y_of_x.len() as u32 != width {
        return Err(EvalError::SizeMismatch {
            expected: (width, height),
            found: (generated.y_of_x.len() as u32, height),
        });
    }
    if chart.defined() == 0 || generated.defined() == 0 {
        return Err(EvalError::EmptyForeground);
    }
    let sc = box_smooth(chart, config.box_k);
    let sg = box_smooth(generated, config.box_k);
    let mut windows = Vec::new();
    let mut error_boxes = Vec::new();
    let mut start = 0u32;
    while start < width {
        let end = (start + config.window_width).min(width);
        let cols = start as usize..end as usize;
        let chart_cols: Vec<usize> = cols.clone().filter(|&x| sc.y_of_x[x].is_some()).collect();
        let (score, scored) = if chart_cols.is_empty() {
            (1.0, false)
        } else {
            let wc = mean(chart_cols.iter().map(|&x| profile(sc.y_of_x[x].unwrap(), height))).unwrap();
            let wg = mean(chart_cols.iter().filter_map(|&x| sg.y_of_x[x]).map(|y| profile(y, height)));
            let s = wg.map_or(0.0, |wg| (1.0 - (wc - wg).abs() / 255.0).clamp(0.0, 1.0));
            (s, true)
        };
        if scored && score < config.error_threshold {
            let rows: Vec<f64> = cols.clone().flat_map(|x| [sc.y_of_x[x], sg.y_of_x[x]]).flatten().collect();
            let top = rows.iter().copied().fold(f64::INFINITY, f64::min) - BOX_PAD;
            let bottom = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max) + BOX_PAD;
            let y0 = top.max(0.0).floor() as u32;
            let y1 = (bottom.min((height - 1) as f64).ceil() as u32).max(y0);
            error_boxes.push(PixelRect {
                x: start,
                y: y0,
                width: end - start,
                height: y1 - y0 + 1,
            });
        }
        windows.push(WindowScore {
            index: windows.len(),
            x_range: (start, end),
            score,
            scored,
        });
        start += config.stride;
    }
    let global_score = mean(windows.iter().filter(|w| w.scored).map(|w| w.score)).unwrap_or(1.0);
    Ok(DistortionReport {
        global_score,
        windows,
        marks: Vec::new(),
        error_boxes,
        metric_kind: MetricKind::Trend,
    })
}

pub fn trend_score(chart: &RasterImage, generated: &RasterImage, config: &EvalConfig) -> Result<DistortionReport, EvalError> {
    if chart.dims() != generated.dims() {
        return Err(EvalError::SizeMismatch {
            expected: chart.dims(),
            found: generated.dims(),
        });
    }
    let tc = extract_axis(chart)?;
    let tg = extract_axis(generated)?;
    trend_score_traces(&tc, &tg, chart.height(), config)
}

fn clamp_rect(x0: f64, y0: f64, x1: f64, y1: f64, (w, h): (u32, u32)) -> PixelRect {
    let cx0 = x0.floor().clamp(0.0, (w - 1) as f64) as u32;
    let cy0 = y0.floor().clamp(0.0, (h - 1) as f64) as u32;
    let cx1 = x1.ceil().clamp(cx0 as f64 + 1.0, w as f64) as u32;
    let cy1 = y1.ceil().clamp(cy0 as f64 + 1.0, h as f64) as u32;
    PixelRect {
        x: cx0,
        y: cy0,
        width: cx1 - cx0,
        height: cy1 - cy0,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Bar height: per column over the central half of the bar, the distance
/// from the baseline to the farthest foreground row on the bar's side; the
/// median over columns.
fn measure_bar(fg: &BinaryGrid, rect: &crate::chart::Rect, baseline: f64) -> Option<f64> {
    let (w, h) = fg.dims();
    let x0 = (rect.x + rect.width * 0.25).floor().max(0.0) as u32;
    let x1 = ((rect.x + rect.width * 0.75).ceil() as u32).min(w).max(x0 + 1);
    let upward = rect.y < baseline;
    let base_row = baseline.round().clamp(0.0, h as f64) as u32;
    let heights: Vec<f64> = (x0..x1.min(w))
        .filter_map(|x| {
            if upward {
                (0..base_row).find(|&y| fg.get(x, y)).map(|y| baseline - y as f64)
            } else {
                (base_row..h).rev().find(|&y| fg.get(x, y)).map(|y| y as f64 + 1.0 - baseline)
            }
        })
        .collect();
    median(heights)
}

const PIE_RINGS: [f64; 4] = [0.35, 0.5, 0.65, 0.8];

/// Sector angle: on several rings, the foreground run through the sector's
/// mid-angle, walked in steps of about a quarter pixel; median over rings.
fn measure_sector(fg: &BinaryGrid, center: crate::chart::Point, radius: f64, start: f64, end: f64) -> Option<f64> {
    let (w, h) = fg.dims();
    let hit = |a: f64, rho: f64| {
        let (x, y) = (center.x + rho * a.cos(), center.y + rho * a.sin());
        x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 && fg.get(x as u32, y as u32)
    };
    let mid = (start + end) / 2.0;
    let tau = std::f64::consts::TAU;
    let runs: Vec<f64> = PIE_RINGS
        .iter()
        .filter_map(|f| {
            let rho = radius * f;
            if !hit(mid, rho) {
                return None;
            }
            let step = 0.25 / rho;
            let limit = (tau / step).ceil() as usize;
            let walk = |dir: f64| (1..=limit).take_while(|&i| hit(mid + dir * i as f64 * step, rho)).count();
            let run = (walk(1.0) + walk(-1.0)) as f64 * step + step;
            Some(run.min(tau))
        })
        .collect();
    median(runs)
}

/// Bubble radius: area-equivalent radius of the foreground within
/// `1.25 r + 2` px of the centre.
fn measure_bubble(fg: &BinaryGrid, center: crate::chart::Point, radius: f64) -> Option<f64> {
    let (w, h) = fg.dims();
    let reach = radius * 1.25 + 2.0;
    let x0 = (center.x - reach).floor().max(0.0) as u32;
    let y0 = (center.y - reach).floor().max(0.0) as u32;
    let x1 = ((center.x + reach).ceil() as u32).min(w);
    let y1 = ((center.y + reach).ceil() as u32).min(h);
    let mut area = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let d = (x as f64 + 0.5 - center.x).hypot(y as f64 + 0.5 - center.y);
            if d <= reach && fg.get(x, y) {
                area += 1;
            }
        }
    }
    (area > 0).then(|| (area as f64 / std::f64::consts::PI).sqrt())
}

fn measure(fg: &BinaryGrid, geometry: &ChartGeometry, mark: &Mark) -> Option<f64> {
    match mark {
        Mark::BarRect(r) => measure_bar(fg, r, geometry.baseline.unwrap_or(geometry.plot_area.bottom())),
        Mark::PieSector {
            center,
            radius,
            start_angle,
            end_angle,
        } => measure_sector(fg, *center, *radius, *start_angle, *end_angle),
        Mark::ScatterBubble { center, radius } => measure_bubble(fg, *center, *radius),
        Mark::LinePolyline { .. } => None,
    }
}

/// Per-mark comparison for bar, pie and scatter charts. The expected value
/// of each mark is measured with the same procedure on the ideal raster of
/// the geometry, so quantization affects both sides alike. Marks too small
/// to measure on the ideal raster are skipped.
pub fn mark_metric_score(
    geometry: &ChartGeometry,
    generated: &RasterImage,
    config: &EvalConfig,
) -> Result<DistortionReport, EvalError> {
    config.validate()?;
    if generated.dims() != geometry.canvas_size {
        return Err(EvalError::SizeMismatch {
            expected: geometry.canvas_size,
            found: generated.dims(),
        });
    }
    let metric_kind = match geometry.chart_type {
        ChartType::Bar => MetricKind::Height,
        ChartType::Pie => MetricKind::Angle,
        ChartType::Scatter => MetricKind::Size,
        ChartType::Line => {
            return Err(EvalError::InvalidConfig("line charts are evaluated by trend".into()));
        }
    };
    let ideal = synthesize_mask(geometry, MaskVariant::SolidMarks)
        .expect("solid marks support every chart type")
        .pixels;
    let fg = foreground(generated);
    let mut marks = Vec::new();
    for (i, mark) in geometry.marks.iter().enumerate() {
        let Some(expected) = measure(&ideal, geometry, mark).filter(|e| *e > 0.0) else {
            continue;
        };
        let measured = measure(&fg, geometry, mark).ok_or(EvalError::MarkNotFound { mark: i })?;
        let score = (1.0 - (measured - expected).abs() / expected).clamp(0.0, 1.0);
        let b = mark.bounds(2.0);
        marks.push(MarkScore {
            mark: i,
            expected,
            measured,
            score,
            bounds: clamp_rect(b.x, b.y, b.right(), b.bottom(), geometry.canvas_size),
        });
    }
    let error_boxes = marks
        .iter()
        .filter(|m| m.score < config.error_threshold)
        .map(|m| m.bounds)
        .collect();
    Ok(DistortionReport {
        global_score: mean(marks.iter().map(|m| m.score)).unwrap_or(1.0),
        windows: Vec::new(),
        marks,
        error_boxes,
        metric_kind,
    })
}

/// Sobel gradient magnitude with clamped borders.
pub fn sobel_magnitude(lum: &FloatGrid) -> FloatGrid {
    let (w, h) = lum.dims();
    let at = |x: i64, y: i64| lum.get(x.clamp(0, w as i64 - 1) as u32, y.clamp(0, h as i64 - 1) as u32);
    FloatGrid::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
            - at(x - 1, y - 1)
            - 2.0 * at(x - 1, y)
            - at(x - 1, y + 1);
        let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
            - at(x - 1, y - 1)
            - 2.0 * at(x, y - 1)
            - at(x + 1, y - 1);
        gx.hypot(gy)
    })
}

/// Otsu's threshold over a 256-bin histogram spanning `[0, max]`; returns the
/// edge map of values in bins above the threshold bin, or `None` for a flat
/// field.
pub fn otsu_edges(values: &FloatGrid) -> Option<BinaryGrid> {
    let max = values.max();
    if max <= 0.0 {
        return None;
    }
    let bin = |v: f64| ((v / max * 256.0) as usize).min(255);
    let mut hist = [0usize; 256];
    values.values().iter().for_each(|&v| hist[bin(v)] += 1);
    let total = values.values().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut threshold) = (-1.0, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1).powi(2);
        if between > best {
            best = between;
            threshold = t;
        }
    }
    let (w, h) = values.dims();
    Some(BinaryGrid::from_fn(w, h, |x, y| bin(values.get(x, y)) > threshold))
}

fn edge_map(image: &RasterImage) -> Option<BinaryGrid> {
    otsu_edges(&sobel_magnitude(&image.luminance()))
}

/// Background fidelity: edges of the generated image inside the dilated chart
/// mask against the mask's own boundary, compared as trend traces.
pub fn background_score(
    chart_mask: &ChartMask,
    generated: &RasterImage,
    config: &EvalConfig,
) -> Result<DistortionReport, EvalError> {
    config.validate()?;
    let dims = chart_mask.dims();
    if generated.dims() != dims {
        return Err(EvalError::SizeMismatch {
            expected: dims,
            found: generated.dims(),
        });
    }
    let region = chart_mask.pixels.dilate(config.dilation_radius);
    let edges = edge_map(generated).ok_or(EvalError::NoEdgesFound)?;
    let kept = BinaryGrid::from_fn(dims.0, dims.1, |x, y| edges.get(x, y) && region.get(x, y));
    if kept.is_empty() {
        return Err(EvalError::NoEdgesFound);
    }
    let boundary = edge_map(&chart_mask.pixels.to_raster()).ok_or(EvalError::EmptyForeground)?;
    trend_score_traces(&trace_of(&boundary), &trace_of(&kept), dims.1, config)
}

/// Dispatches by chart type: trend for lines, per-mark metrics otherwise.
pub fn evaluate_chart(
    geometry: &ChartGeometry,
    chart: &RasterImage,
    generated: &RasterImage,
    config: &EvalConfig,
) -> Result<DistortionReport, EvalError> {
    match geometry.chart_type {
        ChartType::Line => trend_score(chart, generated, config),
        _ => mark_metric_score(geometry, generated, config),
    }
}
