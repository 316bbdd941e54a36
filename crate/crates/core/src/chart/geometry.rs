use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use super::table::{format_number, Cell, ColumnKind, DataTable};
use super::{ChartError, ChartSpec, ChartType};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    pub fn inset(&self, left: f64, top: f64, right: f64, bottom: f64) -> Rect {
        Rect::new(
            self.x + left,
            self.y + top,
            (self.width - left - right).max(1.0),
            (self.height - top - bottom).max(1.0),
        )
    }
}

/// One visual mark in canvas pixel coordinates. Angles are radians measured
/// clockwise on screen (y grows downwards) from the positive x axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mark {
    BarRect(Rect),
    LinePolyline {
        points: Vec<Point>,
    },
    PieSector {
        center: Point,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
    ScatterBubble {
        center: Point,
        radius: f64,
    },
}

impl Mark {
    /// Axis-aligned bounds, padded by `pad` pixels.
    pub fn bounds(&self, pad: f64) -> Rect {
        let (x0, y0, x1, y1) = match self {
            Mark::BarRect(r) => (r.x, r.y, r.right(), r.bottom()),
            Mark::LinePolyline { points } => points.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
            ),
            Mark::PieSector { center, radius, .. } | Mark::ScatterBubble { center, radius } => (
                center.x - radius,
                center.y - radius,
                center.x + radius,
                center.y + radius,
            ),
        };
        Rect::new(x0 - pad, y0 - pad, x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad)
    }

    pub fn sweep(&self) -> Option<f64> {
        match self {
            Mark::PieSector {
                start_angle,
                end_angle,
                ..
            } => Some(end_angle - start_angle),
            _ => None,
        }
    }
}

pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

pub(crate) fn polyline_distance(p: Point, points: &[Point]) -> f64 {
    match points {
        [] => f64::INFINITY,
        [only] => p.distance(*only),
        _ => points
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Polyline height at `x` by linear interpolation; `None` outside its x-span.
pub(crate) fn polyline_y_at(points: &[Point], x: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if x < first.x || x > last.x {
        return None;
    }
    if points.len() == 1 {
        return Some(first.y);
    }
    points.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if x >= a.x && x <= b.x {
            if b.x == a.x {
                Some(a.y.min(b.y))
            } else {
                Some(a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x))
            }
        } else {
            None
        }
    })
}

/// Angular position of `angle` relative to `start`, in `[0, 2π)`.
pub(crate) fn angle_offset(angle: f64, start: f64) -> f64 {
    (angle - start).rem_euclid(TAU)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub position: f64,
    pub label: String,
}

/// Resolved chart layout. `data_binding[i]` lists the source rows encoded
/// by `marks[i]`; for a line it is every plotted row in x order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartGeometry {
    pub chart_type: ChartType,
    pub canvas_size: (u32, u32),
    pub plot_area: Rect,
    pub marks: Vec<Mark>,
    pub data_binding: Vec<Vec<usize>>,
    /// Zero line of bar charts, snapped to a pixel row boundary.
    pub baseline: Option<f64>,
    pub x_ticks: Vec<Tick>,
    pub y_ticks: Vec<Tick>,
    pub x_label: String,
    pub y_label: String,
}

impl ChartGeometry {
    pub fn empty(chart_type: ChartType, canvas_size: (u32, u32)) -> Self {
        let (w, h) = canvas_size;
        ChartGeometry {
            chart_type,
            canvas_size,
            plot_area: Rect::new(0.0, 0.0, w as f64, h as f64),
            marks: Vec::new(),
            data_binding: Vec::new(),
            baseline: None,
            x_ticks: Vec::new(),
            y_ticks: Vec::new(),
            x_label: String::new(),
            y_label: String::new(),
        }
    }

    pub fn bars(&self) -> impl Iterator<Item = (usize, &Rect)> {
        self.marks.iter().enumerate().filter_map(|(i, m)| match m {
            Mark::BarRect(r) => Some((i, r)),
            _ => None,
        })
    }

    /// Index of the tallest bar, the replication reference.
    pub fn tallest_bar(&self) -> Option<usize> {
        self.bars()
            .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
                Some((_, h)) if h >= r.height => best,
                _ => Some((i, r.height)),
            })
            .map(|(i, _)| i)
    }
}

const BAR_FILL_FRACTION: f64 = 0.7;
const PIE_RADIUS_FRACTION: f64 = 0.42;
const BUBBLE_MAX_FRACTION: f64 = 0.08;
const Y_TICK_COUNT: usize = 5;

/// Largest rectangle of the requested aspect ratio centred in the canvas.
fn chart_frame(spec: &ChartSpec) -> Rect {
    let (w, h) = (spec.canvas_size.0 as f64, spec.canvas_size.1 as f64);
    let ar = spec.aspect_ratio.value();
    let (fw, fh) = if w / h > ar { (h * ar, h) } else { (w, w / ar) };
    Rect::new(((w - fw) / 2.0).round(), ((h - fh) / 2.0).round(), fw.round(), fh.round())
}

fn plot_area(frame: &Rect) -> Rect {
    let r = frame.inset(
        (frame.width * 0.12).round(),
        (frame.height * 0.10).round(),
        (frame.width * 0.05).round(),
        (frame.height * 0.12).round(),
    );
    Rect::new(r.x.round(), r.y.round(), r.width.round(), r.height.round())
}

struct Datum {
    row: usize,
    x: XValue,
    y: f64,
    size: Option<f64>,
}

#[derive(Clone)]
enum XValue {
    Num(f64),
    Cat(String),
}

impl XValue {
    fn label(&self) -> String {
        match self {
            XValue::Num(v) => format_number(*v),
            XValue::Cat(s) => s.clone(),
        }
    }
}

fn collect_data(table: &DataTable, spec: &ChartSpec) -> Result<(Vec<Datum>, bool), ChartError> {
    let (x_col, xs) = table.column(&spec.x_column)?;
    let (_, ys) = table.column(&spec.y_column)?;
    let sizes = match &spec.size_column {
        Some(name) => Some(table.column(name)?.1),
        None => None,
    };
    let x_numeric = x_col.kind == ColumnKind::Numeric;
    let mut data = Vec::new();
    for row in 0..table.row_count() {
        let Some(y) = ys[row].as_f64() else { continue };
        let x = match xs[row] {
            Cell::Number(v) => XValue::Num(*v),
            Cell::Text(s) => XValue::Cat(s.clone()),
            Cell::Empty if x_numeric => continue,
            Cell::Empty => XValue::Cat(String::new()),
        };
        let size = match &sizes {
            Some(s) => match s[row].as_f64() {
                Some(v) => Some(v),
                None => continue,
            },
            None => None,
        };
        data.push(Datum { row, x, y, size });
    }
    if data.is_empty() {
        return Err(ChartError::DegenerateData("no plottable rows".into()));
    }
    if x_numeric && spec.chart_type != ChartType::Pie {
        data.sort_by(|a, b| match (&a.x, &b.x) {
            (XValue::Num(p), XValue::Num(q)) => p.total_cmp(q),
            _ => std::cmp::Ordering::Equal,
        });
    }
    Ok((data, x_numeric))
}

struct LinearScale {
    domain: (f64, f64),
    range: (f64, f64),
}

impl LinearScale {
    fn map(&self, v: f64) -> f64 {
        let (d0, d1) = self.domain;
        let (r0, r1) = self.range;
        r0 + (v - d0) * (r1 - r0) / (d1 - d0)
    }
}

fn padded_domain(values: impl Iterator<Item = f64>, pad_fraction: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = (hi - lo) * pad_fraction;
        (lo - pad, hi + pad)
    }
}

fn y_ticks(scale: &LinearScale) -> Vec<Tick> {
    let (lo, hi) = scale.domain;
    (0..Y_TICK_COUNT)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / (Y_TICK_COUNT - 1) as f64;
            Tick {
                position: scale.map(v),
                label: format_number(v),
            }
        })
        .collect()
}

/// Horizontal placement shared by bars, lines and scatter plots.
fn x_positions(data: &[Datum], numeric: bool, left: f64, width: f64) -> Vec<f64> {
    if numeric {
        let nums: Vec<f64> = data
            .iter()
            .map(|d| match d.x {
                XValue::Num(v) => v,
                XValue::Cat(_) => unreachable!("numeric x column"),
            })
            .collect();
        let (lo, hi) = nums
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if lo == hi {
            return vec![left + width / 2.0; nums.len()];
        }
        let scale = LinearScale {
            domain: (lo, hi),
            range: (left, left + width),
        };
        nums.iter().map(|&v| scale.map(v)).collect()
    } else {
        let band = width / data.len() as f64;
        (0..data.len())
            .map(|i| left + band * (i as f64 + 0.5))
            .collect()
    }
}

/// Resolves pixel geometry for a table under a chart spec.
pub fn derive_geometry(table: &DataTable, spec: &ChartSpec) -> Result<ChartGeometry, ChartError> {
    spec.validate(table)?;
    let (data, x_numeric) = collect_data(table, spec)?;
    let frame = chart_frame(spec);
    let plot = plot_area(&frame);
    let mut geom = ChartGeometry::empty(spec.chart_type, spec.canvas_size);
    geom.plot_area = plot;
    geom.x_label = spec.x_column.clone();
    geom.y_label = spec.y_column.clone();
    match spec.chart_type {
        ChartType::Bar => bar_geometry(&mut geom, &data),
        ChartType::Line => line_geometry(&mut geom, &data, x_numeric),
        ChartType::Pie => pie_geometry(&mut geom, &data)?,
        ChartType::Scatter => scatter_geometry(&mut geom, &data, x_numeric)?,
    }
    Ok(geom)
}

fn bar_geometry(geom: &mut ChartGeometry, data: &[Datum]) {
    let plot = geom.plot_area;
    let lo = data.iter().map(|d| d.y).fold(0.0, f64::min);
    let mut hi = data.iter().map(|d| d.y).fold(0.0, f64::max);
    if hi == lo {
        hi = lo + 1.0;
    }
    let px_per_unit = plot.height / (hi - lo);
    let baseline = (plot.y + hi * px_per_unit).round();
    let band = plot.width / data.len() as f64;
    let bar_w = (band * BAR_FILL_FRACTION).round().max(1.0);
    for (i, d) in data.iter().enumerate() {
        let x = (plot.x + band * i as f64 + (band - bar_w) / 2.0).round();
        let h = d.y.abs() * px_per_unit;
        let y = if d.y >= 0.0 { baseline - h } else { baseline };
        geom.marks.push(Mark::BarRect(Rect::new(x, y, bar_w, h)));
        geom.data_binding.push(vec![d.row]);
        geom.x_ticks.push(Tick {
            position: x + bar_w / 2.0,
            label: d.x.label(),
        });
    }
    geom.baseline = Some(baseline);
    let scale = LinearScale {
        domain: (lo, hi),
        range: (baseline + lo * px_per_unit, baseline - hi * px_per_unit),
    };
    geom.y_ticks = y_ticks(&scale);
}

fn line_geometry(geom: &mut ChartGeometry, data: &[Datum], x_numeric: bool) {
    let plot = geom.plot_area;
    let xs = x_positions(data, x_numeric, plot.x, plot.width);
    let scale = LinearScale {
        domain: padded_domain(data.iter().map(|d| d.y), 0.05),
        range: (plot.bottom(), plot.y),
    };
    let points = data
        .iter()
        .zip(&xs)
        .map(|(d, &x)| Point::new(x, scale.map(d.y)))
        .collect();
    geom.marks.push(Mark::LinePolyline { points });
    geom.data_binding.push(data.iter().map(|d| d.row).collect());
    geom.x_ticks = data
        .iter()
        .zip(&xs)
        .map(|(d, &x)| Tick {
            position: x,
            label: d.x.label(),
        })
        .collect();
    geom.y_ticks = y_ticks(&scale);
}

fn pie_geometry(geom: &mut ChartGeometry, data: &[Datum]) -> Result<(), ChartError> {
    if let Some(d) = data.iter().find(|d| d.y < 0.0) {
        return Err(ChartError::NegativePieValue {
            row: d.row,
            value: d.y,
        });
    }
    let total: f64 = data.iter().map(|d| d.y).sum();
    if total <= 0.0 {
        return Err(ChartError::DegenerateData("pie values sum to zero".into()));
    }
    let plot = geom.plot_area;
    let center = plot.center();
    let radius = PIE_RADIUS_FRACTION * plot.width.min(plot.height);
    let start0 = -FRAC_PI_2;
    let mut cumulative = 0.0;
    let mut start = start0;
    for (i, d) in data.iter().enumerate() {
        cumulative += d.y;
        // the last sector closes the circle exactly
        let end = if i + 1 == data.len() {
            start0 + TAU
        } else {
            start0 + TAU * cumulative / total
        };
        geom.marks.push(Mark::PieSector {
            center,
            radius,
            start_angle: start,
            end_angle: end,
        });
        geom.data_binding.push(vec![d.row]);
        geom.x_ticks.push(Tick {
            position: (start + end) / 2.0,
            label: d.x.label(),
        });
        start = end;
    }
    Ok(())
}

fn scatter_geometry(geom: &mut ChartGeometry, data: &[Datum], x_numeric: bool) -> Result<(), ChartError> {
    if let Some(d) = data.iter().find(|d| d.size.is_some_and(|s| s < 0.0)) {
        return Err(ChartError::NegativeSizeValue {
            row: d.row,
            value: d.size.unwrap_or_default(),
        });
    }
    let plot = geom.plot_area;
    let r_max = BUBBLE_MAX_FRACTION * plot.width.min(plot.height);
    let inner = plot.inset(r_max, r_max, r_max, r_max);
    let xs = x_positions(data, x_numeric, inner.x, inner.width);
    let scale = LinearScale {
        domain: padded_domain(data.iter().map(|d| d.y), 0.0),
        range: (inner.bottom(), inner.y),
    };
    let size_max = data.iter().filter_map(|d| d.size).fold(0.0, f64::max);
    for (d, &x) in data.iter().zip(&xs) {
        // bubble area encodes the size value
        let radius = match d.size {
            Some(s) if size_max > 0.0 => r_max * (s / size_max).sqrt(),
            Some(_) => 0.0,
            None => r_max / 2.0,
        };
        geom.marks.push(Mark::ScatterBubble {
            center: Point::new(x, scale.map(d.y)),
            radius,
        });
        geom.data_binding.push(vec![d.row]);
        geom.x_ticks.push(Tick {
            position: x,
            label: d.x.label(),
        });
    }
    geom.y_ticks = y_ticks(&scale);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{parse_table, TableFormat};

    fn table(csv: &str) -> DataTable {
        parse_table(csv.as_bytes(), TableFormat::Csv).unwrap()
    }

    #[test]
    fn equal_pie_shares_are_right_angles() {
        let t = table("k,v\na,25\nb,25\nc,25\nd,25\n");
        let g = derive_geometry(&t, &ChartSpec::new(ChartType::Pie, "k", "v")).unwrap();
        assert_eq!(g.marks.len(), 4);
        for m in &g.marks {
            assert!((m.sweep().unwrap() - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn bar_heights_are_proportional() {
        let t = table("k,v\na,1\nb,2\n");
        let g = derive_geometry(&t, &ChartSpec::new(ChartType::Bar, "k", "v")).unwrap();
        let hs: Vec<f64> = g.bars().map(|(_, r)| r.height).collect();
        assert_eq!(hs[1], 2.0 * hs[0]);
        assert_eq!(g.bars().next().unwrap().1.bottom(), g.baseline.unwrap());
    }

    #[test]
    fn negative_pie_value_is_rejected() {
        let t = table("k,v\na,1\nb,-2\n");
        let err = derive_geometry(&t, &ChartSpec::new(ChartType::Pie, "k", "v")).unwrap_err();
        assert_eq!(err, ChartError::NegativePieValue { row: 1, value: -2.0 });
    }

    #[test]
    fn missing_column_is_reported() {
        let t = table("k,v\na,1\n");
        let err = derive_geometry(&t, &ChartSpec::new(ChartType::Bar, "k", "nope")).unwrap_err();
        assert_eq!(err, ChartError::ColumnMissing("nope".into()));
    }

    #[test]
    fn line_points_are_sorted_by_numeric_x() {
        let t = table("x,y\n3,1\n1,5\n2,2\n");
        let g = derive_geometry(&t, &ChartSpec::new(ChartType::Line, "x", "y")).unwrap();
        let Mark::LinePolyline { points } = &g.marks[0] else { panic!() };
        assert!(points.windows(2).all(|w| w[0].x < w[1].x));
        assert_eq!(g.data_binding[0], vec![1, 2, 0]);
    }

    #[test]
    fn scatter_radius_follows_square_root_law() {
        let t = table("x,y,s\n1,1,1\n2,2,4\n");
        let spec = ChartSpec::new(ChartType::Scatter, "x", "y").with_size_column("s");
        let g = derive_geometry(&t, &spec).unwrap();
        let r: Vec<f64> = g
            .marks
            .iter()
            .map(|m| match m {
                Mark::ScatterBubble { radius, .. } => *radius,
                _ => unreachable!(),
            })
            .collect();
        assert!((r[1] / r[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wide_aspect_ratio_pads_vertically() {
        let t = table("k,v\na,1\n");
        let spec = ChartSpec::new(ChartType::Bar, "k", "v").with_aspect_ratio(2, 1);
        let g = derive_geometry(&t, &spec).unwrap();
        assert!(g.plot_area.y > 128.0);
        assert!(g.plot_area.bottom() < 384.0);
    }
}
