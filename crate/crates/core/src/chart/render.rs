use std::f64::consts::TAU;

use super::geometry::{angle_offset, polyline_distance, polyline_y_at, segment_distance};
use super::{ChartGeometry, ChartSpec, Mark, Point, Rect};
use crate::raster::{BinaryGrid, RasterImage};

pub const BACKGROUND_COLOR: [u8; 4] = [255, 255, 255, 255];
pub const MARK_COLOR: [u8; 4] = [70, 130, 180, 255];
/// Stroke width of line marks in the preview and the solid line mask.
pub const LINE_STROKE_WIDTH: f64 = 10.0;
/// Half-width of the background gap drawn between adjacent pie sectors.
pub(crate) const PIE_SEPARATOR: f64 = 0.75;

/// Region a mark occupies under a particular drawing style. Pixels are
/// sampled at their centres; there is no antialiasing.
pub(crate) enum Shape<'a> {
    Rect(Rect),
    Stroke {
        points: &'a [Point],
        half_width: f64,
    },
    UnderCurve {
        points: &'a [Point],
        half_width: f64,
        floor: f64,
    },
    Sector {
        center: Point,
        radius: f64,
        start: f64,
        end: f64,
        gap: f64,
    },
    Disc {
        center: Point,
        radius: f64,
    },
}

impl Shape<'_> {
    fn bounds(&self) -> Rect {
        match self {
            Shape::Rect(r) => *r,
            Shape::Stroke { points, half_width } => {
                Mark::LinePolyline {
                    points: points.to_vec(),
                }
                .bounds(*half_width)
            }
            Shape::UnderCurve {
                points,
                half_width,
                floor,
            } => {
                let b = Mark::LinePolyline {
                    points: points.to_vec(),
                }
                .bounds(*half_width);
                Rect::new(b.x, b.y, b.width, (floor - b.y).max(b.height))
            }
            Shape::Sector { center, radius, .. } | Shape::Disc { center, radius } => {
                Rect::new(center.x - radius, center.y - radius, 2.0 * radius, 2.0 * radius)
            }
        }
    }

    pub(crate) fn covers(&self, p: Point) -> bool {
        match self {
            Shape::Rect(r) => r.contains(p),
            Shape::Stroke { points, half_width } => polyline_distance(p, points) <= *half_width,
            Shape::UnderCurve {
                points,
                half_width,
                floor,
            } => {
                polyline_distance(p, points) <= *half_width
                    || (p.y <= *floor && polyline_y_at(points, p.x).is_some_and(|y| p.y >= y))
            }
            Shape::Sector {
                center,
                radius,
                start,
                end,
                gap,
            } => {
                let sweep = end - start;
                if sweep <= 0.0 || p.distance(*center) > *radius {
                    return false;
                }
                if sweep >= TAU {
                    return true;
                }
                let a = (p.y - center.y).atan2(p.x - center.x);
                if angle_offset(a, *start) >= sweep {
                    return false;
                }
                let ray = |phi: f64| {
                    Point::new(center.x + radius * phi.cos(), center.y + radius * phi.sin())
                };
                segment_distance(p, *center, ray(*start)) > *gap
                    && segment_distance(p, *center, ray(*end)) > *gap
            }
            Shape::Disc { center, radius } => p.distance(*center) <= *radius,
        }
    }
}

/// Accumulates per-pixel coverage counts for a set of shapes.
pub(crate) fn coverage_counts(width: u32, height: u32, shapes: &[Shape<'_>]) -> Vec<u16> {
    let mut counts = vec![0u16; width as usize * height as usize];
    for shape in shapes {
        let b = shape.bounds();
        let x0 = (b.x - 1.0).floor().max(0.0) as u32;
        let y0 = (b.y - 1.0).floor().max(0.0) as u32;
        let x1 = ((b.right() + 1.0).ceil().max(0.0) as u32).min(width);
        let y1 = ((b.bottom() + 1.0).ceil().max(0.0) as u32).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                if shape.covers(Point::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    counts[y as usize * width as usize + x as usize] += 1;
                }
            }
        }
    }
    counts
}

pub(crate) fn rasterize(width: u32, height: u32, shapes: &[Shape<'_>]) -> BinaryGrid {
    let counts = coverage_counts(width, height, shapes);
    BinaryGrid::from_bits(width, height, counts.iter().map(|&c| c > 0).collect())
        .expect("coverage buffer matches canvas")
}

/// Shapes of the plain preview: filled bars, stroked line, gapped sectors,
/// filled bubbles.
pub(crate) fn solid_shapes(geometry: &ChartGeometry) -> Vec<Shape<'_>> {
    geometry
        .marks
        .iter()
        .map(|m| match m {
            Mark::BarRect(r) => Shape::Rect(*r),
            Mark::LinePolyline { points } => Shape::Stroke {
                points,
                half_width: LINE_STROKE_WIDTH / 2.0,
            },
            Mark::PieSector {
                center,
                radius,
                start_angle,
                end_angle,
            } => Shape::Sector {
                center: *center,
                radius: *radius,
                start: *start_angle,
                end: *end_angle,
                gap: PIE_SEPARATOR,
            },
            Mark::ScatterBubble { center, radius } => Shape::Disc {
                center: *center,
                radius: *radius,
            },
        })
        .collect()
}

/// Flat single-colour preview of the marks on a white canvas. Axes and
/// labels live in the annotation layer, not here.
pub fn render_plain(geometry: &ChartGeometry, spec: &ChartSpec) -> RasterImage {
    let (w, h) = spec.canvas_size;
    let bits = rasterize(w, h, &solid_shapes(geometry));
    let mut img = RasterImage::filled(w, h, BACKGROUND_COLOR);
    for y in 0..h {
        for x in 0..w {
            if bits.get(x, y) {
                img.set_pixel(x, y, MARK_COLOR);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartType;

    #[test]
    fn empty_geometry_renders_background_only() {
        let spec = ChartSpec::new(ChartType::Bar, "x", "y");
        let geom = ChartGeometry::empty(ChartType::Bar, spec.canvas_size);
        let img = render_plain(&geom, &spec);
        assert!(img.pixels().all(|p| p == BACKGROUND_COLOR));
    }

    #[test]
    fn full_width_bar_covers_exactly_its_area() {
        let spec = ChartSpec::new(ChartType::Bar, "x", "y").with_canvas(64, 48);
        let mut geom = ChartGeometry::empty(ChartType::Bar, spec.canvas_size);
        geom.marks.push(Mark::BarRect(Rect::new(0.0, 48.0 - 20.0, 64.0, 20.0)));
        let img = render_plain(&geom, &spec);
        let marked = img.pixels().filter(|p| *p == MARK_COLOR).count();
        assert_eq!(marked, 64 * 20);
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = ChartSpec::new(ChartType::Pie, "x", "y");
        let mut geom = ChartGeometry::empty(ChartType::Pie, spec.canvas_size);
        geom.marks.push(Mark::PieSector {
            center: Point::new(256.0, 256.0),
            radius: 100.0,
            start_angle: 0.3,
            end_angle: 2.0,
        });
        assert_eq!(render_plain(&geom, &spec), render_plain(&geom, &spec));
    }
}
