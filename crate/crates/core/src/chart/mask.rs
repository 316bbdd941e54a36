use serde::{Deserialize, Serialize};

use super::render::{coverage_counts, rasterize, solid_shapes, Shape, LINE_STROKE_WIDTH};
use super::{ChartError, ChartGeometry, ChartType, Mark};
use crate::raster::BinaryGrid;

/// Gap half-width between sectors for [`MaskVariant::SectorFill`].
const SECTOR_FILL_GAP: f64 = 2.0;

/// Mask styles. `SolidMarks` applies to every chart type and matches the
/// plain preview; the others are type-specific.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskVariant {
    SolidMarks,
    /// Line only: stroke plus the area under the curve down to the plot floor.
    FilledUnderCurve,
    /// Line only: band of `width` px centred on the polyline.
    StrokeBand { width: f64 },
    /// Pie only: sectors separated by a clear gap.
    SectorFill,
    /// Scatter only: bubbles with overlapping regions cleared.
    BubbleFill,
}

impl MaskVariant {
    pub fn name(&self) -> &'static str {
        match self {
            MaskVariant::SolidMarks => "solid_marks",
            MaskVariant::FilledUnderCurve => "filled_under_curve",
            MaskVariant::StrokeBand { .. } => "stroke_band",
            MaskVariant::SectorFill => "sector_fill",
            MaskVariant::BubbleFill => "bubble_fill",
        }
    }

    pub fn supports(&self, chart_type: ChartType) -> bool {
        match self {
            MaskVariant::SolidMarks => true,
            MaskVariant::FilledUnderCurve | MaskVariant::StrokeBand { .. } => chart_type == ChartType::Line,
            MaskVariant::SectorFill => chart_type == ChartType::Pie,
            MaskVariant::BubbleFill => chart_type == ChartType::Scatter,
        }
    }

    /// Variant used when the caller does not pick one.
    pub fn default_for(chart_type: ChartType) -> MaskVariant {
        match chart_type {
            ChartType::Bar => MaskVariant::SolidMarks,
            ChartType::Line => MaskVariant::StrokeBand { width: 24.0 },
            ChartType::Pie => MaskVariant::SectorFill,
            ChartType::Scatter => MaskVariant::BubbleFill,
        }
    }
}

/// Binary raster of chart marks, the generation condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartMask {
    pub pixels: BinaryGrid,
    pub variant: MaskVariant,
    pub geometry: ChartGeometry,
}

impl ChartMask {
    pub fn dims(&self) -> (u32, u32) {
        self.pixels.dims()
    }

    pub fn with_pixels(&self, pixels: BinaryGrid) -> ChartMask {
        ChartMask {
            pixels,
            variant: self.variant,
            geometry: self.geometry.clone(),
        }
    }
}

pub fn synthesize_mask(geometry: &ChartGeometry, variant: MaskVariant) -> Result<ChartMask, ChartError> {
    if !variant.supports(geometry.chart_type) {
        return Err(ChartError::IncompatibleVariant {
            variant: variant.name(),
            chart_type: geometry.chart_type,
        });
    }
    let (w, h) = geometry.canvas_size;
    let pixels = match variant {
        MaskVariant::SolidMarks => rasterize(w, h, &solid_shapes(geometry)),
        MaskVariant::FilledUnderCurve => {
            let floor = geometry.plot_area.bottom();
            let shapes: Vec<Shape<'_>> = line_points(geometry)
                .map(|points| Shape::UnderCurve {
                    points,
                    half_width: LINE_STROKE_WIDTH / 2.0,
                    floor,
                })
                .collect();
            rasterize(w, h, &shapes)
        }
        MaskVariant::StrokeBand { width } => {
            if !(width > 0.0 && width.is_finite()) {
                return Err(ChartError::InvalidParams(format!("band width {width} must be positive")));
            }
            let shapes: Vec<Shape<'_>> = line_points(geometry)
                .map(|points| Shape::Stroke {
                    points,
                    half_width: width / 2.0,
                })
                .collect();
            rasterize(w, h, &shapes)
        }
        MaskVariant::SectorFill => {
            let shapes: Vec<Shape<'_>> = solid_shapes(geometry)
                .into_iter()
                .map(|s| match s {
                    Shape::Sector {
                        center,
                        radius,
                        start,
                        end,
                        ..
                    } => Shape::Sector {
                        center,
                        radius,
                        start,
                        end,
                        gap: SECTOR_FILL_GAP,
                    },
                    other => other,
                })
                .collect();
            rasterize(w, h, &shapes)
        }
        MaskVariant::BubbleFill => {
            let counts = coverage_counts(w, h, &solid_shapes(geometry));
            BinaryGrid::from_bits(w, h, counts.iter().map(|&c| c == 1).collect())
                .expect("coverage buffer matches canvas")
        }
    };
    Ok(ChartMask {
        pixels,
        variant,
        geometry: geometry.clone(),
    })
}

fn line_points(geometry: &ChartGeometry) -> impl Iterator<Item = &[super::Point]> {
    geometry.marks.iter().filter_map(|m| match m {
        Mark::LinePolyline { points } => Some(points.as_slice()),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{derive_geometry, parse_table, render_plain, ChartSpec, TableFormat, MARK_COLOR};

    fn geometry(kind: ChartType, csv: &str) -> (ChartGeometry, ChartSpec) {
        let t = parse_table(csv.as_bytes(), TableFormat::Csv).unwrap();
        let spec = ChartSpec::new(kind, "x", "y");
        (derive_geometry(&t, &spec).unwrap(), spec)
    }

    #[test]
    fn solid_bar_mask_is_exactly_the_rectangles() {
        let (g, _) = geometry(ChartType::Bar, "x,y\na,3\nb,5\nc,2\n");
        let m = synthesize_mask(&g, MaskVariant::SolidMarks).unwrap();
        let rects: Vec<_> = g.bars().map(|(_, r)| *r).collect();
        for y in 0..512 {
            for x in 0..512 {
                let p = super::super::Point::new(x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(m.pixels.get(x, y), rects.iter().any(|r| r.contains(p)));
            }
        }
    }

    #[test]
    fn stroke_band_on_pie_is_incompatible() {
        let (g, _) = geometry(ChartType::Pie, "x,y\na,3\nb,5\n");
        let err = synthesize_mask(&g, MaskVariant::StrokeBand { width: 8.0 }).unwrap_err();
        assert!(matches!(err, ChartError::IncompatibleVariant { variant: "stroke_band", .. }));
    }

    #[test]
    fn solid_mask_matches_preview_for_every_type() {
        for kind in [ChartType::Bar, ChartType::Line, ChartType::Pie, ChartType::Scatter] {
            let (g, spec) = geometry(kind, "x,y\n1,3\n2,5\n3,2\n4,4\n");
            let m = synthesize_mask(&g, MaskVariant::SolidMarks).unwrap();
            let img = render_plain(&g, &spec);
            for y in 0..512 {
                for x in 0..512 {
                    assert_eq!(m.pixels.get(x, y), img.pixel(x, y) == MARK_COLOR);
                }
            }
        }
    }

    #[test]
    fn filled_under_curve_contains_stroke() {
        let (g, _) = geometry(ChartType::Line, "x,y\n1,3\n2,5\n3,2\n");
        let solid = synthesize_mask(&g, MaskVariant::SolidMarks).unwrap();
        let filled = synthesize_mask(&g, MaskVariant::FilledUnderCurve).unwrap();
        assert!(solid.pixels.is_subset_of(&filled.pixels));
        assert!(filled.pixels.count_ones() > 3 * solid.pixels.count_ones());
    }

    #[test]
    fn sector_fill_is_strictly_inside_solid_sectors() {
        let (g, _) = geometry(ChartType::Pie, "x,y\na,3\nb,5\nc,1\n");
        let solid = synthesize_mask(&g, MaskVariant::SolidMarks).unwrap();
        let fill = synthesize_mask(&g, MaskVariant::SectorFill).unwrap();
        assert!(fill.pixels.is_subset_of(&solid.pixels));
        assert!(fill.pixels.count_ones() < solid.pixels.count_ones());
    }

    #[test]
    fn bubble_fill_clears_overlaps() {
        let (g, _) = geometry(ChartType::Scatter, "x,y\n1,1\n1.05,1.05\n3,3\n");
        let solid = synthesize_mask(&g, MaskVariant::SolidMarks).unwrap();
        let fill = synthesize_mask(&g, MaskVariant::BubbleFill).unwrap();
        assert!(fill.pixels.is_subset_of(&solid.pixels));
        assert!(fill.pixels.count_ones() < solid.pixels.count_ones());
    }
}
