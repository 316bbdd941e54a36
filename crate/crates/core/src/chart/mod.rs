//! Tabular ingestion and plain chart construction.
//!
//! A [`DataTable`] plus a [`ChartSpec`] resolve to a [`ChartGeometry`] of
//! pixel-space marks. Geometry renders to a flat preview, to binary
//! [`ChartMask`]s that condition generation, and to an SVG annotation layer.

mod annotate;
mod augment;
mod geometry;
mod mask;
mod render;
mod table;

pub use annotate::{export_annotations, AnnotationDocument, AnnotationElement};
pub use augment::{augment, integrity_shift, AugmentOp};
pub(crate) use geometry::polyline_distance;
pub use geometry::{derive_geometry, ChartGeometry, Mark, Point, Rect, Tick};
pub use mask::{synthesize_mask, ChartMask, MaskVariant};
pub use render::{render_plain, BACKGROUND_COLOR, LINE_STROKE_WIDTH, MARK_COLOR};
pub use table::{parse_table, Cell, Column, ColumnKind, DataTable, TableFormat};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("malformed input ({location}): {message}")]
    MalformedInput { location: String, message: String },
    #[error("table has no numeric column")]
    NoNumericColumn,
    #[error("table has no data rows")]
    EmptyTable,
    #[error("column `{0}` not found")]
    ColumnMissing(String),
    #[error("column `{0}` must be numeric")]
    ColumnNotNumeric(String),
    #[error("pie value {value} in row {row} is negative")]
    NegativePieValue { row: usize, value: f64 },
    #[error("size value {value} in row {row} is negative")]
    NegativeSizeValue { row: usize, value: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),
    #[error("mask variant {variant} is not available for {chart_type} charts")]
    IncompatibleVariant {
        variant: &'static str,
        chart_type: ChartType,
    },
    #[error("invalid augmentation parameters: {0}")]
    InvalidParams(String),
    #[error("augmentation moved data-bearing edges by {shift:.2} px (limit {limit} px)")]
    IntegrityViolated { shift: f64, limit: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Bar,
    Line,
    Pie,
    Scatter,
}

impl std::fmt::Display for ChartType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChartType::Bar => "bar",
            ChartType::Line => "line",
            ChartType::Pie => "pie",
            ChartType::Scatter => "scatter",
        })
    }
}

impl std::str::FromStr for ChartType {
    type Err = ChartError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bar" => Ok(ChartType::Bar),
            "line" => Ok(ChartType::Line),
            "pie" => Ok(ChartType::Pie),
            "scatter" => Ok(ChartType::Scatter),
            other => Err(ChartError::InvalidSpec(format!("unknown chart type `{other}`"))),
        }
    }
}

pub const DEFAULT_CANVAS: u32 = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectRatio {
    pub width: u32,
    pub height: u32,
}

impl AspectRatio {
    pub const SQUARE: AspectRatio = AspectRatio {
        width: 1,
        height: 1,
    };

    pub fn value(&self) -> f64 {
        self.width as f64 / self.height as f64
    }
}

impl Default for AspectRatio {
    fn default() -> Self {
        AspectRatio::SQUARE
    }
}

/// Chart type, column bindings and canvas. The aspect ratio is realised by
/// padding the chart frame inside the canvas, never by stretching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub x_column: String,
    pub y_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_column: Option<String>,
    #[serde(default = "default_canvas")]
    pub canvas_size: (u32, u32),
    #[serde(default)]
    pub aspect_ratio: AspectRatio,
}

fn default_canvas() -> (u32, u32) {
    (DEFAULT_CANVAS, DEFAULT_CANVAS)
}

impl ChartSpec {
    pub fn new(chart_type: ChartType, x_column: &str, y_column: &str) -> Self {
        ChartSpec {
            chart_type,
            x_column: x_column.to_string(),
            y_column: y_column.to_string(),
            size_column: None,
            canvas_size: default_canvas(),
            aspect_ratio: AspectRatio::SQUARE,
        }
    }

    pub fn with_size_column(mut self, column: &str) -> Self {
        self.size_column = Some(column.to_string());
        self
    }

    pub fn with_canvas(mut self, width: u32, height: u32) -> Self {
        self.canvas_size = (width, height);
        self
    }

    pub fn with_aspect_ratio(mut self, width: u32, height: u32) -> Self {
        self.aspect_ratio = AspectRatio { width, height };
        self
    }

    /// Checks the spec against a table. `derive_geometry` calls this first.
    pub fn validate(&self, table: &DataTable) -> Result<(), ChartError> {
        let (w, h) = self.canvas_size;
        if w == 0 || h == 0 {
            return Err(ChartError::InvalidSpec("canvas dimensions must be positive".into()));
        }
        if self.aspect_ratio.width == 0 || self.aspect_ratio.height == 0 {
            return Err(ChartError::InvalidSpec("aspect ratio terms must be positive".into()));
        }
        table.column_index(&self.x_column)?;
        let y = table.column_index(&self.y_column)?;
        if table.columns()[y].kind != ColumnKind::Numeric {
            return Err(ChartError::ColumnNotNumeric(self.y_column.clone()));
        }
        if let Some(size) = &self.size_column {
            if self.chart_type != ChartType::Scatter {
                return Err(ChartError::InvalidSpec(
                    "size column is only meaningful for scatter plots".into(),
                ));
            }
            let s = table.column_index(size)?;
            if table.columns()[s].kind != ColumnKind::Numeric {
                return Err(ChartError::ColumnNotNumeric(size.clone()));
            }
        }
        Ok(())
    }
}
