use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ChartGeometry, ChartType, DataTable, Mark};

/// Editable overlay of axes, tick labels and title. Every element carries a
/// unique `id` so the editor can address it individually.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub width: u32,
    pub height: u32,
    pub elements: Vec<AnnotationElement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "snake_case")]
pub enum AnnotationElement {
    Line {
        id: String,
        class: String,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },
    Text {
        id: String,
        class: String,
        x: f64,
        y: f64,
        anchor: String,
        content: String,
    },
}

impl AnnotationElement {
    pub fn class(&self) -> &str {
        match self {
            AnnotationElement::Line { class, .. } | AnnotationElement::Text { class, .. } => class,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            AnnotationElement::Line { id, .. } | AnnotationElement::Text { id, .. } => id,
        }
    }
}

impl AnnotationDocument {
    pub fn count_class(&self, class: &str) -> usize {
        self.elements.iter().filter(|e| e.class() == class).count()
    }

    pub fn to_svg(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        for el in &self.elements {
            match el {
                AnnotationElement::Line {
                    id,
                    class,
                    x1,
                    y1,
                    x2,
                    y2,
                } => {
                    let _ = writeln!(
                        out,
                        r##"  <line id="{}" class="{}" x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#333" stroke-width="1"/>"##,
                        escape(id),
                        escape(class)
                    );
                }
                AnnotationElement::Text {
                    id,
                    class,
                    x,
                    y,
                    anchor,
                    content,
                } => {
                    let size = if class == "title" { 18 } else { 11 };
                    let _ = writeln!(
                        out,
                        r##"  <text id="{}" class="{}" x="{x:.1}" y="{y:.1}" text-anchor="{}" font-family="sans-serif" font-size="{size}" fill="#333">{}</text>"##,
                        escape(id),
                        escape(class),
                        escape(anchor),
                        escape(content)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn text(id: String, class: &str, x: f64, y: f64, anchor: &str, content: &str) -> AnnotationElement {
    AnnotationElement::Text {
        id,
        class: class.to_string(),
        x,
        y,
        anchor: anchor.to_string(),
        content: content.to_string(),
    }
}

/// Builds the annotation overlay. Cartesian charts get both axes, one x tick
/// label per datum and the y ticks; pie charts get one label per sector
/// instead of axes. The title element is present only for titled tables.
pub fn export_annotations(geometry: &ChartGeometry, table: &DataTable) -> AnnotationDocument {
    let (width, height) = geometry.canvas_size;
    let plot = geometry.plot_area;
    let mut elements = Vec::new();
    if let Some(title) = table.title() {
        elements.push(text(
            "title".into(),
            "title",
            width as f64 / 2.0,
            (plot.y / 2.0).max(18.0),
            "middle",
            title,
        ));
    }
    if geometry.chart_type == ChartType::Pie {
        for (i, (tick, mark)) in geometry.x_ticks.iter().zip(&geometry.marks).enumerate() {
            if let Mark::PieSector { center, radius, .. } = mark {
                let r = radius * 1.12;
                let (x, y) = (center.x + r * tick.position.cos(), center.y + r * tick.position.sin());
                let anchor = if tick.position.cos() >= 0.0 { "start" } else { "end" };
                elements.push(text(format!("label-{i}"), "label", x, y, anchor, &tick.label));
            }
        }
        return AnnotationDocument {
            width,
            height,
            elements,
        };
    }
    let axis_y = geometry.baseline.unwrap_or(plot.bottom());
    elements.push(AnnotationElement::Line {
        id: "x-axis".into(),
        class: "axis".into(),
        x1: plot.x,
        y1: axis_y,
        x2: plot.right(),
        y2: axis_y,
    });
    elements.push(AnnotationElement::Line {
        id: "y-axis".into(),
        class: "axis".into(),
        x1: plot.x,
        y1: plot.y,
        x2: plot.x,
        y2: plot.bottom(),
    });
    for (i, tick) in geometry.x_ticks.iter().enumerate() {
        elements.push(text(
            format!("x-tick-{i}"),
            "x-tick",
            tick.position,
            plot.bottom() + 16.0,
            "middle",
            &tick.label,
        ));
    }
    for (i, tick) in geometry.y_ticks.iter().enumerate() {
        elements.push(text(
            format!("y-tick-{i}"),
            "y-tick",
            plot.x - 6.0,
            tick.position + 4.0,
            "end",
            &tick.label,
        ));
    }
    elements.push(text(
        "x-label".into(),
        "axis-label",
        plot.center().x,
        (plot.bottom() + 36.0).min(height as f64 - 4.0),
        "middle",
        &geometry.x_label,
    ));
    elements.push(text(
        "y-label".into(),
        "axis-label",
        (plot.x - 40.0).max(10.0),
        plot.y - 8.0,
        "start",
        &geometry.y_label,
    ));
    AnnotationDocument {
        width,
        height,
        elements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{derive_geometry, parse_table, ChartSpec, TableFormat};

    fn doc(csv: &str, title: Option<&str>, kind: ChartType) -> AnnotationDocument {
        let mut t = parse_table(csv.as_bytes(), TableFormat::Csv).unwrap();
        if let Some(title) = title {
            t = t.with_title(title);
        }
        let g = derive_geometry(&t, &ChartSpec::new(kind, "k", "v")).unwrap();
        export_annotations(&g, &t)
    }

    #[test]
    fn titled_table_has_one_title_element() {
        let d = doc("k,v\na,1\nb,2\n", Some("Desert area"), ChartType::Bar);
        let titles: Vec<_> = d
            .elements
            .iter()
            .filter_map(|e| match e {
                AnnotationElement::Text { class, content, .. } if class == "title" => Some(content.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(titles, ["Desert area"]);
        assert!(d.to_svg().contains(">Desert area</text>"));
    }

    #[test]
    fn five_rows_give_five_x_ticks() {
        let d = doc("k,v\na,1\nb,2\nc,3\nd,4\ne,5\n", None, ChartType::Bar);
        assert_eq!(d.count_class("x-tick"), 5);
    }

    #[test]
    fn untitled_table_still_has_axes() {
        let d = doc("k,v\na,1\n", None, ChartType::Line);
        assert_eq!(d.count_class("title"), 0);
        assert_eq!(d.count_class("axis"), 2);
    }

    #[test]
    fn labels_are_escaped() {
        let d = doc("k,v\n<a&b>,1\n", None, ChartType::Bar);
        assert!(d.to_svg().contains("&lt;a&amp;b&gt;"));
    }

    #[test]
    fn ids_are_unique() {
        let d = doc("k,v\na,1\nb,2\nc,3\n", Some("T"), ChartType::Bar);
        let mut ids: Vec<_> = d.elements.iter().map(|e| e.id()).collect();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }
}
