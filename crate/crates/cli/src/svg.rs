use std::collections::BTreeMap;
use std::fmt::Write;

use obbkit::eval::{GroundTruthRecord, SHIP_CLASSES};

/// Stroke color for labels without an entry in the class map.
pub const FALLBACK_COLOR: &str = "#9e9e9e";

const DEFAULT_COLORS: [&str; 7] = ["#e6194b", "#f58231", "#ffe119", "#3cb44b", "#42d4f4", "#4363d8", "#f032e6"];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub colors: BTreeMap<String, String>,
    pub stroke_width: f64,
    pub labels: bool,
    pub scores: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        let colors = SHIP_CLASSES
            .iter()
            .zip(DEFAULT_COLORS)
            .map(|(c, col)| (c.to_string(), col.to_string()))
            .collect();
        Self { colors, stroke_width: 2.0, labels: true, scores: false }
    }
}

impl RenderStyle {
    pub fn color(&self, class: &str) -> &str {
        self.colors.get(class).map(String::as_str).unwrap_or(FALLBACK_COLOR)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One `<polygon>` per box, optional text labels, and a legend of the ship
/// classes drawn with `<rect>` swatches.
pub fn render_svg(boxes: &[(GroundTruthRecord, Option<f64>)], width: f64, height: f64, style: &RenderStyle) -> String {
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(s, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#10222e"/>"##).unwrap();

    writeln!(s, r#"<g id="boxes" fill="none" stroke-width="{}">"#, style.stroke_width).unwrap();
    for (rec, score) in boxes {
        let color = style.color(&rec.class_label);
        let pts: Vec<String> =
            rec.bbox.corners().vertices().iter().map(|p| format!("{:.2},{:.2}", p.x, p.y)).collect();
        writeln!(s, r#"<polygon points="{}" stroke="{color}"/>"#, pts.join(" ")).unwrap();
        if style.labels {
            let mut label = escape(&rec.class_label);
            if let (true, Some(v)) = (style.scores, score) {
                write!(label, " {v:.2}").unwrap();
            }
            let top = rec.bbox.hbb();
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}" stroke="none" font-family="sans-serif" font-size="11">{label}</text>"#,
                top.xmin,
                (top.ymin - 3.0).max(11.0)
            )
            .unwrap();
        }
    }
    writeln!(s, "</g>").unwrap();

    writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="11">"#).unwrap();
    for (i, class) in SHIP_CLASSES.iter().enumerate() {
        let y = 8.0 + 16.0 * i as f64;
        writeln!(s, r#"<rect x="8" y="{y}" width="10" height="10" fill="{}"/>"#, style.color(class)).unwrap();
        writeln!(s, r##"<text x="24" y="{}" fill="#ffffff">{}</text>"##, y + 9.0, escape(class)).unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(s, "</svg>").unwrap();
    s
}
