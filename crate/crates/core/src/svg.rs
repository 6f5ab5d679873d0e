//! Plane heatmaps as standalone SVG documents.

use crate::io::fmt_sig;

/// One colored sample: in-plane coordinates (mm) and the value to map.
#[derive(Debug, Clone, Copy)]
pub struct HeatPoint {
    pub u_mm: f64,
    pub v_mm: f64,
    pub value: f64,
}

/// Diverging blue-white-red color, symmetric about zero. `span` is the
/// largest absolute value of the scale.
fn diverging_color(value: f64, span: f64) -> String {
    let t = if span > 0.0 {
        (value / span).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let (r, g, b) = if t >= 0.0 {
        // white -> red
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        // white -> blue
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Render a node heatmap. The color scale is fixed, diverging, and
/// symmetric about zero so sign patterns read directly off the image.
pub fn heatmap(points: &[HeatPoint], title: &str, axis_u: &str, axis_v: &str) -> String {
    let span = points
        .iter()
        .map(|p| p.value.abs())
        .fold(0.0_f64, f64::max);
    let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_u = min_u.min(p.u_mm);
        max_u = max_u.max(p.u_mm);
        min_v = min_v.min(p.v_mm);
        max_v = max_v.max(p.v_mm);
    }
    if points.is_empty() {
        min_u = 0.0;
        max_u = 1.0;
        min_v = 0.0;
        max_v = 1.0;
    }
    let pad = 0.08 * ((max_u - min_u).max(max_v - min_v)).max(1.0);
    let width = 640.0;
    let margin = 56.0;
    let plot = width - 2.0 * margin;
    let du = (max_u - min_u + 2.0 * pad).max(1e-9);
    let dv = (max_v - min_v + 2.0 * pad).max(1e-9);
    let scale = plot / du.max(dv);
    let height = 2.0 * margin + dv * scale + 28.0;
    let to_x = |u: f64| margin + (u - min_u + pad) * scale;
    // SVG y grows downward; flip v.
    let to_y = |v: f64| margin + (max_v + pad - v) * scale;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt_sig(width),
        fmt_sig(height),
        fmt_sig(width),
        fmt_sig(height)
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        fmt_sig(width / 2.0),
        title
    ));
    let radius = (0.32 * scale * 2.0_f64.sqrt()).clamp(3.0, 18.0);
    for p in points {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" stroke=\"#444\" stroke-width=\"0.5\"><title>{} = {}</title></circle>\n",
            fmt_sig(to_x(p.u_mm)),
            fmt_sig(to_y(p.v_mm)),
            fmt_sig(radius),
            diverging_color(p.value, span),
            title,
            fmt_sig(p.value),
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{} (mm)</text>\n",
        fmt_sig(width / 2.0),
        fmt_sig(height - 10.0),
        axis_u
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{} (mm)</text>\n",
        fmt_sig(margin + dv * scale / 2.0),
        fmt_sig(margin + dv * scale / 2.0),
        axis_v
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"40\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">scale: -{s} (blue) .. 0 (white) .. +{s} (red)</text>\n",
        fmt_sig(width / 2.0),
        s = fmt_sig(span)
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_are_symmetric() {
        assert_eq!(diverging_color(0.0, 1.0), "#ffffff");
        assert_eq!(diverging_color(1.0, 1.0), "#ff0000");
        assert_eq!(diverging_color(-1.0, 1.0), "#0000ff");
        assert_eq!(diverging_color(2.0, 1.0), "#ff0000");
    }

    #[test]
    fn heatmap_is_deterministic() {
        let pts = vec![
            HeatPoint { u_mm: 0.0, v_mm: 0.0, value: -1.0 },
            HeatPoint { u_mm: 76.2, v_mm: 38.1, value: 1.0 },
        ];
        let a = heatmap(&pts, "ux", "x", "y");
        let b = heatmap(&pts, "ux", "x", "y");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("#0000ff"));
    }
}
