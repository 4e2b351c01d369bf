//! Minimal self-contained SVG charts.

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

/// Points on the unit square, one `<circle>` each.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    let mut s = header(title);
    let (x0, y0, span_x, span_y) = (PAD, H - PAD, W - 2.0 * PAD, H - 2.0 * PAD);
    s += &format!(
        "<rect x=\"{x0}\" y=\"{PAD}\" width=\"{span_x}\" height=\"{span_y}\" fill=\"none\" stroke=\"#888\"/>\n"
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{t}</text>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{t}</text>\n",
            x0 + t * span_x,
            y0 + 15.0,
            x0 - 5.0,
            y0 - t * span_y + 4.0
        );
    }
    s += &format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        H - 10.0,
        escape(x_label)
    );
    s += &format!(
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (label, x, y) in points {
        s += &format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#3366cc\" fill-opacity=\"0.7\"><title>{}</title></circle>\n",
            x0 + x.clamp(0.0, 1.0) * span_x,
            y0 - y.clamp(0.0, 1.0) * span_y,
            escape(label)
        );
    }
    s + "</svg>\n"
}

/// Horizontal bars scaled to the largest value.
pub fn bars(title: &str, items: &[(String, f64)]) -> String {
    let mut s = header(title);
    let max = items.iter().map(|i| i.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let left = 170.0;
    let row = ((H - 60.0) / items.len().max(1) as f64).min(24.0);
    for (i, (name, v)) in items.iter().enumerate() {
        let y = 40.0 + i as f64 * row;
        let len = v / max * (W - left - 70.0);
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n\
             <rect x=\"{left}\" y=\"{:.1}\" width=\"{len:.2}\" height=\"{:.1}\" fill=\"#dc3912\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{v:.4}</text>\n",
            left - 5.0,
            y + row * 0.6,
            escape(name),
            y,
            row * 0.75,
            left + len + 4.0,
            y + row * 0.6
        );
    }
    s + "</svg>\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let pts = vec![("a".to_string(), 0.1, 0.2), ("b<c".to_string(), 1.5, -0.3)];
        let svg = scatter("t", "x", "y", &pts);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert_eq!(bars("t", &[("f".into(), 0.2), ("g".into(), 0.1)]).matches("<rect x").count(), 2);
    }
}
