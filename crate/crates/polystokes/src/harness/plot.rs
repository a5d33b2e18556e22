//! Dependency-free SVG log-log plots for convergence curves.

/// One named curve of (h, error) points, h and error both positive.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: &'a str,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 25.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

/// Renders curves on log-log axes with a reference triangle of slope `slope`.
pub fn loglog_svg(title: &str, series: &[Series], slope: usize) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return String::from("<svg xmlns=\"http://www.w3.org/2000/svg\"/>");
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    x0 -= 0.1;
    x1 += 0.1;
    let span = (y1 - y0).max(1.0);
    y0 -= 0.15 * span + 0.6; // room for the slope triangle
    y1 += 0.1 * span;
    let px = |lx: f64| ML + (lx - x0) / (x1 - x0) * (W - ML - MR);
    let py = |ly: f64| H - MB - (ly - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        title
    ));
    // Frame.
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    // Decade gridlines and labels.
    for e in x0.ceil() as i64..=x1.floor() as i64 {
        let x = px(e as f64);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{MT}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            H - MB
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">1e{e}</text>\n",
            H - MB + 18.0
        ));
    }
    for e in y0.ceil() as i64..=y1.floor() as i64 {
        let y = py(e as f64);
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            W - MR
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y:.1}\" text-anchor=\"end\" dy=\"4\">1e{e}</text>\n",
            ML - 6.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">h</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    // Curves with circle markers.
    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x.log10()), py(y.log10())))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            s.color
        ));
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                px(x.log10()),
                py(y.log10()),
                s.color
            ));
        }
    }
    // Legend.
    for (i, s) in series.iter().enumerate() {
        let y = MT + 16.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            ML + 10.0,
            ML + 34.0,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            ML + 40.0,
            y + 4.0,
            s.name
        ));
    }
    // Reference slope triangle under the last curve segment.
    if let Some(s) = series.first() {
        if s.points.len() >= 2 {
            let (ha, _) = s.points[s.points.len() - 2];
            let (hb, eb) = s.points[s.points.len() - 1];
            let base = eb.log10() - 0.45;
            let (la, lb) = (ha.log10(), hb.log10());
            let rise = slope as f64 * (la - lb);
            let x_a = px(la);
            let x_b = px(lb);
            let y_low = py(base);
            let y_high = py(base + rise);
            svg.push_str(&format!(
                "<path d=\"M {x_b:.1} {y_low:.1} L {x_a:.1} {y_low:.1} L {x_a:.1} {y_high:.1} Z\" \
                 fill=\"none\" stroke=\"gray\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"gray\">{}</text>\n",
                x_a + 6.0,
                (y_low + y_high) / 2.0,
                slope
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
