//! Dependency-free SVG line plot of PCK versus threshold.

/// Self-contained SVG: axes, ticks, and one polyline through the given
/// (threshold_mm, pck) points. PCK axis is [0, 1].
pub fn pck_curve_svg(points: &[(f64, f64)]) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 55.0);
    let plot_w = w - ml - mr;
    let plot_h = h - mt - mb;
    let x_max = points.last().map_or(150.0, |p| p.0);

    let sx = |t: f64| ml + plot_w * t / x_max;
    let sy = |p: f64| mt + plot_h * (1.0 - p);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h
    ));
    // y ticks every 0.2
    for k in 0..=5 {
        let p = k as f64 * 0.2;
        let y = sy(p);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ml}\" y2=\"{y}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{p:.1}</text>\n",
            ml - 9.0,
            y + 4.0
        ));
    }
    // x ticks every 25 mm
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let x = sx(t);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            mt + plot_h,
            mt + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{t:.0}</text>\n",
            mt + plot_h + 20.0
        ));
        t += 25.0;
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">threshold (mm)</text>\n",
        ml + plot_w / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">3DPCK</text>\n",
        mt + plot_h / 2.0,
        mt + plot_h / 2.0
    ));
    // curve
    let path: Vec<String> = points
        .iter()
        .map(|&(t, p)| format!("{:.2},{:.2}", sx(t), sy(p)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n",
        path.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_self_contained_and_deterministic() {
        let pts: Vec<(f64, f64)> = (1..=30).map(|k| (5.0 * k as f64, k as f64 / 30.0)).collect();
        let a = pck_curve_svg(&pts);
        let b = pck_curve_svg(&pts);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
        assert!(a.trim_end().ends_with("</svg>"));
    }
}
