//! Minimal SVG grouped bar charts with error bars.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

const PALETTE: [&str; 6] = ["#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3", "#937860"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One group per entry of `groups`, one bar per series inside each group.
pub fn bar_chart_svg(title: &str, y_label: &str, groups: &[String], series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 60.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max = series
        .iter()
        .flat_map(|s| s.values.iter().zip(&s.errors).map(|(v, e)| v + e))
        .fold(0.0_f64, f64::max)
        .max(1e-9)
        * 1.1;
    let y = |v: f64| top + plot_h * (1.0 - v / max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        escape(y_label)
    );
    for i in 0..=4 {
        let v = max * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" x2="{0}" y1="{1:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{2}" y="{3:.1}" text-anchor="end">{v:.3}</text>"##,
            left + plot_w,
            y(v),
            left - 6.0,
            y(v) + 4.0
        );
    }
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (g, label) in groups.iter().enumerate() {
        let gx = left + g as f64 * group_w + group_w * 0.1;
        for (s, ser) in series.iter().enumerate() {
            let (Some(&v), e) = (ser.values.get(g), ser.errors.get(g).copied().unwrap_or(0.0)) else {
                continue;
            };
            let x = gx + s as f64 * bar_w;
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                y(v),
                bar_w * 0.9,
                (top + plot_h - y(v)).max(0.0),
                PALETTE[s % PALETTE.len()]
            );
            if e > 0.0 {
                let cx = x + bar_w * 0.45;
                let _ = writeln!(
                    svg,
                    r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
                    y(v + e),
                    y((v - e).max(0.0))
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            top + plot_h + 18.0,
            escape(label)
        );
    }
    for (s, ser) in series.iter().enumerate() {
        let lx = left + s as f64 * 130.0;
        let ly = h - 16.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{ly}">{}</text>"#,
            ly - 9.0,
            PALETTE[s % PALETTE.len()],
            lx + 14.0,
            escape(&ser.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_bar() {
        let svg = bar_chart_svg(
            "accuracy <by strategy>",
            "%",
            &["zerogen".into(), "refined".into()],
            &[Series {
                name: "mean".into(),
                values: vec![0.5, 0.7],
                errors: vec![0.1, 0.0],
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 1 + 2 + 1);
        assert!(svg.contains("&lt;by strategy&gt;"));
    }
}
