//! Small hand-written SVG charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        WIDTH / 2.0
    )
    .unwrap();
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(
        s,
        r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#,
            frame.px(xv),
            y1 + 16.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#,
            x0 - 6.0,
            frame.py(yv) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{y_label}</text>"#,
        HEIGHT / 2.0
    )
    .unwrap();
    s
}

/// Polylines with a legend; y axis fixed to `[0, 1]`.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let xs = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let x = if lo < hi {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    };
    let frame = Frame { x, y: (0.0, 1.0) };
    let mut s = header(title, x_label, y_label, &frame);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#,
            WIDTH - MARGIN - 130.0,
            ly - 4.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{ly}">{name}</text>"#,
            WIDTH - MARGIN - 112.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub struct Violin {
    pub label: String,
    /// (accuracy, density) pairs; empty when only points can be drawn.
    pub density: Vec<(f64, f64)>,
    pub points: Vec<f64>,
}

/// One violin per group along the x axis, accuracy on the y axis, with a
/// dashed horizontal line at `threshold`.
pub fn violins(title: &str, groups: &[Violin], threshold: f64) -> String {
    let n = groups.len().max(1) as f64;
    let frame = Frame {
        x: (0.0, n),
        y: (0.0, 1.0),
    };
    let mut s = header(
        title,
        "network (kind, parameters)",
        "best validation accuracy",
        &frame,
    );
    let peak = groups
        .iter()
        .flat_map(|g| g.density.iter().map(|d| d.1))
        .fold(0.0, f64::max);
    let half = 0.4 * (frame.px(1.0) - frame.px(0.0));
    for (i, g) in groups.iter().enumerate() {
        let cx = frame.px(i as f64 + 0.5);
        let color = COLORS[i % COLORS.len()];
        let inside: Vec<&(f64, f64)> = g
            .density
            .iter()
            .filter(|(a, _)| (0.0..=1.0).contains(a))
            .collect();
        if peak > 0.0 && !inside.is_empty() {
            let right = inside
                .iter()
                .map(|(a, d)| format!("{:.2},{:.2}", cx + half * d / peak, frame.py(*a)));
            let left = inside
                .iter()
                .rev()
                .map(|(a, d)| format!("{:.2},{:.2}", cx - half * d / peak, frame.py(*a)));
            let pts: Vec<String> = right.chain(left).collect();
            writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        for p in &g.points {
            let y = frame.py(*p);
            writeln!(
                s,
                r#"<line x1="{:.2}" x2="{:.2}" y1="{y:.2}" y2="{y:.2}" stroke="grey"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN - 8.0,
            g.label
        )
        .unwrap();
    }
    let ty = frame.py(threshold);
    writeln!(
        s,
        r#"<line x1="{MARGIN}" x2="{}" y1="{ty:.2}" y2="{ty:.2}" stroke="black" stroke-dasharray="6,4"/>"#,
        WIDTH - MARGIN
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_closed_documents() {
        let line = line_chart("t", "x", "y", &[("a".into(), vec![(0.0, 0.1), (1.0, 0.9)])]);
        assert!(line.starts_with("<svg") && line.ends_with("</svg>\n"));
        assert_eq!(line.matches("<polyline").count(), 1);
        let v = violins(
            "t",
            &[
                Violin {
                    label: "H 118".into(),
                    density: vec![(0.5, 1.0), (0.6, 2.0)],
                    points: vec![0.55],
                },
                Violin {
                    label: "C 124".into(),
                    density: vec![],
                    points: vec![0.4],
                },
            ],
            0.72,
        );
        assert_eq!(v.matches("<polygon").count(), 1);
        assert_eq!(v.matches("stroke=\"grey\"").count(), 2);
    }
}
