//! Self-contained SVG line charts on log-log axes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }

    fn positive(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn decade_range(lo: f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        a -= 1.0;
        b += 1.0;
    }
    (a, b)
}

fn tick_label(e: f64) -> String {
    let v = 10f64.powf(e);
    if (-3.0..=4.0).contains(&e) {
        format!("{}", (v * 1e3).round() / 1e3)
    } else {
        format!("1e{}", e as i64)
    }
}

/// Renders the series on log10 axes. Non-positive points are dropped; a
/// series with no usable points still gets a legend entry marked "(no data)".
pub fn loglog_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.positive()).collect();
    let (xmin, xmax, ymin, ymax) = if all.is_empty() {
        (1.0, 10.0, 1.0, 10.0)
    } else {
        all.iter().fold((f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64), |(a, b, c, d), &(x, y)| {
            (a.min(x), b.max(x), c.min(y), d.max(y))
        })
    };
    let (x0, x1) = decade_range(xmin, xmax);
    let (y0, y1) = decade_range(ymin, ymax);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y.log10() - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" style="fill:#ffffff"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" style="font-family:sans-serif;font-size:15px;text-anchor:middle">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for e in (x0 as i64)..=(x1 as i64) {
        let x = LEFT + (e as f64 - x0) / (x1 - x0) * pw;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" style="stroke:#dddddd;stroke-width:1"/>"#,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" style="font-family:sans-serif;font-size:11px;text-anchor:middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(e as f64)
        );
    }
    for e in (y0 as i64)..=(y1 as i64) {
        let y = TOP + ph - (e as f64 - y0) / (y1 - y0) * ph;
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" style="stroke:#dddddd;stroke-width:1"/>"#,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:11px;text-anchor:end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(e as f64)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" style="fill:none;stroke:#333333;stroke-width:1"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:12px;text-anchor:middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" style="font-family:sans-serif;font-size:12px;text-anchor:middle">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<(f64, f64)> = ser.positive().map(|(x, y)| (sx(x), sy(y))).collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" style="fill:none;stroke:{colour};stroke-width:2"/>"#,
                path.join(" ")
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" style="fill:{colour}"/>"#);
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" style="stroke:{colour};stroke-width:2"/>"#,
            lx + 18.0
        );
        let label = if pts.is_empty() {
            format!("{} (no data)", ser.name)
        } else {
            ser.name.clone()
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:11px">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}
