//! Static SVG of RD curves: rate (kbit) against semantic fidelity. The
//! proposed method is drawn in red; hand-crafted schemes as scatter points.

use std::fmt::Write as _;

use semcode::metrics::RdRow;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const HANDCRAFTED_COLORS: [&str; 5] = ["#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"];

struct Style {
    color: String,
    dashed: bool,
    scatter: bool,
}

fn style(label: &str, handcrafted_index: usize) -> Style {
    let fixed = |c: &str, dashed| Style {
        color: c.to_string(),
        dashed,
        scatter: false,
    };
    match label {
        "hrl" => fixed("#d62728", false),
        "anchor" => fixed("#1f77b4", false),
        "ratecontrol" => fixed("#9467bd", false),
        "flatrl" => fixed("#2ca02c", false),
        "oracle" => fixed("#000000", true),
        l if l.starts_with("handcrafted") => Style {
            color: HANDCRAFTED_COLORS[handcrafted_index % HANDCRAFTED_COLORS.len()].to_string(),
            dashed: false,
            scatter: true,
        },
        _ => fixed("#17becf", false),
    }
}

/// Step of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let k = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    let step = nice_step(span, 5.0);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One series per label in order of first appearance; line series are
/// sorted by rate.
pub fn rd_svg(rows: &[RdRow]) -> String {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let (x0, x1, xs) = axis_range(rows.iter().map(|r| r.rate_bits / 1000.0));
    let (y0, y1, ys) = axis_range(rows.iter().map(|r| r.fidelity));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let nx = ((x1 - x0) / xs).round() as usize;
    for i in 0..=nx {
        let v = x0 + i as f64 * xs;
        let x = px(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            trim(v)
        );
    }
    let ny = ((y1 - y0) / ys).round() as usize;
    for i in 0..=ny {
        let v = y0 + i as f64 * ys;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            trim(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">rate (kbit)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">semantic fidelity</text>"#,
        TOP + ph / 2.0
    );

    let mut handcrafted = 0;
    for (k, label) in labels.iter().enumerate() {
        let st = style(label, handcrafted);
        if st.scatter {
            handcrafted += 1;
        }
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.label == *label)
            .map(|r| (px(r.rate_bits / 1000.0), py(r.fidelity)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !st.scatter {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = if st.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                path.join(" "),
                st.color
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{}"/>"#, st.color);
        }
        let ly = TOP + 10.0 + k as f64 * 20.0;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{}"/>"#,
            lx + 10.0,
            st.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let t = format!("{v:.3}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}
