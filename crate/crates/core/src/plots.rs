//! Minimal SVG rendering for reports: heatmaps, grouped bars and line
//! charts. Output is deterministic text.

use std::fmt::Write;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        esc(title)
    )
}

/// White-to-blue shade for `v` in [0,1].
fn blue(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(247.0, 8.0), c(251.0, 48.0), c(255.0, 107.0))
}

/// Square heatmap. Cell shade follows `shade` (expected in [0,1]); cell
/// text is `text[i][j]`. Rows are labelled on the left, columns below.
pub fn heatmap(title: &str, labels: &[&str], shade: &[Vec<f64>], text: &[Vec<String>], row_axis: &str, col_axis: &str) -> String {
    let n = labels.len();
    let cell = 56.0;
    let left = 100.0;
    let top = 40.0;
    let w = left + cell * n as f64 + 20.0;
    let h = top + cell * n as f64 + 90.0;
    let mut s = header(w, h, title);
    for i in 0..n {
        for j in 0..n {
            let v = shade[i][j];
            let x = left + j as f64 * cell;
            let y = top + i as f64 * cell;
            let _ = writeln!(
                s,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#999\"/>",
                blue(v)
            );
            let fg = if v > 0.55 { "white" } else { "black" };
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{fg}\">{}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                esc(&text[i][j])
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            top + i as f64 * cell + cell / 2.0 + 4.0,
            esc(labels[i])
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" transform=\"rotate(-40 {:.1} {:.1})\">{}</text>",
            left + i as f64 * cell + cell / 2.0,
            top + n as f64 * cell + 14.0,
            left + i as f64 * cell + cell / 2.0,
            top + n as f64 * cell + 14.0,
            esc(labels[i])
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        left + cell * n as f64 / 2.0,
        h - 10.0,
        esc(col_axis)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        top + cell * n as f64 / 2.0,
        top + cell * n as f64 / 2.0,
        esc(row_axis)
    );
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String, x: f64, y: f64, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let yy = y + k as f64 * 16.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            yy - 9.0,
            PALETTE[k % PALETTE.len()],
            x + 14.0,
            yy,
            esc(name)
        );
    }
}

fn y_axis(s: &mut String, left: f64, top: f64, ph: f64, pw: f64) {
    for t in 0..=5 {
        let v = t as f64 / 5.0;
        let y = top + ph * (1.0 - v);
        let _ = writeln!(
            s,
            "<line x1=\"{left:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            left + pw,
            left - 4.0,
            y + 4.0
        );
    }
}

/// Grouped bars over `categories`, one bar per series, values in [0,1].
pub fn grouped_bars(title: &str, categories: &[&str], series: &[(&str, Vec<f64>)]) -> String {
    let left = 50.0;
    let top = 40.0;
    let group = 24.0 * series.len().max(1) as f64 + 20.0;
    let pw = group * categories.len() as f64;
    let ph = 240.0;
    let w = left + pw + 130.0;
    let h = top + ph + 70.0;
    let mut s = header(w, h, title);
    y_axis(&mut s, left, top, ph, pw);
    for (c, cat) in categories.iter().enumerate() {
        let gx = left + c as f64 * group + 10.0;
        for (k, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"22\" height=\"{:.1}\" fill=\"{}\"/>",
                gx + k as f64 * 24.0,
                top + ph * (1.0 - v),
                ph * v,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            gx + (group - 20.0) / 2.0,
            top + ph + 18.0,
            esc(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    legend(&mut s, left + pw + 16.0, top + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

/// Line chart over categorical x labels; `None` values leave gaps.
pub fn line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<Option<f64>>)], y_label: &str) -> String {
    let left = 60.0;
    let top = 40.0;
    let step = 90.0;
    let pw = step * x_labels.len().max(2) as f64;
    let ph = 260.0;
    let w = left + pw + 160.0;
    let h = top + ph + 100.0;
    let mut s = header(w, h, title);
    y_axis(&mut s, left, top, ph, pw);
    let x_of = |i: usize| left + step * (i as f64 + 0.5);
    for (i, lab) in x_labels.iter().enumerate() {
        let (x, y) = (x_of(i), top + ph + 16.0);
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"end\" transform=\"rotate(-30 {x:.1} {y:.1})\">{}</text>",
            esc(lab)
        );
    }
    for (k, (_, vals)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(v) => {
                    let y = top + ph * (1.0 - v.clamp(0.0, 1.0));
                    let _ = write!(path, "{}{:.1},{:.1} ", if pen_down { "L" } else { "M" }, x_of(i), y);
                    pen_down = true;
                    let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>", x_of(i));
                }
                None => pen_down = false,
            }
        }
        if !path.is_empty() {
            let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", path.trim_end());
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        top + ph / 2.0,
        top + ph / 2.0,
        esc(y_label)
    );
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut s, left + pw + 16.0, top + 12.0, &names);
    s.push_str("</svg>\n");
    s
}
