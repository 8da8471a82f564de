//! Plain SVG plots: heatmaps for phase-space grids and line plots for spectra and sweeps.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 44.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        W / 2.0,
        escape(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 8.0,
        escape(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        escape(ylabel)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn axes(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), log_y: bool) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(s, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = TOP + ph - f * ph;
        let yv = y0 + f * (y1 - y0);
        let ylab = if log_y { format!("1e{yv:.0}") } else { format!("{yv:.3}") };
        let _ = writeln!(s, "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>", TOP + ph + 16.0, x0 + f * (x1 - x0));
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{ylab}</text>", LEFT - 4.0, y + 4.0);
    }
}

/// Diverging map centered on zero: blue below, red above, white at zero.
fn diverging(z: f64, scale: f64) -> String {
    let t = (z / scale).clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if t >= 0.0 {
        format!("#ff{:02x}{:02x}", fade(t), fade(t))
    } else {
        format!("#{:02x}{:02x}ff", fade(-t), fade(-t))
    }
}

/// Heatmap of `z[i * x.len() + j]` at (x[j], y[i]), colored on a symmetric scale.
pub fn heatmap(x: &[f64], y: &[f64], z: &[f64], title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = header(title, xlabel, ylabel);
    let xr = range(x.iter().copied());
    let yr = range(y.iter().copied());
    axes(&mut s, xr, yr, false);
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (cw, ch) = (pw / x.len().max(1) as f64, ph / y.len().max(1) as f64);
    for (i, _) in y.iter().enumerate() {
        for (j, _) in x.iter().enumerate() {
            let v = z[i * x.len() + j];
            if v.abs() < 1e-3 * scale {
                continue;
            }
            let px = LEFT + j as f64 * cw;
            let py = TOP + ph - (i + 1) as f64 * ch;
            let _ = writeln!(
                s,
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                cw + 0.05,
                ch + 0.05,
                diverging(v, scale)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One named curve.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Line plot; with `log_y`, non-positive values are dropped and the axis shows log10.
pub fn line_plot(series: &[Series<'_>], log_y: bool, title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = header(title, xlabel, ylabel);
    let tf = |v: f64| if log_y { if v > 0.0 { v.log10() } else { f64::NAN } } else { v };
    let xr = range(series.iter().flat_map(|c| c.x.iter().copied()));
    let yr = range(series.iter().flat_map(|c| c.y.iter().map(|&v| tf(v))));
    axes(&mut s, xr, yr, log_y);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    for (k, c) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::new();
        for (&x, &y) in c.x.iter().zip(c.y) {
            let y = tf(y);
            if !y.is_finite() {
                continue;
            }
            let px = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
            let py = TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>", pts.trim_end());
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>", LEFT + 8.0, TOP + 16.0 + 14.0 * k as f64, escape(c.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_well_formed() {
        let x = [0.0, 1.0];
        let s = heatmap(&x, &x, &[1.0, -1.0, 0.5, 0.0], "W", "Re", "Im");
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<rect").count(), 2 + 3);
    }

    #[test]
    fn log_plot_skips_nonpositive() {
        let s = line_plot(&[Series { label: "a", x: &[1.0, 2.0, 3.0], y: &[1.0, 0.0, 10.0] }], true, "t", "x", "y");
        assert_eq!(s.matches(',').count(), 2);
    }
}
