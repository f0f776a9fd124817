//! Minimal SVG emitter for volume-vs-horizon curves on a log-scale y axis.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::RateFit;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Writes `series` of `(x, y, yerr)` and an optional fit to `path`.
pub fn emit_plot(series: &[(f64, f64, f64)], fit: Option<&RateFit>, x_label: &str, path: &Path) -> Result<()> {
    let svg = render_plot(series, fit, x_label)?;
    std::fs::write(path, svg).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Renders the SVG document. Points with non-positive `y` have no place on a
/// log axis and are skipped; at least two must remain.
pub fn render_plot(series: &[(f64, f64, f64)], fit: Option<&RateFit>, x_label: &str) -> Result<String> {
    let pts: Vec<(f64, f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(x, y, e)| x.is_finite() && y.is_finite() && y > 0.0 && e.is_finite())
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a plot needs at least 2 points with positive y, got {}",
            pts.len()
        )));
    }

    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = 0.05 * (x1 - x0);
    let (x0, x1) = (x0 - pad, x1 + pad);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(_, y, e) in &pts {
        let low = if y - e > 0.0 { y - e } else { y };
        lo = lo.min(low);
        hi = hi.max(y + e.max(0.0));
    }
    let (ly0, ly1) = (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0));

    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| {
        let l = y.max(10f64.powf(ly0)).log10();
        HEIGHT - BOTTOM - (l - ly0) / (ly1 - ly0) * (HEIGHT - TOP - BOTTOM)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (bx0, bx1, by0, by1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{bx0:.2}" y="{by0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        bx1 - bx0,
        by1 - by0
    );
    for d in (ly0 as i32)..=(ly1 as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{bx0:.2}" y1="{y:.2}" x2="{bx1:.2}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            bx0 - 6.0,
            y + 4.0
        );
    }
    for &(x, _, _) in &pts {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            by1 + 16.0,
            tick_label(x)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        0.5 * (bx0 + bx1),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">volume</text>"#,
        0.5 * (by0 + by1),
        0.5 * (by0 + by1)
    );

    if let Some(f) = fit {
        let (ya, yb) = (f.predict(x0), f.predict(x1));
        let _ = writeln!(
            s,
            r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-dasharray="6 4" clip-path="url(#frame)"/>"##,
            px(x0),
            py(ya),
            px(x1),
            py(yb)
        );
        let _ = writeln!(
            s,
            r#"<text class="slope" x="{:.2}" y="{:.2}" text-anchor="end">slope = {:.3}</text>"#,
            bx1 - 8.0,
            by0 + 16.0,
            f.slope
        );
    }
    let _ = writeln!(
        s,
        r#"<clipPath id="frame"><rect x="{bx0:.2}" y="{by0:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
        bx1 - bx0,
        by1 - by0
    );

    for &(x, y, e) in &pts {
        let cx = px(x);
        if e > 0.0 {
            let _ = writeln!(
                s,
                r#"<line class="err" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                py(y - e),
                py(y + e)
            );
        }
        let _ = writeln!(s, r#"<circle class="marker" cx="{cx:.2}" cy="{:.2}" r="3.5" fill="black"/>"#, py(y));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick_label(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e9 {
        format!("{}", x as i64)
    } else {
        format!("{x:.3}")
    }
}
