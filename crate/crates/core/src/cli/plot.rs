//! Minimal log–log SVG plot of an MSD curve with its fitted line.

use std::fmt::Write;

use crate::analysis::MsdReport;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub fn msd_svg(report: &MsdReport) -> String {
    let lx: Vec<f64> = report.lags.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = report.msd.iter().map(|v| v.log10()).collect();
    let (x0, x1) = padded_range(&lx);
    let (y0, y1) = padded_range(&ly);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );

    // fitted line, in natural logs: ln msd = intercept + slope ln lag
    let ln10 = std::f64::consts::LN_10;
    let fit = |x: f64| (report.intercept + report.slope * x * ln10) / ln10;
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="1.5"/>"#,
        sx(lx[0]),
        sy(fit(lx[0])),
        sx(lx[lx.len() - 1]),
        sy(fit(lx[lx.len() - 1]))
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, sx(*x), sy(*y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14">slope = {:.4} [{:.4}, {:.4}] ({})</text>"#,
        MARGIN + 10.0,
        MARGIN + 20.0,
        report.slope,
        report.slope_ci.0,
        report.slope_ci.1,
        serde_json::to_value(report.classification).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">log10 lag</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">log10 MSD</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, pos) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{pos:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{v:.2}</text>"#, H - MARGIN + 16.0);
    }
    for (v, pos) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{pos:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.2}</text>"#, MARGIN - 6.0);
    }
    s.push_str("</svg>\n");
    s
}

fn padded_range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}
