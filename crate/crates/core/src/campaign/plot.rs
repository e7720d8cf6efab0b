//! Error-bar line plots of campaign series as standalone SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CampaignError, CampaignResult, Metric, Stat};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Step between axis ticks so that roughly `target` ticks cover `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

/// Renders one metric: x = round, y = metric, one series per strategy and
/// variant, error bars at one standard deviation.
pub fn plot_svg(result: &CampaignResult, metric: Metric) -> Result<String, CampaignError> {
    let mut series: Vec<(String, &Stat)> = Vec::new();
    for (strategy, stats) in &result.series {
        if let Some(s) = stats.get(metric.name()) {
            series.push((strategy.clone(), s));
        }
        if let Some(s) = stats.get(&metric.mitigated_name()) {
            series.push((format!("{strategy} (mitigated)"), s));
        }
    }
    series.retain(|(_, s)| !s.mean.is_empty());
    if series.is_empty() {
        return Err(CampaignError::EmptyPlot(format!(
            "no {metric} series in the results"
        )));
    }

    let rounds = series.iter().map(|(_, s)| s.mean.len()).max().unwrap_or(1);
    let (x_lo, x_hi) = if rounds == 1 {
        (0.5, 1.5)
    } else {
        (1.0, rounds as f64)
    };
    let top = series
        .iter()
        .flat_map(|(_, s)| s.mean.iter().zip(&s.std).map(|(m, d)| m + d))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let y_step = nice_step(if top > 0.0 { top } else { 1.0 }, 5.0);
    let y_hi = ((top / y_step).ceil() * y_step).max(y_step);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + plot_h - (y / y_hi).clamp(-0.05, 1.05) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{} on {}</text>"#,
        LEFT + plot_w / 2.0,
        metric,
        escape(&result.spec.device)
    );

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0:.1}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    let x_step = nice_step(rounds as f64, 10.0).max(1.0);
    let mut x = 1.0;
    while x <= rounds as f64 + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4}</text>"#,
            px(x),
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 19.0,
            x as usize
        );
        x += x_step;
    }
    let mut y = 0.0;
    while y <= y_hi + y_step * 1e-9 {
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
            LEFT,
            py(y),
            LEFT + plot_w,
            LEFT - 6.0,
            py(y) + 4.0,
            format_tick(y, y_step)
        );
        y += y_step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        metric
    );

    for (i, (name, stat)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if name.ends_with("(mitigated)") {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let _ = writeln!(svg, r#"<g class="series" data-name="{}">"#, escape(name));
        let points: Vec<String> = stat
            .mean
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_finite())
            .map(|(r, &m)| format!("{:.2},{:.2}", px(r as f64 + 1.0), py(m)))
            .collect();
        if points.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                points.join(" ")
            );
        }
        for (r, (&m, &d)) in stat.mean.iter().zip(&stat.std).enumerate() {
            if !m.is_finite() {
                continue;
            }
            let cx = px(r as f64 + 1.0);
            let (y0, y1) = (py(m - d), py(m + d));
            let _ = writeln!(
                svg,
                r#"<path d="M{cx:.2},{y0:.2}V{y1:.2}M{:.2},{y0:.2}h8M{:.2},{y1:.2}h8" stroke="{color}" fill="none"/><circle class="marker" cx="{cx:.2}" cy="{:.2}" r="3.2" fill="{color}"/>"#,
                cx - 4.0,
                cx - 4.0,
                py(m)
            );
        }
        let _ = writeln!(svg, "</g>");

        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 18.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_plot(result: &CampaignResult, metric: Metric, path: &Path) -> Result<(), CampaignError> {
    let svg = plot_svg(result, metric)?;
    fs::write(path, svg).map_err(|source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    })
}
