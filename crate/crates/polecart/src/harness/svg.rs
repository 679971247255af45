//! Static SVG training-curve plots: per-episode returns as points, the
//! trailing average as a line, one color per seed.
//!
//! The emitter is deliberately hand-rolled and fully deterministic so that
//! identical summaries always serialize to identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::RunSummary;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn coord(x: f64) -> String {
    format!("{x:.2}")
}

/// Writes the figure for one or more seeded runs. Every episode contributes
/// one `<circle>`, every seed one `<polyline>` (its moving average) and one
/// legend entry.
pub fn emit_plot(summaries: &[RunSummary], path: &Path) -> Result<()> {
    if summaries.is_empty() {
        return Err(Error::Config("emit_plot: no summaries".into()));
    }
    let max_episode = summaries
        .iter()
        .map(|s| s.records.len())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let max_return = summaries
        .iter()
        .flat_map(|s| s.records.iter().map(|r| r.ret))
        .fold(1.0f64, f64::max);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |episode: f64| MARGIN_LEFT + plot_w * episode / max_episode;
    let y_of = |ret: f64| MARGIN_TOP + plot_h * (1.0 - ret / max_return);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Axes.
    let x0 = coord(MARGIN_LEFT);
    let y0 = coord(MARGIN_TOP + plot_h);
    let x1 = coord(MARGIN_LEFT + plot_w);
    let y1 = coord(MARGIN_TOP);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black" stroke-width="1"/>"#
    );

    // Ticks and grid values, five per axis.
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let x = MARGIN_LEFT + plot_w * frac;
        let episode = max_episode * frac;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{yt}" stroke="black" stroke-width="1"/>"#,
            x = coord(x),
            yt = coord(MARGIN_TOP + plot_h + 6.0),
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{v:.0}</text>"#,
            x = coord(x),
            y = coord(MARGIN_TOP + plot_h + 22.0),
            v = episode,
        );

        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        let ret = max_return * frac;
        let _ = writeln!(
            s,
            r#"<line x1="{xt}" y1="{y}" x2="{x0}" y2="{y}" stroke="black" stroke-width="1"/>"#,
            xt = coord(MARGIN_LEFT - 6.0),
            y = coord(y),
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="end">{v:.0}</text>"#,
            x = coord(MARGIN_LEFT - 10.0),
            y = coord(y + 4.0),
            v = ret,
        );
    }

    // Axis labels.
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="14" text-anchor="middle">episode</text>"#,
        x = coord(MARGIN_LEFT + plot_w / 2.0),
        y = coord(HEIGHT - 16.0),
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="14" text-anchor="middle" transform="rotate(-90 {x} {y})">return</text>"#,
        x = coord(20.0),
        y = coord(MARGIN_TOP + plot_h / 2.0),
    );

    // One scatter + trailing-average line per seed.
    for (i, summary) in summaries.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for record in &summary.records {
            let _ = writeln!(
                s,
                r#"<circle cx="{cx}" cy="{cy}" r="2" fill="{color}" fill-opacity="0.35"/>"#,
                cx = coord(x_of(record.episode as f64 + 0.5)),
                cy = coord(y_of(record.ret)),
            );
        }
        let points: Vec<String> = summary
            .moving_average
            .iter()
            .enumerate()
            .map(|(episode, &avg)| {
                format!("{},{}", coord(x_of(episode as f64 + 0.5)), coord(y_of(avg)))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" "),
        );

        let legend_y = MARGIN_TOP + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{x}" y="{y}" font-size="12" fill="{color}">seed {seed}</text>"#,
            x = coord(WIDTH - MARGIN_RIGHT + 14.0),
            y = coord(legend_y + 10.0),
            seed = summary.seed,
        );
    }

    let _ = writeln!(s, "</svg>");
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
