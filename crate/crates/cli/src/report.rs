//! Standalone SVG report: metric-versus-parameter line charts from a sweep
//! table and grouped bar charts from an event table.

use std::collections::BTreeMap;
use std::fmt::Write;

use afmm::eventstudy::GroupRow;
use afmm::experiments::{CellSummary, SweepTable};
use afmm::{Error, Result};

const WIDTH: f64 = 820.0;
const CHART_H: f64 = 240.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`; a degenerate range is widened.
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(values: impl IntoIterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn axes(svg: &mut String, top: f64, title: &str, x_label: &str, y: &Scale) {
    let bottom = top + CHART_H - MARGIN_B;
    let right = WIDTH - MARGIN_R;
    let _ = writeln!(
        svg,
        r#"<text class="chart-title" x="{MARGIN_L}" y="{:.1}" font-size="14" font-weight="bold">{}</text>"#,
        top + 20.0,
        esc(title)
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{MARGIN_L}" y1="{:.1}" x2="{MARGIN_L}" y2="{bottom:.1}" stroke="black"/>"#,
        top + MARGIN_T
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{MARGIN_L}" y1="{bottom:.1}" x2="{right:.1}" y2="{bottom:.1}" stroke="black"/>"#
    );
    for v in [y.lo, y.hi] {
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.4}</text>"#,
            MARGIN_L - 4.0,
            y.map(v) + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        (MARGIN_L + right) / 2.0,
        bottom + 30.0,
        esc(x_label)
    );
}

type Metric = fn(&CellSummary<f64>) -> Option<f64>;

const METRICS: [(&str, Metric); 5] = [
    ("pricing_error_rmse", |c| Some(c.pricing_error_rmse)),
    ("volatility", |c| Some(c.volatility)),
    ("liquidity_level", |c| Some(c.liquidity_level)),
    ("expected_shortfall", |c| Some(c.expected_shortfall)),
    ("mean_rho", |c| c.mean_rho),
];

fn line_charts(svg: &mut String, top: &mut f64, table: &SweepTable<f64>) {
    let cells = table.cell_summaries();
    let x_name = table.parameters[0].name();
    // one series per combination of the remaining parameters
    let mut series: BTreeMap<String, Vec<&CellSummary<f64>>> = BTreeMap::new();
    for c in &cells {
        let key = table.parameters[1..]
            .iter()
            .zip(&c.params[1..])
            .map(|(p, v)| format!("{}={v}", p.name()))
            .collect::<Vec<_>>()
            .join(", ");
        series.entry(key).or_default().push(c);
    }
    let x = Scale::new(cells.iter().map(|c| c.params[0]), MARGIN_L + 20.0, WIDTH - MARGIN_R - 20.0);
    for (metric, get) in METRICS {
        let ys: Vec<f64> = cells.iter().filter_map(get).collect();
        if ys.is_empty() {
            continue;
        }
        let y = Scale::new(ys, *top + CHART_H - MARGIN_B - 10.0, *top + MARGIN_T + 10.0);
        let _ = writeln!(svg, r#"<g class="line-chart" data-metric="{metric}">"#);
        axes(svg, *top, &format!("{metric} vs {x_name}"), x_name, &y);
        for (i, (key, cs)) in series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = cs.iter().filter_map(|c| get(c).map(|v| (x.map(c.params[0]), y.map(v)))).collect();
            let path = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(
                svg,
                r#"<polyline class="series" points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
            );
            for (a, b) in &pts {
                let _ = writeln!(svg, r#"<circle class="point" cx="{a:.2}" cy="{b:.2}" r="3" fill="{colour}"/>"#);
            }
            if !key.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<text class="legend" x="{:.1}" y="{:.1}" font-size="10" fill="{colour}">{}</text>"#,
                    WIDTH - MARGIN_R + 10.0,
                    *top + MARGIN_T + 14.0 * (i as f64 + 1.0),
                    esc(key)
                );
            }
        }
        for c in &cells {
            let _ = writeln!(
                svg,
                r#"<text class="tick" x="{:.2}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                x.map(c.params[0]),
                *top + CHART_H - MARGIN_B + 14.0,
                c.params[0]
            );
        }
        svg.push_str("</g>\n");
        *top += CHART_H;
    }
}

fn bar_chart(svg: &mut String, top: &mut f64, rows: &[GroupRow<f64>], title: &str, class: &str, get: fn(&GroupRow<f64>) -> Option<f64>) {
    let mut events: Vec<&str> = Vec::new();
    for r in rows {
        if !events.contains(&r.event_id.as_str()) {
            events.push(&r.event_id);
        }
    }
    let groups = afmm::eventstudy::Group::ALL;
    let values: Vec<f64> = rows.iter().filter_map(get).chain([0.0]).collect();
    let y = Scale::new(values, *top + CHART_H - MARGIN_B - 10.0, *top + MARGIN_T + 10.0);
    let _ = writeln!(svg, r#"<g class="bar-chart" data-metric="{class}">"#);
    axes(svg, *top, title, "event", &y);
    let zero = y.map(0.0);
    let _ = writeln!(
        svg,
        r#"<line class="zero" x1="{MARGIN_L}" y1="{zero:.2}" x2="{:.1}" y2="{zero:.2}" stroke="gray" stroke-dasharray="3,3"/>"#,
        WIDTH - MARGIN_R
    );
    let slot = (WIDTH - MARGIN_R - MARGIN_L) / events.len().max(1) as f64;
    let bar_w = slot * 0.8 / groups.len() as f64;
    for (ei, ev) in events.iter().enumerate() {
        let x0 = MARGIN_L + slot * ei as f64 + slot * 0.1;
        for (gi, g) in groups.iter().enumerate() {
            let Some(row) = rows.iter().find(|r| r.event_id == *ev && r.group == *g) else {
                continue;
            };
            let Some(v) = get(row) else {
                continue;
            };
            let yv = y.map(v);
            let _ = writeln!(
                svg,
                r#"<rect class="{class}" data-event="{}" data-group="{g}" data-n="{}" data-value="{v}" x="{:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                esc(ev),
                row.n,
                x0 + bar_w * gi as f64,
                yv.min(zero),
                (yv - zero).abs(),
                PALETTE[gi]
            );
        }
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.2}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            x0 + slot * 0.4,
            *top + CHART_H - MARGIN_B + 14.0,
            esc(ev)
        );
    }
    for (gi, g) in groups.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.1}" y="{:.1}" font-size="10" fill="{}">{g}</text>"#,
            WIDTH - MARGIN_R + 10.0,
            *top + MARGIN_T + 14.0 * (gi as f64 + 1.0),
            PALETTE[gi]
        );
    }
    svg.push_str("</g>\n");
    *top += CHART_H;
}

/// Renders whichever tables are present. Both absent, or an empty table,
/// is a data error.
pub fn render(sweep: Option<&SweepTable<f64>>, events: Option<&[GroupRow<f64>]>) -> Result<String> {
    if sweep.is_none() && events.is_none() {
        return Err(Error::Data("report needs sweep.csv or event_table.csv".into()));
    }
    if sweep.is_some_and(|t| t.rows.is_empty() || t.parameters.is_empty()) {
        return Err(Error::Data("sweep table is empty".into()));
    }
    if events.is_some_and(|e| e.is_empty()) {
        return Err(Error::Data("event table is empty".into()));
    }
    let mut body = String::new();
    let mut top = 0.0;
    if let Some(t) = sweep {
        line_charts(&mut body, &mut top, t);
    }
    if let Some(rows) = events {
        bar_chart(&mut body, &mut top, rows, "Mean CAR by event and group", "bar-car", |r| r.mean_car);
        bar_chart(&mut body, &mut top, rows, "Mean abnormal log volume by event and group", "bar-abvol", |r| r.mean_abvol);
    }
    let height = top.max(CHART_H);
    Ok(format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    ))
}
