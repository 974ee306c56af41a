//! Hand-rolled SVG charts for the experiment harnesses. The CSVs stay the
//! source of truth; these exist so a sweep can be eyeballed without spinning
//! up a plotting stack.

use std::fmt::Write as _;

use fieldscout::eval::{CellSummary, DensityRecord, LocalizationRecord, SeparabilityRow};
use fieldscout::sim::WorldDistribution;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Canvas {
    width: f64,
    height: f64,
    body: String,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        Canvas {
            width,
            height,
            body: String::new(),
        }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, fill: &str, s: &str) {
        let _ = write!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"{size:.0}\" text-anchor=\"{anchor}\" \
             fill=\"{fill}\" font-family=\"sans-serif\">{}</text>",
            escape(s)
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dash: &str) {
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        let _ = write!(
            self.body,
            "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" \
             stroke=\"{stroke}\" stroke-width=\"{width:.1}\"{dash_attr}/>"
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = write!(
            self.body,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"{fill}\"/>"
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.1},{y:.1} ");
        }
        let _ = write!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.8\"/>",
            d.trim_end()
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = write!(
            self.body,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r:.1}\" fill=\"{fill}\"/>"
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
             viewBox=\"0 0 {:.0} {:.0}\"><rect width=\"100%\" height=\"100%\" fill=\"white\"/>{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps t in [0,1] to a light-to-dark blue ramp.
fn heat_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| a + (b - a) * t;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(247.0, 8.0) as u8,
        lerp(251.0, 81.0) as u8,
        lerp(255.0, 156.0) as u8
    )
}

struct Axes {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.x_min) / (self.x_max - self.x_min).max(1e-300) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.y_min) / (self.y_max - self.y_min).max(1e-300) * self.h
    }

    fn draw(&self, c: &mut Canvas, x_label: &str, y_label: &str) {
        c.line(self.x0, self.y0 + self.h, self.x0 + self.w, self.y0 + self.h, "#333", 1.0, "");
        c.line(self.x0, self.y0, self.x0, self.y0 + self.h, "#333", 1.0, "");
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x_min + f * (self.x_max - self.x_min);
            let yv = self.y_min + f * (self.y_max - self.y_min);
            let xp = self.px(xv);
            let yp = self.py(yv);
            c.line(xp, self.y0 + self.h, xp, self.y0 + self.h + 4.0, "#333", 1.0, "");
            c.text(xp, self.y0 + self.h + 16.0, 11.0, "middle", "#333", &trim_num(xv));
            c.line(self.x0 - 4.0, yp, self.x0, yp, "#333", 1.0, "");
            c.text(self.x0 - 7.0, yp + 4.0, 11.0, "end", "#333", &trim_num(yv));
            if k > 0 {
                c.line(self.x0, yp, self.x0 + self.w, yp, "#ddd", 0.5, "");
            }
        }
        c.text(self.x0 + self.w / 2.0, self.y0 + self.h + 34.0, 12.0, "middle", "#333", x_label);
        let _ = write!(
            c.body,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\" \
             font-family=\"sans-serif\" transform=\"rotate(-90 {:.1} {:.1})\">{}</text>",
            self.x0 - 40.0,
            self.y0 + self.h / 2.0,
            self.x0 - 40.0,
            self.y0 + self.h / 2.0,
            escape(y_label)
        );
    }
}

fn trim_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 && v.abs() < 1e7 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn legend(c: &mut Canvas, x: f64, y: f64, entries: &[(String, &str)]) {
    for (k, (name, color)) in entries.iter().enumerate() {
        let yy = y + 16.0 * k as f64;
        c.rect(x, yy - 9.0, 10.0, 10.0, color);
        c.text(x + 14.0, yy, 11.0, "start", "#333", name);
    }
}

/// Multi-series scatter/line chart; `hline` draws a dashed reference level.
fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    hline: Option<f64>,
) -> String {
    let mut c = Canvas::new(760.0, 420.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let x_min = pts.clone().map(|p| p.0).fold(f64::INFINITY, f64::min).min(0.0);
    let x_max = pts.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).max(1.0);
    let mut y_min = pts.clone().map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0);
    let mut y_max = pts.clone().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(h) = hline {
        y_min = y_min.min(h);
        y_max = y_max.max(h);
    }
    let y_max = y_max.max(y_min + 1e-9) * 1.05;
    let ax = Axes {
        x0: 70.0,
        y0: 40.0,
        w: 520.0,
        h: 320.0,
        x_min,
        x_max,
        y_min,
        y_max,
    };
    c.text(380.0, 22.0, 14.0, "middle", "#111", title);
    ax.draw(&mut c, x_label, y_label);
    if let Some(h) = hline {
        c.line(ax.px(x_min), ax.py(h), ax.px(x_max), ax.py(h), "#888", 1.0, "5,4");
    }
    let mut entries = Vec::new();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let px: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (ax.px(x), ax.py(y))).collect();
        c.polyline(&px, color);
        for &(x, y) in &px {
            c.circle(x, y, 2.5, color);
        }
        entries.push((name.clone(), color));
    }
    legend(&mut c, 610.0, 52.0, &entries);
    c.finish()
}

/// Relative mission length against object density, one line per distribution.
pub fn density_chart(records: &[DensityRecord]) -> String {
    let mut series = Vec::new();
    for dist in [WorldDistribution::Uniform, WorldDistribution::Clustered] {
        let mut densities: Vec<f64> = records
            .iter()
            .filter(|r| r.distribution == dist)
            .map(|r| r.density_per_ha)
            .collect();
        densities.sort_by(f64::total_cmp);
        densities.dedup();
        let pts: Vec<(f64, f64)> = densities
            .iter()
            .map(|&d| {
                let rs: Vec<f64> = records
                    .iter()
                    .filter(|r| r.distribution == dist && (r.density_per_ha - d).abs() < 1e-9)
                    .map(|r| r.r_diff)
                    .collect();
                (d, rs.iter().sum::<f64>() / rs.len() as f64)
            })
            .collect();
        series.push((dist.as_str().to_string(), pts));
    }
    line_chart(
        "Adaptive path length relative to the 12m coverage baseline",
        "objects per hectare",
        "relative length",
        &series,
        Some(1.0),
    )
}

/// Mean F1 against error level, one line per (planner, coverage altitude).
pub fn localization_chart(records: &[LocalizationRecord], level_names: &[String]) -> String {
    let mut altitudes: Vec<f64> = records.iter().map(|r| r.h_cov).collect();
    altitudes.sort_by(f64::total_cmp);
    altitudes.dedup();
    let mut series = Vec::new();
    for planner in ["adaptive", "coverage"] {
        for &h in &altitudes {
            let pts: Vec<(f64, f64)> = (0..level_names.len())
                .map(|li| {
                    let f1s: Vec<f64> = records
                        .iter()
                        .filter(|r| {
                            r.planner.as_str() == planner && r.h_cov == h && r.level_rank == li
                        })
                        .filter_map(|r| r.f1)
                        .collect();
                    (li as f64, f1s.iter().sum::<f64>() / f1s.len().max(1) as f64)
                })
                .collect();
            series.push((format!("{planner} {h:.0}m"), pts));
        }
    }
    let mut svg = line_chart(
        "Mean F1 by localization error level",
        "error level",
        "F1",
        &series,
        None,
    );
    // Replace numeric x ticks with the level names for readability.
    for (li, name) in level_names.iter().enumerate() {
        let marker = format!(">{li}</text>");
        let with = format!(">{}</text>", escape(name));
        svg = svg.replacen(&marker, &with, 1);
    }
    svg
}

/// Welch-t separability per measure, grouped bars per altitude.
pub fn certainty_chart(rows: &[SeparabilityRow]) -> String {
    let mut measures: Vec<String> = Vec::new();
    for r in rows {
        if !measures.contains(&r.measure) {
            measures.push(r.measure.clone());
        }
    }
    let mut altitudes: Vec<f64> = rows.iter().map(|r| r.altitude).collect();
    altitudes.sort_by(f64::total_cmp);
    altitudes.dedup();
    let t_max = rows.iter().filter_map(|r| r.t).fold(1.0f64, f64::max) * 1.1;

    let mut c = Canvas::new(760.0, 420.0);
    let ax = Axes {
        x0: 70.0,
        y0: 40.0,
        w: 520.0,
        h: 320.0,
        x_min: 0.0,
        x_max: measures.len() as f64,
        y_min: 0.0,
        y_max: t_max,
    };
    c.text(380.0, 22.0, 14.0, "middle", "#111", "TP/FP separability (Welch t) by measure");
    // Vertical axis only; measure names label the groups.
    c.line(ax.x0, ax.y0, ax.x0, ax.y0 + ax.h, "#333", 1.0, "");
    c.line(ax.x0, ax.y0 + ax.h, ax.x0 + ax.w, ax.y0 + ax.h, "#333", 1.0, "");
    for k in 0..=4 {
        let yv = t_max * k as f64 / 4.0;
        let yp = ax.py(yv);
        c.line(ax.x0 - 4.0, yp, ax.x0, yp, "#333", 1.0, "");
        c.text(ax.x0 - 7.0, yp + 4.0, 11.0, "end", "#333", &format!("{yv:.1}"));
    }
    let group_w = ax.w / measures.len() as f64;
    let bar_w = (group_w - 14.0) / altitudes.len() as f64;
    for (mi, measure) in measures.iter().enumerate() {
        let gx = ax.x0 + mi as f64 * group_w;
        c.text(gx + group_w / 2.0, ax.y0 + ax.h + 16.0, 11.0, "middle", "#333", measure);
        for (ai, &alt) in altitudes.iter().enumerate() {
            let row = rows.iter().find(|r| r.measure == *measure && r.altitude == alt);
            let t = row.and_then(|r| r.t).unwrap_or(0.0).max(0.0);
            let x = gx + 7.0 + ai as f64 * bar_w;
            let y = ax.py(t);
            c.rect(x, y, bar_w - 2.0, ax.y0 + ax.h - y, PALETTE[ai % PALETTE.len()]);
        }
    }
    let entries: Vec<(String, &str)> = altitudes
        .iter()
        .enumerate()
        .map(|(ai, &alt)| (format!("{alt:.0}m"), PALETTE[ai % PALETTE.len()]))
        .collect();
    legend(&mut c, 610.0, 52.0, &entries);
    c.finish()
}

/// Per-distribution heatmap panels of mean F1 (fill) and relative length
/// (annotation) over the threshold grid, rows = coverage altitudes.
pub fn sweep_chart(summaries: &[CellSummary]) -> String {
    let mut altitudes: Vec<f64> = summaries.iter().map(|s| s.h_cov).collect();
    altitudes.sort_by(f64::total_cmp);
    altitudes.dedup();
    let mut cols: Vec<(f64, f64)> = summaries.iter().map(|s| (s.c_accept, s.c_reject)).collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cols.dedup();

    let cell_w = 58.0;
    let cell_h = 34.0;
    let x0 = 90.0;
    let panel_h = 40.0 + altitudes.len() as f64 * cell_h + 30.0;
    let width = x0 + cols.len() as f64 * cell_w + 30.0;
    let mut c = Canvas::new(width, 30.0 + 2.0 * panel_h);

    for (pi, dist) in [WorldDistribution::Uniform, WorldDistribution::Clustered]
        .iter()
        .enumerate()
    {
        let top = 30.0 + pi as f64 * panel_h;
        c.text(
            x0,
            top,
            13.0,
            "start",
            "#111",
            &format!("{}: mean F1 (fill), mean relative length (text)", dist.as_str()),
        );
        for (ci, &(ca, cr)) in cols.iter().enumerate() {
            c.text(
                x0 + ci as f64 * cell_w + cell_w / 2.0,
                top + 22.0,
                10.0,
                "middle",
                "#333",
                &format!("{ca:.1}/{cr:.2}"),
            );
        }
        for (ri, &h) in altitudes.iter().enumerate() {
            let y = top + 30.0 + ri as f64 * cell_h;
            c.text(x0 - 8.0, y + cell_h / 2.0 + 4.0, 11.0, "end", "#333", &format!("{h:.0}m"));
            for (ci, &(ca, cr)) in cols.iter().enumerate() {
                let x = x0 + ci as f64 * cell_w;
                let cell = summaries.iter().find(|s| {
                    s.distribution == *dist && s.h_cov == h && s.c_accept == ca && s.c_reject == cr
                });
                match cell {
                    Some(s) => {
                        let f1 = s.mean_f1.unwrap_or(0.0);
                        c.rect(x + 1.0, y + 1.0, cell_w - 2.0, cell_h - 2.0, &heat_color(f1));
                        let and_text = format!("{:.2}|{:.2}", f1, s.mean_r_diff);
                        let fill = if f1 > 0.55 { "white" } else { "#222" };
                        c.text(x + cell_w / 2.0, y + cell_h / 2.0 + 4.0, 10.0, "middle", fill, &and_text);
                    }
                    None => {
                        c.rect(x + 1.0, y + 1.0, cell_w - 2.0, cell_h - 2.0, "#eee");
                        c.text(x + cell_w / 2.0, y + cell_h / 2.0 + 4.0, 10.0, "middle", "#999", "-");
                    }
                }
            }
        }
    }
    c.finish()
}
