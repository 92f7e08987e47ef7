//! Standalone SVG charts from simple numeric CSV files.
//!
//! Three chart kinds cover the experiment outputs: multi-series line charts
//! (first column is x, remaining columns are series), heatmaps (three columns:
//! row value, column value, cell value, on a diverging blue-white-red scale
//! centered at zero), and bar charts (label, value). The writer has no
//! dependencies and emits a self-contained `<svg>` document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlotKind {
    Lines,
    Heatmap,
    Bars,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lines" => Ok(PlotKind::Lines),
            "heatmap" => Ok(PlotKind::Heatmap),
            "bars" => Ok(PlotKind::Bars),
            other => Err(format!("unknown plot kind '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
}

struct Csv {
    header: Vec<String>,
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Parses a comma-separated table. `numeric_from` is the first column that
/// must parse as a number; earlier columns are kept as labels.
fn parse_csv(text: &str, numeric_from: usize) -> Result<Csv, PlotError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| PlotError::MalformedCsv("missing header".into()))?
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(PlotError::MalformedCsv(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                cells.len(),
                header.len()
            )));
        }
        if numeric_from > 0 {
            labels.push(cells[..numeric_from.min(cells.len())].join(","));
        }
        let mut row = Vec::with_capacity(cells.len() - numeric_from);
        for cell in &cells[numeric_from..] {
            let value: f64 = cell.trim().parse().map_err(|_| {
                PlotError::MalformedCsv(format!("non-numeric cell '{cell}' in row {}", i + 1))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(PlotError::MalformedCsv("no data rows".into()));
    }
    Ok(Csv {
        header,
        labels,
        rows,
    })
}

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#7030a0", "#ff7d7d", "#8faadc", "#70ad47", "#ffc000", "#444444",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn svg_open(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x_min + f * (frame.x_max - frame.x_min);
        let yv = frame.y_min + f * (frame.y_max - frame.y_min);
        let xp = frame.x(xv);
        let yp = frame.y(yv);
        out.push_str(&format!(
            "<line x1=\"{xp}\" y1=\"{y0}\" x2=\"{xp}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 18.0,
            tick(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{yp}\" x2=\"{x0}\" y2=\"{yp}\" stroke=\"black\"/>\n",
            x0 - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            yp + 4.0,
            tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let lx = WIDTH - MARGIN_R + 12.0;
    let mut ly = MARGIN_T + 8.0;
    for (name, color) in entries {
        out.push_str(&format!(
            "<rect x=\"{lx}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n",
            ly - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\">{}</text>\n",
            lx + 20.0,
            escape(name)
        ));
        ly += 18.0;
    }
}

/// Renders the CSV as a chart of the requested kind.
pub fn emit_svg(csv_text: &str, kind: PlotKind, title: &str) -> Result<String, PlotError> {
    match kind {
        PlotKind::Lines => lines_chart(csv_text, title),
        PlotKind::Heatmap => heatmap_chart(csv_text, title),
        PlotKind::Bars => bars_chart(csv_text, title),
    }
}

fn lines_chart(csv_text: &str, title: &str) -> Result<String, PlotError> {
    let csv = parse_csv(csv_text, 0)?;
    if csv.header.len() < 2 {
        return Err(PlotError::MalformedCsv(
            "line charts need an x column and at least one series".into(),
        ));
    }
    let xs: Vec<f64> = csv.rows.iter().map(|r| r[0]).collect();
    let (x_min, x_max) = pad_range(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for row in &csv.rows {
        for &v in &row[1..] {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    let (y_min, y_max) = pad_range(y_min, y_max);
    let frame = Frame {
        x_min,
        x_max,
        y_min,
        y_max,
    };
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, &csv.header[0], "value");
    let mut entries = Vec::new();
    for series in 1..csv.header.len() {
        let color = PALETTE[(series - 1) % PALETTE.len()];
        let points: Vec<String> = csv
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", frame.x(r[0]), frame.y(r[series])))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        entries.push((csv.header[series].clone(), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Diverging blue-white-red scale on [-1, 1].
fn diverging_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        // white -> red
        (255.0, 255.0 - 130.0 * v, 255.0 - 130.0 * v)
    } else {
        // white -> blue
        (255.0 + 112.0 * v, 255.0 + 85.0 * v, 255.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

fn heatmap_chart(csv_text: &str, title: &str) -> Result<String, PlotError> {
    let csv = parse_csv(csv_text, 0)?;
    if csv.header.len() < 3 {
        return Err(PlotError::MalformedCsv(
            "heatmaps need row, column, and value columns".into(),
        ));
    }
    let mut row_values: Vec<f64> = csv.rows.iter().map(|r| r[0]).collect();
    let mut col_values: Vec<f64> = csv.rows.iter().map(|r| r[1]).collect();
    row_values.sort_by(f64::total_cmp);
    row_values.dedup();
    col_values.sort_by(f64::total_cmp);
    col_values.dedup();
    let v_max = csv
        .rows
        .iter()
        .map(|r| r[2].abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let cell_w = plot_w / col_values.len() as f64;
    let cell_h = plot_h / row_values.len() as f64;
    let mut out = String::new();
    svg_open(&mut out, title);
    for row in &csv.rows {
        let ri = row_values.partition_point(|&v| v < row[0]);
        let ci = col_values.partition_point(|&v| v < row[1]);
        // rows grow upward so the diagonal runs bottom-left to top-right
        let x = MARGIN_L + ci as f64 * cell_w;
        let y = HEIGHT - MARGIN_B - (ri + 1) as f64 * cell_h;
        out.push_str(&format!(
            "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" \
             height=\"{cell_h:.2}\" fill=\"{}\" stroke=\"#ddd\" stroke-width=\"0.5\">\
             <title>{}={}, {}={}: {:.6}</title></rect>\n",
            diverging_color(row[2] / v_max),
            escape(&csv.header[0]),
            tick(row[0]),
            escape(&csv.header[1]),
            tick(row[1]),
            row[2]
        ));
    }
    for (i, &v) in col_values.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + (i as f64 + 0.5) * cell_w,
            HEIGHT - MARGIN_B + 18.0,
            tick(v)
        ));
    }
    for (i, &v) in row_values.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            HEIGHT - MARGIN_B - (i as f64 + 0.5) * cell_h + 4.0,
            tick(v)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(&csv.header[1])
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&csv.header[0])
    ));
    legend(
        &mut out,
        &[
            (format!("{} = +{:.4}", csv.header[2], v_max), "#ff7d7d"),
            ("0".to_string(), "#ffffff"),
            (format!("{} = -{:.4}", csv.header[2], v_max), "#8faadc"),
        ],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn bars_chart(csv_text: &str, title: &str) -> Result<String, PlotError> {
    let csv = parse_csv(csv_text, 1)?;
    if csv.header.len() < 2 {
        return Err(PlotError::MalformedCsv(
            "bar charts need a label column and a value column".into(),
        ));
    }
    let values: Vec<f64> = csv.rows.iter().map(|r| r[0]).collect();
    let (y_min, y_max) = pad_range(
        values.iter().copied().fold(0.0f64, f64::min),
        values.iter().copied().fold(0.0f64, f64::max),
    );
    let frame = Frame {
        x_min: 0.0,
        x_max: values.len() as f64,
        y_min,
        y_max,
    };
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, &csv.header[0], &csv.header[1]);
    let band = (WIDTH - MARGIN_L - MARGIN_R) / values.len() as f64;
    for (i, (&v, label)) in values.iter().zip(&csv.labels).enumerate() {
        let x = MARGIN_L + i as f64 * band + 0.15 * band;
        let y_zero = frame.y(0.0);
        let y_v = frame.y(v);
        let (top, height) = if v >= 0.0 {
            (y_v, y_zero - y_v)
        } else {
            (y_zero, y_v - y_zero)
        };
        out.push_str(&format!(
            "<rect class=\"bar\" x=\"{x:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{}\"/>\n",
            0.7 * band,
            height.max(0.5),
            PALETTE[i % PALETTE.len()]
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            x + 0.35 * band,
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}
