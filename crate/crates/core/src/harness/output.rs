//! CSV emission and parsing, and static SVG line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::congruence::CongruenceRow;
use super::experiment::{ResultRow, Strategy};

pub const CSV_HEADER: &str = "drop_id,strategy,n_beams,t_coh,rate_bps,similarity,rpe,los,seed";
pub const CONGRUENCE_HEADER: &str = "drop_id,n,l,s_raw,s_corrected,rpe_raw,rpe_corrected,los,seed";

fn write_records<const K: usize>(header: &str, records: impl Iterator<Item = [String; K]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for rec in records {
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII fields")
}

/// Data records of `text` after checking its header, each with its 1-based line.
fn read_records(text: &str, header: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if !found.iter().eq(header.split(',')) {
        return Err(Error::Parse(format!("expected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            Ok((rec.position().map_or(0, |p| p.line()), rec))
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &(u64, csv::StringRecord), i: usize, name: &str) -> Result<T> {
    rec.1
        .get(i)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {}: bad or missing {name}", rec.0)))
}

fn flag(rec: &(u64, csv::StringRecord), i: usize) -> Result<bool> {
    match rec.1.get(i) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        _ => Err(Error::Parse(format!("line {}: los must be 0 or 1", rec.0))),
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    write_records(
        CSV_HEADER,
        rows.iter().map(|r| {
            [
                r.drop_id.to_string(),
                r.strategy.as_str().to_owned(),
                r.n_beams.to_string(),
                r.t_coh.to_string(),
                r.rate_bps.to_string(),
                r.similarity.to_string(),
                r.rpe.to_string(),
                u8::from(r.los).to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Contract("no rows to write".into()));
    }
    std::fs::write(path, rows_to_csv(rows))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    read_records(text, CSV_HEADER)?
        .iter()
        .map(|rec| {
            let strategy = rec
                .1
                .get(1)
                .and_then(Strategy::parse)
                .ok_or_else(|| Error::Parse(format!("line {}: unknown strategy", rec.0)))?;
            Ok(ResultRow {
                drop_id: field(rec, 0, "drop_id")?,
                strategy,
                n_beams: field(rec, 2, "n_beams")?,
                t_coh: field(rec, 3, "t_coh")?,
                rate_bps: field(rec, 4, "rate_bps")?,
                similarity: field(rec, 5, "similarity")?,
                rpe: field(rec, 6, "rpe")?,
                los: flag(rec, 7)?,
                seed: field(rec, 8, "seed")?,
            })
        })
        .collect()
}

pub fn congruence_to_csv(rows: &[CongruenceRow]) -> String {
    write_records(
        CONGRUENCE_HEADER,
        rows.iter().map(|r| {
            [
                r.drop_id.to_string(),
                r.n.to_string(),
                r.l.to_string(),
                r.s_raw.to_string(),
                r.s_corrected.to_string(),
                r.rpe_raw.to_string(),
                r.rpe_corrected.to_string(),
                u8::from(r.los).to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn parse_congruence_csv(text: &str) -> Result<Vec<CongruenceRow>> {
    read_records(text, CONGRUENCE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(CongruenceRow {
                drop_id: field(rec, 0, "drop_id")?,
                n: field(rec, 1, "n")?,
                l: field(rec, 2, "l")?,
                s_raw: field(rec, 3, "s_raw")?,
                s_corrected: field(rec, 4, "s_corrected")?,
                rpe_raw: field(rec, 5, "rpe_raw")?,
                rpe_corrected: field(rec, 6, "rpe_corrected")?,
                los: flag(rec, 7)?,
                seed: field(rec, 8, "seed")?,
            })
        })
        .collect()
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
}

fn render(panels: &[Panel]) -> String {
    let width = panels.len() as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = PANEL_H + 2.0 * MARGIN + 20.0 * panels.iter().map(|p| p.series.len()).max().unwrap_or(0) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pi, panel) in panels.iter().enumerate() {
        let x0 = MARGIN + pi as f64 * (PANEL_W + MARGIN);
        let y0 = MARGIN;
        let all = panel.series.iter().flat_map(|s| s.points.iter());
        let (mut xmin, mut xmax, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64);
        for &(x, y) in all {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymax = ymax.max(y);
        }
        if !xmin.is_finite() {
            (xmin, xmax) = (0.0, 1.0);
        }
        if xmax <= xmin {
            xmax = xmin + 1.0;
        }
        if ymax <= 0.0 {
            ymax = 1.0;
        }
        ymax *= 1.05;
        let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * PANEL_W;
        let sy = |y: f64| y0 + PANEL_H - y / ymax * PANEL_H;
        let _ = writeln!(
            svg,
            r#"<rect x="{x0:.1}" y="{y0:.1}" width="{PANEL_W:.1}" height="{PANEL_H:.1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + PANEL_W / 2.0, y0 - 10.0, panel.title);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H + 30.0,
            panel.x_label
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            x0 - 35.0,
            y0 + PANEL_H / 2.0,
            x0 - 35.0,
            y0 + PANEL_H / 2.0,
            panel.y_label
        );
        for k in 0..=4 {
            let (xv, yv) = (xmin + (xmax - xmin) * k as f64 / 4.0, ymax * k as f64 / 4.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, sx(xv), y0 + PANEL_H + 15.0, xv);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, sy(yv) + 4.0, yv);
        }
        for (si, s) in panel.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = y0 + PANEL_H + 45.0 + 18.0 * si as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
                x0,
                x0 + 20.0
            );
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x0 + 26.0, ly + 4.0, s.label);
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn t_coh_label(t: f64) -> String {
    if t.is_infinite() {
        "T_coh = inf".into()
    } else {
        format!("T_coh = {t} blocks")
    }
}

/// One panel per coherence time. Strategies with a beam sweep are drawn
/// against the sweep; the others as flat reference lines at their mean rate.
pub fn rate_plot_svg(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Contract("no rows to plot".into()));
    }
    let mut by_t: BTreeMap<u64, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_t.entry(r.t_coh.to_bits()).or_default().push(r);
    }
    let mut keys: Vec<f64> = by_t.keys().map(|k| f64::from_bits(*k)).collect();
    keys.sort_by(|a, b| b.total_cmp(a));
    let mut panels = Vec::new();
    for t in keys {
        let group = &by_t[&t.to_bits()];
        let (xmin, xmax) = group.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
            (a.min(r.n_beams as f64), b.max(r.n_beams as f64))
        });
        let mut series = Vec::new();
        let mut strategies: Vec<Strategy> = group.iter().map(|r| r.strategy).collect();
        strategies.sort();
        strategies.dedup();
        for s in strategies {
            let mut per_beams: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in group.iter().filter(|r| r.strategy == s) {
                per_beams.entry(r.n_beams).or_default().push(r.rate_bps / 1e9);
            }
            let points = if s == Strategy::Radar {
                per_beams.iter().map(|(m, v)| (*m as f64, mean(v))).collect()
            } else {
                let all: Vec<f64> = per_beams.values().flatten().copied().collect();
                let n_mean = mean(&per_beams.iter().flat_map(|(m, v)| std::iter::repeat_n(*m as f64, v.len())).collect::<Vec<_>>());
                let y = mean(&all);
                let label_extra = format!(" (mean {n_mean:.1} beams)");
                series.push(Series { label: format!("{}{label_extra}", s.as_str()), points: vec![(xmin, y), (xmax, y)] });
                continue;
            };
            series.push(Series { label: s.as_str().into(), points });
        }
        panels.push(Panel { title: t_coh_label(t), x_label: "RSU beams trained".into(), y_label: "mean rate (Gbit/s)".into(), series });
    }
    Ok(render(&panels))
}

pub fn emit_plot(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, rate_plot_svg(rows)?)?;
    Ok(())
}

/// Mean similarity and RPE against array size, one panel per stream count.
pub fn similarity_plot_svg(rows: &[CongruenceRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Contract("no rows to plot".into()));
    }
    let mut ls: Vec<usize> = rows.iter().map(|r| r.l).collect();
    ls.sort_unstable();
    ls.dedup();
    let mut panels = Vec::new();
    for l in ls {
        let mut ns: Vec<usize> = rows.iter().filter(|r| r.l == l).map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let column = |f: fn(&CongruenceRow) -> f64| -> Vec<(f64, f64)> {
            ns.iter()
                .map(|&n| {
                    let v: Vec<f64> = rows.iter().filter(|r| r.l == l && r.n == n).map(f).collect();
                    (n as f64, mean(&v))
                })
                .collect()
        };
        let series = vec![
            Series { label: "S corrected".into(), points: column(|r| r.s_corrected) },
            Series { label: "S uncorrected".into(), points: column(|r| r.s_raw) },
            Series { label: "RPE corrected".into(), points: column(|r| r.rpe_corrected) },
            Series { label: "RPE uncorrected".into(), points: column(|r| r.rpe_raw) },
        ];
        panels.push(Panel { title: format!("L = {l}"), x_label: "RSU array size N".into(), y_label: "mean metric".into(), series });
    }
    Ok(render(&panels))
}

pub fn emit_similarity_plot(rows: &[CongruenceRow], path: &Path) -> Result<()> {
    std::fs::write(path, similarity_plot_svg(rows)?)?;
    Ok(())
}
