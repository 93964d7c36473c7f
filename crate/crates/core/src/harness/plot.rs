use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::aggregate::{AggregateRow, Metric};
use super::trace_io::read_aggregate;
use crate::error::{Error, Result};

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 640.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 420.0;
/// Smallest value drawn on a log axis; zeros are clamped here.
const LOG_FLOOR: f64 = 1e-16;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlotScale {
    Linear,
    Log10,
}

impl PlotScale {
    pub fn for_metric(m: Metric) -> Self {
        match m {
            Metric::F => PlotScale::Linear,
            Metric::Htot | Metric::Jtot => PlotScale::Log10,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PlotScale::Linear => "linear",
            PlotScale::Log10 => "log",
        }
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: PlotScale,
}

impl Axis {
    fn t(&self, v: f64) -> f64 {
        match self.scale {
            PlotScale::Linear => v,
            PlotScale::Log10 => v.max(LOG_FLOOR).log10(),
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let (a, b) = (self.t(self.lo), self.t(self.hi));
        (self.t(v) - a) / (b - a)
    }

    fn y_px(&self, v: f64) -> f64 {
        BOTTOM - self.frac(v) * (BOTTOM - TOP)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            PlotScale::Linear => nice_ticks(self.lo, self.hi, 5),
            PlotScale::Log10 => {
                let (a, b) = (
                    self.t(self.lo).round() as i32,
                    self.t(self.hi).round() as i32,
                );
                let step = ((b - a) / 8).max(1);
                (a..=b)
                    .step_by(step as usize)
                    .map(|e| 10f64.powi(e))
                    .collect()
            }
        }
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        out.push(v);
        v += step;
    }
    out
}

fn y_axis(tables: &[(String, Vec<AggregateRow>)], m: Metric) -> Axis {
    let scale = PlotScale::for_metric(m);
    let values = tables
        .iter()
        .flat_map(|(_, rows)| rows.iter())
        .flat_map(|r| {
            let b = r.band(m);
            [b.median, b.lo95, b.hi95]
        })
        .filter(|v| v.is_finite());
    match scale {
        PlotScale::Linear => {
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            let (lo, hi) = if lo < hi {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            };
            let pad = 0.05 * (hi - lo);
            Axis {
                lo: lo - pad,
                hi: hi + pad,
                scale,
            }
        }
        PlotScale::Log10 => {
            let (lo, hi) = values
                .map(|v| v.max(LOG_FLOOR).log10())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(v), b.max(v))
                });
            let (lo, hi) = (lo.floor(), hi.ceil());
            let hi = if hi > lo { hi } else { lo + 1.0 };
            Axis {
                lo: 10f64.powf(lo),
                hi: 10f64.powf(hi),
                scale,
            }
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn label(v: f64, scale: PlotScale) -> String {
    match scale {
        PlotScale::Log10 => format!("1e{}", v.log10().round() as i32),
        PlotScale::Linear if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) => format!("{v:.1e}"),
        PlotScale::Linear => format!("{}", (v * 1e6).round() / 1e6),
    }
}

/// Grid indices where any plotted value changes; straight segments between
/// the kept vertices reproduce the full polyline exactly.
fn vertices(rows: &[AggregateRow], m: Metric) -> Vec<usize> {
    let key = |k: usize| {
        let b = rows[k].band(m);
        (b.median, b.lo95, b.hi95)
    };
    (0..rows.len())
        .filter(|&k| k == 0 || k + 1 == rows.len() || key(k) != key(k - 1) || key(k) != key(k + 1))
        .collect()
}

fn render(tables: &[(String, Vec<AggregateRow>)], m: Metric) -> String {
    let (x_lo, x_hi) = tables
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.eval as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    let x_hi = if x_hi > x_lo { x_hi } else { x_lo + 1.0 };
    let x_px = |e: f64| LEFT + (e - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let y = y_axis(tables, m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect class="plot-area" x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black" data-x-min="{x_lo}" data-x-max="{x_hi}" data-y-min="{}" data-y-max="{}" data-y-scale="{}"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP,
        y.lo,
        y.hi,
        y.scale.name()
    );
    for t in nice_ticks(x_lo, x_hi, 6) {
        let px = x_px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.3}" y1="{BOTTOM}" x2="{px:.3}" y2="{}" stroke="black"/><text x="{px:.3}" y="{}" text-anchor="middle">{}</text>"#,
            BOTTOM + 5.0,
            BOTTOM + 20.0,
            label(t, PlotScale::Linear)
        );
    }
    for t in y.ticks() {
        let py = y.y_px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.3}" x2="{RIGHT}" y2="{py:.3}" stroke="#dddddd"/><text x="{}" y="{:.3}" text-anchor="end">{}</text>"##,
            LEFT - 6.0,
            py + 4.0,
            label(t, y.scale)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle"># BB Eval.</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (TOP + BOTTOM) / 2.0,
        m.name()
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">median and 95% band of {}</text>"#,
        (LEFT + RIGHT) / 2.0,
        m.name()
    );

    for (k, (name, rows)) in tables.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let idx = vertices(rows, m);
        let pt = |r: &AggregateRow, v: f64| format!("{:.3},{:.3}", x_px(r.eval as f64), y.y_px(v));
        let upper: Vec<String> = idx
            .iter()
            .map(|&i| pt(&rows[i], rows[i].band(m).hi95))
            .collect();
        let lower: Vec<String> = idx
            .iter()
            .rev()
            .map(|&i| pt(&rows[i], rows[i].band(m).lo95))
            .collect();
        let median: Vec<String> = idx
            .iter()
            .map(|&i| pt(&rows[i], rows[i].band(m).median))
            .collect();
        let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, escape(name));
        let _ = writeln!(
            s,
            r#"<path class="band" d="M {} L {} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" L "),
            lower.join(" L ")
        );
        let _ = writeln!(
            s,
            r#"<polyline class="median" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            median.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{2}" y="{3}">{4}</text>"#,
            RIGHT + 15.0,
            RIGHT + 40.0,
            RIGHT + 46.0,
            ly + 4.0,
            escape(name)
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `f.svg`, `htot.svg` and `jtot.svg`, one series per table.
pub fn emit_plots(tables: &[(String, Vec<AggregateRow>)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if tables.is_empty() || tables.iter().any(|(_, rows)| rows.is_empty()) {
        return Err(Error::InvalidConfig("nothing to plot".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    Metric::ALL
        .iter()
        .map(|&m| {
            let path = out_dir.join(format!("{}.svg", m.name()));
            std::fs::write(&path, render(tables, m))?;
            Ok(path)
        })
        .collect()
}

/// Reads every `<group>_agg.csv` in `dir`, sorted by group.
pub fn read_aggregate_dir(dir: &Path) -> Result<Vec<(String, Vec<AggregateRow>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(group) = path
            .file_name()
            .and_then(|s| s.to_str())
            .and_then(|n| n.strip_suffix("_agg.csv"))
        else {
            continue;
        };
        out.push((group.to_string(), read_aggregate(&path)?));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Band;

    fn row(eval: usize, v: f64) -> AggregateRow {
        let b = Band {
            median: v,
            lo95: v / 2.0,
            hi95: v * 2.0,
        };
        AggregateRow {
            eval,
            f: b,
            htot: b,
            jtot: b,
        }
    }

    #[test]
    fn nice_ticks_cover_range() {
        assert_eq!(
            nice_ticks(0.0, 300.0, 6),
            vec![0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0]
        );
        assert_eq!(
            nice_ticks(0.3, 1.0, 5),
            vec![0.4, 0.6000000000000001, 0.8, 1.0]
        );
    }

    #[test]
    fn vertices_keep_changes_only() {
        let rows: Vec<AggregateRow> = [5.0, 5.0, 5.0, 3.0, 3.0, 3.0, 3.0]
            .iter()
            .enumerate()
            .map(|(k, v)| row(k + 1, *v))
            .collect();
        assert_eq!(vertices(&rows, Metric::F), vec![0, 2, 3, 6]);
    }

    #[test]
    fn log_axis_clamps_zero() {
        let tables = vec![(
            "a".to_string(),
            vec![row(1, 0.0), row(2, 1e-4), row(3, 10.0)],
        )];
        let y = y_axis(&tables, Metric::Jtot);
        assert_eq!(y.scale, PlotScale::Log10);
        assert_eq!(y.lo, LOG_FLOOR);
        assert!((y.hi - 100.0).abs() < 1e-9);
        assert!((y.y_px(0.0) - BOTTOM).abs() < 1e-9);
    }

    #[test]
    fn names_are_escaped() {
        let tables = vec![("a<b&c".to_string(), vec![row(1, 1.0), row(2, 2.0)])];
        let svg = render(&tables, Metric::F);
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(!svg.contains("a<b"));
    }
}
