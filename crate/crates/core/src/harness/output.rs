//! Result rows, confidence intervals and CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "sweep,metric,value,ci_half_width,n_trials";
pub const CONTOUR_EXTRA: &str = "p_s_frac,d_sr_frac,outage";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub metric: String,
    pub value: f64,
    pub ci_half_width: f64,
    pub n_trials: u64,
}

impl ResultRow {
    /// A closed-form value: no interval, no trials.
    pub fn exact(sweep: f64, metric: impl Into<String>, value: f64) -> Self {
        ResultRow {
            sweep,
            metric: metric.into(),
            value,
            ci_half_width: 0.0,
            n_trials: 0,
        }
    }

    /// An estimated proportion with its Wilson half-width.
    pub fn proportion(sweep: f64, metric: impl Into<String>, hits: u64, n: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        ResultRow {
            sweep,
            metric: metric.into(),
            value: p,
            ci_half_width: wilson_half_width(hits, n),
            n_trials: n,
        }
    }
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_half_width(hits: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// C-style `%.10e`: ten mantissa digits, signed exponent of at least two
/// digits.
pub fn format_sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.10e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn row_line(r: &ResultRow) -> String {
    format!(
        "{},{},{},{},{}",
        format_sci(r.sweep),
        r.metric,
        format_sci(r.value),
        format_sci(r.ci_half_width),
        r.n_trials
    )
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&row_line(r));
        out.push('\n');
    }
    out
}

/// Contour rows: the standard columns followed by the grid coordinates.
pub fn render_contour_csv(points: &[crate::optimize::ContourPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER},{CONTOUR_EXTRA}");
    for p in points {
        let row = ResultRow::exact(p.p_s_frac, "outage", p.outage);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row_line(&row),
            format_sci(p.p_s_frac),
            format_sci(p.d_sr_frac),
            format_sci(p.outage)
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_text(path, &render_csv(rows))
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    field.parse().map_err(|_| Error::Csv {
        line,
        reason: format!("not a number: {field:?}"),
    })
}

/// Parses text produced by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => {
            return Err(Error::Csv {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    lines
        .map(|(i, l)| {
            let line = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Csv {
                    line,
                    reason: format!("expected 5 fields, found {}", f.len()),
                });
            }
            Ok(ResultRow {
                sweep: parse_num(f[0], line)?,
                metric: f[1].to_string(),
                value: parse_num(f[2], line)?,
                ci_half_width: parse_num(f[3], line)?,
                n_trials: f[4].parse().map_err(|_| Error::Csv {
                    line,
                    reason: format!("not a count: {:?}", f[4]),
                })?,
            })
        })
        .collect()
}
