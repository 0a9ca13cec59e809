//! Report documents and flat text formats shared by the CLI and tests.
//!
//! A report is a JSON object
//!
//! ```json
//! { "schema": "iso-stab-report/1", "manifest": { ... }, "payload": { ... } }
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing a report
//! gives back bit-identical values. Residual sample tables go to CSV with
//! the header in [`RESIDUAL_CSV_HEADER`] followed by one `x<i>` column per
//! domain coordinate.

use serde::{Deserialize, Serialize};

use crate::bounds::ResidualSample;
use crate::error::{Error, Result};
use crate::space::Vector;

pub const SCHEMA: &str = "iso-stab-report/1";
pub const RESIDUAL_CSV_HEADER: [&str; 9] = [
    "epsilon",
    "r",
    "h_norm",
    "k_norm",
    "t_resid",
    "full_resid",
    "bound2_margin",
    "bound3_margin",
    "bound4_margin",
];
/// Upper bound on coordinates accepted from text input.
pub const MAX_CSV_COORDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report<P> {
    pub schema: String,
    pub manifest: RunManifest,
    pub payload: P,
}

impl<P: Serialize> Report<P> {
    pub fn new(manifest: RunManifest, payload: P) -> Self {
        Report {
            schema: SCHEMA.to_string(),
            manifest,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Parses any report document, leaving the payload untyped.
pub fn parse_report(text: &str) -> Result<Report<serde_json::Value>> {
    let report: Report<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))?;
    if report.schema != SCHEMA {
        return Err(Error::Parse(format!(
            "unsupported report schema {:?}, expected {SCHEMA:?}",
            report.schema
        )));
    }
    Ok(report)
}

/// `"1,-2.5,3e-4"` to a vector; blanks around entries are ignored.
pub fn parse_vector_csv(text: &str) -> Result<Vector> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty coordinate list".into()));
    }
    let coords: Vec<f64> = text
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            let s = s.trim();
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Parse(format!("coordinate {i}: {s:?} is not a number")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("coordinate {i}: {s:?} is not finite")));
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    if coords.len() > MAX_CSV_COORDS {
        return Err(Error::Parse(format!(
            "at most {MAX_CSV_COORDS} coordinates, got {}",
            coords.len()
        )));
    }
    Vector::new(coords)
}

/// 17 significant digits with trailing zeros trimmed: lossless for `f64`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.16e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

pub fn format_vector_csv(v: &Vector) -> String {
    v.as_slice()
        .iter()
        .map(|c| format_g17(*c))
        .collect::<Vec<_>>()
        .join(",")
}

/// One CSV row per sample; `epsilon` repeated so each row is self-contained.
pub fn write_residual_csv(epsilon: f64, samples: &[ResidualSample]) -> Result<String> {
    let dim = samples.first().map_or(0, |s| s.x.dim());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = RESIDUAL_CSV_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    for s in samples {
        if s.x.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.x.dim(),
            });
        }
        let mut row: Vec<String> = [
            epsilon,
            s.r,
            s.h_norm,
            s.k_norm,
            s.t_resid,
            s.full_resid,
            s.bound2_margin,
            s.bound3_margin,
            s.bound4_margin,
        ]
        .iter()
        .map(|v| format_g17(*v))
        .collect();
        row.extend(s.x.as_slice().iter().map(|v| format_g17(*v)));
        w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub epsilon: f64,
    pub sample: ResidualSample,
}

pub fn parse_residual_csv(text: &str) -> Result<Vec<ResidualRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(format!("residual csv header: {e}")))?
        .clone();
    let n_fixed = RESIDUAL_CSV_HEADER.len();
    if header.len() <= n_fixed || header.len() > n_fixed + MAX_CSV_COORDS {
        return Err(Error::Parse(format!(
            "residual csv needs {n_fixed} fixed columns plus 1..={MAX_CSV_COORDS} coordinates, got {}",
            header.len()
        )));
    }
    for (i, name) in RESIDUAL_CSV_HEADER.iter().enumerate() {
        if &header[i] != *name {
            return Err(Error::Parse(format!("column {i} must be {name:?}, got {:?}", &header[i])));
        }
    }
    for (i, name) in header.iter().skip(n_fixed).enumerate() {
        if name != format!("x{i}") {
            return Err(Error::Parse(format!("coordinate column {i} must be \"x{i}\", got {name:?}")));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Parse(format!("row {line}: wrong field count")));
        }
        let vals: Vec<f64> = record
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("row {line}: bad number {f:?}")))
            })
            .collect::<Result<_>>()?;
        let x = Vector::new(vals[n_fixed..].to_vec())?;
        rows.push(ResidualRow {
            epsilon: vals[0],
            sample: ResidualSample {
                x,
                r: vals[1],
                h_norm: vals[2],
                k_norm: vals[3],
                t_resid: vals[4],
                full_resid: vals[5],
                bound2_margin: vals[6],
                bound3_margin: vals[7],
                bound4_margin: vals[8],
            },
        });
    }
    Ok(rows)
}
