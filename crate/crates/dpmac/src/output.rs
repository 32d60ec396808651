//! CSV and JSON emission with an embedded run manifest.

use std::io::Write;

use serde::Serialize;

/// Provenance record attached to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION"),
            master_seed: None,
            outputs: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    results: &'a T,
}

/// `{"manifest": ..., "results": ...}`, pretty-printed with a trailing newline.
pub fn json_document<T: Serialize>(manifest: &RunManifest, results: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { manifest, results })?;
    s.push('\n');
    Ok(s)
}

/// Formats `v` with 12 significant digits in the shortest of fixed or
/// exponent notation, like C's `%.12g`.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A CSV cell: numbers at 12 significant digits, missing values empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

/// Writes a CSV table preceded by a `# {manifest}` comment line.
pub fn write_csv<W: Write>(
    out: W,
    manifest: &RunManifest,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = out;
    writeln!(out, "# {}", serde_json::to_string(manifest)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}
