use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

pub const OUT_DIR_ENV: &str = "HITWALK_OUT_DIR";

/// One emitted result. Field order is fixed so JSON output is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub input: Value,
    pub method: String,
    /// `null` when the engine failed; the error name is in `diagnostics`.
    pub values: Value,
    pub diagnostics: Map<String, Value>,
    pub software_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl ResultRecord {
    pub fn new(command: &str, input: Value, method: &str, values: Value, diagnostics: Map<String, Value>) -> Self {
        Self {
            command: command.into(),
            input,
            method: method.into(),
            values,
            diagnostics,
            software_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: None,
        }
    }

    pub fn stamped(mut self, enabled: bool) -> Self {
        if enabled {
            self.timestamp = Some(now_rfc3339());
        }
        self
    }
}

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .expect("UTC timestamps format")
}

/// `key=value` pairs joined by `;` for the CSV diagnostic column.
pub fn diagnostic_text(diagnostics: &Map<String, Value>) -> String {
    diagnostics
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Where output goes: explicit path (relative ones resolve against
/// `HITWALK_OUT_DIR`), `$HITWALK_OUT_DIR/<default_name>`, or stdout.
pub fn resolve_output(out: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match (out, dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(default_name)),
        (None, None) => None,
    }
}

pub fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// CSV with a header row, RFC 4180 quoting and LF line endings.
pub fn write_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

/// Shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
