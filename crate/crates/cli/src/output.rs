use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use klconc::canonical::{canonical_value, format_g17};
use serde_json::{json, Value};

use crate::args::Format;

/// What a subcommand produced, in every format it supports.
pub struct Emission {
    pub json: Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    /// Human-readable form. Falls back to `key: value` lines of the JSON.
    pub text: Option<String>,
    /// A verification property failed; the output is still written.
    pub failed: bool,
}

impl Emission {
    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => Ok(canonical_value(&self.json)),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.csv_header)?;
                for row in &self.csv_rows {
                    w.write_record(row)?;
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            }
            Format::Text => Ok(match &self.text {
                Some(t) => t.clone(),
                None => {
                    let mut out = String::new();
                    flatten("", &self.json, &mut out);
                    out
                }
            }),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<_> = map.keys().collect();
            keys.sort();
            for key in keys {
                let p = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten(&p, &map[key], out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push_str(&format!("{prefix}: [{}]\n", parts.join(", ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), item, out);
            }
        }
        other => out.push_str(&format!("{prefix}: {}\n", scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_g17(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A real number as a CSV cell.
pub fn cell(x: f64) -> String {
    if x.is_finite() {
        format_g17(x)
    } else {
        String::new()
    }
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn write(path: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Side file with the details canonical output leaves out.
pub fn annotate(output: &Path, elapsed: Duration, threads: Option<usize>) -> anyhow::Result<()> {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    let meta = json!({
        "argv": std::env::args().collect::<Vec<_>>(),
        "elapsed_seconds": elapsed.as_secs_f64(),
        "threads": threads.unwrap_or_else(available_threads),
        "unix_time": now.as_secs(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let path = Path::new(&name);
    fs::write(path, canonical_value(&meta)).with_context(|| format!("writing {}", path.display()))
}

fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
