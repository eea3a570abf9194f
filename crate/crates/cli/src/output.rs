//! Deterministic CSV and JSON emission. Floats are printed in the shortest
//! form that round-trips, so identical runs produce byte-identical files at
//! any worker count.

use crate::ConfigError;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Destination and format resolved from the command line; `format` falls back
/// to the natural one of each subcommand when the flag is absent.
#[derive(Debug, Clone)]
pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    pub fn write(&self, content: &str) -> Result<(), ConfigError> {
        write_to(self.out.as_deref(), content)
    }
}

pub fn write_to(out: Option<&Path>, content: &str) -> Result<(), ConfigError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// Shortest round-trip decimal for finite values; non-finite values are
/// spelled out since CSV has no null.
pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        serde_json::to_string(&v).expect("finite float serializes")
    }
}

pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(header: &[String]) -> Csv {
        Csv { lines: vec![header.join(",")] }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn finish(self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

/// Column labels like m_1..m_q for vector-valued fields.
pub fn indexed(label: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{label}_{i}")).collect()
}

pub fn json_doc<T: serde::Serialize>(doc: &T) -> Result<String, ConfigError> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    Ok(text)
}
