//! Numeric CSV tables with `#`-prefixed metadata lines.
//!
//! Values are written with Rust's shortest round-trip `f64` formatting, so a
//! write/read cycle reproduces every value exactly. Missing values are `nan`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// `(key, value)` pairs written as `# key: value`.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            // One metadata entry per line, whatever the value contains.
            for (i, line) in v.lines().enumerate() {
                if i == 0 {
                    writeln!(out, "# {k}: {line}")?;
                } else {
                    writeln!(out, "#   {line}")?;
                }
            }
            if v.is_empty() {
                writeln!(out, "# {k}:")?;
            }
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| fmt_value(*v))).map_err(csv_err)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }

    /// Writes atomically (temporary file, then rename).
    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut meta: Vec<(String, String)> = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = &line[1..];
            if let Some(cont) = body.strip_prefix("   ") {
                if let Some(last) = meta.last_mut() {
                    last.1.push('\n');
                    last.1.push_str(cont);
                }
            } else if let Some((k, v)) = body.trim_start().split_once(':') {
                meta.push((k.to_string(), v.strip_prefix(' ').unwrap_or(v).to_string()));
            }
        }
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|f| parse_value(f).ok_or_else(|| CliError::Input(format!("bad number '{f}'"))))
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
        Self::parse(&text)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(format!("csv: {e}"))
}

pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    match s.trim() {
        "" | "nan" | "NaN" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
