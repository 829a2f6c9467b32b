//! Gnuplot script stubs written next to each CSV so figures can be
//! regenerated without a plotting dependency.

use std::path::{Path, PathBuf};

use crate::error::CliResult;
use crate::table::write_atomic;

#[derive(Debug, Clone, Default)]
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub ys: &'a [&'a str],
    pub logx: bool,
    pub logy: bool,
}

/// Writes `<csv stem>.gp` and returns its path.
pub fn write_stub(csv: &Path, columns: &[String], spec: &PlotSpec) -> CliResult<PathBuf> {
    let col = |name: &str| columns.iter().position(|c| c == name).map(|i| i + 1);
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str(&format!("set title '{}'\nset xlabel '{}'\n", spec.title, spec.x));
    if spec.logx {
        s.push_str("set logscale x\n");
    }
    if spec.logy {
        s.push_str("set logscale y\n");
    }
    let x = col(spec.x).unwrap_or(1);
    let curves: Vec<String> = spec
        .ys
        .iter()
        .filter_map(|y| col(y).map(|j| format!("'{file}' using {x}:{j} with lines title '{y}'")))
        .collect();
    if !curves.is_empty() {
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    }
    let path = csv.with_extension("gp");
    write_atomic(&path, s.as_bytes())?;
    Ok(path)
}
