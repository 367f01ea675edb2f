//! CSV read/write helpers: comma-separated, `.` decimal point, one header
//! row, LF line endings. Floats print in shortest round-trip form so reruns
//! are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::errors::{CliError, CliResult};

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::precondition(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("parse error at line 1: {} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
    }
    Ok((header, rows))
}

pub fn parse_f64(token: &str, path: &Path, line: usize) -> CliResult<f64> {
    token.parse::<f64>().map_err(|_| {
        CliError::usage(format!(
            "parse error at line {line}: bad float {token:?} in {}",
            path.display()
        ))
    })
}
