//! Labeled-image dataset files: CSV with a `label` column followed by
//! flattened pixel columns `p0..pN`.

use std::path::Path;

use pgig_core::tensor::Tensor;
use pgig_core::trainer::LabeledImage;

use crate::csvio;
use crate::errors::{CliError, CliResult};

pub fn write_dataset(path: &Path, images: &[LabeledImage]) -> CliResult<()> {
    let pixel_count = images.first().map(|e| e.pixels.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["label".to_string()];
    header.extend((0..pixel_count).map(|i| format!("p{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = images
        .iter()
        .map(|e| {
            let mut row = Vec::with_capacity(pixel_count + 1);
            row.push(e.label.to_string());
            row.extend(e.pixels.data().iter().map(|v| v.to_string()));
            row
        })
        .collect();
    csvio::write_csv(path, &header_refs, &rows)
}

pub fn read_dataset(path: &Path) -> CliResult<Vec<LabeledImage>> {
    let (header, rows) = csvio::read_csv(path)?;
    if header.first().map(String::as_str) != Some("label") {
        return Err(CliError::usage(format!(
            "parse error at line 1: {} must start with a `label` column",
            path.display()
        )));
    }
    let pixel_count = header.len() - 1;
    let mut images = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let line = idx + 2;
        if row.len() != header.len() {
            return Err(CliError::usage(format!(
                "parse error at line {line}: expected {} columns, found {}",
                header.len(),
                row.len()
            )));
        }
        let label: usize = row[0].parse().map_err(|_| {
            CliError::usage(format!(
                "parse error at line {line}: bad label {:?}",
                row[0]
            ))
        })?;
        let mut pixels = Vec::with_capacity(pixel_count);
        for token in &row[1..] {
            pixels.push(csvio::parse_f64(token, path, line)?);
        }
        images.push(LabeledImage {
            label,
            pixels: Tensor::vector(pixels).map_err(CliError::from)?,
        });
    }
    if images.is_empty() {
        return Err(CliError::precondition(format!(
            "{} contains no data rows",
            path.display()
        )));
    }
    Ok(images)
}

/// Reads a single input vector: either a dataset row by index or a
/// header+row feature file (columns `f0..fN`).
pub fn read_input_vector(path: &Path) -> CliResult<Tensor> {
    let (header, rows) = csvio::read_csv(path)?;
    if header.first().map(String::as_str) == Some("label") {
        let images = read_dataset(path)?;
        return Ok(images[0].pixels.clone());
    }
    let row = rows
        .first()
        .ok_or_else(|| CliError::usage(format!("{} has no data row", path.display())))?;
    let mut values = Vec::with_capacity(row.len());
    for token in row {
        values.push(csvio::parse_f64(token, path, 2)?);
    }
    Tensor::vector(values).map_err(CliError::from)
}
