//! `pgig render`: turn an attribution CSV of square length into a
//! diverging-colormap PPM image.

use std::path::Path;

use crate::config::{section_or_empty, ConfigDoc};
use crate::csvio::{parse_f64, read_csv};
use crate::errors::{CliError, CliResult};
use crate::heatmap;
use crate::manifest::Manifest;

const KEYS: [&str; 2] = ["map", "name"];

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let section = section_or_empty(doc, "render");
    section.ensure_known_keys(&KEYS)?;
    let map_path = section.get_str("map", "");
    let name = section.get_str("name", "heatmap.ppm");
    if map_path.is_empty() {
        return Err(CliError::usage("a map file is required (--map <csv>)"));
    }

    let path = Path::new(&map_path);
    let (header, rows) = read_csv(path)?;
    if header.len() < 2 {
        return Err(CliError::usage(format!(
            "parse error at line 1: {} needs (feature, value) columns",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let line = idx + 2;
        let token = row.get(1).ok_or_else(|| {
            CliError::usage(format!("parse error at line {line}: missing value column"))
        })?;
        values.push(parse_f64(token, path, line)?);
    }

    let side = (values.len() as f64).sqrt().round() as usize;
    if side * side != values.len() || values.is_empty() {
        return Err(CliError::precondition(format!(
            "cannot render: map length {} is not a square image",
            values.len()
        )));
    }
    let rgb = heatmap::render_rgb(&values, side);
    heatmap::write_ppm(&out.join(&name), side, side, &rgb)?;
    println!("rendered {side}x{side} image to {name}");

    Ok(Manifest {
        command: "render".into(),
        out_dir: out.display().to_string(),
        sections: vec![(
            "render".into(),
            vec![("map".into(), map_path), ("name".into(), name)],
        )],
    })
}
