//! `pgig explain`: attribute one input under a named method; writes the
//! map as CSV and optionally a heatmap image for square inputs.

use std::path::Path;

use pgig_core::attribution::{explain, Method};
use pgig_core::tensor::Tensor;
use pgig_core::trainer::argmax;

use crate::config::{section_or_empty, ConfigDoc};
use crate::csvio::write_csv;
use crate::dataset::{read_dataset, read_input_vector};
use crate::errors::{CliError, CliResult};
use crate::heatmap;
use crate::manifest::Manifest;

const KEYS: [&str; 14] = [
    "network",
    "data",
    "input",
    "index",
    "method",
    "target",
    "render",
    "steps",
    "samples",
    "noise_mu",
    "noise_sigma",
    "baseline_draws",
    "seed",
    "references",
];

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let section = section_or_empty(doc, "explain");
    section.ensure_known_keys(&KEYS)?;

    let network_path = section.get_str("network", "");
    let data_path = section.get_str("data", "");
    let input_path = section.get_str("input", "");
    let index = section.get_usize("index", 0)?;
    let method_name = section.get_str("method", "");
    let target_raw = section.get_str("target", "argmax");
    let render = section.get_bool("render", false)?;
    let mut cfg = super::method_config_from(&section)?;
    let reference_count = section.get_usize("references", cfg.baseline_draws)?;

    if method_name.is_empty() {
        return Err(CliError::usage("a method is required (--method <name>)"));
    }
    let method = Method::from_name(&method_name).map_err(|e| CliError::usage(e.to_string()))?;

    let net = super::load_network(&network_path)?;

    // The input comes from an explicit vector file or a dataset row.
    let x: Tensor = if !input_path.is_empty() {
        read_input_vector(Path::new(&input_path))?
    } else if !data_path.is_empty() {
        let images = read_dataset(Path::new(&data_path))?;
        images
            .get(index)
            .ok_or_else(|| {
                CliError::precondition(format!(
                    "index {index} out of range, dataset has {} rows",
                    images.len()
                ))
            })?
            .pixels
            .clone()
    } else {
        return Err(CliError::usage(
            "an input is required (--input <csv> or --data <csv> --index <n>)",
        ));
    };

    if method == Method::ExpectedGradients {
        if data_path.is_empty() {
            return Err(CliError::precondition(
                "expected_gradients needs --data as its reference dataset",
            ));
        }
        let images = read_dataset(Path::new(&data_path))?;
        let references: Vec<Tensor> = images
            .iter()
            .take(reference_count.max(1))
            .map(|e| e.pixels.clone())
            .collect();
        cfg.references = Some(references);
    }

    let target = match target_raw.as_str() {
        "argmax" => {
            if net.output_dim() > 1 {
                Some(argmax(net.forward(&x).map_err(CliError::from)?.output()))
            } else {
                None
            }
        }
        raw => Some(raw.parse::<usize>().map_err(|_| {
            CliError::usage(format!("target expects an integer or `argmax`, found {raw:?}"))
        })?),
    };

    let map = explain(&net, &x, target, method, &cfg)?;
    let rows: Vec<Vec<String>> = map
        .values()
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    write_csv(&out.join("attribution.csv"), &["feature", "value"], &rows)?;

    if render {
        let side = (map.values().len() as f64).sqrt().round() as usize;
        if side * side != map.values().len() {
            return Err(CliError::precondition(format!(
                "cannot render: map length {} is not square",
                map.values().len()
            )));
        }
        let rgb = heatmap::render_rgb(map.values().data(), side);
        heatmap::write_ppm(&out.join("heatmap.ppm"), side, side, &rgb)?;
    }
    println!(
        "explained target {:?} with {method}; wrote attribution.csv{}",
        target,
        if render { " and heatmap.ppm" } else { "" }
    );

    let mut entries = vec![
        ("network".into(), network_path),
        ("data".into(), data_path),
        ("input".into(), input_path),
        ("index".into(), index.to_string()),
        ("method".into(), method.name().to_string()),
        ("target".into(), target_raw),
        ("render".into(), render.to_string()),
        ("references".into(), reference_count.to_string()),
    ];
    entries.extend(super::method_config_entries(&cfg));
    Ok(Manifest {
        command: "explain".into(),
        out_dir: out.display().to_string(),
        sections: vec![("explain".into(), entries)],
    })
}
