//! `pgig degrade`: the patch-degradation benchmark over a dataset; writes
//! the per-method confidence curves and an AUC summary.

use std::path::Path;

use pgig_core::attribution::Method;
use pgig_core::degradation::{run_benchmark, Aggregation, DegradationConfig};
use pgig_core::tensor::Tensor;

use crate::config::{section_or_empty, ConfigDoc};
use crate::csvio::write_csv;
use crate::dataset::read_dataset;
use crate::errors::{CliError, CliResult};
use crate::manifest::Manifest;

const KEYS: [&str; 13] = [
    "network",
    "data",
    "patch_side",
    "max_patches",
    "aggregation",
    "methods",
    "max_images",
    "steps",
    "samples",
    "noise_mu",
    "noise_sigma",
    "baseline_draws",
    "seed",
];

fn parse_methods(raw: &str) -> CliResult<Vec<Method>> {
    if raw == "all" {
        return Ok(Method::ALL.to_vec());
    }
    raw.split(',')
        .map(|name| {
            Method::from_name(name.trim()).map_err(|e| CliError::usage(e.to_string()))
        })
        .collect()
}

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let section = section_or_empty(doc, "degrade");
    section.ensure_known_keys(&KEYS)?;

    let network_path = section.get_str("network", "");
    let data_path = section.get_str("data", "");
    if data_path.is_empty() {
        return Err(CliError::usage("a dataset is required (--data <csv>)"));
    }
    let patch_side = section.get_usize("patch_side", 4)?;
    let max_patches = section.get_usize("max_patches", 0)?;
    let aggregation_name = section.get_str("aggregation", "sum_signed");
    let aggregation =
        Aggregation::from_name(&aggregation_name).map_err(|e| CliError::usage(e.to_string()))?;
    let methods_raw = section.get_str("methods", "all");
    let methods = parse_methods(&methods_raw)?;
    let max_images = section.get_usize("max_images", 0)?;
    let mut method_config = super::method_config_from(&section)?;

    let net = super::load_network(&network_path)?;
    let images = read_dataset(Path::new(&data_path))?;

    // Expected gradients draws its baselines from the benchmark dataset.
    if methods.contains(&Method::ExpectedGradients) {
        let references: Vec<Tensor> = images
            .iter()
            .take(method_config.baseline_draws.max(1))
            .map(|e| e.pixels.clone())
            .collect();
        method_config.references = Some(references);
    }

    let cfg = DegradationConfig {
        patch_side,
        max_patches: if max_patches == 0 {
            None
        } else {
            Some(max_patches)
        },
        aggregation,
        methods: methods.clone(),
        method_config: method_config.clone(),
        max_images: if max_images == 0 {
            None
        } else {
            Some(max_images)
        },
    };
    let curves = run_benchmark(&net, &images, &cfg)?;

    let mut header: Vec<String> = vec!["patches".to_string()];
    header.extend(curves.iter().map(|c| c.method.name().to_string()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let point_count = curves[0].points.len();
    let rows: Vec<Vec<String>> = (0..point_count)
        .map(|i| {
            let mut row = vec![curves[0].points[i].0.to_string()];
            row.extend(curves.iter().map(|c| c.points[i].1.to_string()));
            row
        })
        .collect();
    write_csv(&out.join("curves.csv"), &header_refs, &rows)?;

    let auc_rows: Vec<Vec<String>> = curves
        .iter()
        .map(|c| vec![c.method.name().to_string(), c.auc.to_string()])
        .collect();
    write_csv(&out.join("auc.csv"), &["method", "auc"], &auc_rows)?;
    for curve in &curves {
        println!("{:<22} auc = {:.4}", curve.method.name(), curve.auc);
    }

    let mut entries = vec![
        ("network".into(), network_path),
        ("data".into(), data_path),
        ("patch_side".into(), patch_side.to_string()),
        ("max_patches".into(), max_patches.to_string()),
        ("aggregation".into(), aggregation.name().to_string()),
        (
            "methods".into(),
            methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("max_images".into(), max_images.to_string()),
    ];
    entries.extend(super::method_config_entries(&method_config));
    Ok(Manifest {
        command: "degrade".into(),
        out_dir: out.display().to_string(),
        sections: vec![("degrade".into(), entries)],
    })
}
