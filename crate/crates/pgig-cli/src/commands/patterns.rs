//! `pgig patterns`: estimate per-layer patterns from a dataset and write
//! the network back with patterns attached, plus a validity report.

use std::path::Path;

use pgig_core::patterns::{attach_patterns, collect_batch, estimate_patterns};
use pgig_core::tensor::Tensor;

use crate::config::{section_or_empty, ConfigDoc};
use crate::csvio::write_csv;
use crate::dataset::read_dataset;
use crate::errors::{CliError, CliResult};
use crate::manifest::Manifest;

const KEYS: [&str; 2] = ["network", "data"];

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let section = section_or_empty(doc, "patterns");
    section.ensure_known_keys(&KEYS)?;
    let network_path = section.get_str("network", "");
    let data_path = section.get_str("data", "");
    if data_path.is_empty() {
        return Err(CliError::usage("a dataset is required (--data <csv>)"));
    }

    let net = super::load_network(&network_path)?;
    let images = read_dataset(Path::new(&data_path))?;
    let inputs: Vec<Tensor> = images.iter().map(|e| e.pixels.clone()).collect();
    let batch = collect_batch(&net, &inputs)?;
    let set = estimate_patterns(&batch, &net)?;
    let with_patterns = attach_patterns(&net, &set)?;
    with_patterns.save(out.join("model_patterns.net"))?;

    let rows: Vec<Vec<String>> = set
        .layers()
        .iter()
        .enumerate()
        .map(|(idx, layer)| {
            let invalid = layer.valid().iter().filter(|v| !**v).count();
            vec![
                idx.to_string(),
                layer.valid().len().to_string(),
                invalid.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("patterns_report.csv"),
        &["layer", "neurons", "invalid"],
        &rows,
    )?;
    println!(
        "estimated patterns for {} layers over {} examples; {} invalid neurons",
        set.layers().len(),
        batch.examples(),
        set.invalid_count()
    );

    Ok(Manifest {
        command: "patterns".into(),
        out_dir: out.display().to_string(),
        sections: vec![(
            "patterns".into(),
            vec![
                ("network".into(), network_path),
                ("data".into(), data_path),
            ],
        )],
    })
}
