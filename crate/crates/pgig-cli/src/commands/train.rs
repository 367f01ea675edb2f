//! `pgig train`: generate the synthetic image task, train the classifier,
//! persist the network and both dataset splits.

use std::path::Path;

use pgig_core::trainer::{generate_task, train, TaskConfig, TrainConfig};

use crate::config::{section_or_empty, ConfigDoc};
use crate::dataset::write_dataset;
use crate::errors::CliResult;
use crate::manifest::Manifest;

const TASK_KEYS: [&str; 8] = [
    "image_side",
    "class_count",
    "train_size",
    "val_size",
    "amplitude_jitter",
    "shared_noise_sigma",
    "pixel_noise_sigma",
    "seed",
];
const TRAIN_KEYS: [&str; 5] = ["hidden", "learning_rate", "epochs", "batch_size", "seed"];

pub fn resolve_task(doc: &ConfigDoc) -> CliResult<TaskConfig> {
    let section = section_or_empty(doc, "task");
    section.ensure_known_keys(&TASK_KEYS)?;
    let defaults = TaskConfig::default();
    Ok(TaskConfig {
        image_side: section.get_usize("image_side", defaults.image_side)?,
        class_count: section.get_usize("class_count", defaults.class_count)?,
        train_size: section.get_usize("train_size", defaults.train_size)?,
        val_size: section.get_usize("val_size", defaults.val_size)?,
        amplitude_jitter: section.get_f64("amplitude_jitter", defaults.amplitude_jitter)?,
        shared_noise_sigma: section.get_f64("shared_noise_sigma", defaults.shared_noise_sigma)?,
        pixel_noise_sigma: section.get_f64("pixel_noise_sigma", defaults.pixel_noise_sigma)?,
        seed: section.get_u64("seed", defaults.seed)?,
    })
}

fn resolve_train(doc: &ConfigDoc) -> CliResult<TrainConfig> {
    let section = section_or_empty(doc, "train");
    section.ensure_known_keys(&TRAIN_KEYS)?;
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        hidden: section.get_usize_list("hidden", &defaults.hidden)?,
        learning_rate: section.get_f64("learning_rate", defaults.learning_rate)?,
        epochs: section.get_usize("epochs", defaults.epochs)?,
        batch_size: section.get_usize("batch_size", defaults.batch_size)?,
        seed: section.get_u64("seed", defaults.seed)?,
    })
}

pub fn task_entries(cfg: &TaskConfig) -> Vec<(String, String)> {
    vec![
        ("image_side".into(), cfg.image_side.to_string()),
        ("class_count".into(), cfg.class_count.to_string()),
        ("train_size".into(), cfg.train_size.to_string()),
        ("val_size".into(), cfg.val_size.to_string()),
        ("amplitude_jitter".into(), cfg.amplitude_jitter.to_string()),
        (
            "shared_noise_sigma".into(),
            cfg.shared_noise_sigma.to_string(),
        ),
        (
            "pixel_noise_sigma".into(),
            cfg.pixel_noise_sigma.to_string(),
        ),
        ("seed".into(), cfg.seed.to_string()),
    ]
}

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let task_cfg = resolve_task(doc)?;
    let train_cfg = resolve_train(doc)?;

    let task = generate_task(&task_cfg)?;
    let outcome = train(&task, &train_cfg)?;
    println!(
        "trained {} epochs; best validation accuracy {:.4} at epoch {}",
        train_cfg.epochs, outcome.best_val_accuracy, outcome.best_epoch
    );

    outcome.network.save(out.join("model.net"))?;
    write_dataset(&out.join("train.csv"), &task.train)?;
    write_dataset(&out.join("val.csv"), &task.val)?;

    let hidden = train_cfg
        .hidden
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    Ok(Manifest {
        command: "train".into(),
        out_dir: out.display().to_string(),
        sections: vec![
            ("task".into(), task_entries(&task_cfg)),
            (
                "train".into(),
                vec![
                    ("hidden".into(), hidden),
                    (
                        "learning_rate".into(),
                        train_cfg.learning_rate.to_string(),
                    ),
                    ("epochs".into(), train_cfg.epochs.to_string()),
                    ("batch_size".into(), train_cfg.batch_size.to_string()),
                    ("seed".into(), train_cfg.seed.to_string()),
                ],
            ),
        ],
    })
}
