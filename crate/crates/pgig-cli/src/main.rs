//! `pgig` command-line tool.
//!
//! Exit codes: 0 success, 2 config/parse/usage errors, 3 precondition
//! errors (missing files, missing patterns, shape problems), 4 numeric
//! errors (non-finite values, diverged training).

mod commands;
mod config;
mod csvio;
mod dataset;
mod errors;
mod heatmap;
mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::ConfigDoc;
use errors::{CliError, CliResult};

const COMMANDS: [&str; 6] = ["stress", "train", "patterns", "explain", "degrade", "render"];

const HELP: &str = "\
pgig - gradient attribution toolkit

USAGE:
    pgig <command> [flags]
    pgig rerun <manifest> [--out <dir>]

COMMANDS:
    stress      run the signal/distractor stress comparison (panel CSVs + report)
    train       generate the synthetic image task and train the classifier
    patterns    estimate per-layer patterns from a dataset and attach them
    explain     attribute one input under a named method
    degrade     run the patch-degradation benchmark over a dataset
    render      turn an attribution CSV into a PPM heatmap
    rerun       re-execute a command from its manifest, bit-identically

COMMON FLAGS:
    --config <path>    key=value config file with [section] headers
    --seed <u64>       override the command's seed
    --out <dir>        output directory (default .); manifest.txt lands here
    --help             per-command flag listing

Run `pgig <command> --help` for the command's flags and config keys.
";

fn command_help(command: &str) -> String {
    let body = match command {
        "stress" => {
            "FLAGS: --config, --seed, --out\n\
             [stress] keys: z_start, z_end, z_step, noise_mu, noise_sigma, steps, seed\n\
             Outputs: target/signal/distractor/input CSVs, six per-method panel CSVs,\n\
             report.txt, manifest.txt"
        }
        "train" => {
            "FLAGS: --config, --seed (train seed), --out\n\
             [task] keys: image_side, class_count, train_size, val_size, amplitude_jitter,\n\
                          shared_noise_sigma, pixel_noise_sigma, seed\n\
             [train] keys: hidden, learning_rate, epochs, batch_size, seed\n\
             Outputs: model.net, train.csv, val.csv, manifest.txt"
        }
        "patterns" => {
            "FLAGS: --network <model.net>, --data <csv>, --config, --out\n\
             [patterns] keys: network, data\n\
             Outputs: model_patterns.net, patterns_report.csv, manifest.txt"
        }
        "explain" => {
            "FLAGS: --network <net>, --method <name>, --input <csv> | --data <csv> --index <n>,\n\
                    --target <n|argmax>, --render, --config, --seed, --out\n\
             [explain] keys: network, data, input, index, method, target, render,\n\
                             steps, samples, noise_mu, noise_sigma, baseline_draws,\n\
                             references, seed\n\
             Outputs: attribution.csv, heatmap.ppm (with --render), manifest.txt"
        }
        "degrade" => {
            "FLAGS: --network <net>, --data <csv>, --config, --seed, --out\n\
             [degrade] keys: network, data, patch_side, max_patches, aggregation,\n\
                             methods, max_images, steps, samples, noise_mu,\n\
                             noise_sigma, baseline_draws, seed\n\
             Outputs: curves.csv, auc.csv, manifest.txt"
        }
        "render" => {
            "FLAGS: --map <attribution.csv>, --name <file.ppm>, --out\n\
             [render] keys: map, name\n\
             Outputs: the PPM image, manifest.txt"
        }
        _ => "",
    };
    format!("pgig {command}\n\n{body}\n")
}

#[derive(Debug, Default)]
struct Flags {
    config: Option<String>,
    seed: Option<String>,
    out: Option<String>,
    method: Option<String>,
    network: Option<String>,
    data: Option<String>,
    input: Option<String>,
    index: Option<String>,
    target: Option<String>,
    map: Option<String>,
    name: Option<String>,
    render: bool,
    help: bool,
}

fn parse_flags(args: &[String]) -> CliResult<Flags> {
    let mut flags = Flags::default();
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let mut take_value = |what: &str| -> CliResult<String> {
            iter.next()
                .cloned()
                .ok_or_else(|| CliError::usage(format!("flag {what} expects a value")))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(take_value("--config")?),
            "--seed" => flags.seed = Some(take_value("--seed")?),
            "--out" => flags.out = Some(take_value("--out")?),
            "--method" => flags.method = Some(take_value("--method")?),
            "--network" => flags.network = Some(take_value("--network")?),
            "--data" => flags.data = Some(take_value("--data")?),
            "--input" => flags.input = Some(take_value("--input")?),
            "--index" => flags.index = Some(take_value("--index")?),
            "--target" => flags.target = Some(take_value("--target")?),
            "--map" => flags.map = Some(take_value("--map")?),
            "--name" => flags.name = Some(take_value("--name")?),
            "--render" => flags.render = true,
            "--help" | "-h" => flags.help = true,
            other => {
                return Err(CliError::usage(format!(
                    "unknown flag {other:?}; see `pgig --help`"
                )))
            }
        }
    }
    if let Some(seed) = &flags.seed {
        if seed.parse::<u64>().is_err() {
            return Err(CliError::usage(format!(
                "--seed expects an unsigned integer, found {seed:?}"
            )));
        }
    }
    Ok(flags)
}

/// Folds flag values into the command's config section so one resolution
/// path serves defaults, config files and flags.
fn apply_flag_overrides(command: &str, flags: &Flags, doc: &mut ConfigDoc) {
    let section = match command {
        "stress" => "stress",
        "train" => "train",
        "patterns" => "patterns",
        "explain" => "explain",
        "degrade" => "degrade",
        "render" => "render",
        _ => return,
    };
    if let Some(seed) = &flags.seed {
        doc.set(section, "seed", seed.clone());
    }
    if let Some(network) = &flags.network {
        doc.set(section, "network", network.clone());
    }
    if let Some(data) = &flags.data {
        doc.set(section, "data", data.clone());
    }
    if let Some(method) = &flags.method {
        doc.set("explain", "method", method.clone());
    }
    if let Some(input) = &flags.input {
        doc.set("explain", "input", input.clone());
    }
    if let Some(index) = &flags.index {
        doc.set("explain", "index", index.clone());
    }
    if let Some(target) = &flags.target {
        doc.set("explain", "target", target.clone());
    }
    if flags.render {
        doc.set("explain", "render", "true".to_string());
    }
    if let Some(map) = &flags.map {
        doc.set("render", "map", map.clone());
    }
    if let Some(name) = &flags.name {
        doc.set("render", "name", name.clone());
    }
}

fn dispatch(command: &str, doc: &ConfigDoc, out: &Path) -> CliResult<manifest::Manifest> {
    match command {
        "stress" => commands::stress::run(doc, out),
        "train" => commands::train::run(doc, out),
        "patterns" => commands::patterns::run(doc, out),
        "explain" => commands::explain::run(doc, out),
        "degrade" => commands::degrade::run(doc, out),
        "render" => commands::render::run(doc, out),
        other => Err(CliError::usage(format!(
            "unknown command {other:?}; valid commands: {}, rerun",
            COMMANDS.join(", ")
        ))),
    }
}

fn run_command(command: &str, doc: ConfigDoc, out_dir: &str) -> CliResult<()> {
    let out = PathBuf::from(out_dir);
    std::fs::create_dir_all(&out)?;
    let start = Instant::now();
    let manifest = dispatch(command, &doc, &out)?;
    manifest.write(&out, start.elapsed().as_millis())?;
    Ok(())
}

fn run(args: &[String]) -> CliResult<()> {
    let Some(command) = args.first() else {
        print!("{HELP}");
        return Ok(());
    };
    match command.as_str() {
        "--help" | "-h" | "help" => {
            print!("{HELP}");
            Ok(())
        }
        "--version" => {
            println!("pgig {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        "rerun" => {
            let positional: Vec<&String> =
                args[1..].iter().filter(|a| !a.starts_with("--")).collect();
            let manifest_path = positional
                .first()
                .copied()
                .ok_or_else(|| CliError::usage("usage: pgig rerun <manifest> [--out <dir>]"))?;
            let flag_args: Vec<String> = args[1..]
                .iter()
                .filter(|a| a.as_str() != manifest_path.as_str())
                .cloned()
                .collect();
            let flags = parse_flags(&flag_args)?;
            if flags.help {
                println!("usage: pgig rerun <manifest> [--out <dir>]");
                return Ok(());
            }
            let loaded = manifest::load(Path::new(manifest_path))?;
            let out_dir = flags.out.unwrap_or(loaded.out_dir);
            run_command(&loaded.command, loaded.doc, &out_dir)
        }
        name if COMMANDS.contains(&name) => {
            let flags = parse_flags(&args[1..])?;
            if flags.help {
                print!("{}", command_help(name));
                return Ok(());
            }
            let mut doc = match &flags.config {
                Some(path) => ConfigDoc::load(Path::new(path))?,
                None => ConfigDoc::default(),
            };
            apply_flag_overrides(name, &flags, &mut doc);
            let out_dir = flags.out.clone().unwrap_or_else(|| ".".to_string());
            run_command(name, doc, &out_dir)
        }
        other => Err(CliError::usage(format!(
            "unknown command {other:?}; valid commands: {}, rerun",
            COMMANDS.join(", ")
        ))),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Err(err) = run(&args) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
