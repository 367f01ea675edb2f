//! One module per subcommand. Every command resolves its configuration
//! (defaults <- config file <- flags), runs, writes outputs into the out
//! directory and returns the resolved sections for the manifest.

pub mod degrade;
pub mod explain;
pub mod patterns;
pub mod render;
pub mod stress;
pub mod train;

use std::path::Path;

use pgig_core::attribution::MethodConfig;
use pgig_core::network::Network;

use crate::config::Section;
use crate::errors::{CliError, CliResult};

pub fn method_config_from(section: &Section) -> CliResult<MethodConfig> {
    let defaults = MethodConfig::default();
    let cfg = MethodConfig {
        steps: section.get_usize("steps", defaults.steps)?,
        samples: section.get_usize("samples", defaults.samples)?,
        noise_mu: section.get_f64("noise_mu", defaults.noise_mu)?,
        noise_sigma: section.get_f64("noise_sigma", defaults.noise_sigma)?,
        baseline_draws: section.get_usize("baseline_draws", defaults.baseline_draws)?,
        random_seed: section.get_u64("seed", defaults.random_seed)?,
        ..defaults
    };
    if cfg.noise_sigma < 0.0 {
        return Err(CliError::usage("noise_sigma must be >= 0"));
    }
    Ok(cfg)
}

pub fn method_config_entries(cfg: &MethodConfig) -> Vec<(String, String)> {
    vec![
        ("steps".into(), cfg.steps.to_string()),
        ("samples".into(), cfg.samples.to_string()),
        ("noise_mu".into(), cfg.noise_mu.to_string()),
        ("noise_sigma".into(), cfg.noise_sigma.to_string()),
        ("baseline_draws".into(), cfg.baseline_draws.to_string()),
        ("seed".into(), cfg.random_seed.to_string()),
    ]
}

pub fn load_network(path_str: &str) -> CliResult<Network> {
    if path_str.is_empty() {
        return Err(CliError::usage(
            "a network file is required (--network <path>)",
        ));
    }
    let path = Path::new(path_str);
    if !path.exists() {
        return Err(CliError::precondition(format!(
            "network file {path_str} does not exist"
        )));
    }
    Network::load(path).map_err(CliError::from)
}
