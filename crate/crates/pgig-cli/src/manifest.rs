//! Run manifests: every command writes `manifest.txt` next to its outputs,
//! holding the command name, toolkit version, wall-clock timing and the
//! full resolved configuration (defaults materialized, flags applied,
//! input paths included). Re-running from a manifest reproduces every CSV
//! and PPM byte for byte; only the `[run]` timing fields differ.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ConfigDoc;
use crate::errors::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub struct Manifest {
    pub command: String,
    pub out_dir: String,
    /// (section name, resolved key/value pairs)
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl Manifest {
    pub fn write(&self, out_dir: &Path, elapsed_ms: u128) -> CliResult<()> {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let mut text = String::new();
        text.push_str("[run]\n");
        text.push_str(&format!("command = {}\n", self.command));
        text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!(
            "rng_algorithm = {}\n",
            pgig_core::rng::RandomSource::ALGORITHM
        ));
        text.push_str(&format!("out = {}\n", self.out_dir));
        text.push_str(&format!("created_unix_ms = {created}\n"));
        text.push_str(&format!("elapsed_ms = {elapsed_ms}\n"));
        for (name, entries) in &self.sections {
            text.push_str(&format!("\n[{name}]\n"));
            for (key, value) in entries {
                text.push_str(&format!("{key} = {value}\n"));
            }
        }
        let mut file = std::fs::File::create(out_dir.join(MANIFEST_FILE))?;
        file.write_all(text.as_bytes())?;
        Ok(())
    }
}

pub struct LoadedManifest {
    pub command: String,
    pub out_dir: String,
    pub doc: ConfigDoc,
}

pub fn load(path: &Path) -> CliResult<LoadedManifest> {
    let doc = ConfigDoc::load(path)?;
    let run = doc
        .section("run")
        .ok_or_else(|| CliError::usage(format!("{} has no [run] section", path.display())))?;
    let command = run
        .get("command")
        .ok_or_else(|| CliError::usage(format!("{} lacks a command entry", path.display())))?
        .to_string();
    let out_dir = run.get("out").unwrap_or(".").to_string();
    Ok(LoadedManifest {
        command,
        out_dir,
        doc,
    })
}
