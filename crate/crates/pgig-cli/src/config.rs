//! Flat key=value configuration files with `[section]` headers.
//!
//! ```text
//! # comment
//! [stress]
//! noise_sigma = 0.25
//! steps = 1000
//! ```
//!
//! Parsing is dependency-free; every error carries its 1-based line number.
//! Later assignments to the same key override earlier ones. Commands read
//! only their own sections, so one file can configure a whole pipeline and
//! manifests can embed a `[run]` section alongside.

use std::collections::BTreeMap;
use std::path::Path;

use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone, Default)]
pub struct ConfigDoc {
    sections: BTreeMap<String, Section>,
}

#[derive(Debug, Clone, Default)]
pub struct Section {
    /// key -> (value, line number of the assignment)
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> CliResult<ConfigDoc> {
        let mut doc = ConfigDoc::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::usage(format!(
                        "parse error at line {line_no}: unterminated section header {line:?}"
                    ))
                })?;
                if name.trim().is_empty() {
                    return Err(CliError::usage(format!(
                        "parse error at line {line_no}: empty section name"
                    )));
                }
                current = Some(name.trim().to_string());
                doc.sections.entry(name.trim().to_string()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "parse error at line {line_no}: expected `key = value`, found {line:?}"
                ))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::usage(format!(
                    "parse error at line {line_no}: empty key"
                )));
            }
            let section = current.clone().ok_or_else(|| {
                CliError::usage(format!(
                    "parse error at line {line_no}: key {key:?} appears before any [section]"
                ))
            })?;
            doc.sections
                .get_mut(&section)
                .expect("section registered above")
                .entries
                .insert(key.to_string(), (value.trim().to_string(), line_no));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> CliResult<ConfigDoc> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::precondition(format!("cannot read config {}: {e}", path.display()))
        })?;
        ConfigDoc::parse(&text)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    pub fn set(&mut self, section: &str, key: &str, value: String) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .entries
            .insert(key.to_string(), (value, 0));
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(_, l)| *l).unwrap_or(0)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, (_, line))| (k.as_str(), *line))
    }

    fn parse_with<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw).map(Some).ok_or_else(|| {
                CliError::usage(format!(
                    "parse error at line {}: key {key:?} expects {what}, found {raw:?}",
                    self.line_of(key)
                ))
            }),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self
            .parse_with(key, "a number", |s| s.parse::<f64>().ok())?
            .unwrap_or(default))
    }

    pub fn get_u64(&self, key: &str, default: u64) -> CliResult<u64> {
        Ok(self
            .parse_with(key, "an unsigned integer", |s| s.parse::<u64>().ok())?
            .unwrap_or(default))
    }

    pub fn get_usize(&self, key: &str, default: usize) -> CliResult<usize> {
        Ok(self
            .parse_with(key, "an unsigned integer", |s| s.parse::<usize>().ok())?
            .unwrap_or(default))
    }

    pub fn get_bool(&self, key: &str, default: bool) -> CliResult<bool> {
        Ok(self
            .parse_with(key, "true or false", |s| match s {
                "true" => Some(true),
                "false" => Some(false),
                _ => None,
            })?
            .unwrap_or(default))
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> CliResult<Vec<usize>> {
        Ok(self
            .parse_with(key, "a comma-separated list of unsigned integers", |s| {
                s.split(',')
                    .map(|p| p.trim().parse::<usize>().ok())
                    .collect::<Option<Vec<usize>>>()
            })?
            .unwrap_or_else(|| default.to_vec()))
    }

    /// Rejects keys outside the allowed set, pointing at the bad line.
    pub fn ensure_known_keys(&self, allowed: &[&str]) -> CliResult<()> {
        for (key, line) in self.keys() {
            if !allowed.contains(&key) {
                return Err(CliError::usage(format!(
                    "parse error at line {line}: unknown key {key:?} (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Section lookup that tolerates a missing section by yielding defaults.
pub fn section_or_empty(doc: &ConfigDoc, name: &str) -> Section {
    doc.section(name).cloned().unwrap_or_default()
}
