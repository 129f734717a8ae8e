//! `key = value` configuration files.
//!
//! Keys are long flag names (`iters`, `target-accept` or `target_accept`).
//! Blank lines and lines starting with `#` are ignored. Values are applied
//! through the same environment variables the flags read, and only when
//! the variable is not already set, so flags and the real environment
//! both take precedence over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::CommandFactory;

use crate::args::Cli;
use crate::error::CliError;

/// Long flag name to environment variable, over all subcommands.
fn flag_env_map() -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let root = Cli::command();
    let mut stack = vec![root];
    while let Some(cmd) = stack.pop() {
        for arg in cmd.get_arguments() {
            if let (Some(long), Some(env)) = (arg.get_long(), arg.get_env()) {
                map.insert(long.to_string(), env.to_string_lossy().into_owned());
            }
        }
        stack.extend(cmd.get_subcommands().cloned());
    }
    map
}

/// Find `--config` in raw arguments, falling back to `QUINN_CONFIG`.
pub fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    std::env::var_os("QUINN_CONFIG").map(PathBuf::from)
}

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected `key = value`, found `{line}`",
                path.display(),
                i + 1
            ))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        out.push((key, value));
    }
    Ok(out)
}

/// Export the file's values as environment variables where unset.
pub fn apply_config_file(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let map = flag_env_map();
    for (key, value) in parse_config(&text, path)? {
        if key == "config" {
            return Err(CliError::Usage("a config file cannot name another config file".into()));
        }
        let env = map.get(&key).ok_or_else(|| {
            CliError::Usage(format!("{}: unknown configuration key `{key}`", path.display()))
        })?;
        if std::env::var_os(env).is_none() {
            std::env::set_var(env, value);
        }
    }
    Ok(())
}
