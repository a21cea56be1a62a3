//! Flat `key = value` defaults merged under command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

/// Entries of a config file in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let entries = parse(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), entries })
    }
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`", n + 1);
        };
        let key = key.trim().replace('-', "_");
        let value = value.trim().to_string();
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        if entries.iter().any(|(k, _)| *k == key) {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
        entries.push((key, value));
    }
    Ok(entries)
}

/// The innermost subcommand and its matches.
fn leaf<'a>(mut cmd: &'a Command, mut matches: &'a ArgMatches) -> (&'a Command, &'a ArgMatches) {
    while let Some((name, sub)) = matches.subcommand() {
        match cmd.find_subcommand(name) {
            Some(c) => {
                cmd = c;
                matches = sub;
            }
            None => break,
        }
    }
    (cmd, matches)
}

/// Appends config entries as flags for every argument of the selected
/// subcommand that was not given on the command line. Keys that match no
/// argument are returned so the caller can report them.
pub fn merge(
    mut cmd: Command,
    argv: &[OsString],
    matches: &ArgMatches,
    config: &ConfigFile,
) -> Result<(Vec<OsString>, Vec<String>)> {
    cmd.build();
    let (leaf_cmd, leaf_matches) = leaf(&cmd, matches);
    let mut out = argv.to_vec();
    let mut unused = Vec::new();
    for (key, value) in &config.entries {
        let Some(arg) = leaf_cmd.get_arguments().find(|a| a.get_id().as_str() == key) else {
            unused.push(key.clone());
            continue;
        };
        if leaf_matches.value_source(key) == Some(ValueSource::CommandLine) {
            continue;
        }
        let Some(long) = arg.get_long() else {
            unused.push(key.clone());
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{long}").into()),
                "false" | "no" | "0" => {}
                other => bail!("config key `{key}`: expected a boolean, got `{other}`"),
            },
            _ => {
                out.push(format!("--{long}").into());
                out.push(value.into());
            }
        }
    }
    Ok((out, unused))
}
