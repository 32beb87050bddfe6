//! Flat `key = value` config files merged under the command line.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Options that are never written into a manifest's argv: they choose where
/// and how fast a run happens, not what it computes.
pub const LOCAL_OPTIONS: [&str; 3] = ["--out-dir", "--config", "--threads"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{raw}`", n + 1);
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push(ConfigEntry { key, value: v.trim().to_string() });
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given_on_cli(argv: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// Insert config values for options absent from `argv`, right after the
/// subcommand so that command-line flags keep precedence.
pub fn merge(argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let entries = parse(&text)?;
    let Some(pos) = argv.iter().position(|a| subcommands.contains(&a.as_str())) else { return Ok(argv) };
    let mut extra = Vec::new();
    for e in entries {
        if given_on_cli(&argv, &e.key) {
            continue;
        }
        match e.value.as_str() {
            "true" => extra.push(format!("--{}", e.key)),
            "false" => {}
            v => {
                extra.push(format!("--{}", e.key));
                extra.push(v.to_string());
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// `argv` without the program name and without [`LOCAL_OPTIONS`].
pub fn portable_argv(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if LOCAL_OPTIONS.contains(&a.as_str()) {
            it.next();
            continue;
        }
        if LOCAL_OPTIONS.iter().any(|o| a.starts_with(&format!("{o}="))) {
            continue;
        }
        out.push(a.clone());
    }
    out
}
