//! Flat `key = value` config files, merged underneath command-line flags.

use std::collections::BTreeMap;
use std::fs;

/// Flags that take no value; `key = true` in a file turns them on.
const SWITCHES: &[&str] = &["uniform", "refresh-once"];

/// Multi-valued flags; a file value lists entries separated by `;`.
const REPEATED: &[&str] = &["fix"];

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn present(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

/// Removes `--config PATH` from `args` and appends every file entry whose
/// flag was not given explicitly.
pub fn merge(mut args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(ConfigError::Invalid("--config needs a path".into()));
        }
        args.remove(pos);
        args.remove(pos)
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError::Io(format!("{path}: {e}")))?;
    let entries = parse(&text).map_err(|e| ConfigError::Invalid(format!("{path}: {e}")))?;
    for (key, value) in entries {
        if present(&args, &key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "1" | "yes" => args.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                _ => return Err(ConfigError::Invalid(format!("{key}: expected a boolean, got '{value}'"))),
            }
        } else if REPEATED.contains(&key.as_str()) {
            for v in value.split(';').map(str::trim).filter(|v| !v.is_empty()) {
                args.push(format!("--{key}={v}"));
            }
        } else {
            args.push(format!("--{key}={value}"));
        }
    }
    Ok(args)
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Invalid(String),
}
