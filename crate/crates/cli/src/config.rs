//! `--config FILE`: flat `key = value` lines mirroring the long flags.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may use `-` or
//! `_`. Config entries are spliced in right after the subcommand, so flags
//! given on the command line override them.

use std::ffi::OsString;
use std::path::Path;

use crate::error::{CliError, CliResult};

const SUBCOMMANDS: [&str; 3] = ["fit", "predict", "backtest"];

pub fn parse_config(text: &str, origin: &Path) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("{}:{}: expected key=value", origin.display(), i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Input(format!(
                "{}:{}: invalid key {:?}",
                origin.display(),
                i + 1,
                k.trim()
            )));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

/// Removes `--config FILE` from `args` and splices the file's entries in
/// as `--key=value` flags.
pub fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                let path = it
                    .next()
                    .ok_or_else(|| CliError::Usage("--config requires a file path".into()))?;
                config = Some(path);
            }
            Some(s) if s.starts_with("--config=") => config = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let flags = parse_config(&text, path)?
        .into_iter()
        .map(|(k, v)| OsString::from(format!("--{k}={v}")));
    let at = rest
        .iter()
        .position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)))
        .map_or(rest.len(), |p| p + 1);
    rest.splice(at..at, flags);
    Ok(rest)
}
