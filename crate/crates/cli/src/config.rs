//! Merges a key=value config file into the argument list.
//!
//! Every entry `key=value` becomes `--key=value` (underscores turn into
//! dashes) and is placed right after the subcommand, ahead of every
//! explicit flag. Clap keeps the last occurrence of an argument, so flags
//! on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Global flags that consume the next token when written without `=`.
const VALUE_GLOBALS: [&str; 3] = ["--config", "--seed", "--threads"];

pub fn parse_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Config {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(err(format!("bad key '{}'", k.trim())));
        }
        if key == "config" {
            return Err(err("config files cannot include other config files".into()));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Position of the subcommand token and the config path, if any.
fn scan(args: &[OsString]) -> (Option<usize>, Option<PathBuf>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if sub.is_none() && VALUE_GLOBALS.contains(&a.as_ref()) {
            i += 1;
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (sub, config)
}

/// Returns the argument list with config entries spliced in.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let (sub, config) = scan(&args);
    let (Some(sub), Some(config)) = (sub, config) else {
        return Ok(args);
    };
    let injected = parse_config(&config)?
        .into_iter()
        .map(|(k, v)| OsString::from(format!("--{k}={v}")));
    let mut out = vec![args[0].clone(), args[sub].clone()];
    out.extend(injected);
    out.extend(args[1..sub].iter().cloned());
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn entries_precede_explicit_flags() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# manifest\nwalk_times = 3\nalpha=0.5  # inline\n").unwrap();
        let path = f.path().to_str().unwrap().to_string();
        let got = expand_args(os(&["bin", "--seed", "4", "--config", &path, "walk", "--alpha", "0.1"])).unwrap();
        let got: Vec<String> = got.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(
            got,
            ["bin", "walk", "--walk-times=3", "--alpha=0.5", "--seed", "4", "--config", &path, "--alpha", "0.1"]
        );
    }

    #[test]
    fn no_config_is_identity() {
        let a = os(&["bin", "synth", "--sizes", "10"]);
        assert_eq!(expand_args(a.clone()).unwrap(), a);
    }

    #[test]
    fn malformed_line_reports_position() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpha=0.3\nnonsense").unwrap();
        match parse_config(f.path()) {
            Err(CliError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
