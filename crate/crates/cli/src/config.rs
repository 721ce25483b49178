//! `key = value` config files and run manifests.
//!
//! A config file supplies option values for one subcommand. Keys are the long
//! flag names (underscores are accepted for dashes); `#` starts a comment. The
//! optional key `command` must name the subcommand being run. Manifests use
//! the same format, so any manifest can be passed back with `--config`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use clap::ArgMatches;

use crate::error::{invalid, CliError, CliResult};

/// Options that are never recorded or injected.
const NOT_RECORDED: [&str; 2] = ["config", "verbose"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub entries: Vec<(String, String)>,
}

pub fn parse_config(text: &str) -> CliResult<ConfigFile> {
    let mut command = None;
    let mut entries: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return invalid(format!("config line {}: expected `key = value`, got {raw:?}", idx + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return invalid(format!("config line {}: bad key {key:?}", idx + 1));
        }
        if NOT_RECORDED.contains(&key.as_str()) {
            return invalid(format!("config line {}: {key:?} cannot be set from a config file", idx + 1));
        }
        if key == "command" {
            command = Some(value);
            continue;
        }
        if entries.iter().any(|(k, _)| *k == key) {
            return invalid(format!("config line {}: {key:?} given twice", idx + 1));
        }
        entries.push((key, value));
    }
    Ok(ConfigFile { command, entries })
}

pub fn read_config(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Index of the subcommand token in `argv`, skipping global options.
pub fn subcommand_index(argv: &[OsString], names: &[&str]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if tok == "--threads" || tok == "--config" {
            i += 2;
            continue;
        }
        if tok.starts_with('-') {
            i += 1;
            continue;
        }
        return names.contains(&tok.as_ref()).then_some(i);
    }
    None
}

/// `argv` with the config entries inserted right after the subcommand, so
/// that flags given on the command line (which come later) win.
pub fn inject(argv: &[OsString], sub_index: usize, cfg: &ConfigFile) -> CliResult<Vec<OsString>> {
    let sub = argv[sub_index].to_string_lossy();
    if let Some(c) = &cfg.command {
        if *c != sub {
            return invalid(format!("config is for command {c:?}, not {sub:?}"));
        }
    }
    let mut out = argv[..=sub_index].to_vec();
    out.extend(cfg.entries.iter().map(|(k, v)| OsString::from(format!("--{k}={v}"))));
    out.extend_from_slice(&argv[sub_index + 1..]);
    Ok(out)
}

/// Renders every effective option of a subcommand (explicit or default) as a
/// config file. `arg_ids` lists the subcommand's arguments (argument groups
/// also appear in `matches` and are skipped). `notes` become comments.
pub fn render_manifest(
    command: &str,
    arg_ids: &[String],
    matches: &ArgMatches,
    notes: &[(String, String)],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# densim {} manifest; rerun with --config", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "command = {command}");
    let mut ids: Vec<&str> = matches.ids().map(|id| id.as_str()).collect();
    ids.sort_unstable();
    for id in ids {
        if NOT_RECORDED.contains(&id) || !arg_ids.iter().any(|a| a == id) || matches.value_source(id).is_none() {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else {
            continue;
        };
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let _ = writeln!(out, "{} = {}", id.replace('_', "-"), vals.join(","));
    }
    for (k, v) in notes {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_keys_values_and_comments() {
        let c = parse_config("# run\ncommand = pipeline\n\nn_points = 10\nkernel=epanechnikov\ns =\n").unwrap();
        assert_eq!(c.command.as_deref(), Some("pipeline"));
        assert_eq!(
            c.entries,
            vec![
                ("n-points".to_string(), "10".to_string()),
                ("kernel".to_string(), "epanechnikov".to_string()),
                ("s".to_string(), String::new()),
            ]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("just words").is_err());
        assert!(parse_config("a b = 1").is_err());
        assert!(parse_config("seed = 1\nseed = 2").is_err());
        assert!(parse_config("config = other.txt").is_err());
    }

    #[test]
    fn finds_subcommand_after_globals() {
        let names = ["synth", "pipeline"];
        assert_eq!(subcommand_index(&os(&["densim", "pipeline", "--out", "x"]), &names), Some(1));
        assert_eq!(
            subcommand_index(&os(&["densim", "--threads", "2", "-v", "--config", "c", "synth"]), &names),
            Some(6)
        );
        assert_eq!(subcommand_index(&os(&["densim", "--help"]), &names), None);
    }

    #[test]
    fn injected_values_precede_command_line() {
        let cfg = parse_config("seed = 3\ndim = 4").unwrap();
        let argv = os(&["densim", "-v", "synth", "--seed", "9"]);
        let got = inject(&argv, 2, &cfg).unwrap();
        assert_eq!(got, os(&["densim", "-v", "synth", "--seed=3", "--dim=4", "--seed", "9"]));
        let other = parse_config("command = bench").unwrap();
        assert!(inject(&argv, 2, &other).is_err());
    }
}
