//! `key = value` config files, merged into the argument list.
//!
//! Keys are long flag names without the dashes. Flags given on the command
//! line win over the file. `force = true` turns on a switch; `false` leaves
//! it off.

use std::ffi::OsString;
use std::path::Path;

use spectral3::{Error, Result};

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("{}:{}: expected key = value, got `{raw}`", origin.display(), i + 1))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse(format!("{}:{}: empty key", origin.display(), i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn flag_present(args: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| a.to_str().is_some_and(|s| s == long || s.starts_with(&eq)))
}

/// Position just after the subcommand name; global options before it may
/// carry a separate value.
fn subcommand_end(args: &[OsString]) -> usize {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--threads" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return i + 1;
        }
    }
    args.len()
}

/// Pull `--config PATH` out of `args` and splice the file's entries in after
/// the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                path = Some(it.next().ok_or_else(|| Error::Parse("--config needs a path".into()))?);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let path = Path::new(&path).to_path_buf();
    let text = std::fs::read_to_string(&path)?;
    let entries = parse_config(&text, &path)?;
    let at = subcommand_end(&rest);
    let mut extra = Vec::new();
    for (k, v) in entries {
        if flag_present(&rest, &k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse_config("# run\nbig_n = 8\n\ngrid=256 # fine\nforce = true\n", Path::new("c")).unwrap();
        assert_eq!(
            e,
            vec![
                ("big-n".to_string(), "8".to_string()),
                ("grid".to_string(), "256".to_string()),
                ("force".to_string(), "true".to_string())
            ]
        );
        assert!(parse_config("oops\n", Path::new("c")).is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "grid = 256\nbig-n = 4\nforce = true\n").unwrap();
        let args = os(&["spectral3", "--threads", "2", "inverse", "--config", p.to_str().unwrap(), "--grid", "128"]);
        let out = expand(args).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(s, ["spectral3", "--threads", "2", "inverse", "--big-n=4", "--force", "--grid", "128"]);
    }
}
