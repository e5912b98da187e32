//! `key = value` config files, spliced into the argument list so that flags win.

use std::path::Path;

/// Parse a UTF-8 config file into flag tokens. Blank lines and lines starting
/// with `#` are skipped. `true` turns a key into a bare switch, `false` drops it.
pub fn config_tokens(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value, got {line:?}", i + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key.starts_with('-') {
            return Err(format!("config line {}: bad key {key:?}", i + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => out.push(format!("--{key}={v}")),
        }
    }
    Ok(out)
}

/// Remove `--config PATH` / `--config=PATH` from `args` and insert the file's
/// tokens right after the subcommand, ahead of any command-line flags.
pub fn splice_config(args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("reading config {path}: {e}"))?;
    let tokens = config_tokens(&text)?;
    let pos = rest
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .ok_or("--config given without a subcommand")?;
    rest.splice(pos + 1..pos + 1, tokens);
    Ok(rest)
}
