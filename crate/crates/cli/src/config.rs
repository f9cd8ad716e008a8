//! `--config file.json` support. The file holds an object whose keys are
//! long flag names (underscores or dashes) and an optional `command`.
//! Its entries are spliced into the argument list ahead of the flags given
//! on the command line, so explicit flags win.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--format", "--config"];

pub fn expand_args(raw: Vec<String>) -> Result<Vec<String>> {
    let mut args = Vec::with_capacity(raw.len());
    let mut config_path = None;
    let mut iter = raw.into_iter();
    if let Some(prog) = iter.next() {
        args.push(prog);
    }
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            config_path = iter.next();
            if config_path.is_none() {
                args.push(arg);
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        } else {
            args.push(arg);
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let config = read_config(Path::new(&path))?;
    splice(args, config)
}

fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?
    {
        Value::Object(map) => Ok(map),
        _ => bail!("config {} must be a JSON object", path.display()),
    }
}

fn subcommand_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn scalar(key: &str, value: &Value) -> Result<Option<String>> {
    Ok(match value {
        Value::Null | Value::Bool(false) => None,
        Value::Bool(true) => Some(String::new()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => bail!("config key {key:?} must be a string, number or boolean"),
    })
}

fn splice(mut args: Vec<String>, mut config: Map<String, Value>) -> Result<Vec<String>> {
    let command = config.remove("command");
    if let Some(format) = config.remove("format") {
        if let Some(v) = scalar("format", &format)? {
            args.splice(1..1, ["--format".to_string(), v]);
        }
    }
    let pos = match subcommand_position(&args) {
        Some(p) => p,
        None => match command {
            Some(Value::String(c)) => {
                args.push(c);
                args.len() - 1
            }
            Some(_) => bail!("config key \"command\" must be a string"),
            None => return Ok(args),
        },
    };
    let mut flags = Vec::new();
    for (key, value) in &config {
        let flag = format!("--{}", key.replace('_', "-"));
        if let Some(v) = scalar(key, value)? {
            flags.push(flag);
            if !v.is_empty() || value.is_string() {
                flags.push(v);
            }
        }
    }
    args.splice(pos + 1..pos + 1, flags);
    Ok(args)
}
