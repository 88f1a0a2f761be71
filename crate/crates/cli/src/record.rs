//! Flat, versioned key-value run records.
//!
//! ```text
//! bilevel-record 1
//! version 0.1.0
//! command eval --builtin example22 --x 0,0
//! problem example22
//! config.seed 7
//! result.mean -2.5
//! ```
//!
//! One `key value` pair per line, split at the first space. Keys have no
//! whitespace; values escape `\` and newlines. Floats are written in their
//! shortest round-trip form, so a parsed record compares equal to the one
//! that was written. `wall_time` is only present when timing was requested.

use std::fmt::Write as _;

pub const FORMAT_HEADER: &str = "bilevel-record";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub version: String,
    pub command: String,
    pub problem: String,
    pub config: Vec<(String, String)>,
    pub results: Vec<(String, String)>,
    pub wall_time: Option<f64>,
}

impl RunRecord {
    pub fn new(command: impl Into<String>, problem: impl Into<String>) -> Self {
        RunRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            problem: problem.into(),
            config: Vec::new(),
            results: Vec::new(),
            wall_time: None,
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn result(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.results.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.results
            .iter()
            .chain(&self.config)
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER} {FORMAT_VERSION}\n");
        let _ = writeln!(out, "version {}", escape(&self.version));
        let _ = writeln!(out, "command {}", escape(&self.command));
        let _ = writeln!(out, "problem {}", escape(&self.problem));
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k} {}", escape(v));
        }
        for (k, v) in &self.results {
            let _ = writeln!(out, "result.{k} {}", escape(v));
        }
        if let Some(t) = self.wall_time {
            let _ = writeln!(out, "wall_time {t:?}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first == format!("{FORMAT_HEADER} {FORMAT_VERSION}") => {}
            Some((_, first)) => return Err(format!("unsupported record header `{first}`")),
            None => return Err("empty record".into()),
        }
        let mut version = None;
        let mut command = None;
        let mut problem = None;
        let mut config = Vec::new();
        let mut results = Vec::new();
        let mut wall_time = None;
        for (i, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line.split_once(' ').unwrap_or((line, ""));
            let value = unescape(raw).map_err(|e| format!("line {}: {e}", i + 1))?;
            match key {
                "version" => version = Some(value),
                "command" => command = Some(value),
                "problem" => problem = Some(value),
                "wall_time" => {
                    wall_time = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| format!("line {}: wall_time: {e}", i + 1))?,
                    )
                }
                _ => {
                    if let Some(k) = key.strip_prefix("config.") {
                        config.push((k.to_string(), value));
                    } else if let Some(k) = key.strip_prefix("result.") {
                        results.push((k.to_string(), value));
                    } else {
                        return Err(format!("line {}: unknown key `{key}`", i + 1));
                    }
                }
            }
        }
        Ok(RunRecord {
            version: version.ok_or("missing version")?,
            command: command.ok_or("missing command")?,
            problem: problem.ok_or("missing problem")?,
            config,
            results,
            wall_time,
        })
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            other => return Err(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

/// Shortest round-trip form of each entry, comma separated.
pub fn float_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}
