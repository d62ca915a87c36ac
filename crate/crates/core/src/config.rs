//! Strict key/value section config format.
//!
//! The same grammar backs the material coefficient file, the geometry/stack
//! config and the CLI run config:
//!
//! ```text
//! # full-line comment
//! [section.name]
//! key = value
//! list = 1.0, 2.0, 3.0
//! ```
//!
//! Parsing is strict: duplicate sections or keys are rejected at parse time,
//! and consumers reject keys they do not recognize (`SectionReader::finish`).

use std::collections::BTreeSet;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RawEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct RawSection {
    pub name: String,
    pub line: usize,
    pub entries: Vec<RawEntry>,
}

impl RawSection {
    pub fn get(&self, key: &str) -> Option<&RawEntry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub sections: Vec<RawSection>,
}

impl RawConfig {
    pub fn section(&self, name: &str) -> Option<&RawSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a RawSection> {
        self.sections.iter().filter(move |s| s.name.starts_with(prefix))
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    let mut cfg = RawConfig::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(stripped) = line.strip_prefix('[') {
            let name = stripped.strip_suffix(']').ok_or(Error::ConfigAt {
                line: line_no,
                msg: "section header must be of the form [name]".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::ConfigAt { line: line_no, msg: "empty section name".into() });
            }
            if cfg.section(name).is_some() {
                return Err(Error::ConfigAt {
                    line: line_no,
                    msg: format!("duplicate section [{name}]"),
                });
            }
            cfg.sections.push(RawSection { name: name.to_string(), line: line_no, entries: Vec::new() });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigAt {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::ConfigAt { line: line_no, msg: "empty key".into() });
        }
        let section = cfg.sections.last_mut().ok_or(Error::ConfigAt {
            line: line_no,
            msg: "key/value pair before any [section] header".into(),
        })?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(Error::ConfigAt {
                line: line_no,
                msg: format!("duplicate key `{key}` in section [{}]", section.name),
            });
        }
        section.entries.push(RawEntry { key, value, line: line_no });
    }
    Ok(cfg)
}

/// Typed accessor over one section that tracks which keys were consumed,
/// so unknown keys can be rejected.
pub struct SectionReader<'a> {
    section: &'a RawSection,
    used: BTreeSet<String>,
}

impl<'a> SectionReader<'a> {
    pub fn new(section: &'a RawSection) -> Self {
        Self { section, used: BTreeSet::new() }
    }

    pub fn name(&self) -> &str {
        &self.section.name
    }

    fn raw(&mut self, key: &str) -> Option<&'a RawEntry> {
        let e = self.section.get(key);
        if e.is_some() {
            self.used.insert(key.to_string());
        }
        e
    }

    pub fn has(&self, key: &str) -> bool {
        self.section.get(key).is_some()
    }

    pub fn str_req(&mut self, key: &str) -> Result<&'a str> {
        self.raw(key).map(|e| e.value.as_str()).ok_or_else(|| Error::ConfigAt {
            line: self.section.line,
            msg: format!("missing key `{key}` in section [{}]", self.section.name),
        })
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.raw(key).map(|e| e.value.clone()).unwrap_or_else(|| default.to_string())
    }

    pub fn f64_req(&mut self, key: &str) -> Result<f64> {
        let e = self.raw(key).ok_or_else(|| Error::ConfigAt {
            line: self.section.line,
            msg: format!("missing key `{key}` in section [{}]", self.section.name),
        })?;
        parse_f64(&e.value, e.line)
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(e) => parse_f64(&e.value, e.line),
            None => Ok(default),
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(e) => e.value.parse::<u64>().map_err(|_| Error::ConfigAt {
                line: e.line,
                msg: format!("`{}` is not an unsigned integer", e.value),
            }),
            None => Ok(default),
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::ConfigAt {
                    line: e.line,
                    msg: format!("`{other}` is not a boolean"),
                }),
            },
            None => Ok(default),
        }
    }

    pub fn f64_list_req(&mut self, key: &str) -> Result<Vec<f64>> {
        let e = self.raw(key).ok_or_else(|| Error::ConfigAt {
            line: self.section.line,
            msg: format!("missing key `{key}` in section [{}]", self.section.name),
        })?;
        e.value
            .split(',')
            .map(|tok| parse_f64(tok.trim(), e.line))
            .collect()
    }

    pub fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        if self.has(key) {
            self.f64_list_req(key)
        } else {
            Ok(default.to_vec())
        }
    }

    pub fn str_list_req(&mut self, key: &str) -> Result<Vec<String>> {
        let e = self.raw(key).ok_or_else(|| Error::ConfigAt {
            line: self.section.line,
            msg: format!("missing key `{key}` in section [{}]", self.section.name),
        })?;
        Ok(e.value.split(',').map(|t| t.trim().to_string()).collect())
    }

    /// Two-element list `lo, hi`.
    pub fn pair_req(&mut self, key: &str) -> Result<(f64, f64)> {
        let v = self.f64_list_req(key)?;
        if v.len() != 2 {
            return Err(Error::ConfigAt {
                line: self.section.line,
                msg: format!("`{key}` must be a two-element list"),
            });
        }
        Ok((v[0], v[1]))
    }

    /// Rejects keys that were present but never consumed.
    pub fn finish(self) -> Result<()> {
        for e in &self.section.entries {
            if !self.used.contains(&e.key) {
                return Err(Error::ConfigAt {
                    line: e.line,
                    msg: format!("unknown key `{}` in section [{}]", e.key, self.section.name),
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Schema {
        line,
        msg: format!("`{tok}` is not a number"),
    })
    .and_then(|v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ConfigAt { line, msg: format!("`{tok}` is not finite") })
        }
    })
}
