//! Flat plain-text configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment
//! [section name]
//! key = value
//! ```
//!
//! Keys may repeat within a section (order is kept). Lines before the first
//! section header belong to the unnamed section `""`. Blank lines and lines
//! starting with `#` are ignored, as is a `#` that follows whitespace and
//! everything after it. Anything after the first `=` is the value, trimmed.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Missing(format!("key `{key}` in section [{}]", self.name)))
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("[{}] {key}: bad value `{v}`", self.name))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvFile {
    pub sections: Vec<Section>,
}

/// Drops a trailing comment: a `#` preceded by whitespace.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if bytes[i] == b'#' && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections = vec![Section {
            name: String::new(),
            entries: Vec::new(),
        }];
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::Parse(format!("line {}: unterminated section header", lineno + 1))
                })?;
                sections.push(Section {
                    name: name.trim().to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
            }
            sections
                .last_mut()
                .expect("at least one section")
                .entries
                .push((key.to_string(), v.trim().to_string()));
        }
        if sections[0].entries.is_empty() {
            sections.remove(0);
        }
        Ok(KvFile { sections })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section> {
        self.section(name)
            .ok_or_else(|| Error::Missing(name.to_string()))
    }

    /// Sections whose name starts with `prefix`, paired with the remainder.
    pub fn sections_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a Section)> + 'a {
        self.sections
            .iter()
            .filter_map(move |s| s.name.strip_prefix(prefix).map(|rest| (rest.trim(), s)))
    }
}

/// Splits a list value on commas and/or whitespace.
pub fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

pub fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>> {
    split_list(value)
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad list element `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_repeated_keys() {
        let f = KvFile::parse(
            "top = 1\n# c\n[a]\nx = 1\nx = 2\n\n[field.name]\nmeasure = edit = ok\n",
        )
        .unwrap();
        assert_eq!(f.sections.len(), 3);
        assert_eq!(f.section("").unwrap().get("top"), Some("1"));
        let a = f.section("a").unwrap();
        assert_eq!(a.get_all("x").collect::<Vec<_>>(), vec!["1", "2"]);
        let (rest, s) = f.sections_with_prefix("field.").next().unwrap();
        assert_eq!(rest, "name");
        assert_eq!(s.get("measure"), Some("edit = ok"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(KvFile::parse("[a\n").is_err());
        assert!(KvFile::parse("just words\n").is_err());
        assert!(KvFile::parse(" = 3\n").is_err());
    }

    #[test]
    fn list_values() {
        assert_eq!(parse_list::<f64>("0, 0.25 ,0.5").unwrap(), vec![0.0, 0.25, 0.5]);
        assert_eq!(parse_list::<u32>("1 2\t3").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<u32>("1, x").is_err());
    }
}
