//! Line-oriented `key = value` files with `[section]` headers.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed configuration. Values are consumed through the typed getters;
/// whatever is left unconsumed is reported by [`ConfigFile::unknown_keys`].
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl FromStr for ConfigFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unterminated section header `{s}`"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(Error::Parse { line, message: "empty section name".into() });
                }
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{s}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse { line, message: "empty key".into() });
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let entry = Entry { line, value: value.trim().to_string() };
            if let Some(prev) = entries.insert(full.clone(), entry) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{full}` (first set on line {})", prev.line),
                });
            }
        }
        Ok(ConfigFile { entries, used: Default::default() })
    }
}

impl ConfigFile {
    fn raw(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(e)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|e| e.value.clone())
    }

    /// A scalar; parse failures are pushed onto `errors`.
    pub fn get<T: FromStr>(&self, key: &str, errors: &mut Vec<String>) -> Option<T> {
        let e = self.raw(key)?;
        match e.value.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                errors.push(format!("line {}: `{key}` has invalid value `{}`", e.line, e.value));
                None
            }
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T, errors: &mut Vec<String>) -> T {
        self.get(key, errors).unwrap_or(default)
    }

    /// Like [`ConfigFile::get`], recording a missing-key error.
    pub fn require<T: FromStr>(&self, key: &str, errors: &mut Vec<String>) -> Option<T> {
        if !self.has(key) {
            errors.push(format!("missing required key `{key}`"));
            return None;
        }
        self.get(key, errors)
    }

    /// A comma-separated array.
    pub fn array<T: FromStr>(&self, key: &str, errors: &mut Vec<String>) -> Option<Vec<T>> {
        let e = self.raw(key)?;
        let mut out = Vec::new();
        for item in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(v) => out.push(v),
                Err(_) => {
                    errors.push(format!("line {}: `{key}` has invalid entry `{item}`", e.line));
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Keys present in the file that no getter asked for.
    pub fn unknown_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, e)| format!("line {}: unknown key `{k}`", e.line))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_arrays_and_unknowns() {
        let text = "name = demo\n[net]\ndelta = 0.75 # comment\nbox = -3, 3\n\n[metric]\nfamily = flat\nextra = 1\n";
        let c: ConfigFile = text.parse().unwrap();
        let mut errors = Vec::new();
        assert_eq!(c.string("name").as_deref(), Some("demo"));
        assert_eq!(c.get::<f64>("net.delta", &mut errors), Some(0.75));
        assert_eq!(c.array::<f64>("net.box", &mut errors), Some(vec![-3.0, 3.0]));
        assert_eq!(c.string("metric.family").as_deref(), Some("flat"));
        assert!(errors.is_empty());
        assert_eq!(c.unknown_keys(), vec!["line 8: unknown key `metric.extra`".to_string()]);
    }

    #[test]
    fn missing_and_malformed() {
        let c: ConfigFile = "[net]\nepsilon_base = one\n".parse().unwrap();
        let mut errors = Vec::new();
        assert_eq!(c.require::<f64>("net.delta", &mut errors), None);
        assert_eq!(c.get::<f64>("net.epsilon_base", &mut errors), None);
        assert_eq!(errors.len(), 2);
        assert!(errors[0].contains("net.delta"));
        assert!(matches!("[net\n".parse::<ConfigFile>(), Err(Error::Parse { line: 1, .. })));
        assert!(matches!("a = 1\na = 2\n".parse::<ConfigFile>(), Err(Error::Parse { line: 2, .. })));
        assert!(matches!("junk\n".parse::<ConfigFile>(), Err(Error::Parse { line: 1, .. })));
    }
}
