//! Flat key=value configuration files with include support.
//!
//! ```text
//! # comment
//! include common.cfg
//! grid.n1 = 32
//! sim.freqs = 0.25, 1.0
//! ```

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: HashMap<String, String>,
    /// Directory of the top-level file, for resolving relative paths.
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config> {
        let mut cfg = Config {
            values: HashMap::new(),
            base_dir: path
                .parent()
                .map(|p| p.to_path_buf())
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.load(path, 0)?;
        Ok(cfg)
    }

    pub fn from_str_for_tests(text: &str) -> Config {
        let mut cfg = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            cfg.parse_line(line, Path::new("<inline>"), lineno, 0)
                .expect("inline config");
        }
        cfg
    }

    fn load(&mut self, path: &Path, depth: usize) -> Result<()> {
        if depth > 8 {
            return Err(Error::Config(format!("include depth exceeded at {path:?}")));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {path:?}: {e}")))?;
        for (lineno, line) in text.lines().enumerate() {
            self.parse_line(line, path, lineno, depth)?;
        }
        Ok(())
    }

    fn parse_line(&mut self, line: &str, path: &Path, lineno: usize, depth: usize) -> Result<()> {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return Ok(());
        }
        if let Some(rest) = line.strip_prefix("include ") {
            let inc = rest.trim();
            let target = path
                .parent()
                .map(|p| p.join(inc))
                .unwrap_or_else(|| PathBuf::from(inc));
            return self.load(&target, depth + 1);
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{path:?}:{}: expected key = value", lineno + 1))
        })?;
        self.values
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad number '{s}'"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.require_str(key)?
            .parse()
            .map_err(|_| Error::Config(format!("key '{key}': bad number")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad integer '{s}'"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("1") | Some("true") => Ok(true),
            Some("0") | Some("false") => Ok(false),
            Some(s) => Err(Error::Config(format!("key '{key}': bad flag '{s}'"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.require_str(key)?;
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("key '{key}': bad list entry '{t}'")))
            })
            .collect()
    }

    /// Resolve a path value relative to the config file location.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let raw = self.require_str(key)?;
        let p = PathBuf::from(raw);
        Ok(if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_lists() {
        let cfg = Config::from_str_for_tests(
            "a.x = 3.5\nlist = 0.25, 1.0, 2.25\nflag = 1\nname = out dir # trailing\n",
        );
        assert_eq!(cfg.require_f64("a.x").unwrap(), 3.5);
        assert_eq!(cfg.f64_list("list").unwrap(), vec![0.25, 1.0, 2.25]);
        assert!(cfg.bool_or("flag", false).unwrap());
        assert_eq!(cfg.require_str("name").unwrap(), "out dir");
        assert_eq!(cfg.f64_or("missing", 7.0).unwrap(), 7.0);
        assert!(cfg.require_f64("missing").is_err());
    }

    #[test]
    fn include_merges_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.cfg"), "a = 1\nb = 2\n").unwrap();
        std::fs::write(
            dir.path().join("main.cfg"),
            "include base.cfg\nb = 3\nc = 4\n",
        )
        .unwrap();
        let cfg = Config::from_file(&dir.path().join("main.cfg")).unwrap();
        assert_eq!(cfg.require_f64("a").unwrap(), 1.0);
        assert_eq!(cfg.require_f64("b").unwrap(), 3.0); // later wins
        assert_eq!(cfg.require_f64("c").unwrap(), 4.0);
    }
}
