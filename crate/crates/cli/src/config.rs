//! Optional `key=value` run configuration files: one pair per line,
//! `#` starts a comment, repeated `generator=` lines accumulate.
//! Command-line flags take precedence over file values.

use polya_core::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    pub generators: Vec<String>,
    pub bc: Option<String>,
    pub d: Option<u32>,
    pub count: Option<usize>,
    pub kmax: Option<usize>,
    pub mode: Option<String>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = FileConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(path, line_no, format!("expected key=value, got '{line}'"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::format(path, line_no, format!("bad integer '{v}'")))
        };
        match key {
            "generator" => cfg.generators.push(value.to_string()),
            "bc" => cfg.bc = Some(value.to_string()),
            "d" => {
                cfg.d = Some(value.parse().map_err(|_| {
                    Error::format(path, line_no, format!("bad dimension '{value}'"))
                })?)
            }
            "count" => cfg.count = Some(parse_usize(value)?),
            "kmax" => cfg.kmax = Some(parse_usize(value)?),
            "mode" => cfg.mode = Some(value.to_string()),
            "threads" => cfg.threads = Some(parse_usize(value)?),
            "seed" => {
                cfg.seed = Some(value.parse().map_err(|_| {
                    Error::format(path, line_no, format!("bad seed '{value}'"))
                })?)
            }
            "out" => cfg.out = Some(PathBuf::from(value)),
            other => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown config key '{other}'"),
                ))
            }
        }
    }
    Ok(cfg)
}
