//! Result files. Every file opens with the settings hash and echoes the
//! resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// `{:.12e}`, with `NaN` and `inf` spelled out.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

/// A ratio, or `0/0` when both sides vanish.
pub fn fmt_ratio(r: Option<f64>) -> String {
    r.map(fmt_f).unwrap_or_else(|| "0/0".into())
}

pub const HASH_PREFIX: &str = "# settings-hash: ";

#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    settings_hash: &'a str,
    config: &'a ExperimentConfig,
    result: &'a T,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, config: &ExperimentConfig) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(OutputDir {
            hash: config.settings_hash(),
            root,
            config: config.clone(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
    }

    /// The hash line and the configuration as `#` comment lines.
    fn header(&self) -> String {
        let mut s = format!("{HASH_PREFIX}{}\n", self.hash);
        for line in self.config.to_toml().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    /// Writes the header, then `header_row` and `rows` as CSV.
    pub fn write_csv(&self, name: &str, header_row: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut f = self.open(name)?;
        f.write_all(self.header().as_bytes()).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header_row)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Pretty JSON with `settings_hash` as the first key.
    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut f = self.open(name)?;
        let env = Envelope {
            settings_hash: &self.hash,
            config: &self.config,
            result,
        };
        serde_json::to_writer_pretty(&mut f, &env)?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        f.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// JSON lines; the first line carries the hash and the configuration.
    pub fn write_jsonl<T: Serialize>(&self, name: &str, items: &[T]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut f = self.open(name)?;
        let head = serde_json::json!({ "settings_hash": self.hash, "config": self.config });
        let io = |e| Error::io(&path, e);
        writeln!(f, "{head}").map_err(io)?;
        for it in items {
            writeln!(f, "{}", serde_json::to_string(it)?).map_err(|e| Error::io(&path, e))?;
        }
        f.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Raw text after the `#` header, for formats produced elsewhere.
    pub fn write_with_header(&self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut f = self.open(name)?;
        f.write_all(self.header().as_bytes()).map_err(|e| Error::io(&path, e))?;
        f.write_all(body).map_err(|e| Error::io(&path, e))?;
        f.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// The settings hash in the first line of a result file, if any.
pub fn read_hash(path: &Path) -> Result<Option<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    if let Some(h) = first.strip_prefix(HASH_PREFIX) {
        return Ok(Some(h.trim().to_string()));
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        return Ok(v.get("settings_hash").and_then(|h| h.as_str()).map(String::from));
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(first) {
        return Ok(v.get("settings_hash").and_then(|h| h.as_str()).map(String::from));
    }
    Ok(None)
}

/// CSV rows of a result file without the `#` header.
pub fn read_csv_body(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, csv::Error>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_starts_with_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let out = OutputDir::create(dir.path(), &cfg).unwrap();
        let a = out.write_csv("a.csv", &["x"], vec![vec![fmt_f(1.0)]]).unwrap();
        let b = out.write_json("b.json", &vec![1, 2]).unwrap();
        let c = out.write_jsonl("c.jsonl", &[1, 2]).unwrap();
        for p in [&a, &b, &c] {
            assert_eq!(read_hash(p).unwrap().as_deref(), Some(cfg.settings_hash().as_str()));
        }
        let (h, rows) = read_csv_body(&a).unwrap();
        assert_eq!(h, vec!["x"]);
        assert_eq!(rows, vec![vec!["1.000000000000e0".to_string()]]);
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with(HASH_PREFIX));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_f(f64::NAN), "NaN");
        assert_eq!(fmt_ratio(None), "0/0");
        assert_eq!(fmt_f(0.5), "5.000000000000e-1");
    }
}
