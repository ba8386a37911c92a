//! CSV and JSON emission. Every file starts with a header recording the
//! command, the effective configuration and its hash; nothing in a header
//! depends on the clock or the host.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::SimConfig;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub config: SimConfig,
    pub config_hash: String,
    /// Extra `key: value` lines, e.g. fitted exponents.
    pub notes: Vec<(String, String)>,
}

impl Header {
    pub fn new(command: &str, config: &SimConfig) -> Self {
        Header {
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash(),
            notes: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn config_json(&self) -> Value {
        let mut c = self.config.clone();
        c.output = None;
        c.cache_dir = None;
        serde_json::to_value(c).expect("config serializes")
    }

    fn to_json(&self) -> Value {
        let notes: Map<String, Value> = self
            .notes
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({
            "generator": format!("dunkl {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config_hash": self.config_hash,
            "config": self.config_json(),
            "notes": notes,
        })
    }

    fn comment_lines(&self) -> String {
        let mut s = format!("# generator: dunkl {}\n", env!("CARGO_PKG_VERSION"));
        s += &format!("# command: {}\n", self.command);
        s += &format!("# config_hash: {}\n", self.config_hash);
        s += &format!("# config: {}\n", self.config_json());
        for (k, v) in &self.notes {
            s += &format!("# {k}: {v}\n");
        }
        s
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    create_parent(path)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv(
    path: &Path,
    header: &Header,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut s = header.comment_lines();
    s += &columns.join(",");
    s.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        s += &row.join(",");
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes `body`, which must serialize to an object, with a `header` field.
pub fn write_json<B: Serialize>(path: &Path, header: &Header, body: &B) -> Result<(), CliError> {
    let mut obj = match serde_json::to_value(body).map_err(|e| CliError::Numeric(e.to_string()))? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    obj.insert("header".into(), header.to_json());
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}
