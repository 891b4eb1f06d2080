//! Result tables and their CSV/JSON forms.
//!
//! CSV layout:
//!
//! ```text
//! # config_hash: <sha256 hex>
//! # toolkit_version: 0.1.0
//! # timestamp: 0
//! # config: {...compact JSON...}
//! col_a,col_b
//! 1.0,2.5
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so parsing and
//! re-emitting a file reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub toolkit_version: String,
    /// Unix seconds; taken from `SOURCE_DATE_EPOCH` so reruns stay byte-identical.
    pub timestamp: u64,
    /// Compact JSON of the effective config.
    pub config: String,
}

impl Provenance {
    pub fn for_config<T: Serialize>(config: &T) -> Result<Self> {
        let json = serde_json::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        Ok(Self {
            config_hash: sha256_hex(json.as_bytes()),
            toolkit_version: crate::VERSION.to_owned(),
            timestamp: reproducible_timestamp(),
            config: json,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `SOURCE_DATE_EPOCH` when set and valid, else 0.
pub fn reproducible_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    /// File stem.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn new(name: impl Into<String>, columns: &[&str], provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidArgument(format!("table {} has no columns", self.name)));
        }
        if self.rows.is_empty() {
            return Err(Error::InvalidArgument(format!("table {} has no rows", self.name)));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != self.columns.len()) {
            return Err(Error::InvalidArgument(format!(
                "table {} row {i} has {} values for {} columns",
                self.name,
                self.rows[i].len(),
                self.columns.len()
            )));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "# config_hash: {}\n# toolkit_version: {}\n# timestamp: {}\n# config: {}\n",
            p.config_hash, p.toolkit_version, p.timestamp, p.config
        );
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut lines = text.split('\n').peekable();
        while let Some(line) = lines.next_if(|l| l.starts_with("# ")) {
            let (key, value) = line[2..]
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("malformed provenance line {line:?}")))?;
            meta.insert(key.to_owned(), value.to_owned());
        }
        let take = |key: &str| {
            meta.get(key)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("missing provenance field {key}")))
        };
        let provenance = Provenance {
            config_hash: take("config_hash")?,
            toolkit_version: take("toolkit_version")?,
            timestamp: take("timestamp")?
                .parse()
                .map_err(|e| Error::Parse(format!("timestamp: {e}")))?,
            config: take("config")?,
        };
        let header = lines.next().ok_or_else(|| Error::Parse("missing header row".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let table = Self {
            name: name.into(),
            columns,
            rows,
            provenance,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotFormat {
    Csv,
    Json,
}

impl PlotFormat {
    fn extension(self) -> &'static str {
        match self {
            PlotFormat::Csv => "csv",
            PlotFormat::Json => "json",
        }
    }
}

/// Writes `<dir>/<table.name>.<ext>`. Fails without touching the disk if the table is empty.
pub fn emit_plot_data(table: &ResultTable, format: PlotFormat, dir: &Path) -> Result<PathBuf> {
    table.validate()?;
    let body = match format {
        PlotFormat::Csv => table.to_csv(),
        PlotFormat::Json => table.to_json()? + "\n",
    };
    let path = dir.join(format!("{}.{}", table.name, format.extension()));
    write_file(&path, body.as_bytes())?;
    Ok(path)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
