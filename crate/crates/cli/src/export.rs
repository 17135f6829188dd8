//! CSV tables with header rows and TOML side files.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let table_err = |e: csv::Error| CliError::Table {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(table_err)?;
    w.write_record(header).map_err(table_err)?;
    for row in rows {
        w.write_record(&row).map_err(table_err)?;
    }
    w.flush().map_err(CliError::io(format!("writing {}", path.display())))
}

/// Header plus rows of a numeric CSV table.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let table_err = |reason: String| CliError::Table {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| table_err(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| table_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| table_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| table_err(format!("row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn write_toml<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let text = toml::to_string_pretty(value).map_err(|e| CliError::Table {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}

pub fn read_toml<D: DeserializeOwned>(path: &Path) -> CliResult<D> {
    let text = std::fs::read_to_string(path)
        .map_err(CliError::io(format!("reading {}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Table {
        path: path.to_path_buf(),
        reason: e.message().to_string(),
    })
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(CliError::io(format!("creating {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let vals = [0.1 + 0.2, -1e-300, 12345.678901234567];
        write_table(
            &p,
            &["a".into(), "b".into()],
            vals.iter().map(|&v| vec![num(v), num(2.0 * v)]),
        )
        .unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.column("a").unwrap(), vals);
        assert!(t.column("c").is_none());
    }
}
