//! CSV emission: header row, 17 significant digits, one file per series.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Round-trip exact decimal form of `x`.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of one CSV file, all with the header's width.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(number).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
        let mut writer =
            csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io)?;
        writer.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            writer.write_record(row).map_err(io)?;
        }
        writer.flush().map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
    }
}

/// Named tables produced by one run, written in order.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
}

impl Outputs {
    pub fn add(&mut self, name: String, table: Table) {
        self.tables.push((name, table));
    }

    pub fn write_all(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
        let mut written = Vec::with_capacity(self.tables.len());
        for (name, table) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            table.write(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 17.782854591796, f64::MAX] {
            assert_eq!(number(x).parse::<f64>().unwrap(), x);
        }
    }
}
