//! Minimal CSV emission and parsing.
//!
//! Values render through `Display` (f64 uses Rust's shortest round-trip
//! formatting), and every row is flushed so a mid-run failure leaves a
//! valid partial file behind.

use crate::error::{Error, Result};
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct CsvWriter {
    writer: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: PathBuf, header: &str) -> Result<Self> {
        let file = File::create(&path)?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{header}")?;
        writer.flush()?;
        Ok(CsvWriter {
            writer,
            columns: header.split(',').count(),
        })
    }

    pub fn row(&mut self, values: &[&dyn Display]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(self.writer, "{}", rendered.join(","))?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Parse a CSV with an expected header into f64 rows; non-numeric cells are
/// kept as NaN-marked errors.
pub fn read_numeric_csv(path: &Path, expected_header: &str) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?;
    if header != expected_header {
        return Err(Error::Config(format!(
            "{}: expected header '{expected_header}', got '{header}'",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.parse().map_err(|_| {
                    Error::Config(format!(
                        "{}:{}: non-numeric cell '{cell}'",
                        path.display(),
                        i + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let dir = std::env::temp_dir().join("pg-lab-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        {
            let mut writer = CsvWriter::create(path.clone(), "a,b").unwrap();
            writer.row(&[&1u64, &0.5f64]).unwrap();
            writer.row(&[&2u64, &(-1.25f64)]).unwrap();
        }
        let rows = read_numeric_csv(&path, "a,b").unwrap();
        assert_eq!(rows, vec![vec![1.0, 0.5], vec![2.0, -1.25]]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = std::env::temp_dir().join("pg-lab-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("h.csv");
        std::fs::write(&path, "x,y\n1,2\n").unwrap();
        assert!(read_numeric_csv(&path, "a,b").is_err());
    }
}
