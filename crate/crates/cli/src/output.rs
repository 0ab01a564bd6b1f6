use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Header plus rows of already formatted cells.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Two-column `quantity,value` table.
    pub fn pairs(items: &[(&str, String)]) -> Self {
        let mut t = Self::new(&["quantity", "value"]);
        for (k, v) in items {
            t.push(vec![k.to_string(), v.clone()]);
        }
        t
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Machine-readable result in both shapes, plus lines for stderr.
pub struct Report {
    pub json: Value,
    pub table: Table,
    pub summary: Vec<String>,
}

impl Report {
    pub fn write(&self, format: Format, path: Option<&Path>) -> Result<(), CliError> {
        let bytes = match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                s.into_bytes()
            }
            Format::Csv => self.table.to_csv()?,
        };
        match path {
            Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            None => std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Io(e.to_string()))?,
        }
        let mut err = std::io::stderr().lock();
        for line in &self.summary {
            let _ = writeln!(err, "{line}");
        }
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn bits(nats: f64) -> f64 {
    gaussrd::bits(nats)
}

pub fn rate_line(label: &str, nats: f64) -> String {
    format!("{label}: {nats:.6} nats ({:.6} bits)", bits(nats))
}
