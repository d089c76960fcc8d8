//! Output plumbing. Every JSON document and CSV row carries the producing
//! version, the training config hash and the training seed.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self { version: VERSION.into(), config_hash, seed }
    }

    /// Trailing CSV columns.
    pub const COLUMNS: [&'static str; 3] = ["config_hash", "train_seed", "version"];

    pub fn fields(&self) -> [String; 3] {
        [self.config_hash.clone(), self.seed.to_string(), self.version.clone()]
    }
}

/// Parses a JSON config file. Schema errors name the offending key.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn sink(out: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let mut w = sink(out)?;
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(|e| CliError::Data(format!("writing JSON: {e}")))
}

/// Writes a header and string rows, appending the provenance columns.
pub fn write_csv(out: Option<&PathBuf>, header: &[&str], rows: &[Vec<String>], prov: &Provenance) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(header.iter().copied().chain(Provenance::COLUMNS))?;
    let tail = prov.fields();
    for row in rows {
        w.write_record(row.iter().chain(tail.iter()))?;
    }
    w.flush().map_err(|e| CliError::Data(format!("writing CSV: {e}")))
}

/// Shortest round-trip text of a float; absent values become empty cells.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
