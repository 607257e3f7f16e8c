//! Comma-separated tables behind a `#`-prefixed provenance header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// 12 significant digits, scientific notation.
pub fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Extra `key value` lines appended to the header.
    pub extra: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, canonical_config: &str, seed: u64) -> Self {
        Provenance {
            command: command.into(),
            config_sha256: sha256_hex(canonical_config.as_bytes()),
            seed,
            extra: Vec::new(),
        }
    }

    fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# secdeliv {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# command {}", self.command)?;
        writeln!(w, "# config_sha256 {}", self.config_sha256)?;
        writeln!(w, "# seed {}", self.seed)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k} {v}")?;
        }
        Ok(())
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Writes to `out`, or stdout when `None`.
pub fn write_table(out: Option<&Path>, prov: &Provenance, table: &Table) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(
            File::create(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    prov.write(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(&table.header)?;
    for r in &table.rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a table written by `write_table`, skipping the header comments.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok((header, rows))
}
