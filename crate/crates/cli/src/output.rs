use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::args::Format;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes `json` as pretty JSON, or `rows` as CSV with a header row.
pub fn emit<J: Serialize, R: Serialize>(format: Format, out: Option<&Path>, json: &J, rows: &[R]) -> Result<()> {
    let mut w = sink(out)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, json)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            for row in rows {
                c.serialize(row)?;
            }
            c.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}
