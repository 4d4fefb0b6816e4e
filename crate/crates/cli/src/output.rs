use std::fs;
use std::io::{self, Write};

use serde::Serialize;
use wineland_core::{Error, Result};

use crate::{Common, Format};

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        Format::Json => {
            let mut text = serde_json::to_vec_pretty(rows).map_err(|e| Error::Parse(e.to_string()))?;
            text.push(b'\n');
            Ok(text)
        }
    }
}

/// Writes `rows` to stdout, and to `--output` when given. An empty CSV table
/// still carries its header.
pub fn emit<T: Serialize>(common: &Common, rows: &[T], header: &[&str]) -> Result<()> {
    let bytes = if rows.is_empty() && common.format == Format::Csv {
        format!("{}\n", header.join(",")).into_bytes()
    } else {
        render(rows, common.format)?
    };
    io::stdout().lock().write_all(&bytes)?;
    if let Some(path) = &common.output {
        fs::write(path, &bytes)?;
    }
    Ok(())
}
