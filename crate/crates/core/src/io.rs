//! Bit-exact field persistence: one structured-text header line followed
//! by the raw node values as little-endian doubles, row-major with x₂
//! outer and x₁ inner (the in-memory layout of [`RealField`]).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};

/// Header line of a field dump; serialized as `{"N":<int>,"name":"<str>"}`.
#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(rename = "N")]
    n: usize,
    name: String,
}

/// Write one field record: header line, then N² little-endian doubles.
pub fn write_field(w: &mut impl Write, name: &str, field: &RealField) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_graphic() && c != '"') {
        return Err(Error::BadFieldDump(format!(
            "field name {name:?} must be nonempty printable ASCII without quotes"
        )));
    }
    let header = Header {
        n: field.grid().n(),
        name: name.to_string(),
    };
    let line = serde_json::to_string(&header)
        .map_err(|e| Error::BadFieldDump(format!("header serialization failed: {e}")))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Read one field record written by [`write_field`]. Returns the stored
/// name and the field bound to a fresh grid of the recorded resolution.
pub fn read_field(r: &mut impl BufRead) -> Result<(String, RealField)> {
    let mut line = String::new();
    let got = r.read_line(&mut line)?;
    if got == 0 {
        return Err(Error::BadFieldDump("missing header line".into()));
    }
    let header: Header = serde_json::from_str(line.trim_end_matches('\n'))
        .map_err(|e| Error::BadFieldDump(format!("bad header {line:?}: {e}")))?;
    let grid = Grid::new(header.n)?;
    let count = grid.num_nodes();
    let mut buf = vec![0_u8; count * 8];
    r.read_exact(&mut buf).map_err(|e| {
        Error::BadFieldDump(format!(
            "payload for {:?} needs {} bytes: {e}",
            header.name,
            count * 8
        ))
    })?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunked by 8")))
        .collect();
    let field = RealField::from_values(&grid, values)?;
    Ok((header.name, field))
}

/// Write a single-field dump file.
pub fn write_field_file(path: &Path, name: &str, field: &RealField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, name, field)?;
    w.flush()?;
    Ok(())
}

/// Read a single-field dump file.
pub fn read_field_file(path: &Path) -> Result<(String, RealField)> {
    let mut r = BufReader::new(File::open(path)?);
    read_field(&mut r)
}
