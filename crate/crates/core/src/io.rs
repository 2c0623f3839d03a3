//! Fixed-format numeric output shared by every CSV writer.

use std::io::Write;

use crate::error::Result;

/// 17 significant digits, so the text round-trips and stays byte-stable.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

pub fn write_row<W: Write>(w: &mut csv::Writer<W>, cells: &[String]) -> Result<()> {
    w.write_record(cells)?;
    Ok(())
}
