//! JSON and CSV serialization shared by the front ends.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

/// Pretty JSON with a trailing newline; field order follows the type, so
/// equal values give byte-identical output.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

/// Comma-separated records with a header row derived from the field names.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::CoefficientRow;
    use crate::geometry::GridConfig;

    #[test]
    fn json_round_trip_is_stable() {
        let g = GridConfig { t_nodes: 256, ..GridConfig::default() };
        let mut a = Vec::new();
        write_json(&mut a, &g).unwrap();
        let back: GridConfig = read_json(a.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut b = Vec::new();
        write_json(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert!(a.ends_with(b"}\n"));
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let rows = vec![CoefficientRow { n: 1, coefficient: 0.25, bound: 0.5, margin: 0.1 }];
        let mut out = Vec::new();
        write_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 2);
    }
}
