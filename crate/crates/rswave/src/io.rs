//! CSV and binary artifact output.
//!
//! CSV files are RFC-4180 style: header row, comma separator, `.` decimal
//! point, `\n` line endings. Floats are printed with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use crate::error::Result;
use crate::grid::SpatialGrid;
use num_complex::Complex64 as C64;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = BufWriter::new(File::create(path)?);
        Self::new(file, header)
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        assert_eq!(values.len(), self.columns, "column count mismatch");
        let mut line = String::new();
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_float(*v));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0".
        "0".to_string()
    } else {
        format!("{v}")
    }
}

const WAVE_MAGIC: &[u8; 8] = b"WAVEST01";

/// Dump three complex fields row-major as complex128 little-endian with the
/// header (magic, n1, n2, eps, t).
pub fn dump_wave_snapshot<W: Write>(
    mut w: W,
    grid: SpatialGrid,
    eps: f64,
    t: f64,
    fields: [&[C64]; 3],
) -> Result<()> {
    w.write_all(WAVE_MAGIC)?;
    w.write_all(&(grid.n1 as u64).to_le_bytes())?;
    w.write_all(&(grid.n2 as u64).to_le_bytes())?;
    w.write_all(&eps.to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    for field in fields {
        assert_eq!(field.len(), grid.npoints());
        for z in field {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub struct WaveSnapshot {
    pub n1: usize,
    pub n2: usize,
    pub eps: f64,
    pub t: f64,
    pub fields: [Vec<C64>; 3],
}

pub fn load_wave_snapshot<R: Read>(mut r: R) -> Result<WaveSnapshot> {
    let mut header = [0u8; 40];
    r.read_exact(&mut header)?;
    if &header[0..8] != WAVE_MAGIC {
        return Err(crate::error::Error::Io("bad magic in wave snapshot".into()));
    }
    let n1 = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let n2 = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let eps = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let t = f64::from_le_bytes(header[32..40].try_into().unwrap());
    let npts = n1 * n2;
    let mut read_field = || -> Result<Vec<C64>> {
        let mut buf = vec![0u8; npts * 16];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect())
    };
    let fields = [read_field()?, read_field()?, read_field()?];
    Ok(WaveSnapshot {
        n1,
        n2,
        eps,
        t,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_are_deterministic() {
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        for buf in [&mut buf_a, &mut buf_b] {
            let mut w = CsvWriter::new(&mut *buf, &["t", "value"]).unwrap();
            w.row(&[0.1, 1.0 / 3.0]).unwrap();
            w.row(&[0.2, -0.0]).unwrap();
            w.finish().unwrap();
        }
        assert_eq!(buf_a, buf_b);
        let text = String::from_utf8(buf_a).unwrap();
        assert!(text.starts_with("t,value\n"));
        assert!(text.contains("0.3333333333333333"));
        assert!(!text.contains("-0,"));
    }

    #[test]
    fn wave_snapshot_roundtrip() {
        let grid = SpatialGrid::square(8, 1.0);
        let field: Vec<C64> = (0..grid.npoints())
            .map(|i| C64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let mut buf = Vec::new();
        dump_wave_snapshot(&mut buf, grid, 0.1, 2.5, [&field, &field, &field]).unwrap();
        let snap = load_wave_snapshot(&buf[..]).unwrap();
        assert_eq!(snap.n1, 8);
        assert_eq!(snap.n2, 8);
        assert_eq!(snap.eps, 0.1);
        assert_eq!(snap.t, 2.5);
        assert_eq!(snap.fields[2], field);
    }
}
