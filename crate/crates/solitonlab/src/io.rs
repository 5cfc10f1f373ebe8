//! On-disk formats: binary snapshot dumps, the snapshot index, and CSV
//! tables.
//!
//! Snapshot files are little-endian 64-bit floats: a header
//! `{t, n, x_min, x_max}` followed by the samples (n values for a real
//! field, 2n interleaved re/im for a complex one; the reader tells them
//! apart by file size). Floats in CSVs carry 17 significant digits so a
//! replay reproduces them bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid1D, RealField};
use crate::solver::FieldData;

/// 17 significant digits, round-trip exact for f64.
pub fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_snapshot(path: &Path, t: f64, field: &FieldData) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (grid, data): (Grid1D, Vec<f64>) = match field {
        FieldData::Real(f) => (f.grid, f.values.clone()),
        FieldData::Complex(f) => {
            let mut d = Vec::with_capacity(2 * f.grid.n);
            for c in &f.values {
                d.push(c.re);
                d.push(c.im);
            }
            (f.grid, d)
        }
    };
    for v in [t, grid.n as f64, grid.x_min, grid.x_max] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(f64, FieldData)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 32 || buf.len() % 8 != 0 {
        return Err(Error::Format {
            what: "snapshot file".into(),
            detail: format!("{} bytes is not a header plus f64 samples", buf.len()),
        });
    }
    let f64_at = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
    let t = f64_at(0);
    let n = f64_at(1) as usize;
    let x_min = f64_at(2);
    let x_max = f64_at(3);
    let grid = Grid1D::new(x_min, x_max, n)?;
    let samples = buf.len() / 8 - 4;
    let field = if samples == n {
        let values = (0..n).map(|i| f64_at(4 + i)).collect();
        FieldData::Real(RealField::new(grid, values)?)
    } else if samples == 2 * n {
        let values = (0..n)
            .map(|i| Complex64::new(f64_at(4 + 2 * i), f64_at(5 + 2 * i)))
            .collect();
        FieldData::Complex(ComplexField::new(grid, values)?)
    } else {
        return Err(Error::Format {
            what: "snapshot file".into(),
            detail: format!("{samples} samples for n = {n}"),
        });
    };
    Ok((t, field))
}

/// Write `index.csv` (snapshot_id, t, path) plus one binary file per
/// snapshot into `dir`; returns the written paths.
pub fn write_snapshot_dir(
    dir: &Path,
    snapshots: &[(f64, &FieldData)],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut index = String::from("snapshot_id,t,path\n");
    for (id, (t, field)) in snapshots.iter().enumerate() {
        let name = format!("snap_{id:05}.f64");
        let path = dir.join(&name);
        write_snapshot(&path, *t, field)?;
        index.push_str(&format!("{id},{},{name}\n", csv_float(*t)));
        paths.push(path);
    }
    let index_path = dir.join("index.csv");
    std::fs::write(&index_path, index)?;
    paths.push(index_path);
    Ok(paths)
}

/// Read a snapshot directory back, ordered by snapshot_id.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<(f64, FieldData)>> {
    let index = std::fs::read_to_string(dir.join("index.csv"))?;
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (lineno, line) in index.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format {
                what: "index.csv".into(),
                detail: format!("line {} has {} columns", lineno + 1, cols.len()),
            });
        }
        let id: usize = cols[0].parse().map_err(|_| Error::Format {
            what: "index.csv".into(),
            detail: format!("bad snapshot_id on line {}", lineno + 1),
        })?;
        rows.push((id, cols[2].to_string()));
    }
    rows.sort_by_key(|r| r.0);
    rows.iter()
        .map(|(_, name)| read_snapshot(&dir.join(name)))
        .collect()
}

/// Minimal CSV writer; fields must not contain commas or newlines.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn snapshot_roundtrip_real() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(-10.0, 10.0, 64).unwrap();
        let f = RealField::sample(g, |x| (-x * x).exp());
        let path = dir.path().join("s.f64");
        write_snapshot(&path, 1.25, &FieldData::Real(f.clone())).unwrap();
        let (t, back) = read_snapshot(&path).unwrap();
        assert_eq!(t, 1.25);
        match back {
            FieldData::Real(b) => assert_eq!(b, f),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn snapshot_roundtrip_complex() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(-10.0, 10.0, 64).unwrap();
        let f = ComplexField::sample(g, |x| Complex64::new(x.cos(), x.sin()) * (-x * x).exp());
        let path = dir.path().join("s.f64");
        write_snapshot(&path, 0.5, &FieldData::Complex(f.clone())).unwrap();
        let (t, back) = read_snapshot(&path).unwrap();
        assert_eq!(t, 0.5);
        match back {
            FieldData::Complex(b) => assert_eq!(b.values, f.values),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn snapshot_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(-10.0, 10.0, 64).unwrap();
        let a = FieldData::Real(RealField::sample(g, |x| x.sin()));
        let b = FieldData::Real(RealField::sample(g, |x| x.cos()));
        write_snapshot_dir(dir.path(), &[(0.0, &a), (1.0, &b)]).unwrap();
        let back = read_snapshot_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, 0.0);
        assert_eq!(back[1].0, 1.0);
    }

    #[test]
    fn csv_float_roundtrips() {
        for v in [1.0 / 3.0, 6.0, 2.310891e-9, -4.5e300] {
            let s = csv_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }
}
