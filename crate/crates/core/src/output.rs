//! Run artifacts: binary field dumps, CSV metric tables and an event log.
//!
//! Fields are written as little-endian f64, row-major with z outer, one
//! file per variable under `fields/<time>/`, described by a plain-text
//! manifest. Metrics go to CSV with 17 significant digits so that
//! post-processing is lossless at f64 precision.

use crate::error::Result;
use ndarray::Array2;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Writer rooted at one run directory.
pub struct RunWriter {
    root: PathBuf,
}

impl RunWriter {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self {
            root: root.as_ref().to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Append one line to the run's event log.
    pub fn log_event(&self, line: &str) -> Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("events.log"))?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    /// Dump a named field at a given time [s] and record it in the manifest.
    pub fn write_field(&self, time_s: f64, name: &str, field: &Array2<f64>) -> Result<()> {
        let dir = self.root.join("fields").join(format!("{time_s:.3}"));
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{name}.bin"));
        let mut w = BufWriter::new(File::create(&path)?);
        for v in field.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let mut mf = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("manifest.txt"))?;
        writeln!(
            mf,
            "fields/{time_s:.3}/{name}.bin rows={} cols={} dtype=f64-le order=row-major",
            field.nrows(),
            field.ncols()
        )?;
        Ok(())
    }

    /// Write one key = value line into the manifest header.
    pub fn manifest_entry(&self, key: &str, value: &str) -> Result<()> {
        let mut mf = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("manifest.txt"))?;
        writeln!(mf, "{key} = {value}")?;
        Ok(())
    }

    /// Write a CSV table with 17-significant-digit values.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.root.join(name))?);
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Read back a binary field dump (row-major f64-le).
pub fn read_field(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    let mut out = Array2::zeros((rows, cols));
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        out[[k / cols, k % cols]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(out)
}
