//! Binary grid files: little-endian `f64` samples in row-major order, with
//! a JSON header in a sidecar file `<path>.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_grid(path: &Path, header: &serde_json::Value, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let hp = header_path(path);
    let mut f = fs::File::create(&hp).map_err(|e| Error::io(&hp, e))?;
    serde_json::to_writer_pretty(&mut f, header)?;
    writeln!(f).map_err(|e| Error::io(&hp, e))
}

pub fn read_grid(path: &Path) -> Result<(serde_json::Value, Vec<f64>)> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: serde_json::Value = serde_json::from_str(&text)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: format!("length {} is not a multiple of 8", bytes.len()),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}
