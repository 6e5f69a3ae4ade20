//! Dataset directory: `meta.json` plus three binary arrays `A.f64`, `response.f64`,
//! `planted_x.f64`. Each binary file is `MAGIC`, then little-endian `u32` version,
//! rows and cols, then the entries as little-endian `f64` in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DataError, Dataset, DatasetMeta};
use crate::prox::GroupStructure;

pub const MAGIC: &[u8; 6] = b"CFKIT\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER: usize = 6 + 3 * 4;

fn encode(rows: usize, cols: usize, data: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER + rows * cols * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn corrupt(file: &str, reason: impl Into<String>) -> DataError {
    DataError::CorruptFile {
        file: file.to_string(),
        reason: reason.into(),
    }
}

fn decode(file: &str, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), DataError> {
    if bytes.len() < HEADER {
        return Err(corrupt(file, "shorter than the header"));
    }
    if &bytes[..6] != MAGIC {
        return Err(corrupt(file, "bad magic bytes"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != FORMAT_VERSION {
        return Err(DataError::FormatVersionMismatch {
            file: file.to_string(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (rows, cols) = (word(1) as usize, word(2) as usize);
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| corrupt(file, "declared size overflows"))?;
    let body = &bytes[HEADER..];
    if body.len() as u128 != count as u128 * 8 {
        return Err(corrupt(
            file,
            format!("{} data bytes for a {rows}x{cols} array", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

/// Writes to a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    let (m, n) = d.a.dim();
    write_atomic(&dir.join("A.f64"), &encode(m, n, d.a.iter().copied()))?;
    write_atomic(
        &dir.join("response.f64"),
        &encode(m, 1, d.response.iter().copied()),
    )?;
    write_atomic(
        &dir.join("planted_x.f64"),
        &encode(n, 1, d.planted_x.iter().copied()),
    )?;
    let mut meta = serde_json::to_string_pretty(&d.meta)?;
    meta.push('\n');
    write_atomic(&dir.join("meta.json"), meta.as_bytes())
}

fn read_array(dir: &Path, name: &str) -> Result<(usize, usize, Vec<f64>), DataError> {
    let bytes = fs::read(dir.join(name))?;
    decode(name, &bytes)
}

fn read_vector(dir: &Path, name: &str, len: usize) -> Result<Array1<f64>, DataError> {
    let (rows, cols, data) = read_array(dir, name)?;
    if rows != len || cols != 1 {
        return Err(corrupt(
            name,
            format!("shape {rows}x{cols}, metadata says {len}x1"),
        ));
    }
    Ok(Array1::from(data))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let meta: DatasetMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(DataError::FormatVersionMismatch {
            file: "meta.json".into(),
            found: meta.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let (m, n) = (meta.spec.m, meta.spec.n);
    let (rows, cols, data) = read_array(dir, "A.f64")?;
    if (rows, cols) != (m, n) {
        return Err(corrupt(
            "A.f64",
            format!("shape {rows}x{cols}, metadata says {m}x{n}"),
        ));
    }
    let a = Array2::from_shape_vec((m, n), data).map_err(|e| corrupt("A.f64", e.to_string()))?;
    let response = read_vector(dir, "response.f64", m)?;
    let planted_x = read_vector(dir, "planted_x.f64", n)?;
    let groups = GroupStructure::new(n, meta.groups.clone())
        .map_err(|e| corrupt("meta.json", e.to_string()))?;
    Ok(Dataset {
        a,
        response,
        groups,
        planted_x,
        meta,
    })
}
