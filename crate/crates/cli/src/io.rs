//! On-disk tensor trains: a JSON manifest next to a blob of little-endian
//! doubles with the same stem and a `.bin` extension.
//!
//! Cores are concatenated in order. A vector core is flattened with the
//! left rank index fastest, then the mode index, then the right rank index;
//! a matrix core with the left rank fastest, then row, column and right rank.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tt_amen::{Core3, Core4, TtMatrix, TtVector};

use crate::error::{CliError, Result};

pub const DTYPE: &str = "f64le";
pub const CORE_ORDER: &str = "left_rank_fastest";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "type")]
    pub kind: String,
    pub mode_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_sizes: Option<Vec<usize>>,
    pub ranks: Vec<usize>,
    pub dtype: String,
    pub core_order: String,
}

#[derive(Clone, Debug)]
pub enum TtObject {
    Vector(TtVector),
    Matrix(TtMatrix),
}

/// Blob path belonging to a manifest path.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn encode(values: impl Iterator<Item = f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_pair(path: &Path, manifest: &Manifest, blob: &[u8]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    let bp = blob_path(path);
    fs::write(&bp, blob).map_err(|e| CliError::io(bp, e))
}

pub fn write_tt_vector(x: &TtVector, path: &Path) -> Result<()> {
    let manifest = Manifest {
        kind: "ttvector".into(),
        mode_sizes: x.mode_sizes(),
        col_sizes: None,
        ranks: x.ranks(),
        dtype: DTYPE.into(),
        core_order: CORE_ORDER.into(),
    };
    let mut blob = Vec::with_capacity(8 * x.storage());
    for c in x.cores() {
        encode(c.data().iter().copied(), &mut blob);
    }
    write_pair(path, &manifest, &blob)
}

pub fn write_tt_matrix(a: &TtMatrix, path: &Path) -> Result<()> {
    let manifest = Manifest {
        kind: "ttmatrix".into(),
        mode_sizes: a.row_sizes(),
        col_sizes: Some(a.col_sizes()),
        ranks: a.ranks(),
        dtype: DTYPE.into(),
        core_order: CORE_ORDER.into(),
    };
    let mut blob = Vec::new();
    for c in a.cores() {
        encode(c.data().iter().copied(), &mut blob);
    }
    write_pair(path, &manifest, &blob)
}

pub fn write_tt(obj: &TtObject, path: &Path) -> Result<()> {
    match obj {
        TtObject::Vector(x) => write_tt_vector(x, path),
        TtObject::Matrix(a) => write_tt_matrix(a, path),
    }
}

fn check_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let d = m.mode_sizes.len();
    if m.dtype != DTYPE {
        return Err(CliError::format(path, format!("unsupported dtype {:?} (expected {DTYPE:?})", m.dtype)));
    }
    if m.core_order != CORE_ORDER {
        return Err(CliError::format(path, format!("unsupported core_order {:?}", m.core_order)));
    }
    if d == 0 || m.mode_sizes.contains(&0) {
        return Err(CliError::format(path, "mode_sizes must be non-empty and positive"));
    }
    if m.ranks.len() != d + 1 || m.ranks[0] != 1 || m.ranks[d] != 1 || m.ranks.contains(&0) {
        return Err(CliError::format(path, format!("ranks must have {} positive entries with r_0 = r_d = 1", d + 1)));
    }
    match (m.kind.as_str(), &m.col_sizes) {
        ("ttvector", None) => Ok(()),
        ("ttvector", Some(_)) => Err(CliError::format(path, "col_sizes given for a ttvector")),
        ("ttmatrix", Some(c)) if c.len() == d && !c.contains(&0) => Ok(()),
        ("ttmatrix", _) => Err(CliError::format(path, "ttmatrix needs positive col_sizes of the same length as mode_sizes")),
        (k, _) => Err(CliError::format(path, format!("unknown type {k:?}"))),
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::format(path, format!("malformed manifest: {e}")))?;
    check_manifest(&m, path)?;
    Ok(m)
}

pub fn read_tt(path: &Path) -> Result<TtObject> {
    let m = read_manifest(path)?;
    let bp = blob_path(path);
    let bytes = fs::read(&bp).map_err(|e| CliError::io(&bp, e))?;
    let d = m.mode_sizes.len();
    let cols = m.col_sizes.clone().unwrap_or_else(|| vec![1; d]);
    let counts: Vec<usize> = (0..d).map(|k| m.ranks[k] * m.mode_sizes[k] * cols[k] * m.ranks[k + 1]).collect();
    let expected: usize = counts.iter().sum::<usize>() * 8;
    if bytes.len() != expected {
        return Err(CliError::format(&bp, format!("blob has {} bytes, manifest implies {expected}", bytes.len())));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    if m.kind == "ttvector" {
        let cores = (0..d)
            .map(|k| Core3::from_vec(m.ranks[k], m.mode_sizes[k], m.ranks[k + 1], take(counts[k])))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TtObject::Vector(TtVector::new(cores)?))
    } else {
        let cores = (0..d)
            .map(|k| Core4::from_vec(m.ranks[k], m.mode_sizes[k], cols[k], m.ranks[k + 1], take(counts[k])))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TtObject::Matrix(TtMatrix::new(cores)?))
    }
}

pub fn read_tt_vector(path: &Path) -> Result<TtVector> {
    match read_tt(path)? {
        TtObject::Vector(x) => Ok(x),
        TtObject::Matrix(_) => Err(CliError::format(path, "expected a ttvector, found a ttmatrix")),
    }
}

pub fn read_tt_matrix(path: &Path) -> Result<TtMatrix> {
    match read_tt(path)? {
        TtObject::Matrix(a) => Ok(a),
        TtObject::Vector(_) => Err(CliError::format(path, "expected a ttmatrix, found a ttvector")),
    }
}
