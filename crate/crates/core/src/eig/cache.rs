//! On-disk cache for deflation bases.
//!
//! File layout, all integers and floats little-endian: magic `DFLB`,
//! format version (u32), n (u64), k (u64), the k eigenvalues, the
//! column-major n-by-k basis, then the k residual norms. Files are keyed by
//! the SHA-256 of the matrix content together with the tolerance, so a cache
//! hit is exact: same pattern, same values, same eig_tol.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{DeflationBasis, EigError};
use crate::sparse::{DenseColumnBlock, SparseSymMatrix};

const MAGIC: &[u8; 4] = b"DFLB";
const VERSION: u32 = 1;

/// Content hash of a matrix: dimension, pattern and raw value bits.
pub fn matrix_content_hash(a: &SparseSymMatrix) -> String {
    let mut h = Sha256::new();
    h.update((a.n() as u64).to_le_bytes());
    for &o in a.row_offsets() {
        h.update((o as u64).to_le_bytes());
    }
    for &c in a.col_indices() {
        h.update((c as u64).to_le_bytes());
    }
    for &v in a.values() {
        h.update(v.to_le_bytes());
    }
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

fn cache_path(dir: &Path, a: &SparseSymMatrix, eig_tol: f64) -> PathBuf {
    let mut h = Sha256::new();
    h.update(matrix_content_hash(a).as_bytes());
    h.update(eig_tol.to_le_bytes());
    dir.join(format!("{}.defl", hex_string(&h.finalize())))
}

pub fn save_basis(
    dir: &Path,
    a: &SparseSymMatrix,
    eig_tol: f64,
    basis: &DeflationBasis,
) -> Result<(), EigError> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, a, eig_tol);
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(basis.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(basis.k() as u64).to_le_bytes());
    for &l in basis.lambda() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for j in 0..basis.k() {
        for &x in basis.v().col(j) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    for &r in basis.residual_norms() {
        buf.extend_from_slice(&r.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn load_basis(
    dir: &Path,
    a: &SparseSymMatrix,
    eig_tol: f64,
) -> Result<Option<DeflationBasis>, EigError> {
    let path = cache_path(dir, a, eig_tol);
    if !path.exists() {
        return Ok(None);
    }
    let mut bytes = Vec::new();
    fs::File::open(&path)?.read_to_end(&mut bytes)?;
    let mut cur = 0usize;
    let take = |bytes: &[u8], cur: &mut usize, len: usize| -> Result<Vec<u8>, EigError> {
        if *cur + len > bytes.len() {
            return Err(EigError::CacheFormat("truncated cache file".into()));
        }
        let out = bytes[*cur..*cur + len].to_vec();
        *cur += len;
        Ok(out)
    };
    let magic = take(&bytes, &mut cur, 4)?;
    if magic != MAGIC {
        return Err(EigError::CacheFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut cur, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(EigError::CacheFormat(format!("unsupported version {}", version)));
    }
    let n = u64::from_le_bytes(take(&bytes, &mut cur, 8)?.try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(take(&bytes, &mut cur, 8)?.try_into().unwrap()) as usize;
    if n != a.n() {
        return Err(EigError::CacheFormat(format!(
            "cached dimension {} does not match matrix {}",
            n,
            a.n()
        )));
    }
    let read_f64s = |count: usize, cur: &mut usize| -> Result<Vec<f64>, EigError> {
        let raw = take(&bytes, cur, count * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let lambda = read_f64s(k, &mut cur)?;
    let vdata = read_f64s(n * k, &mut cur)?;
    let residuals = read_f64s(k, &mut cur)?;
    let v = DenseColumnBlock::from_column_major(n, k, vdata)
        .map_err(|e| EigError::CacheFormat(e.to_string()))?;
    Ok(Some(DeflationBasis::new(v, lambda, residuals)?))
}
