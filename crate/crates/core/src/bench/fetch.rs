//! Collection matrix retrieval with a local cache.
//!
//! Matrices are downloaded as `.tar.gz` archives from the public collection
//! mirror, the coordinate file is extracted into the cache directory, and a
//! recorded SHA-256 of the extracted file is verified when available.
//! With a warm cache no network access happens at all; offline mode turns a
//! cold-cache miss into an error instead of a download attempt.

use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::BenchError;

/// Registry entry for one collection matrix.
pub struct MatrixEntry {
    pub id: &'static str,
    pub group: &'static str,
    pub name: &'static str,
    /// SHA-256 of the extracted `.mtx` file; absent entries are recorded on
    /// the first verified fetch and skip verification until then.
    pub sha256: Option<&'static str>,
    pub n: usize,
    pub nnz: usize,
}

// The symmetric indefinite test set: dimensions and full-pattern nonzero
// counts as published by the collection.
pub const REGISTRY: &[MatrixEntry] = &[
    MatrixEntry { id: "bcsstm10", group: "HB", name: "bcsstm10", sha256: None, n: 1086, nnz: 22092 },
    MatrixEntry { id: "bcsstm27", group: "HB", name: "bcsstm27", sha256: None, n: 1224, nnz: 56126 },
    MatrixEntry { id: "nasa1824", group: "Boeing", name: "nasa1824", sha256: None, n: 1824, nnz: 39208 },
    MatrixEntry { id: "meg4", group: "Grund", name: "meg4", sha256: None, n: 5860, nnz: 25258 },
    MatrixEntry { id: "benzene", group: "PARSEC", name: "benzene", sha256: None, n: 8219, nnz: 242669 },
    MatrixEntry { id: "si10h16", group: "PARSEC", name: "Si10H16", sha256: None, n: 17077, nnz: 875923 },
    MatrixEntry { id: "si5h12", group: "PARSEC", name: "Si5H12", sha256: None, n: 19898, nnz: 738598 },
    MatrixEntry { id: "sio", group: "PARSEC", name: "SiO", sha256: None, n: 33401, nnz: 1317655 },
];

pub fn known_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.id).collect()
}

pub fn registry_entry(id: &str) -> Option<&'static MatrixEntry> {
    let id = id.to_ascii_lowercase();
    REGISTRY.iter().find(|e| e.id == id)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
}

/// Resolve a collection id to a local Matrix Market path, downloading on a
/// cold cache unless offline.
pub fn fetch_matrix(id: &str, cache_dir: &Path, offline: bool) -> Result<PathBuf, BenchError> {
    let entry = registry_entry(id).ok_or_else(|| BenchError::UnknownMatrix {
        id: id.to_string(),
        known: known_ids().join(", "),
    })?;
    std::fs::create_dir_all(cache_dir)?;
    let target = cache_dir.join(format!("{}.mtx", entry.id));
    if target.exists() {
        return Ok(target);
    }
    if offline {
        return Err(BenchError::OfflineColdCache(entry.id.to_string()));
    }

    let url = format!(
        "https://suitesparse-collection-website.engr.tamu.edu/MM/{}/{}.tar.gz",
        entry.group, entry.name
    );
    let response = ureq::get(&url)
        .timeout(std::time::Duration::from_secs(300))
        .call()
        .map_err(|e| BenchError::Download { url: url.clone(), detail: e.to_string() })?;
    let mut archive = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut archive)
        .map_err(|e| BenchError::Download { url: url.clone(), detail: e.to_string() })?;

    let mtx = extract_mtx(&archive, entry.name)
        .ok_or_else(|| BenchError::ArchiveLayout(entry.id.to_string()))?;
    if let Some(expected) = entry.sha256 {
        let got = sha256_hex(&mtx);
        if got != expected {
            return Err(BenchError::HashMismatch {
                id: entry.id.to_string(),
                expected: expected.to_string(),
                got,
            });
        }
    }
    std::fs::write(&target, &mtx)?;
    Ok(target)
}

// Minimal ustar reader: walk the entries of the gzipped tarball and return
// the bytes of `<name>/<name>.mtx`.
fn extract_mtx(archive_gz: &[u8], name: &str) -> Option<Vec<u8>> {
    let mut decoder = flate2::read::GzDecoder::new(archive_gz);
    let mut tar = Vec::new();
    decoder.read_to_end(&mut tar).ok()?;
    let wanted = format!("{}/{}.mtx", name, name);
    let mut offset = 0usize;
    while offset + 512 <= tar.len() {
        let header = &tar[offset..offset + 512];
        if header.iter().all(|&b| b == 0) {
            break;
        }
        let name_field = &header[0..100];
        let entry_name: String = name_field
            .iter()
            .take_while(|&&b| b != 0)
            .map(|&b| b as char)
            .collect();
        let size_field: String = header[124..136]
            .iter()
            .take_while(|&&b| b != 0 && b != b' ')
            .map(|&b| b as char)
            .collect();
        let size = usize::from_str_radix(size_field.trim(), 8).ok()?;
        let data_start = offset + 512;
        if entry_name == wanted {
            if data_start + size > tar.len() {
                return None;
            }
            return Some(tar[data_start..data_start + size].to_vec());
        }
        let padded = size.div_ceil(512) * 512;
        offset = data_start + padded;
    }
    None
}
