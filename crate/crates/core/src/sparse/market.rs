use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{CsrMatrix, SparseError, SparseSymMatrix};

/// Symmetry qualifier of a coordinate Matrix Market file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Header {
    field: String,
    symmetry: MarketSymmetry,
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>, SparseError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let got = file.read(&mut magic)?;
    let file = File::open(path)?;
    if got == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn parse_header(line: &str) -> Result<Header, SparseError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "%%MatrixMarket" {
        return Err(SparseError::MalformedHeader(line.trim().to_string()));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix")
        || !tokens[2].eq_ignore_ascii_case("coordinate")
    {
        return Err(SparseError::MalformedHeader(line.trim().to_string()));
    }
    if !tokens[3].eq_ignore_ascii_case("real") {
        return Err(SparseError::NonRealField(tokens[3].to_string()));
    }
    let symmetry = if tokens[4].eq_ignore_ascii_case("symmetric") {
        MarketSymmetry::Symmetric
    } else if tokens[4].eq_ignore_ascii_case("general") {
        MarketSymmetry::General
    } else if tokens[4].eq_ignore_ascii_case("skew-symmetric") {
        MarketSymmetry::SkewSymmetric
    } else {
        return Err(SparseError::MalformedHeader(line.trim().to_string()));
    };
    Ok(Header { field: tokens[3].to_string(), symmetry })
}

struct RawFile {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>, // 0-based, as stored in the file
    symmetry: MarketSymmetry,
}

fn read_coordinate(path: &Path) -> Result<RawFile, SparseError> {
    let reader = open_reader(path)?;
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| SparseError::MalformedHeader("empty file".into()))?;
    let header = parse_header(&first?)?;
    debug_assert_eq!(header.field, "real");

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if dims.is_none() {
            if tokens.len() != 3 {
                return Err(SparseError::MalformedEntry {
                    line: lineno + 1,
                    msg: "size line must be `rows cols nnz`".into(),
                });
            }
            let parse = |t: &str| {
                t.parse::<usize>().map_err(|_| SparseError::MalformedEntry {
                    line: lineno + 1,
                    msg: format!("bad size token `{}`", t),
                })
            };
            dims = Some((parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?));
            continue;
        }
        let (rows, cols, _) = dims.unwrap();
        if tokens.len() != 3 {
            return Err(SparseError::MalformedEntry {
                line: lineno + 1,
                msg: format!("expected `i j value`, got {} tokens", tokens.len()),
            });
        }
        let i: usize = tokens[0].parse().map_err(|_| SparseError::MalformedEntry {
            line: lineno + 1,
            msg: format!("bad row index `{}`", tokens[0]),
        })?;
        let j: usize = tokens[1].parse().map_err(|_| SparseError::MalformedEntry {
            line: lineno + 1,
            msg: format!("bad column index `{}`", tokens[1]),
        })?;
        let v: f64 = tokens[2].parse().map_err(|_| SparseError::MalformedEntry {
            line: lineno + 1,
            msg: format!("bad value `{}`", tokens[2]),
        })?;
        if i < 1 || i > rows || j < 1 || j > cols {
            return Err(SparseError::IndexOutOfRange {
                line: lineno + 1,
                row: i,
                col: j,
                n: rows,
            });
        }
        if header.symmetry == MarketSymmetry::Symmetric && j > i {
            return Err(SparseError::UpperTriangleEntry { line: lineno + 1, row: i, col: j });
        }
        entries.push((i - 1, j - 1, v));
    }

    let (rows, cols, declared) =
        dims.ok_or_else(|| SparseError::MalformedHeader("missing size line".into()))?;
    if entries.len() != declared {
        return Err(SparseError::EntryCountMismatch { declared, found: entries.len() });
    }
    Ok(RawFile { rows, cols, entries, symmetry: header.symmetry })
}

/// Load a symmetric coordinate Matrix Market file into full-pattern CSR.
///
/// The file must be declared `real symmetric`; a `general` declaration is
/// rejected rather than symmetrized silently. Strictly-lower entries are
/// mirrored exactly once and 1-based indices become 0-based. Gzipped files
/// are detected by magic bytes and decompressed transparently.
pub fn load_matrix_market<P: AsRef<Path>>(path: P) -> Result<SparseSymMatrix, SparseError> {
    let raw = read_coordinate(path.as_ref())?;
    if raw.symmetry != MarketSymmetry::Symmetric {
        let name = match raw.symmetry {
            MarketSymmetry::General => "general",
            MarketSymmetry::SkewSymmetric => "skew-symmetric",
            MarketSymmetry::Symmetric => unreachable!(),
        };
        return Err(SparseError::NotSymmetric(name.into()));
    }
    if raw.rows != raw.cols {
        return Err(SparseError::DimensionMismatch { expected: raw.rows, got: raw.cols });
    }
    SparseSymMatrix::from_lower_triplets(raw.rows, &raw.entries)
}

/// Load a general or skew-symmetric coordinate file (skew files store the
/// strict lower triangle; entries are mirrored with a sign flip). Symmetric
/// files are accepted too and expanded to the full pattern.
pub fn load_matrix_market_general<P: AsRef<Path>>(
    path: P,
) -> Result<(CsrMatrix, MarketSymmetry), SparseError> {
    let raw = read_coordinate(path.as_ref())?;
    let mut triplets = Vec::with_capacity(raw.entries.len() * 2);
    match raw.symmetry {
        MarketSymmetry::General => triplets.extend_from_slice(&raw.entries),
        MarketSymmetry::Symmetric => {
            for &(i, j, v) in &raw.entries {
                triplets.push((i, j, v));
                if i != j {
                    triplets.push((j, i, v));
                }
            }
        }
        MarketSymmetry::SkewSymmetric => {
            for &(i, j, v) in &raw.entries {
                if i == j {
                    return Err(SparseError::MalformedEntry {
                        line: 0,
                        msg: format!("diagonal entry ({}, {}) in a skew-symmetric file", i + 1, j + 1),
                    });
                }
                triplets.push((i, j, v));
                triplets.push((j, i, -v));
            }
        }
    }
    let m = CsrMatrix::from_triplets(raw.rows, raw.cols, &triplets)?;
    Ok((m, raw.symmetry))
}

/// Store the lower triangle of a symmetric matrix in coordinate format.
/// Values are printed with shortest round-trip formatting, so a reload
/// reproduces them bit-identically.
pub fn save_matrix_market<P: AsRef<Path>>(
    a: &SparseSymMatrix,
    path: P,
) -> Result<(), SparseError> {
    let mut lower = Vec::new();
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                lower.push((i, j, v));
            }
        }
    }
    let mut f = File::create(path)?;
    writeln!(f, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(f, "{} {} {}", a.n(), a.n(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(f, "{} {} {:?}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_lower_triangle_with_mirroring() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             % comment line\n\
             2 2 3\n\
             1 1 2.0\n\
             2 1 1.0\n\
             2 2 3.0\n",
        );
        let a = load_matrix_market(f.path()).unwrap();
        assert_eq!(a.n(), 2);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(1, 1), 3.0);
    }

    #[test]
    fn loads_one_by_one() {
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 -5.0\n");
        let a = load_matrix_market(f.path()).unwrap();
        assert_eq!(a.n(), 1);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), -5.0);
    }

    #[test]
    fn rejects_general_declaration() {
        let f = write_temp("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.0\n");
        assert!(matches!(load_matrix_market(f.path()), Err(SparseError::NotSymmetric(_))));
    }

    #[test]
    fn rejects_complex_field() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1.0 0.0\n",
        );
        assert!(matches!(load_matrix_market(f.path()), Err(SparseError::NonRealField(_))));
    }

    #[test]
    fn rejects_malformed_header() {
        let f = write_temp("%%NotMatrixMarket whatever\n1 1 1\n1 1 1.0\n");
        assert!(matches!(load_matrix_market(f.path()), Err(SparseError::MalformedHeader(_))));
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n");
        assert!(matches!(
            load_matrix_market(f.path()),
            Err(SparseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_entry_count_mismatch() {
        let f = write_temp("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n");
        assert!(matches!(
            load_matrix_market(f.path()),
            Err(SparseError::EntryCountMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             3 3 4\n\
             1 1 0.1\n\
             2 1 -3.25e-7\n\
             2 2 1e300\n\
             3 3 -0.30000000000000004\n",
        );
        let a = load_matrix_market(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_matrix_market(&a, out.path()).unwrap();
        let b = load_matrix_market(out.path()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gzip_transparent_decompression() {
        let content = "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 4.5\n";
        let f = tempfile::NamedTempFile::new().unwrap();
        {
            let mut enc = flate2::write::GzEncoder::new(
                File::create(f.path()).unwrap(),
                flate2::Compression::default(),
            );
            enc.write_all(content.as_bytes()).unwrap();
            enc.finish().unwrap();
        }
        let a = load_matrix_market(f.path()).unwrap();
        assert_eq!(a.get(0, 0), 4.5);
    }

    #[test]
    fn loads_skew_symmetric_general_path() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3.0\n",
        );
        let (m, sym) = load_matrix_market_general(f.path()).unwrap();
        assert_eq!(sym, MarketSymmetry::SkewSymmetric);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 1), -3.0);
        assert_eq!(m.skew_defect(), 0.0);
    }
}
