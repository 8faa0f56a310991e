//! Matrix Market coordinate-format dumps of the assembled operators.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Writes `matrix` in coordinate real general format with 1-based indices.
pub fn write_coordinate<W: Write>(matrix: &CsrMatrix, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", matrix.nrows(), matrix.ncols(), matrix.nnz())?;
    for (i, j, v) in matrix.iter() {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dense<W: Write>(matrix: &DMatrix<f64>, out: W) -> Result<()> {
    let mut t = Vec::new();
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            let v = matrix[(i, j)];
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    write_coordinate(&CsrMatrix::from_triplets(matrix.nrows(), matrix.ncols(), &t), out)
}

pub fn save(path: impl AsRef<Path>, matrix: &CsrMatrix) -> Result<()> {
    write_coordinate(matrix, File::create(path)?)
}

/// Reads a coordinate real general file.
pub fn read_coordinate<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let bad = |msg: String| Error::InvalidArgument(format!("matrix market: {msg}"));
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty input".into()))??;
    if !header.trim().eq_ignore_ascii_case(HEADER) {
        return Err(bad(format!("unsupported header '{header}'")));
    }
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                let [r, c, nnz] = fields[..] else {
                    return Err(bad(format!("bad size line '{line}'")));
                };
                let parse = |s: &str| s.parse::<usize>().map_err(|e| bad(e.to_string()));
                size = Some((parse(r)?, parse(c)?, parse(nnz)?));
                triplets.reserve(parse(nnz)?);
            }
            Some((nr, nc, _)) => {
                let [i, j, v] = fields[..] else {
                    return Err(bad(format!("bad entry line '{line}'")));
                };
                let i: usize = i.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                let j: usize = j.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                let v: f64 = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(bad(format!("entry ({i}, {j}) out of range")));
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| bad("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(bad(format!("expected {nnz} entries, found {}", triplets.len())));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

pub fn load(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    read_coordinate(BufReader::new(File::open(path)?))
}
