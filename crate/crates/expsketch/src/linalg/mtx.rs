//! Matrix Market reading and writing. Sparse matrices use the coordinate
//! format, dense matrices the (column-major) array format, and vectors plain
//! whitespace-separated text. Values are written with 17 significant digits
//! so every f64 round-trips exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DenseMatrix, SparseMatrix};
use crate::error::{Error, Result};

const COORD_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
const ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

pub fn write_sparse_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{COORD_HEADER}")?;
    writeln!(w, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
    for i in 0..m.n_rows {
        let (cols, vals) = m.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sparse_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let mut lines = data_lines(path, COORD_HEADER)?;
    let size = lines
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))??;
    let dims = parse_fields::<usize>(&size, 3)?;
    let (n_rows, n_cols, nnz) = (dims[0], dims[1], dims[2]);
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        let mut it = line.split_whitespace();
        let i: usize = parse_next(&mut it, &line)?;
        let j: usize = parse_next(&mut it, &line)?;
        let v: f64 = parse_next(&mut it, &line)?;
        if i == 0 || j == 0 {
            return Err(Error::Parse(format!("indices are 1-based: {line}")));
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entries, found {}",
            triplets.len()
        )));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

pub fn write_dense_matrix_market(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{ARRAY_HEADER}")?;
    writeln!(w, "{} {}", m.n_rows, m.n_cols)?;
    // Array format stores entries column-major.
    for j in 0..m.n_cols {
        for i in 0..m.n_rows {
            writeln!(w, "{:.16e}", m.at(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dense_matrix_market(path: &Path) -> Result<DenseMatrix> {
    let mut lines = data_lines(path, ARRAY_HEADER)?;
    let size = lines
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))??;
    let dims = parse_fields::<usize>(&size, 2)?;
    let (n_rows, n_cols) = (dims[0], dims[1]);
    let mut out = DenseMatrix::zeros(n_rows, n_cols);
    let mut count = 0usize;
    for line in lines {
        let line = line?;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad value: {tok}")))?;
            if count >= n_rows * n_cols {
                return Err(Error::Parse("too many entries".into()));
            }
            let (j, i) = (count / n_rows, count % n_rows);
            *out.at_mut(i, j) = v;
            count += 1;
        }
    }
    if count != n_rows * n_cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {count}",
            n_rows * n_cols
        )));
    }
    Ok(out)
}

pub fn write_vector_text(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_text(path: &Path) -> Result<Vec<f64>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        for tok in line.split_whitespace() {
            if tok.starts_with('%') || tok.starts_with('#') {
                break;
            }
            out.push(
                tok.parse()
                    .map_err(|_| Error::Parse(format!("bad value: {tok}")))?,
            );
        }
    }
    Ok(out)
}

fn data_lines(
    path: &Path,
    expected_header: &'static str,
) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    if header.trim() != expected_header {
        return Err(Error::Parse(format!(
            "unsupported header {:?}, expected {:?}",
            header.trim(),
            expected_header
        )));
    }
    Ok(r.lines().filter(|l| match l {
        Ok(s) => {
            let t = s.trim();
            !t.is_empty() && !t.starts_with('%')
        }
        Err(_) => true,
    }))
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(Error::Parse(format!("expected {n} fields in {line:?}")));
    }
    fields
        .into_iter()
        .map(|f| {
            f.parse()
                .map_err(|_| Error::Parse(format!("bad field {f:?}")))
        })
        .collect()
}

fn parse_next<'a, T: std::str::FromStr>(
    it: &mut impl Iterator<Item = &'a str>,
    line: &str,
) -> Result<T> {
    it.next()
        .ok_or_else(|| Error::Parse(format!("short line: {line}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad field in: {line}")))
}
