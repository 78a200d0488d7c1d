//! MatrixMarket coordinate I/O for matrices and one-value-per-line vectors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::SparseMatrix;
use crate::error::{LcpError, Result};

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

fn parse_err(line: usize, message: impl Into<String>) -> LcpError {
    LcpError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a `coordinate real general` MatrixMarket document. Indices are
/// one-based in the file; duplicate entries are summed.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" || tokens[3] != "real" || tokens[4] != "general" {
        return Err(parse_err(
            1,
            format!(
                "unsupported format '{} {} {}'",
                tokens[2], tokens[3], tokens[4]
            ),
        ));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'rows cols entries'"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(lineno, e.to_string()))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'row col value'"));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad row index"))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad column index"))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad value"))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(parse_err(lineno, format!("index ({r}, {c}) out of range")));
                }
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                triplets.push((r - 1, c - 1, v));
            }
        }
    }
    let (rows, cols, entries) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if triplets.len() != entries {
        return Err(parse_err(
            0,
            format!("expected {entries} entries, found {}", triplets.len()),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

/// Renders `a` as MatrixMarket text. Values use Rust's shortest round-trip
/// formatting, so a write/read cycle is exact.
pub fn format_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * (a.nnz() + 2));
    out.push_str(MM_HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for (r, c, v) in a.triplets() {
        let _ = writeln!(out, "{} {} {:?}", r + 1, c + 1, v);
    }
    out
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    fs::write(path, format_matrix_market(a))?;
    Ok(())
}

/// Parses one value per line; blank lines and `%`/`#` comments are skipped.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad value '{line}'")))?;
        if !v.is_finite() {
            return Err(parse_err(idx + 1, "non-finite value"));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(24 * v.len());
    for x in v {
        let _ = writeln!(out, "{x:?}");
    }
    out
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    fs::write(path, format_vector(v))?;
    Ok(())
}
