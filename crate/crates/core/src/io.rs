//! File formats: dense CSV, MatrixMarket coordinate, and trace CSVs.
//!
//! Dense matrices are one row per line, comma-separated, full round-trip
//! precision. Sparse observations use the MatrixMarket coordinate format
//! with 1-based indices.

use crate::error::{Error, Result};
use crate::linalg::SparseObservation;
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_dense_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    ln + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV matrix".into()));
    }
    let (n1, n2) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n1, n2, |i, j| rows[i][j]))
}

pub fn write_matrix_market(path: &Path, obs: &SparseObservation) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MM_HEADER}")?;
    writeln!(w, "{} {} {}", obs.n_rows(), obs.n_cols(), obs.nnz())?;
    for &(i, j, v) in obs.triplets() {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market(path: &Path) -> Result<SparseObservation> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5
        || tokens[0] != "%%MatrixMarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
        || tokens[3] != "real"
        || tokens[4] != "general"
    {
        return Err(Error::Parse(format!("unsupported MatrixMarket header: {header}")));
    }
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if dims.is_none() {
            if fields.len() != 3 {
                return Err(Error::Parse(format!("bad size line: {t}")));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("size line: {e}")))
            };
            dims = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse(format!("bad entry line: {t}")));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("row index: {e}")))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("col index: {e}")))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|e| Error::Parse(format!("value: {e}")))?;
        if i == 0 || j == 0 {
            return Err(Error::Parse("MatrixMarket indices are 1-based".into()));
        }
        triplets.push((i - 1, j - 1, v));
    }
    let (n1, n2, nnz) = dims.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "size line declares {nnz} entries, found {}",
            triplets.len()
        )));
    }
    SparseObservation::new(n1, n2, triplets)
}

/// (index, score) rows, e.g. for leverage profiles.
pub fn write_indexed_csv(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

/// Generic CSV writer: a header line plus preformatted record rows.
pub fn write_records_csv(path: &Path, header: &str, records: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in records {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn dense_csv_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[1.5, -2.25, 1e-17, 0.0, 3.0, -7.5]);
        write_dense_csv(&p, &m).unwrap();
        let back = read_dense_csv(&p).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matrix_market_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("obs.mtx");
        let obs =
            SparseObservation::new(4, 3, vec![(0, 0, 1.25), (3, 2, -0.5), (1, 1, 2.0)]).unwrap();
        write_matrix_market(&p, &obs).unwrap();
        let back = read_matrix_market(&p).unwrap();
        assert_eq!(obs, back);
    }

    #[test]
    fn matrix_market_rejects_bad_header() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.mtx");
        std::fs::write(&p, "%%MatrixMarket matrix array real general\n1 1\n1.0\n").unwrap();
        assert!(matches!(read_matrix_market(&p), Err(Error::Parse(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Round-trip of arbitrary finite values through both formats.
        #[test]
        fn formats_round_trip_exactly(values in proptest::collection::vec(-1e12f64..1e12, 1..40)) {
            let dir = tempdir().unwrap();
            let n = values.len();
            let m = DMatrix::from_fn(n, 1, |i, _| values[i]);
            let pd = dir.path().join("m.csv");
            write_dense_csv(&pd, &m).unwrap();
            prop_assert_eq!(read_dense_csv(&pd).unwrap(), m);

            let triplets: Vec<(usize, usize, f64)> =
                values.iter().enumerate().map(|(i, &v)| (i, 0, v)).collect();
            let obs = SparseObservation::new(n, 1, triplets).unwrap();
            let ps = dir.path().join("m.mtx");
            write_matrix_market(&ps, &obs).unwrap();
            prop_assert_eq!(read_matrix_market(&ps).unwrap(), obs);
        }
    }
}
