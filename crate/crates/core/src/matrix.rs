//! Dense column-major matrices and the plain-text matrix format.
//!
//! The text format is: a header line `rows cols`, then `rows` lines of `cols`
//! whitespace-separated decimal values in row order. Blank lines and lines
//! starting with `#` are ignored. Values are written with the shortest
//! representation that round-trips exactly.

use std::fmt;
use std::fs;
use std::ops::{Index, IndexMut};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from column-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dims(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % rows,
                col: pos / rows,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row-major nested slices.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != ncols) {
            return Err(Error::dims(format!(
                "row {bad} has {} entries, expected {ncols}",
                rows[bad].as_ref().len()
            )));
        }
        let mut data = vec![0.0; nrows * ncols];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.as_ref().iter().enumerate() {
                data[i + j * nrows] = v;
            }
        }
        Self::new(nrows, ncols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major backing storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn neg(&self) -> Matrix {
        self.map(|v| -v)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| s * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, "sub", |a, b| a - b)
    }

    fn zip(&self, other: &Matrix, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dims(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Largest absolute element (`‖·‖_max`).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖_max`; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            self.shape(),
            other.shape(),
            "shape mismatch in max_abs_diff"
        );
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.cols)
                .all(|j| (0..self.rows).all(|i| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `(A + Aᵀ)/2`, exactly symmetric.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert!(self.is_square());
        let mut out = self.clone();
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Matrix {
        Matrix::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for j in 0..block.cols {
            for i in 0..block.rows {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Parses the repository matrix text format.
    pub fn parse(text: &str) -> Result<Matrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `rows cols` header".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: format!("expected `rows cols`, found {header:?}"),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: hline,
                msg: format!("bad dimension {s:?}: {e}"),
            })
        };
        let rows = parse_dim(dims[0])?;
        let cols = parse_dim(dims[1])?;
        if rows == 0 || cols == 0 {
            return Err(Error::Parse {
                line: hline,
                msg: "dimensions must be positive".into(),
            });
        }

        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: hline + i + 1,
                msg: format!("expected {rows} data rows, found {i}"),
            })?;
            let mut count = 0;
            for (j, tok) in line.split_whitespace().enumerate() {
                if j >= cols {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("more than {cols} values"),
                    });
                }
                let v: f64 = tok.parse().map_err(|e| Error::Parse {
                    line: ln,
                    msg: format!("bad value {tok:?}: {e}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("non-finite value {tok:?}"),
                    });
                }
                data[i + j * rows] = v;
                count += 1;
            }
            if count != cols {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {cols} values, found {count}"),
                });
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing data after matrix".into(),
            });
        }
        Matrix::new(rows, cols, data)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Matrix> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Matrix::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i + j * self.rows]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// JSON form: row-major nested arrays.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Matrix::new(0, 2, vec![]),
            Err(Error::Dimension(_))
        ));
        assert_eq!(
            Matrix::new(2, 1, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 1, col: 0 })
        );
    }

    #[test]
    fn parses_scientific_notation() {
        let m = Matrix::parse("2 2\n1e-3 -2.5E2\n  3 4\n").unwrap();
        assert_eq!(m.to_rows(), vec![vec![1e-3, -250.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = Matrix::parse("2 2\n1 2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = Matrix::parse("2 2\n1 2\n3 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(Matrix::parse("").is_err());
        assert!(Matrix::parse("1 1\n1\n2\n").is_err());
        assert!(Matrix::parse("1 1\ninf\n").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = Matrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        assert_eq!(Matrix::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn symmetrize_is_exact() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.5, 3.0]]).unwrap();
        let s = m.symmetrized();
        assert_eq!(s.get(0, 1), s.get(1, 0));
        assert_eq!(s.get(0, 1), 2.25);
    }

    #[test]
    fn json_is_row_major() {
        let m = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[[1.0,2.0]]");
        let back: Matrix = serde_json::from_str("[[1,2],[3,4]]").unwrap();
        assert_eq!(back.get(1, 0), 3.0);
    }
}
