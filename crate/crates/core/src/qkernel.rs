//! Fidelity kernels `K(x, x') = |⟨Φ(x)|Φ(x')⟩|²` from exact statevector overlaps.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featmap::{encode, FeatureMapSpec};
use crate::qsim::StateVector;

/// Dense real kernel matrix, either a square Gram matrix or a `p × m` cross
/// matrix between evaluation and training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn from_dmatrix(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    /// Builds a matrix from row slices; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Shape {
                    what: "kernel row length",
                    expected: ncols,
                    found: r.len(),
                });
            }
        }
        Ok(Self {
            values: DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            values: DMatrix::identity(m, m),
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Restricts a square matrix to the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self {
            values: DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])]),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.nrows().min(self.ncols());
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the symmetric part of a square matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Shape {
                what: "eigenvalues need a square matrix; columns",
                expected: self.nrows(),
                found: self.ncols(),
            });
        }
        if self.nrows() == 0 {
            return Ok(0.0);
        }
        let sym = (&self.values + self.values.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Writes the matrix as CSV with `labels` as both row and column headers.
    pub fn write_csv<W: Write>(&self, out: W, row_labels: &[String], col_labels: &[String]) -> Result<()> {
        if row_labels.len() != self.nrows() {
            return Err(Error::Shape {
                what: "kernel row labels",
                expected: self.nrows(),
                found: row_labels.len(),
            });
        }
        if col_labels.len() != self.ncols() {
            return Err(Error::Shape {
                what: "kernel column labels",
                expected: self.ncols(),
                found: col_labels.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["element".to_string()];
        header.extend(col_labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in row_labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend((0..self.ncols()).map(|j| format!("{:.17e}", self.get(i, j))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<kernel csv>", e))?;
        Ok(())
    }
}

/// Squared overlap of two already-encoded states.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

pub fn kernel_entry(x: &[f64], x_prime: &[f64], spec: &FeatureMapSpec) -> Result<f64> {
    fidelity(&encode(x, spec)?, &encode(x_prime, spec)?)
}

fn encode_all(rows: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<Vec<StateVector>> {
    rows.par_iter().map(|x| encode(x, spec)).collect()
}

/// Gram matrix over `rows`. Each state is encoded once; the `m(m+1)/2`
/// distinct overlaps are computed in parallel and mirrored.
pub fn gram_matrix(rows: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<KernelMatrix> {
    if rows.is_empty() {
        return Err(Error::config("cannot build a Gram matrix from zero samples"));
    }
    let states = encode_all(rows, spec)?;
    let m = states.len();
    let upper: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = upper
        .par_iter()
        .map(|&(i, j)| fidelity(&states[i], &states[j]))
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(m, m);
    for (&(i, j), v) in upper.iter().zip(vals) {
        values[(i, j)] = v;
        values[(j, i)] = v;
    }
    Ok(KernelMatrix { values })
}

/// Cross kernel between evaluation rows `a` and training rows `b`.
pub fn cross_matrix(a: &[Vec<f64>], b: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<KernelMatrix> {
    let sa = encode_all(a, spec)?;
    let sb = encode_all(b, spec)?;
    let (p, m) = (sa.len(), sb.len());
    let vals: Vec<f64> = (0..p * m)
        .into_par_iter()
        .map(|k| fidelity(&sa[k / m], &sb[k % m]))
        .collect::<Result<_>>()?;
    Ok(KernelMatrix {
        values: DMatrix::from_row_slice(p, m, &vals),
    })
}
