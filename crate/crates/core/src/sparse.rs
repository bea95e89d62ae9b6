//! Compressed-row sparse matrices and a threshold-pivoted sparse LU.
//!
//! The LU uses Markowitz pivot selection: among the few sparsest columns,
//! pick the entry minimizing `(row count − 1)(column count − 1)` subject to
//! `|a| ≥ 0.1 · max |column|`. That keeps fill-in low for the block-sparse
//! systems produced by assembly while staying numerically stable.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed; entries that end up exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}×{ncols}");
            if rows_of.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows_of.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut kept_cols = Vec::with_capacity(col_idx.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows_of.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                kept_cols.push(c);
                kept_vals.push(v);
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx: kept_cols,
            values: kept_vals,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of one row, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_fn(self.nrows, |r, _| self.row(r).map(|(c, v)| v * x[c]).sum())
    }

    pub fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = DVector::zeros(self.ncols);
        for (r, c, v) in self.triplets() {
            out[c] += v * y[r];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v)).collect(),
        )
    }

    /// `diag(row_scale) · A · diag(col_scale)`.
    pub fn scaled(&self, row_scale: &DVector<f64>, col_scale: &DVector<f64>) -> CsrMatrix {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] *= row_scale[r] * col_scale[self.col_idx[k]];
            }
        }
        out
    }

    /// Rows `rows` and columns `cols` (both in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![None; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = Some(k);
        }
        let mut t = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if let Some(j) = col_map[c] {
                    t.push((k, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix Market `coordinate real general`, 1-based indices.
    pub fn write_matrix_market(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Matrix Market `array real general` for a column vector.
pub fn write_matrix_market_vector(v: &DVector<f64>, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v.iter() {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseLuError {
    #[error("matrix is {rows}×{cols}; LU needs a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is numerically singular (no acceptable pivot at elimination step {step})")]
    Singular { step: usize },
}

const PIVOT_THRESHOLD: f64 = 0.1;
const CANDIDATE_COLUMNS: usize = 8;

/// `P·A·Q = L·U` stored as the elimination sequence.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    pivot_rows: Vec<usize>,
    pivot_cols: Vec<usize>,
    pivots: Vec<f64>,
    /// Multipliers `(row, l)` applied at each step.
    lower: Vec<Vec<(usize, f64)>>,
    /// Remaining entries `(column, u)` of each pivot row.
    upper: Vec<Vec<(usize, f64)>>,
}

impl SparseLu {
    /// Factorizes `a`; pivots below `64·ε·max|a|` count as zero.
    pub fn factor(a: &CsrMatrix) -> Result<Self, SparseLuError> {
        if a.nrows() != a.ncols() {
            return Err(SparseLuError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let tiny = 64.0 * f64::EPSILON * a.max_abs();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (r, c, v) in a.triplets() {
            rows[r].insert(c, v);
            cols[c].insert(r);
        }
        let mut col_active = vec![true; n];

        let mut lu = SparseLu {
            n,
            pivot_rows: Vec::with_capacity(n),
            pivot_cols: Vec::with_capacity(n),
            pivots: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
        };

        for step in 0..n {
            let min_count = (0..n)
                .filter(|&c| col_active[c])
                .map(|c| cols[c].len())
                .min()
                .expect("an active column remains");
            if min_count == 0 {
                return Err(SparseLuError::Singular { step });
            }
            let candidates: Vec<usize> = (0..n)
                .filter(|&c| col_active[c] && cols[c].len() <= min_count + 1)
                .take(CANDIDATE_COLUMNS)
                .collect();

            // (cost, −|a|, c, r) minimized lexicographically
            let mut best: Option<(usize, f64, usize, usize)> = None;
            for &c in &candidates {
                let col_max = cols[c].iter().map(|&r| rows[r][&c].abs()).fold(0.0, f64::max);
                if col_max <= tiny {
                    continue;
                }
                let col_cost = cols[c].len() - 1;
                for &r in &cols[c] {
                    let v = rows[r][&c].abs();
                    if v < PIVOT_THRESHOLD * col_max {
                        continue;
                    }
                    let key = ((rows[r].len() - 1) * col_cost, -v, c, r);
                    let better = match best {
                        None => true,
                        Some(b) => {
                            (key.0, key.1, key.2, key.3).partial_cmp(&(b.0, b.1, b.2, b.3))
                                == Some(std::cmp::Ordering::Less)
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
            }
            let (_, _, pc, pr) = match best {
                Some(b) => b,
                None => {
                    // sparsest columns are numerically empty; fall back to any usable column
                    let fallback = (0..n).filter(|&c| col_active[c]).find_map(|c| {
                        let (r, v) = cols[c]
                            .iter()
                            .map(|&r| (r, rows[r][&c].abs()))
                            .fold((usize::MAX, 0.0), |a, b| if b.1 > a.1 { b } else { a });
                        (v > tiny).then_some((0, -v, c, r))
                    });
                    fallback.ok_or(SparseLuError::Singular { step })?
                }
            };

            let pivot_row = std::mem::take(&mut rows[pr]);
            let piv = pivot_row[&pc];
            for &c in pivot_row.keys() {
                cols[c].remove(&pr);
            }
            let targets: Vec<usize> = cols[pc].iter().copied().collect();
            let mut multipliers = Vec::with_capacity(targets.len());
            for i in targets {
                let row_i = &mut rows[i];
                let l = row_i.remove(&pc).expect("column set and rows agree") / piv;
                multipliers.push((i, l));
                for (&c, &u) in &pivot_row {
                    if c == pc {
                        continue;
                    }
                    let entry = row_i.entry(c).or_insert_with(|| {
                        cols[c].insert(i);
                        0.0
                    });
                    *entry -= l * u;
                    if *entry == 0.0 {
                        row_i.remove(&c);
                        cols[c].remove(&i);
                    }
                }
            }
            cols[pc].clear();
            col_active[pc] = false;

            lu.pivot_rows.push(pr);
            lu.pivot_cols.push(pc);
            lu.pivots.push(piv);
            lu.lower.push(multipliers);
            lu.upper.push(pivot_row.into_iter().filter(|&(c, _)| c != pc).collect());
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored nonzeros of both factors (diagnostics).
    pub fn factor_nnz(&self) -> usize {
        self.n + self.lower.iter().map(Vec::len).sum::<usize>() + self.upper.iter().map(Vec::len).sum::<usize>()
    }

    /// Smallest and largest pivot magnitudes.
    pub fn pivot_range(&self) -> (f64, f64) {
        self.pivots
            .iter()
            .fold((f64::INFINITY, 0.0), |(lo, hi), p| (lo.min(p.abs()), hi.max(p.abs())))
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut w = b.clone();
        for k in 0..self.n {
            let wr = w[self.pivot_rows[k]];
            if wr != 0.0 {
                for &(i, l) in &self.lower[k] {
                    w[i] -= l * wr;
                }
            }
        }
        let mut x = DVector::zeros(self.n);
        for k in (0..self.n).rev() {
            let s: f64 = self.upper[k].iter().map(|&(c, u)| u * x[c]).sum();
            x[self.pivot_cols[k]] = (w[self.pivot_rows[k]] - s) / self.pivots[k];
        }
        x
    }

    /// Solves `Aᵀ·z = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut w = b.clone();
        let mut v = DVector::zeros(self.n);
        for k in 0..self.n {
            let vk = w[self.pivot_cols[k]] / self.pivots[k];
            v[self.pivot_rows[k]] = vk;
            for &(c, u) in &self.upper[k] {
                w[c] -= u * vk;
            }
        }
        for k in (0..self.n).rev() {
            let s: f64 = self.lower[k].iter().map(|&(i, l)| l * v[i]).sum();
            v[self.pivot_rows[k]] -= s;
        }
        v
    }
}
