//! Compressed sparse row matrices with deterministic assembly, and a direct solver.

use std::fmt::Write as _;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Coordinate-format accumulator. Duplicate entries are summed in insertion order when
/// converted, so the result does not depend on how work was split across threads as long
/// as the entries arrive in the same sequence.
#[derive(Clone, Debug, Default)]
pub struct Coo {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.entries.push((r, c, v));
    }

    /// Adds `scale * m` with its top-left corner at (`row0`, `col0`).
    pub fn add_block(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for r in 0..m.nrows {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                self.push(row0 + r, col0 + c, scale * v);
            }
        }
    }

    /// Adds `scale * mᵀ` with its top-left corner at (`row0`, `col0`).
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for r in 0..m.nrows {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                self.push(row0 + c, col0 + r, scale * v);
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Stable bucket sort by row, stable sort by column, then in-order summation of
    /// duplicates. Explicit zeros produced by cancellation are kept so the pattern depends
    /// only on the triplet positions.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        indptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut sum = 0.0;
                while i < row.len() && row[i].0 == c {
                    sum += row[i].1;
                    i += 1;
                }
                indices.push(c);
                values.push(sum);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(c, &v)| (r, c, v))
            })
            .collect();
        Self::from_triplets(rows.len(), ncols, &triplets)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut coo = Coo::new(self.ncols, self.nrows);
        coo.add_block_transposed(0, 0, self, 1.0);
        coo.to_csr()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut coo = Coo::new(self.nrows, self.ncols);
        coo.add_block(0, 0, self, 1.0);
        coo.add_block(0, 0, other, s);
        coo.to_csr()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A − Aᵀ| over all entries
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.add_scaled(&t, -1.0).max_abs()
    }

    /// Submatrix selecting `rows` and `cols` (each a list of indices into the original).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut coo = Coo::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    coo.push(i, col_map[c], v);
                }
            }
        }
        coo.to_csr()
    }

    /// Matrix Market coordinate format (1-based), for debugging.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:e}", r + 1, c + 1, v);
            }
        }
        s
    }
}

/// Sparse LU with partial pivoting and a fill-reducing column ordering.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        // dense kernels inside the factorization run sequentially so that solutions are
        // bitwise reproducible independent of the thread pool
        static SEQUENTIAL: std::sync::Once = std::sync::Once::new();
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        if a.nrows != a.ncols {
            return Err(Error::Solver(format!("matrix is {}x{}, not square", a.nrows, a.ncols)));
        }
        let mut triplets = Vec::with_capacity(a.nnz());
        for r in 0..a.nrows {
            let (cols, vals) = a.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| Triplet::new(r, c, v)));
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
            .map_err(|e| Error::Solver(format!("matrix construction failed: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| {
            Error::Solver(format!(
                "LU factorization of a {n}x{n} system failed ({e:?}); a zero regularization δ \
                 leaves unconstrained dofs in one subdomain",
                n = a.nrows
            ))
        })?;
        Ok(Self { lu, n: a.nrows })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| b[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("direct solve produced non-finite values (singular system)".into()));
        }
        Ok(x)
    }
}

/// Direct solver for `A x = b` with a fixed set of prescribed unknowns, eliminated
/// symmetrically: the free-free block is factored once and the free-fixed block lifts
/// prescribed values into the right-hand side.
#[derive(Debug)]
pub struct ConstrainedSolver {
    n: usize,
    free: Vec<usize>,
    fixed: Vec<usize>,
    a_ff: CsrMatrix,
    a_fd: CsrMatrix,
    lu: SparseLu,
}

/// Relative residual above which a solve is rejected.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

impl ConstrainedSolver {
    /// `fixed` must be sorted and free of duplicates.
    pub fn new(a: &CsrMatrix, fixed: Vec<usize>) -> Result<Self> {
        let n = a.nrows;
        let mut is_fixed = vec![false; n];
        for &i in &fixed {
            is_fixed[i] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        let a_ff = a.select(&free, &free);
        let a_fd = a.select(&free, &fixed);
        let lu = SparseLu::factor(&a_ff)?;
        Ok(Self {
            n,
            free,
            fixed,
            a_ff,
            a_fd,
            lu,
        })
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Solves with right-hand side `rhs` (full length) and prescribed values for the
    /// fixed unknowns (in the order of [`Self::fixed`]). Returns the full solution and the
    /// relative residual of the reduced system.
    pub fn solve(&self, rhs: &[f64], fixed_values: &[f64]) -> Result<(Vec<f64>, f64)> {
        assert_eq!(rhs.len(), self.n);
        assert_eq!(fixed_values.len(), self.fixed.len());
        let lift = self.a_fd.matvec(fixed_values);
        let b: Vec<f64> = self.free.iter().zip(&lift).map(|(&i, l)| rhs[i] - l).collect();
        let b_norm = norm2(&b);
        let mut x = vec![0.0; self.free.len()];
        let mut residual = 0.0;
        if b_norm > 0.0 {
            x = self.lu.solve(&b)?;
            // a few steps of iterative refinement against the assembled operator
            for _ in 0..3 {
                let ax = self.a_ff.matvec(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                residual = norm2(&r) / b_norm;
                if residual <= 1e-14 {
                    break;
                }
                let dx = self.lu.solve(&r)?;
                x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            }
            let ax = self.a_ff.matvec(&x);
            residual = norm2(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / b_norm;
            if !(residual <= RESIDUAL_TOLERANCE) {
                return Err(Error::Solver(format!(
                    "relative residual {residual:e} exceeds {RESIDUAL_TOLERANCE:e}"
                )));
            }
        }
        let mut full = vec![0.0; self.n];
        for (&i, &v) in self.free.iter().zip(&x) {
            full[i] = v;
        }
        for (&i, &v) in self.fixed.iter().zip(fixed_values) {
            full[i] = v;
        }
        Ok((full, residual))
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
