//! Compressed sparse row matrices and a sparse Cholesky wrapper.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(
                r < n && c < n,
                "triplet ({r}, {c}) out of range for n = {n}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(c, v)| (v - self.get(c, i)).abs() <= tol))
    }

    /// Keeps the rows and columns listed in `keep`, renumbered in that order.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut trip = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (c, v) in self.row(i) {
                if map[c] != usize::MAX {
                    trip.push((k, map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), &trip)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

static SEQUENTIAL: Once = Once::new();

/// Sparse `L L^T` factorization of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cholesky {{ n: {} }}", self.n)
    }
}

impl Cholesky {
    pub fn factor(k: &CsrMatrix) -> Result<Cholesky> {
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        let n = k.dim();
        let mut trip = Vec::with_capacity(k.nnz());
        for i in 0..n {
            for (c, v) in k.row(i) {
                if c <= i {
                    trip.push(Triplet::new(i, c, v));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Solver(format!("sparse matrix construction failed: {e:?}")))?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| {
            Error::Solver(format!(
                "matrix is not positive definite ({e:?}); a zero-energy mode is not restrained"
            ))
        })?;
        Ok(Cholesky { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides at once.
    pub fn solve_many(&self, bs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if bs.is_empty() {
            return Vec::new();
        }
        let mut rhs = Mat::<f64>::from_fn(self.n, bs.len(), |i, j| bs[j][i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..bs.len())
            .map(|j| (0..self.n).map(|i| rhs[(i, j)]).collect())
            .collect()
    }
}

/// Solves `K u = f` with `u = 0` on `fixed`; returns the full-length displacement.
pub fn solve_dirichlet(k: &CsrMatrix, f: &[f64], fixed: &[usize]) -> Result<Vec<f64>> {
    let n = k.dim();
    if f.len() != n {
        return Err(Error::Parameter(format!(
            "load vector has length {}, expected {n}",
            f.len()
        )));
    }
    let mut is_fixed = vec![false; n];
    for &d in fixed {
        if d >= n {
            return Err(Error::Parameter(format!("fixed dof {d} out of range")));
        }
        is_fixed[d] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
    let f_red: Vec<f64> = free.iter().map(|&i| f[i]).collect();
    let mut u = vec![0.0; n];
    if f_red.iter().all(|&v| v == 0.0) {
        return Ok(u);
    }
    let k_red = k.submatrix(&free);
    let chol = Cholesky::factor(&k_red).map_err(|e| match e {
        Error::Solver(msg) => Error::Solver(format!("reduced stiffness: {msg}")),
        other => other,
    })?;
    let u_red = chol.solve(&f_red);
    let r = k_red.matvec(&u_red);
    let res: f64 = r
        .iter()
        .zip(&f_red)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if !(res <= 1e-9 * norm(&f_red)) {
        return Err(Error::Solver(format!(
            "equilibrium residual {res:.3e} too large; the constrained system is numerically singular"
        )));
    }
    for (k, &i) in free.iter().enumerate() {
        u[i] = u_red[k];
    }
    Ok(u)
}
