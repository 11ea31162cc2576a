//! Dense real matrices sized for desk-scale control analysis.
//!
//! Everything here is a pure function of its inputs. Eigenvalues of general
//! matrices go through a permutation to block-triangular form (strongly
//! connected components of the sparsity pattern), then balancing, Householder
//! Hessenberg reduction and Francis double-shift QR on each irreducible
//! block. Triangular and permuted-triangular inputs, which are common for
//! chain and tree graphs, therefore get their eigenvalues read off the
//! diagonal exactly instead of through an ill-conditioned iteration.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

/// Tolerance used to decide symmetry of inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Strict stability margin: a spectral radius within this of 1 is not Schur.
pub const SCHUR_MARGIN: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive in definiteness checks.
pub const PD_TOL: f64 = 1e-12;

const SMITH_TOL: f64 = 1e-12;
const SMITH_MAX_ITERS: usize = 64;
const QR_MAX_ITERS: usize = 60;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("matrix must be square, found {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error("matrix is not Schur stable (spectral radius {radius})")]
    Unstable { radius: f64 },
    #[error("{method} did not converge after {iterations} iterations")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
    },
}

/// Row-major dense real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty);
        }
        if data.len() != rows * cols {
            return Err(MatrixError::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; intended
    /// for literals in code and tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_row_major(r, c, data).expect("invalid matrix literal")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Largest |m - mᵀ| entry; `None` for non-square matrices.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let mut out = self.clone();
        for (o, tv) in out.data.iter_mut().zip(&t.data) {
            *o = 0.5 * (*o + tv);
        }
        out
    }

    /// Matrix product, checking inner dimensions.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != rhs.rows {
            return Err(MatrixError::DimensionMismatch {
                expected: format!("{} rows on the right", self.cols),
                found: format!("{}", rhs.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if v.len() != self.cols {
            return Err(MatrixError::DimensionMismatch {
                expected: format!("vector of length {}", self.cols),
                found: format!("{}", v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Principal submatrix on the given (sorted or unsorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// Removes row and column `k`.
    pub fn delete_row_col(&self, k: usize) -> Result<Matrix, MatrixError> {
        if !self.is_square() {
            return Err(self.not_square());
        }
        if self.rows < 2 {
            return Err(MatrixError::Empty);
        }
        let keep: Vec<usize> = (0..self.rows).filter(|&i| i != k).collect();
        Ok(self.principal_submatrix(&keep))
    }

    fn not_square(&self) -> MatrixError {
        MatrixError::NotSquare {
            rows: self.rows,
            cols: self.cols,
        }
    }

    fn require_square(&self) -> Result<(), MatrixError> {
        if self.is_square() {
            Ok(())
        } else {
            Err(self.not_square())
        }
    }

    fn require_symmetric(&self) -> Result<(), MatrixError> {
        self.require_square()?;
        let asym = self.asymmetry().unwrap_or(0.0);
        if asym > SYMMETRY_TOL {
            return Err(MatrixError::Asymmetric { asymmetry: asym });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product: block (i, j) of the result is `a[i, j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for p in 0..b.rows {
                for q in 0..b.cols {
                    out[(i * b.rows + p, j * b.cols + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// All eigenvalues of a square matrix, in no particular order.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>, MatrixError> {
    m.require_square()?;
    let n = m.rows;
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                graph.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for component in tarjan_scc(&graph) {
        let mut idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        idx.sort_unstable();
        if idx.len() == 1 {
            out.push(Complex64::new(m[(idx[0], idx[0])], 0.0));
        } else {
            let mut block = m.principal_submatrix(&idx);
            balance(&mut block);
            hessenberg(&mut block);
            out.extend(hessenberg_qr(block)?);
        }
    }
    Ok(out)
}

/// Max |λ| over the eigenvalues of `m`.
pub fn spectral_radius(m: &Matrix) -> Result<f64, MatrixError> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(0.0, |acc: f64, z| acc.max(z.norm())))
}

/// Induced 2-norm: square root of the largest eigenvalue of mᵀm.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let gram = m.transpose().matmul(m).expect("mᵀm is always defined");
    let eig = jacobi_eigenvalues(&gram.symmetrized());
    eig.iter().fold(0.0, |acc: f64, &v| acc.max(v)).max(0.0).sqrt()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>, MatrixError> {
    m.require_symmetric()?;
    let mut eig = jacobi_eigenvalues(&m.symmetrized());
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Strict Schur stability: spectral radius below `1 - SCHUR_MARGIN`.
pub fn is_schur(m: &Matrix) -> Result<bool, MatrixError> {
    Ok(spectral_radius(m)? < 1.0 - SCHUR_MARGIN)
}

pub fn is_positive_definite(m: &Matrix) -> Result<bool, MatrixError> {
    let eig = symmetric_eigenvalues(m)?;
    Ok(eig.iter().all(|&v| v > PD_TOL))
}

/// Solves `mᵀ P m − P + q = 0` for symmetric positive definite `P` using the
/// squared Smith iteration `P ← P + MₖᵀPMₖ`, `Mₖ₊₁ = Mₖ²`.
pub fn solve_discrete_lyapunov(m: &Matrix, q: &Matrix) -> Result<Matrix, MatrixError> {
    m.require_square()?;
    q.require_symmetric()?;
    if q.rows != m.rows {
        return Err(MatrixError::DimensionMismatch {
            expected: format!("{}x{} right-hand side", m.rows, m.rows),
            found: format!("{}x{}", q.rows, q.cols),
        });
    }
    let radius = spectral_radius(m)?;
    if radius >= 1.0 {
        return Err(MatrixError::Unstable { radius });
    }

    let mut p = q.symmetrized();
    let mut power = m.clone();
    for _ in 0..SMITH_MAX_ITERS {
        let increment = &(&power.transpose() * &p) * &power;
        p = &p + &increment;
        if increment.frobenius_norm() <= SMITH_TOL * p.frobenius_norm().max(1.0) {
            return Ok(p.symmetrized());
        }
        power = &power * &power;
        if !power.data.iter().all(|v| v.is_finite()) || !p.data.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(MatrixError::NoConvergence {
        method: "squared Smith iteration",
        iterations: SMITH_MAX_ITERS,
    })
}

/// Frobenius norm of `mᵀ P m − P + q`.
pub fn lyapunov_residual(m: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    let lhs = &(&(&m.transpose() * p) * m) - p;
    (&lhs + q).frobenius_norm()
}

/// Parlett–Reinsch balancing by powers of two (in place).
fn balance(a: &mut Matrix) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.rows;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let ginv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= ginv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place).
fn hessenberg(a: &mut Matrix) {
    let n = a.rows;
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let norm: f64 = ((k + 1)..n).map(|i| a[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k + 1, k)] > 0.0 { -norm } else { norm };
        for i in 0..n {
            v[i] = if i > k { a[(i, k)] } else { 0.0 };
        }
        v[k + 1] -= alpha;
        let vnorm2: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // H A
        for j in k..n {
            let dot: f64 = ((k + 1)..n).map(|i| v[i] * a[(i, j)]).sum();
            let s = beta * dot;
            for i in (k + 1)..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // (H A) H
        for i in 0..n {
            let dot: f64 = ((k + 1)..n).map(|j| a[(i, j)] * v[j]).sum();
            let s = beta * dot;
            for j in (k + 1)..n {
                a[(i, j)] -= s * v[j];
            }
        }
        for i in (k + 2)..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`).
fn hessenberg_qr(mut a: Matrix) -> Result<Vec<Complex64>, MatrixError> {
    let n = a.rows as isize;
    let mut wr = vec![Complex64::new(0.0, 0.0); a.rows];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a[(i as usize, j as usize)].abs();
        }
    }
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[(($i) as usize, ($j) as usize)]
        };
    }

    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(l, l - 1).abs() <= eps * s {
                    at!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(nn, nn);
            if l == nn {
                wr[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = at!(nn - 1, nn - 1);
                let mut w = at!(nn, nn - 1) * at!(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                        wr[nn as usize] = Complex64::new(x + z, 0.0);
                        if z != 0.0 {
                            wr[nn as usize] = Complex64::new(x - w / z, 0.0);
                        }
                    } else {
                        wr[nn as usize] = Complex64::new(x + p, -z);
                        wr[(nn - 1) as usize] = Complex64::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == QR_MAX_ITERS {
                        return Err(MatrixError::NoConvergence {
                            method: "Hessenberg QR",
                            iterations: QR_MAX_ITERS,
                        });
                    }
                    if its % 10 == 0 && its > 0 {
                        // exceptional shift
                        t += x;
                        for i in 0..=nn {
                            at!(i, i) -= x;
                        }
                        let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    let (mut p, mut q, mut r);
                    loop {
                        let z = at!(m, m);
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / at!(m + 1, m) + at!(m, m + 1);
                        q = at!(m + 1, m + 1) - z - r - s;
                        r = at!(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nn - 1) {
                        at!(i + 2, i) = 0.0;
                        if i != m {
                            at!(i + 2, i - 1) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = at!(k, k - 1);
                            q = at!(k + 1, k - 1);
                            r = 0.0;
                            if k + 1 != nn {
                                r = at!(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    at!(k, k - 1) = -at!(k, k - 1);
                                }
                            } else {
                                at!(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = at!(k, j) + q * at!(k + 1, j);
                                if k + 1 != nn {
                                    pp += r * at!(k + 2, j);
                                    at!(k + 2, j) -= pp * z;
                                }
                                at!(k + 1, j) -= pp * y;
                                at!(k, j) -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * at!(i, k) + y * at!(i, k + 1);
                                if k + 1 != nn {
                                    pp += z * at!(i, k + 2);
                                    at!(i, k + 2) -= pp * r;
                                }
                                at!(i, k + 1) -= pp * q;
                                at!(i, k) -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(wr)
}

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows;
    let mut a = m.clone();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)].powi(2)).sum();
        if off <= (f64::EPSILON * f64::EPSILON) * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kron_identity_and_scalar() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
        let m = Matrix::from_rows(&[&[1.0, -2.0], &[3.5, 0.25]]);
        assert_eq!(kron(&Matrix::from_rows(&[&[2.0]]), &m), m.scale(2.0));
    }

    #[test]
    fn kron_block_layout() {
        let a = Matrix::from_rows(&[&[1.0, 2.0]]);
        let b = Matrix::from_rows(&[&[1.0], &[10.0]]);
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (2, 2));
        assert_eq!(k.as_slice(), &[1.0, 2.0, 10.0, 20.0]);
    }

    #[test]
    fn spectral_radius_simple() {
        assert!(close(spectral_radius(&Matrix::identity(4)).unwrap(), 1.0, 1e-12));
        assert!(close(spectral_radius(&Matrix::from_diag(&[0.3, -0.7])).unwrap(), 0.7, 1e-12));
        let rot = Matrix::from_rows(&[&[0.0, -0.9], &[0.9, 0.0]]);
        assert!(close(spectral_radius(&rot).unwrap(), 0.9, 1e-12));
    }

    #[test]
    fn non_square_rejected() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(spectral_radius(&m), Err(MatrixError::NotSquare { .. })));
        assert!(matches!(is_schur(&m), Err(MatrixError::NotSquare { .. })));
    }

    #[test]
    fn dense_eigenvalues_match_characteristic_polynomial() {
        // companion matrix of (x-1)(x-2)(x-3)(x+0.5)
        let c = Matrix::from_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[3.0, 0.5, -8.0, 5.5],
        ]);
        let mut ev: Vec<f64> = eigenvalues(&c).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-0.5, 1.0, 2.0, 3.0]) {
            assert!(close(*got, want, 1e-9), "{ev:?}");
        }
    }

    #[test]
    fn jordan_chain_eigenvalues_exact() {
        let n = 59;
        let mut d = Matrix::identity(n).scale(0.5);
        for i in 1..n {
            d[(i, i - 1)] = 0.5;
        }
        assert_eq!(spectral_radius(&d).unwrap(), 0.5);
    }

    #[test]
    fn spectral_norm_cases() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)), 0.0);
        assert!(close(spectral_norm(&Matrix::from_diag(&[3.0, -5.0])), 5.0, 1e-12));
        let shift = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(close(spectral_norm(&shift), 1.0, 1e-12));
        let ones = Matrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert!(close(spectral_norm(&ones), 2.0, 1e-12));
    }

    #[test]
    fn lyapunov_scalar_and_zero() {
        let p = solve_discrete_lyapunov(&Matrix::from_rows(&[&[0.5]]), &Matrix::from_rows(&[&[2.0]])).unwrap();
        assert!(close(p[(0, 0)], 8.0 / 3.0, 1e-12));
        let q = Matrix::identity(3).scale(2.0);
        let p = solve_discrete_lyapunov(&Matrix::zeros(3, 3), &q).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn lyapunov_errors() {
        let q = Matrix::identity(2);
        let unstable = Matrix::identity(2);
        assert!(matches!(solve_discrete_lyapunov(&unstable, &q), Err(MatrixError::Unstable { .. })));
        let asym = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(
            solve_discrete_lyapunov(&Matrix::zeros(2, 2), &asym),
            Err(MatrixError::Asymmetric { .. })
        ));
    }

    #[test]
    fn schur_classification() {
        // A - FC for f = (1.5, 0.5)
        let afc = Matrix::from_rows(&[&[-0.5, 1.0], &[-0.5, 1.0]]);
        assert!(is_schur(&afc).unwrap());
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(!is_schur(&a).unwrap());
        assert!(is_schur(&Matrix::identity(3).scale(0.5)).unwrap());
    }

    #[test]
    fn definiteness() {
        assert!(is_positive_definite(&Matrix::identity(4)).unwrap());
        assert!(!is_positive_definite(&Matrix::from_diag(&[1.0, -1e-6])).unwrap());
        let asym = Matrix::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]);
        assert!(matches!(is_positive_definite(&asym), Err(MatrixError::Asymmetric { .. })));
    }

    #[test]
    fn from_row_major_validates() {
        assert!(matches!(
            Matrix::from_row_major(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(MatrixError::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(Matrix::from_row_major(2, 2, vec![1.0]), Err(MatrixError::DimensionMismatch { .. })));
        assert!(matches!(Matrix::from_row_major(0, 2, vec![]), Err(MatrixError::Empty)));
    }
}
