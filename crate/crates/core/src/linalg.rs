//! Symmetric banded matrices, banded Cholesky with iterative refinement, and
//! generalized eigensolves for the coercivity pencil.
//!
//! Every 1D discretisation here produces tridiagonal (or diagonal) Gram
//! structures, so the banded path carries all inner solves; dense nalgebra
//! kernels back the eigenproblems and the time-boundary fixed point.

use crate::error::{GdmError, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric banded matrix stored by upper diagonals:
/// `data[i * (bw + 1) + d] = A[i][i + d]` for `d = 0..=bw`, `i + d < n`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.data[lo * (self.bw + 1) + (hi - lo)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw, "entry outside band");
        self.data[lo * (self.bw + 1) + (hi - lo)] += v;
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// self + c * other (bandwidths may differ).
    pub fn add_scaled(&self, other: &SymBanded, c: f64) -> SymBanded {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBanded::zeros(self.n, bw);
        for i in 0..self.n {
            for d in 0..=bw {
                if i + d < self.n {
                    out.data[i * (bw + 1) + d] =
                        self.get(i, i + d) + c * other.get(i, i + d);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.data[i * (self.bw + 1)] * x[i];
            for d in 1..=self.bw {
                if i + d < self.n {
                    let a = self.data[i * (self.bw + 1) + d];
                    acc += a * x[i + d];
                    y[i + d] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    /// Banded Cholesky factorization A = L L^T. Fails on a non-positive pivot.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        // l[i * (bw + 1) + d] = L[i][i - d]
        let mut l = vec![0.0; n * (bw + 1)];
        for j in 0..n {
            let mut diag = self.get(j, j);
            for d in 1..=bw.min(j) {
                diag -= l[j * (bw + 1) + d] * l[j * (bw + 1) + d];
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(GdmError::InvalidDiscretisation(format!(
                    "matrix not positive definite at pivot {j}"
                )));
            }
            let ljj = diag.sqrt();
            l[j * (bw + 1)] = ljj;
            for i in (j + 1)..=(j + bw).min(n - 1) {
                let mut v = self.get(i, j);
                // overlap of rows i and j within the band
                let dmax = bw.min(j);
                for d in 1..=dmax {
                    let kcol = j - d;
                    if i - kcol <= bw {
                        v -= l[i * (bw + 1) + (i - kcol)] * l[j * (bw + 1) + d];
                    }
                }
                l[i * (bw + 1) + (i - j)] = v / ljj;
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Lower banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let bw = self.bw;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let mut v = x[i];
            for d in 1..=bw.min(i) {
                v -= self.l[i * (bw + 1) + d] * x[i - d];
            }
            x[i] = v / self.l[i * (bw + 1)];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let mut v = x[i];
            for d in 1..=bw {
                if i + d < self.n {
                    v -= self.l[(i + d) * (bw + 1) + d] * x[i + d];
                }
            }
            x[i] = v / self.l[i * (bw + 1)];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Solve A x = b by banded Cholesky with iterative refinement down to the
/// requested relative residual.
pub fn solve_spd_refined(
    a: &SymBanded,
    chol: &BandedCholesky,
    b: &[f64],
    rel_tol: f64,
) -> Vec<f64> {
    let mut x = chol.solve(b);
    let scale = norm2(b).max(a.max_abs() * norm2(&x)).max(1e-300);
    for _ in 0..8 {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if norm2(&r) <= rel_tol * scale {
            break;
        }
        let dx = chol.solve(&r);
        axpy(&mut x, 1.0, &dx);
    }
    x
}

/// Largest eigenvalue (and eigenvector) of the pencil A x = λ B x with A
/// symmetric positive semidefinite and B symmetric positive definite, by the
/// dense reduction C = L⁻¹ A L⁻ᵀ with B = L Lᵀ.
pub fn largest_pencil_eig_dense(a: &SymBanded, b: &SymBanded) -> Result<(f64, Vec<f64>)> {
    let bd = b.to_dense();
    let chol = bd
        .cholesky()
        .ok_or_else(|| GdmError::InvalidDiscretisation("pencil B factor not SPD".into()))?;
    let l = chol.l();
    let ad = a.to_dense();
    // C = L^{-1} A L^{-T}
    let mut c = ad;
    // solve L * Y = A  (column-wise forward substitution), then C = Y * L^{-T}
    let n = a.n();
    for col in 0..n {
        let mut y = c.column(col).into_owned();
        l.solve_lower_triangular_mut(&mut y);
        c.set_column(col, &y);
    }
    // right-multiply by L^{-T}: C L^{-T} = (L^{-1} C^T)^T with C symmetric-ish
    let mut ct = c.transpose();
    for col in 0..n {
        let mut y = ct.column(col).into_owned();
        l.solve_lower_triangular_mut(&mut y);
        ct.set_column(col, &y);
    }
    let c = (ct.transpose() + ct.clone()) * 0.5; // symmetrize roundoff
    let eig = c.symmetric_eigen();
    let mut best = 0usize;
    for i in 1..n {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let lam = eig.eigenvalues[best];
    // eigenvector of the pencil: v = L^{-T} y
    let y = eig.eigenvectors.column(best).into_owned();
    let mut v = y;
    l.transpose().solve_upper_triangular_mut(&mut v);
    Ok((lam, v.iter().copied().collect()))
}

/// Power iteration on B⁻¹A for the same pencil, with B-orthonormalization;
/// converges on the Rayleigh quotient to the given tolerance.
pub fn largest_pencil_eig_power(
    a: &SymBanded,
    b: &SymBanded,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let chol = b.cholesky()?;
    let n = a.n();
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 2654435761) % 1024) as f64 / 1024.0)
        .collect();
    let mut lam_prev = 0.0;
    for it in 0..max_iter {
        let ax = a.matvec(&x);
        let mut y = solve_spd_refined(b, &chol, &ax, 1e-14);
        let by = b.matvec(&y);
        let nrm = dot(&by, &y).sqrt();
        if nrm == 0.0 {
            return Ok((0.0, x));
        }
        for v in &mut y {
            *v /= nrm;
        }
        let lam = dot(&a.matvec(&y), &y) / dot(&b.matvec(&y), &y);
        x = y;
        if it > 2 && (lam - lam_prev).abs() <= tol * lam.abs().max(1e-300) {
            return Ok((lam, x));
        }
        lam_prev = lam;
    }
    Ok((lam_prev, x))
}

/// Dense LU solve for the time-boundary fixed point; minimum-norm SVD
/// fallback when the square system is singular but consistent.
pub fn solve_dense(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(x) = m.clone().lu().solve(rhs) {
        let residual = (m * &x - rhs).norm();
        let scale = rhs.norm().max(m.norm() * x.norm()).max(1e-300);
        if residual <= 1e-8 * scale {
            return Ok(x);
        }
    }
    let svd = m.clone().svd(true, true);
    let x = svd
        .solve(rhs, 1e-12)
        .map_err(|_| GdmError::SingularBoundarySystem)?;
    let residual = (m * &x - rhs).norm();
    let scale = rhs.norm().max(1e-300);
    if residual <= 1e-7 * scale {
        Ok(x)
    } else {
        Err(GdmError::SingularBoundarySystem)
    }
}
