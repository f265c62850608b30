use super::{matmul, matmul_tn, sym_eigen_with, DenseMatrix, Numerics};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        Self::with_numerics(a, &Numerics::default())
    }

    pub fn with_numerics(a: &DenseMatrix, num: &Numerics) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::usage(format!(
                "cholesky: matrix is {}x{}, not square",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let floor = num.cholesky_pivot_tol * a.max_abs().max(1.0);
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::numerical(format!(
                    "cholesky: pivot {j} is {d:e}; matrix is not positive definite"
                )));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solve `A X = B` for every column of `b`.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::usage(format!(
                "cholesky solve: rhs has {} rows, expected {n}",
                b.rows()
            )));
        }
        let mut x = b.clone();
        let l = &self.l;
        let m = b.cols();
        // Forward: L Z = B, row-oriented so each step touches whole rows.
        for i in 0..n {
            for k in 0..i {
                let lik = l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x[(k, j)];
                    x[(i, j)] -= lik * v;
                }
            }
            let d = l[(i, i)];
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        // Backward: Lᵀ X = Z.
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = l[(k, i)];
                if lki == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x[(k, j)];
                    x[(i, j)] -= lki * v;
                }
            }
            let d = l[(i, i)];
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        if !x.is_finite() {
            return Err(Error::numerical("cholesky solve produced non-finite values"));
        }
        Ok(x)
    }
}

/// `(a + λI)⁻¹ b` through a Cholesky factorisation of `a + λI`.
pub fn ridge_solve(a: &DenseMatrix, lambda: f64, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::usage(format!("ridge_solve: lambda must be > 0, got {lambda}")));
    }
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::usage(format!(
            "ridge_solve: a is {}x{}, b is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Cholesky::new(&a.add_diagonal(lambda))?.solve(b)
}

/// Solve `aW + Wb = c` for symmetric `a` (L×L, PSD) and `b` (c×c, PD).
pub fn sylvester_solve(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    sylvester_solve_with(a, b, c, &Numerics::default())
}

/// Both coefficients are diagonalised, `a = U Dₐ Uᵀ` and `b = V D_b Vᵀ`,
/// so that `W = U [ (Uᵀ c V)ᵢⱼ / (dₐᵢ + d_bⱼ) ] Vᵀ`.
pub fn sylvester_solve_with(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    num: &Numerics,
) -> Result<DenseMatrix> {
    if !a.is_square() || !b.is_square() || c.rows() != a.rows() || c.cols() != b.rows() {
        return Err(Error::usage(format!(
            "sylvester: a {:?}, b {:?}, c {:?} are not conformable",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    let ea = sym_eigen_with(a, num)?;
    let eb = sym_eigen_with(b, num)?;
    let u = &ea.vectors;
    let v = &eb.vectors;

    let mut core = matmul(&matmul_tn(u, c)?, v)?;
    for i in 0..core.rows() {
        for j in 0..core.cols() {
            let denom = ea.values[i] + eb.values[j];
            if !(denom > num.sylvester_min_denominator) {
                return Err(Error::numerical(format!(
                    "sylvester: eigenvalue sum {denom:e} at ({i}, {j}) is not positive"
                )));
            }
            core[(i, j)] /= denom;
        }
    }
    let w = matmul(&matmul(u, &core)?, &v.transpose())?;
    if !w.is_finite() {
        return Err(Error::numerical("sylvester solution is not finite"));
    }
    Ok(w)
}
