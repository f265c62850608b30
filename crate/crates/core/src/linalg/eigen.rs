use super::{frob_norm, DenseMatrix, Numerics};
use crate::error::{Error, Result};

/// Eigendecomposition `A = Q · diag(values) · Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal; column `i` pairs with `values[i]`.
    pub vectors: DenseMatrix,
}

impl SymEigen {
    /// Rebuild `Q · diag(values) · Qᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.values.len();
        let q = &self.vectors;
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| q[(i, k)] * self.values[k] * q[(j, k)]).sum()
        })
    }
}

/// Symmetric eigendecomposition with the default tolerances.
pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    sym_eigen_with(a, &Numerics::default())
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops below
/// `eigen_tol · ‖A‖_F`.
pub fn sym_eigen_with(a: &DenseMatrix, num: &Numerics) -> Result<SymEigen> {
    if !a.is_square() {
        return Err(Error::usage(format!(
            "sym_eigen: matrix is {}x{}, not square",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let norm = frob_norm(a);
    let asym = frob_norm(&a.sub(&a.transpose())?);
    if asym > num.symmetry_tol * norm {
        return Err(Error::usage(format!(
            "sym_eigen: matrix not symmetric (‖A−Aᵀ‖={asym:e}, ‖A‖={norm:e})"
        )));
    }

    // Work on the exactly symmetrised copy.
    let mut m = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut q = DenseMatrix::identity(n);
    let target = num.eigen_tol * norm;

    let mut converged = false;
    for _sweep in 0..=num.eigen_max_sweeps {
        if off_diagonal_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                rotate(&mut m, &mut q, p, r);
            }
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {} sweeps",
            num.eigen_max_sweeps
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = q.select_columns(&order);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `m[p][r]`; accumulates into `q`.
fn rotate(m: &mut DenseMatrix, q: &mut DenseMatrix, p: usize, r: usize) {
    let apr = m[(p, r)];
    if apr == 0.0 {
        return;
    }
    let n = m.rows();
    let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apr);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let mkp = m[(k, p)];
        let mkr = m[(k, r)];
        m[(k, p)] = c * mkp - s * mkr;
        m[(k, r)] = s * mkp + c * mkr;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mrk = m[(r, k)];
        m[(p, k)] = c * mpk - s * mrk;
        m[(r, k)] = s * mpk + c * mrk;
    }
    m[(p, r)] = 0.0;
    m[(r, p)] = 0.0;

    for k in 0..n {
        let qkp = q[(k, p)];
        let qkr = q[(k, r)];
        q[(k, p)] = c * qkp - s * qkr;
        q[(k, r)] = s * qkp + c * qkr;
    }
}
