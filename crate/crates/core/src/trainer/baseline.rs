//! The two one-directional regressions between codes and labels.

use crate::error::{Error, Result};
use crate::linalg::{frob_norm, gram, matmul_tn, matmul_nt, ridge_solve, DenseMatrix};

/// Codes-to-labels projection `P_H = (HHᵀ + λI)⁻¹HYᵀ` (L×c).
pub fn solve_ph(h: &DenseMatrix, y: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    check_cols(h, y)?;
    ridge_solve(&gram(h), lambda, &matmul_nt(h, y)?)
}

/// Labels-to-codes projection `P_Y = HYᵀ(YYᵀ + λI)⁻¹` (L×c).
pub fn solve_py(h: &DenseMatrix, y: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    check_cols(h, y)?;
    // Solve the transposed system (YYᵀ + λI) Xᵀ = YHᵀ.
    Ok(ridge_solve(&gram(y), lambda, &matmul_nt(y, h)?)?.transpose())
}

/// `‖YᵀY − HᵀH‖_F`.
///
/// `P_H = P_Y` holds exactly when `H(YᵀY − HᵀH)Yᵀ = 0`, so a zero witness
/// forces equality while a positive one separates the two projections for
/// generic codes (`HYᵀ = 0` is the degenerate exception).
pub fn mutual_inequality_witness(h: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    check_cols(h, y)?;
    let yty = matmul_tn(y, y)?;
    let hth = matmul_tn(h, h)?;
    Ok(frob_norm(&yty.sub(&hth)?))
}

fn check_cols(h: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if h.cols() != y.cols() {
        return Err(Error::usage(format!(
            "H has {} columns but Y has {}",
            h.cols(),
            y.cols()
        )));
    }
    Ok(())
}
