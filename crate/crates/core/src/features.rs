//! Gaussian-kernel (RBF) feature map against a set of anchor samples.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SeededRng};

/// Maximum number of (sample, anchor) pairs used to estimate the kernel width.
pub const SIGMA_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct RbfMap {
    anchors: DenseMatrix,
    sigma: f64,
}

impl RbfMap {
    pub fn new(anchors: DenseMatrix, sigma: f64) -> Result<Self> {
        if anchors.cols() == 0 {
            return Err(Error::usage("rbf map needs at least one anchor"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::usage(format!("rbf sigma must be positive, got {sigma}")));
        }
        Ok(Self { anchors, sigma })
    }

    /// d×m, one anchor per column.
    pub fn anchors(&self) -> &DenseMatrix {
        &self.anchors
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn input_dim(&self) -> usize {
        self.anchors.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.anchors.cols()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        apply_rbf(self, x)
    }
}

/// Pick `m` distinct training columns as anchors and set `sigma` to the mean
/// distance over up to [`SIGMA_PAIRS`] random (sample, anchor) pairs.
pub fn fit_rbf(v: &DenseMatrix, m: usize, seed: u64) -> Result<RbfMap> {
    let n = v.cols();
    if m == 0 || m > n {
        return Err(Error::usage(format!(
            "rbf anchor count {m} must lie in 1..={n}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let picked = index::sample(&mut rng, n, m).into_vec();
    let anchors = v.select_columns(&picked);

    let pairs = SIGMA_PAIRS.min(n.saturating_mul(m));
    let mut total = 0.0;
    for _ in 0..pairs {
        let i = rng.below(n);
        let j = rng.below(m);
        total += sq_dist_cols(v, i, &anchors, j).sqrt();
    }
    let sigma = total / pairs as f64;
    if !(sigma > 1e-12) {
        return Err(Error::numerical(format!(
            "degenerate feature spread: estimated sigma {sigma:e}"
        )));
    }
    RbfMap::new(anchors, sigma)
}

/// `out[j, i] = exp(−‖xᵢ − aⱼ‖² / (2σ²))`, an m×k matrix.
pub fn apply_rbf(map: &RbfMap, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows() != map.input_dim() {
        return Err(Error::usage(format!(
            "rbf expects {}-dimensional inputs, got {}",
            map.input_dim(),
            x.rows()
        )));
    }
    let denom = 2.0 * map.sigma * map.sigma;
    let xt = x.transpose();
    let at = map.anchors.transpose();
    Ok(DenseMatrix::from_fn(map.output_dim(), x.cols(), |j, i| {
        let d2: f64 = xt
            .row(i)
            .iter()
            .zip(at.row(j))
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        // Keep far-away values strictly positive instead of underflowing to 0.
        (-d2 / denom).exp().max(f64::MIN_POSITIVE)
    }))
}

fn sq_dist_cols(a: &DenseMatrix, i: usize, b: &DenseMatrix, j: usize) -> f64 {
    (0..a.rows())
        .map(|r| {
            let d = a[(r, i)] - b[(r, j)];
            d * d
        })
        .sum()
}
