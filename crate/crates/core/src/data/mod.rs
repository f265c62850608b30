//! Datasets: features (d×n, one sample per column) with ±1 label matrices (c×n).

mod csv_input;
mod matrix_file;

use rand::seq::SliceRandom;

pub use csv_input::{load_class_ids, load_csv_features};
pub use matrix_file::{
    decode_matrix_bytes, encode_matrix, load_labels, load_matrix, save_matrix, DType,
    MATRIX_HEADER_LEN, MATRIX_MAGIC,
};
pub(crate) use matrix_file::decode_matrix;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    labels: DenseMatrix,
}

impl Dataset {
    pub fn new(features: DenseMatrix, labels: DenseMatrix) -> Result<Self> {
        if features.cols() != labels.cols() {
            return Err(Error::usage(format!(
                "features have {} samples but labels have {}",
                features.cols(),
                labels.cols()
            )));
        }
        if !labels.is_sign_matrix() {
            return Err(Error::Data("label entries must be -1 or +1".into()));
        }
        check_label_columns(&labels)?;
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &DenseMatrix {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.features.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.rows()
    }

    /// Index of the first +1 in each label column.
    pub fn class_of(&self, i: usize) -> usize {
        (0..self.labels.rows())
            .find(|&r| self.labels[(r, i)] > 0.0)
            .unwrap_or(0)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_columns(idx),
            labels: self.labels.select_columns(idx),
        }
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.features, self.labels)
    }
}

pub(crate) fn check_label_columns(labels: &DenseMatrix) -> Result<()> {
    for j in 0..labels.cols() {
        if (0..labels.rows()).all(|i| labels[(i, j)] <= 0.0) {
            return Err(Error::Data(format!("label column {j} has no +1 entry")));
        }
    }
    Ok(())
}

/// Single-label ids to a c×n matrix with +1 on the class row and −1 elsewhere.
pub fn one_hot_pm(class_ids: &[usize], num_classes: usize) -> Result<DenseMatrix> {
    if let Some(&bad) = class_ids.iter().find(|&&id| id >= num_classes) {
        return Err(Error::usage(format!(
            "class id {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(DenseMatrix::from_fn(num_classes, class_ids.len(), |r, i| {
        if class_ids[i] == r {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Gaussian clusters around random class centres.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub cluster_spread: f64,
    pub center_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            dim: 50,
            per_class: 200,
            cluster_spread: 0.3,
            center_scale: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::usage("synthetic counts must all be at least 1"));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::usage("cluster_spread must be positive"));
        }
        if !(self.center_scale > 0.0 && self.center_scale.is_finite()) {
            return Err(Error::usage("center_scale must be positive"));
        }
        Ok(())
    }
}

/// Samples are laid out class by class: columns `k·per_class .. (k+1)·per_class`
/// belong to class `k`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| rng.gaussian() * spec.center_scale)
                .collect()
        })
        .collect();

    let n = spec.num_classes * spec.per_class;
    let mut features = DenseMatrix::zeros(spec.dim, n);
    let mut ids = Vec::with_capacity(n);
    for (k, center) in centers.iter().enumerate() {
        for s in 0..spec.per_class {
            let col = k * spec.per_class + s;
            for (r, &c) in center.iter().enumerate() {
                features[(r, col)] = c + rng.gaussian() * spec.cluster_spread;
            }
            ids.push(k);
        }
    }
    let labels = one_hot_pm(&ids, spec.num_classes)?;
    Dataset::new(features, labels)
}

/// Stratified, seeded train/query split.
///
/// Samples are grouped by their first positive label row. The query total is
/// `round(fraction·n)`, apportioned across classes by largest remainder so each
/// class gets `floor` or `ceil` of its exact share. A class with two or more
/// samples always keeps at least one in the training side.
pub fn split(ds: &Dataset, query_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(query_fraction > 0.0 && query_fraction < 1.0) {
        return Err(Error::usage(format!(
            "query fraction must lie in (0, 1), got {query_fraction}"
        )));
    }
    let n = ds.len();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for i in 0..n {
        groups[ds.class_of(i)].push(i);
    }

    let exact: Vec<f64> = groups
        .iter()
        .map(|g| query_fraction * g.len() as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let target = (query_fraction * n as f64).round() as usize;
    let mut extra = target.saturating_sub(quota.iter().sum());
    let mut by_remainder: Vec<usize> = (0..groups.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - quota[a] as f64;
        let rb = exact[b] - quota[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in &by_remainder {
        if extra == 0 {
            break;
        }
        if quota[k] < groups[k].len() {
            quota[k] += 1;
            extra -= 1;
        }
    }
    for (q, g) in quota.iter_mut().zip(&groups) {
        if g.len() >= 2 && *q == g.len() {
            *q -= 1;
        }
    }

    let mut rng = SeededRng::new(seed);
    let mut query_idx = Vec::new();
    let mut train_idx = Vec::new();
    for (g, &q) in groups.iter_mut().zip(&quota) {
        g.shuffle(&mut rng);
        query_idx.extend_from_slice(&g[..q]);
        train_idx.extend_from_slice(&g[q..]);
    }
    if query_idx.is_empty() || train_idx.is_empty() {
        return Err(Error::usage(format!(
            "split of {n} samples at fraction {query_fraction} leaves one side empty"
        )));
    }
    query_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((ds.select(&train_idx), ds.select(&query_idx)))
}
