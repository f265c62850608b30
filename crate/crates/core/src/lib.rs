//! Supervised discrete hashing with mutual linear regression.
//!
//! One projection `W` ties hash codes and class labels in both directions
//! (`WᵀH ≈ Y` and `WY ≈ H`), a second projection `P` maps features to codes,
//! and training alternates closed-form W, H and P updates. On top of that:
//! a boosting step that assembles balanced bits from several runs, packed
//! Hamming-space retrieval, and mAP / precision@k evaluation.
//!
//! ```
//! use mlrh::data::{gen_synthetic, SyntheticSpec};
//! use mlrh::trainer::{train, Hyperparams};
//!
//! let ds = gen_synthetic(&SyntheticSpec { per_class: 20, ..Default::default() }).unwrap();
//! let hp = Hyperparams { bits: 16, ..Hyperparams::default() };
//! let (model, _state, report) = train(ds.features(), ds.labels(), &hp).unwrap();
//! let codes = model.encode(ds.features()).unwrap();
//! assert_eq!(codes.shape(), (16, ds.len()));
//! assert!(report.objective_trace.len() >= 2);
//! ```

// `!(x > bound)` is used on purpose so NaN is rejected along with small values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod boost;
mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod linalg;
pub mod trainer;

pub use codec::write_atomic;
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
