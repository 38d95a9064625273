//! Deterministic and robust kernel SVM classifiers trained through linear
//! programming, with closed-form feature-space uncertainty radii and a
//! repeated-holdout benchmark harness.

pub mod bench;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod lp;
pub mod svm;

pub use error::{Error, Result};
