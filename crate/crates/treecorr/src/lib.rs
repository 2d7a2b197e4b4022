//! Correlated random graphs, tree correlation testing, and sparse graph alignment.
//!
//! The pipeline, bottom to top:
//!
//! * [`treespace`] — canonical unlabeled rooted trees of bounded depth:
//!   interning, enumeration, exact counting, and the growth-ratio diagnostic.
//! * [`sampling`] — seeded generators for Erdős–Rényi graphs, the asymmetric
//!   correlated pair model, and correlated/independent Galton–Watson trees.
//! * [`likelihood`] — the recursive likelihood ratio `L_d(t, t')` between the
//!   correlated and independent tree laws, in log domain with memoization.
//! * [`spectral`] — an orthonormal tree basis that diagonalizes `L_d`; used as
//!   an independent oracle for the likelihood layer.
//! * [`testing`] — one-sided correlation tests: thresholded likelihood-ratio
//!   tests, calibration, the Z-statistic amplification, and KL estimators.
//! * [`align`] — message-passing partial alignment of two correlated graphs,
//!   with overlap / error-fraction metrics against the planted matching.
//! * [`cli`] — the experiment harness behind the `treecorr` binary.

pub mod align;
pub mod cli;
pub mod likelihood;
pub mod logvalue;
pub mod sampling;
pub mod seeding;
pub mod spectral;
pub mod testing;
pub mod treespace;

pub use logvalue::LogValue;
pub use sampling::{ModelParams, TreeParams};
pub use treespace::{CanonTreeId, TreeArena};

/// Version string embedded in CSV/JSON artifact headers.
pub const ARTIFACT_VERSION: &str = concat!("treecorr ", env!("CARGO_PKG_VERSION"));
