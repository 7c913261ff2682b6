//! Curvature of the Gauduchon family of Hermitian connections on model manifolds,
//! Gauduchon–Yamabe solvers on tori, and Calabi–Yau-with-torsion checks for toric bundles.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod curvature;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod relations;
pub mod report;
pub mod spectral;
pub mod stencil;
pub mod toric;
pub mod yamabe;

pub use error::{GyError, Result};
pub use num_complex::Complex64 as C64;
