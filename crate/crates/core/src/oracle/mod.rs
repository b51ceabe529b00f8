//! Independent reference implementations.
//!
//! Nothing here calls into `linalg` or `simnet` numerics: the SVD goes
//! through a two-sided Jacobi eigensolver on the Gram matrix, projections are
//! solved through normal equations, and the network forward pass is a
//! straight-line loop over nested vectors. Agreement between the two code
//! paths is what the tests and `chex oracle-check` assert.

mod css;
mod eigen;
mod forward;
mod stats;

pub use css::{brute_force_css, projection_error, CssOracleResult, MAX_ORACLE_COLUMNS};
pub use eigen::{full_svd, pinv_via_gram, symmetric_eigen, OracleSvd};
pub use forward::reference_forward;
pub use stats::{finite_diff_grad, frequency_test, FrequencyReport};
