//! Numerical laboratory for a two-dimensional piezoelectric beam with
//! magnetic effect and a single localized viscous damping on the unit square.
//!
//! The damping depends on `x` only, so the system splits into independent
//! one-dimensional problems along the transverse sine modes
//! `e_j(y) = sqrt(2) sin((2j+1) pi y / 2)`. Each mode is discretized with
//! piecewise-linear elements in `x`, which keeps the discrete generator
//! exactly dissipative in the discrete energy inner product.

// Negated float comparisons are deliberate since they also reject NaN; the
// banded kernels index several arrays by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;

pub use assembly::{build_matrices, energy_norm, full_norm, Grid1D, ModalOperator, OperatorMatrices, ShiftedSolver};
pub use error::{Error, Result};
pub use model::{xi, DampingCoefficient, DampingProfile, DampingShape, ModeIndex, PhysicalParams};
