//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records tensor operations as they are evaluated; [`Tape::grad`] pulls the
//! gradient of a scalar back onto any set of recorded leaves. The primitive set is small
//! and geared towards warping losses: elementwise arithmetic with broadcasting, matrix
//! products, reductions, gathers, sinc, and spectral functions of symmetric matrices.

mod adam;
mod error;
pub mod gradcheck;
pub mod linalg;
mod scalar;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use error::{AutodiffError, Result};
pub use scalar::{sinc, sinc_prime, Real};
pub use tape::{SymFn, Tape, Var};
pub use tensor::Tensor;

pub type Tape64 = Tape<f64>;
pub type Tensor64 = Tensor<f64>;
pub type AdamState64 = AdamState<f64>;
