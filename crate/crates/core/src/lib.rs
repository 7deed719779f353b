//! Temporal alignment of multiple signals on Riemannian manifolds.

pub mod align;
pub mod baselines;
pub mod barycenter;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod loss;
pub mod manifolds;
pub mod resample;
pub mod signal;
pub mod warpnet;

pub use error::{Result, RtwError};
pub use manifolds::ManifoldDescriptor;
pub use rtw_autodiff::Real;
pub use signal::Signal;

pub type Signal64 = Signal<f64>;
