// `!(x > 0.0)` checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisim;
pub mod analysis;
pub mod calib;
pub mod error;
pub mod fock;
pub mod gauss;
pub mod quad;
pub mod simplex;
pub mod tomo;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, PureState};
pub use gauss::{GaussianComponent, GaussianMixtureWigner};

pub type C64 = num_complex::Complex64;
