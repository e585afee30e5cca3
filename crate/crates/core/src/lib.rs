// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod scaled;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use scaled::Scaled;
pub mod cloakmodel;
pub mod fieldsolve;
pub mod hetero;
pub mod observables;
pub mod ode;
pub mod quad;
pub mod radialode;
pub mod roots;
pub mod tuner;
