pub mod dichotomy;
pub mod error;
pub mod finite_delay;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod phase_space;
pub mod serde_util;
pub mod shadowing;
pub mod volterra;

pub use error::{Error, Result};
