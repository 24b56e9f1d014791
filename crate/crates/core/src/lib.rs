pub mod bounds;
pub mod constrained;
pub mod convexity;
pub mod error;
pub mod fbl;
pub mod multi_eve;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use fbl::*;
