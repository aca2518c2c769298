//! Integer-constrained total variation on Cartesian grids: the discrete dual
//! total variation, a mixed-integer model with outer-approximation cuts and
//! the experiments built on top of them.

pub mod error;
pub mod exec;
pub mod experiments;
pub mod field;
pub mod geometry;
pub mod lp;
pub mod mesh;
pub mod milp;
pub mod oa;
pub mod rt0;
pub mod tvh;

pub use error::{Error, Result};
pub use exec::Exec;
