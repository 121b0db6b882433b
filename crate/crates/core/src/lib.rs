//! Discrete elliptic variational inequalities, friction problems of the second
//! kind and jointly convex generalized Nash equilibrium problems on structured
//! finite-difference grids.

pub mod assembly;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod friction;
pub mod gnep;
pub mod mesh;
pub mod report;
pub mod sparse;
pub mod vi;

pub use error::{Error, Result};
pub use field::{Field, ScalarFn};
