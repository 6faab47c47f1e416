pub mod assembly;
pub mod bench;
pub mod bernstein;
pub mod dirichlet;
pub mod dual;
pub mod error;
pub mod materials;
pub mod mesh;
pub mod nedelec;
pub mod quadrature;
pub mod simplex;
pub mod solver;
pub mod sparse;

pub use error::{FemError, Result};
