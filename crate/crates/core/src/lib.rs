//! Adaptive hybrid high-order solver for the clamped biharmonic problem on
//! triangular meshes, with a posteriori error estimation and newest-vertex
//! bisection refinement.

pub mod adapt;
pub mod basis;
pub mod error;
pub mod estimator;
pub mod global_system;
pub mod hho_local;
pub mod mesh;
pub mod problems;
pub mod quadrature;

pub use error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
