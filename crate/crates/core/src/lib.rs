//! Numerical laboratory for shallow elastic shells.
//!
//! The crate evaluates the rescaled three-dimensional energy of a thin shell
//! whose midsurface is the graph of `f^h θ` over a rectangle, the
//! Marguerre-von Kármán and linearized Marguerre-von Kármán plate functionals
//! that arise as its thin-thickness limit, and the explicit recovery
//! deformations connecting the two. The `harness` module drives convergence
//! studies over sequences of thicknesses.

pub mod banded;
pub mod discrete;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod limit_energy;
pub mod material;
pub mod minimize;
pub mod recovery;
pub mod shell3d;

pub use error::{Error, Result};
pub use fields::{Field2, Field3, Grid2, Grid3};
pub use geometry::{Midsurface, ShellGeometry};
pub use limit_energy::{Displacement2D, Regime};
pub use material::{MaterialKind, MaterialModel};

pub type Mat2 = nalgebra::Matrix2<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
