//! Numerical laboratory for bilinear operators on generalized weighted Morrey
//! spaces over ball Banach function spaces.

pub mod error;
pub mod exponents;
pub mod families;
pub mod geometry;
pub mod operators;
pub mod quadrature;
pub mod spaces;
pub mod verify;
pub mod weights;

pub use error::{LabError, Result};
pub use geometry::{Ball, Cube, Grid, GridFunction, Point, Region};
