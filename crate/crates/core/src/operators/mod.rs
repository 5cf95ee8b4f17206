//! Bilinear kernels and operators, maximal functions, and linear operators.

pub mod averaging;
pub mod bilinear;
pub mod kernel;
pub mod linear;
pub mod maximal;

pub use averaging::averaging_operator;
pub use bilinear::{
    apply_nodes, bilinear_commutator, bilinear_fractional, bilinear_principal, extended_bilinear,
    extended_bilinear_commutator, local_ladder, maximal_truncated, truncated_bilinear, truncated_ladder,
    truncated_majorant, CommutatorValue, ExtendedOptions, Slot, Truncation,
};
pub use kernel::{sphere_integral, BilinearKernel, KernelForm, SphereFunction};
pub use linear::{linear_commutator, riesz_potential, LinearKernel};
pub use maximal::{hl_maximal, sharp_maximal};
