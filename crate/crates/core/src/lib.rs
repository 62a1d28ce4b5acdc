// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod error;
pub mod format;
pub mod functionals;
pub mod mesh;
pub mod propagation;
pub mod quadrature;
pub mod radial_oracle;
pub mod solver;
pub mod suite;
pub mod weights;
