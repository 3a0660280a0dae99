//! Scott–Vogelius finite elements: continuous vector P2 velocities and
//! discontinuous scalar P1 pressures.

pub mod assembly;
pub mod dirichlet;
pub mod norms;
pub mod quadrature;
pub mod space;

pub use assembly::{
    assemble_convection, assemble_divergence, assemble_mass, assemble_stiffness, Assembler, ConvectionForm,
};
pub use dirichlet::apply_dirichlet;
pub use norms::{
    divergence_l2, error_against, interpolate, interpolate_scalar, norm_h1, norm_l2, seminorm_h1, ErrorNorms,
};
pub use quadrature::QuadratureRule;
pub use space::{BoundaryNode, CellGeometry, FeSpace, SpaceKind};
