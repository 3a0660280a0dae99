//! Decoupled ensemble time stepping for two-dimensional, incompressible,
//! viscoresistive MHD written in Elsässer variables.
//!
//! Every ensemble member carries its own viscosity pair, forcing, initial and
//! boundary data, yet at each time step all members share one coefficient
//! matrix for the `v` update and one for the `w` update. Each matrix is
//! factorized once and applied to a block of `J` right-hand sides.
//!
//! Module map:
//! - [`mesh`]: triangulations, barycentric refinement, boundary markers.
//! - [`fem`]: Scott–Vogelius `(P2)^2 / P1-disc` spaces, quadrature, assembly, norms.
//! - [`sparse`]: CSR matrices and the reusable sparse LU factorization.
//! - [`ensemble`]: member parameters, Elsässer transforms, ensemble statistics, eddy viscosity.
//! - [`stepper`]: the ensemble time-stepping scheme and its diagnostics.
//! - [`experiments`]: manufactured solutions, convergence studies, benchmark problems, output.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
