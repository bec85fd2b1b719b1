//! Dynamical optimal transport on triangulated surfaces.
//!
//! Densities live on mesh vertices, momenta on faces, and the Wasserstein
//! geodesic problem is solved in its dual form by an alternating direction
//! method of multipliers. The same machinery gives distances, congested
//! interpolation, minimizing-movement gradient flows and harmonic maps into
//! the space of densities.

pub mod admm;
pub mod error;
pub mod functionals;
pub mod geodesic;
pub mod harmonic;
pub mod io;
pub mod mesh;
pub mod oracle;
pub mod projection;
pub mod spacetime;
pub mod sparse;
pub mod timegrid;

pub use error::{Error, Result};
pub use admm::SolverConfig;
pub use geodesic::{solve_geodesic, GeodesicResult};
pub use mesh::{DensityField, MeshOperators, TriangleMesh};
