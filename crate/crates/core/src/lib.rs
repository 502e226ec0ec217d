//! Summation-by-parts discontinuous Galerkin operators on triangles and
//! tetrahedra built from collapsed-coordinate tensor-product quadrature, with
//! sum-factorized operator application, modal and nodal formulations, and a
//! linear-advection solver on periodic curvilinear meshes.

pub mod error;
pub mod harness;
pub mod jacobi;
pub mod mesh;
pub mod monomial;
pub mod physop;
pub mod pkd;
pub mod refelem;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
