//! Finite element library for nonlocal minimal graph problems.
//!
//! Computes graphs of prescribed fractional mean curvature zero over a bounded
//! domain `Omega`, with Dirichlet data `g` imposed on the complement.  The
//! discretization uses continuous piecewise linear elements on a conforming
//! simplicial mesh of a ball `Lambda` containing `Omega`, singularity-removing
//! quadrature for the double integrals, and either a semi-implicit gradient
//! flow or a damped Newton iteration for the nonlinear algebraic system.
//!
//! Module map:
//! - [`kernel`]: the scalar weight functions of the nonlocal area integrand
//! - [`mesh`]: simplicial meshes, generators, validation and file formats
//! - [`quadrature`]: element-pair rules for singular kernels and far-field tails
//! - [`femspace`]: discrete functions, exterior data, quasi-interpolation
//! - [`assembly`]: energy, residual and matrix assembly over pair space
//! - [`solvers`]: linear solves, gradient flow, damped Newton
//! - [`metrics`]: geometric errors, nonlocal normals, seminorms, references
//! - [`oracle`]: independent d=1 brute-force checks (energies, perimeters)

pub mod assembly;
pub mod cheb;
pub mod error;
pub mod femspace;
pub mod kernel;
pub mod mesh;
pub mod metrics;
pub mod oracle;
pub mod quadrature;
pub mod rules;
pub mod solvers;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
