//! High-order interior-penalty discontinuous Galerkin solver for the
//! monodomain reaction-diffusion equation on polygonal (Voronoi) meshes.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`], [`quadrature`]: planar primitives and Gauss rules on
//!   segments, triangles and polygons (centroid fan).
//! - [`mesh`]: polygonal meshes with region tags and anisotropic
//!   conductivities, a Lloyd-relaxed clipped-Voronoi generator, and an ASCII
//!   import/export format.
//! - [`dgspace`]: broken polynomial spaces with per-element orthonormal bases
//!   (scaled monomials + modified Gram-Schmidt), projections and norms.
//! - [`assembly`]: mass/stiffness assembly for the symmetric interior-penalty
//!   form, penalty bookkeeping, and sparse linear solvers ([`linalg`]).
//! - [`ionic`]: membrane models. A six-variable conductance-based neuronal
//!   model with ion-concentration dynamics, and a cubic bistable reaction for
//!   verification against an exact traveling wave.
//! - [`solver`]: semi-implicit Crank-Nicolson time stepping with explicit
//!   multistep extrapolation of the ionic current, checkpointing, probes and
//!   snapshot output.
//! - [`analysis`]: exact-wave errors, convergence tables, conduction-velocity
//!   estimation and front over/undershoot metrics.

pub mod analysis;
pub mod assembly;
pub mod dgspace;
pub mod geometry;
pub mod ionic;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod solver;

pub use dgspace::DgSpace;
pub use mesh::PolyMesh;
