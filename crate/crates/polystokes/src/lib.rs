//! Divergence-free nonconforming virtual element method (VEM) for the 2D
//! stationary Stokes problem on convex polygonal meshes, orders k = 1, 2, 3.
//!
//! The velocity space is the nonconforming H(div)-enriched virtual element
//! space whose per-cell divergence lands in P_{k-1}. A basis of the discrete
//! divergence-free subspace is built explicitly from vertex, edge and cell
//! functions, which eliminates the pressure and reduces the saddle-point
//! system to a symmetric positive definite one solved by conjugate gradients.
//! The pressure is recovered afterwards by least squares.
//!
//! Module map:
//! - [`mesh`]: polygonal meshes, generators (uniform squares, Lloyd-relaxed
//!   Voronoi), topology, text file I/O.
//! - [`polybasis`]: scaled monomials on cells and edges, polygon quadrature,
//!   edge restriction, the gradient/complement splitting of vector polynomials.
//! - [`vem_local`]: per-cell kernels (projector, stiffness, divergence, load,
//!   interpolation).
//! - [`assembly`]: global DOF numbering and sparse system assembly.
//! - [`divfree`]: the divergence-free basis and the boundary lifting.
//! - [`solver`]: CG, the reduced SPD solve, pressure recovery, Uzawa baseline.
//! - [`harness`]: manufactured solutions, error norms, convergence reports,
//!   CSV/SVG output.

pub mod assembly;
pub mod divfree;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod polybasis;
pub mod solver;
pub mod sparse;
pub mod vem_local;

pub use geometry::Point2;
pub use mesh::Mesh;
