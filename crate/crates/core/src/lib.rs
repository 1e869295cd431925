//! Observable/hidden decomposition of finite-dimensional conservative linear
//! systems.
//!
//! A conservative system `V' = -i Omega V + F` with Hermitian `Omega` is split
//! into an observable space `H1` and a hidden space `H2`. This crate computes
//! the parts of each that are coupled to, or invisible from, the other side,
//! checks the orbit identities and multiplicity bound that govern them, and
//! compares the reduced memory-kernel dynamics on `H1` with full propagation.

pub mod compare;
pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod subspace;
pub mod system;

pub use decomposition::{decompose, is_reconstructible, multiplicity, verify_theorem, FourWayDecomposition, TheoremReport};
pub use dynamics::{make_kernel, propagate_full, propagate_reduced, KernelSide, ResponseKernel, TimeGrid, Trajectory};
pub use error::{Error, Result};
pub use lattice::{build_lattice_system, LatticeSpec};
pub use subspace::{krylov_closure, orbit, orthonormalize, projector_distance, SubspaceBasis};
pub use system::{assemble_full, random_system, BlockSystem, FullOperator};
