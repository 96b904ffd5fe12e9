//! Tangent-dynamics and geodesic-spread estimators of orbital instability for
//! Hamiltonian systems `H = ½ Σ p²/m + V(q)`.
//!
//! * [`systems`]: potentials, derivatives, phase-space state.
//! * [`integrate`]: velocity Verlet and RK4 base runs, arc-length accumulators.
//! * [`tangent`]: Benettin and two-trajectory exponents, finite-difference oracle.
//! * [`geodesic`]: Jacobi spread equation, Floquet oracle, Eisenhart reduction.
//! * [`compare`]: fixed-arc-length differences, variation identity, spectra.

pub mod compare;
pub mod error;
pub mod geodesic;
pub mod integrate;
pub mod systems;
pub mod tangent;
mod variational;

pub mod acceptance;

pub use error::{Error, Result};
pub use integrate::{NormKind, RunConfig, Scheme, TrajectoryRecord};
pub use systems::{Hamiltonian, PhaseState, PotentialKind, SystemSpec};
pub use variational::VariationalFlow;
