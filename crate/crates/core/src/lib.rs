//! Simulation and analysis of resonance-constrained fermions on a 1D lattice.
//!
//! The crate builds the driven two-species Fermi-Hubbard model (lab and
//! rotated frames), its resonant density-dependent tunneling limit and the
//! flux-error variant over Fock bases, propagates few-body states with dense
//! or Krylov exponentials, and provides the closed-form bound-state,
//! scattering and scar-counting results used to check the numerics.

pub mod analytic;
pub mod boundstate;
pub mod error;
pub mod fock;
pub mod hamiltonians;
pub mod observables;
pub mod operator;
pub mod propagator;
pub mod quadrature;
pub mod robustness;
pub mod scattering;
pub mod scars;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{enumerate_basis, parse_loadout, Basis, Boundary, FockState, SignMode, SiteOccupation};
pub use hamiltonians::ModelParams;
pub use operator::SparseOperator;
pub use propagator::{eigensolve, evolve, EigenMode, EvolutionPlan, Method, Wavefunction};
