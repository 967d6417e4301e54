//! Strong-coupling spectra of few fermions in a one-dimensional trap.
//!
//! Near infinite contact repulsion the eigenstates are built from one
//! free-fermion Slater determinant, with one amplitude per ordering sector of
//! the particles. Energies follow `E = E_F − K/g`, where `K` solves a weighted
//! graph-Laplacian eigenproblem over the sectors. The crate provides the
//! single-particle orbitals, the determinant, the boundary weights, the
//! sector graph, the `K` spectrum, and an exact-diagonalization cross-check
//! at finite coupling.
//!
//! Units: `ħ = m = ω = 1` for the harmonic trap.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod mc;
pub mod num;
pub mod oracle;
pub mod quadrature;
pub mod sectors;
pub mod slater;
pub mod spectrum;
pub mod trap;
pub mod weights;

/// Crate version, recorded in result provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use num::Real;
pub use sectors::{laplacian, ComponentSpec, SectorGraph, SectorLaplacian};
pub use slater::SlaterState;
pub use spectrum::{
    expansion, solve_sectors, EnergyExpansion, KSpectrum, SectorSolution, SectorWavefunction,
    SymmetryClass,
};
pub use trap::{HarmonicOscillator, Orbital, OrbitalSource, TabulatedOptions, TabulatedPotential, Trap};
pub use weights::{all_gammas, gamma, BoundaryWeight, IntegrationConfig, Method};

pub type Orbital64 = Orbital<f64>;
pub type Slater64 = SlaterState<f64>;
pub type Slater32 = SlaterState<f32>;
pub type KSpectrum64 = KSpectrum<f64>;
pub type KSpectrum32 = KSpectrum<f32>;
pub type Laplacian64 = SectorLaplacian<f64>;
