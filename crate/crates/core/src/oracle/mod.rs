//! Finite-coupling cross-check: exact diagonalization in a truncated
//! oscillator basis, slope extraction, and the exactly solvable pair.

mod delta;
mod ed;
mod fit;
mod two_body;

pub use delta::{DeltaTensor, MAX_ORBITALS};
pub use ed::{
    block_lanczos, diagonalize, EdConfig, EdResult, EdSolver, ProductBasis, TrackedPoint,
    DENSE_ED_LIMIT, MAX_ED_DIMENSION,
};
pub use fit::{slope_fit, SlopeFit, MIN_FIT_COUPLING};
pub use two_body::{coupling_for_relative_energy, two_body_reference};
