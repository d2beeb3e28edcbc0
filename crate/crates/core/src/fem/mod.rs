//! Total-Lagrangian finite elements for the periodic fluctuation problem.

pub mod assembly;
pub mod element;
pub mod material;
pub mod solver;
pub mod sparse;

pub use assembly::{apply_periodic, assemble, volume_average_stress, Assembler, FullSystem};
pub use element::{element_stiffness_residual, ElementGeometry, QuadratureRule};
pub use material::{neo_hooke, MaterialParams, StressState};
pub use solver::{newton_solve, FemProblem, SolverSettings, StepTrace};
pub use sparse::{CsrMatrix, SparseSolver};
