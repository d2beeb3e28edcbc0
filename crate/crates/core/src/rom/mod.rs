//! Reduced Newton solvers on POD, local POD and manifold-learning bases.

pub mod model;
pub mod online;

pub use model::{
    train_manl, train_pod, two_stage_offline, Linearisation, ManlModel, ManlParams, PodModel, RomModel, TwoStageModel,
};
pub use online::{
    rom_solve, rom_solve_lpod, rom_solve_manl, rom_solve_pod, rom_solve_two_stage, ReducedState, SolveTrace,
    TRACE_CSV_HEADER,
};
