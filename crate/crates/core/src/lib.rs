//! Projection-based reduced order models for periodic hyperelastic RVEs.
//!
//! The crate covers the full-order Tet10 solver ([`fem`]), linear reduction by
//! snapshot POD and clustered local POD ([`pod`]), graph-based manifold
//! learning with local linearisation ([`manifold`]), the reduced Newton
//! solvers ([`rom`]) and an experiment harness ([`harness`]).

pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;

pub use error::{Error, Result};
pub mod manifold;
pub mod pod;
pub mod rom;
pub mod harness;
