//! Graph-based manifold learning, linearisation and intrinsic dimension.

pub mod corrdim;
pub mod embed;
pub mod graph;
pub mod linearise;

pub use corrdim::{correlation_dimension, CorrDimEstimate};
pub use embed::{lem_embed, lle_embed, lle_weights, Embedding, EmbeddingMethod};
pub use graph::{build_graph, GraphMethod, NeighborGraph};
pub use linearise::{global_linearise, local_linearise, nearest_in_reduced, GlobalMap, LocalTangent};
