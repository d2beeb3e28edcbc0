use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    build_graph, global_linearise, lem_embed, lle_embed, lle_weights, Embedding, EmbeddingMethod, GlobalMap, GraphMethod,
};
use crate::pod::{snapshot_pod, LpodModel, PodBasis, SnapshotSet, Truncation};

/// How the projector is obtained from the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearisation {
    /// Refit an affine map around the current reduced point every iteration.
    Local,
    /// One least-squares map fitted over all snapshots.
    Global,
}

/// Settings of a manifold-learning ROM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManlParams {
    pub method: EmbeddingMethod,
    pub graph: GraphMethod,
    /// Heat-kernel width, `None` for an unweighted graph.
    pub t_gauss: Option<f64>,
    /// LLE regularisation.
    pub delta: f64,
    pub d: usize,
    /// Neighbours used by the local linearisation.
    pub n_lin: usize,
    pub orthonormalise: bool,
    pub linearisation: Linearisation,
}

impl ManlParams {
    /// Symmetric 30-NN graph, unweighted, 20 linearisation neighbours.
    pub fn defaults(method: EmbeddingMethod, d: usize) -> Self {
        ManlParams {
            method,
            graph: GraphMethod::SymmetricKnn { k: 30 },
            t_gauss: None,
            delta: 1e-3,
            d,
            n_lin: 20,
            orthonormalise: true,
            linearisation: Linearisation::Local,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodModel {
    pub basis: PodBasis,
}

/// Embedding of the snapshots in an ambient space (`R^D` or the stage-one space).
#[derive(Debug, Clone, PartialEq)]
pub struct ManlModel {
    /// m×s ambient snapshots.
    pub u_ambient: DMatrix<f64>,
    pub embedding: Embedding,
    /// Column of the zero state.
    pub zero_col: usize,
    pub params: ManlParams,
    /// Present for global linearisation.
    pub global: Option<GlobalMap>,
}

impl ManlModel {
    pub fn y(&self) -> &DMatrix<f64> {
        &self.embedding.y
    }

    pub fn snapshot_count(&self) -> usize {
        self.u_ambient.ncols()
    }
}

/// POD compression to `d̄` followed by manifold learning in the compressed space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    /// D×d̄ stage-one basis.
    pub psi_stage1: DMatrix<f64>,
    /// Manifold model whose ambient snapshots are `Ȳ = ψᵀU`.
    pub inner: ManlModel,
}

impl TwoStageModel {
    pub fn y_bar(&self) -> &DMatrix<f64> {
        &self.inner.u_ambient
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RomModel {
    Pod(PodModel),
    Lpod(LpodModel),
    Manl(ManlModel),
    TwoStage(TwoStageModel),
}

impl RomModel {
    pub fn kind(&self) -> &'static str {
        match self {
            RomModel::Pod(_) => "pod",
            RomModel::Lpod(_) => "lpod",
            RomModel::Manl(_) => "manl",
            RomModel::TwoStage(_) => "two_stage",
        }
    }

    /// Reduced dimension.
    pub fn dim(&self) -> usize {
        match self {
            RomModel::Pod(m) => m.basis.d,
            RomModel::Lpod(m) => m.bases.iter().map(|b| b.d).max().unwrap_or(0),
            RomModel::Manl(m) => m.embedding.d,
            RomModel::TwoStage(m) => m.inner.embedding.d,
        }
    }
}

pub fn train_pod(snapshots: &SnapshotSet, trunc: Truncation) -> Result<PodModel> {
    Ok(PodModel { basis: snapshot_pod(&snapshots.u, trunc)? })
}

/// Embed the columns of `u_ambient` and prepare the reconstruction.
pub fn train_manl(u_ambient: &DMatrix<f64>, zero_col: usize, params: &ManlParams) -> Result<ManlModel> {
    let graph = build_graph(u_ambient, params.graph, params.t_gauss)?;
    let embedding = match params.method {
        EmbeddingMethod::Lem => lem_embed(&graph, params.d)?,
        EmbeddingMethod::Lle => lle_embed(&lle_weights(u_ambient, &graph, params.delta)?, params.d)?,
    };
    let global = match params.linearisation {
        Linearisation::Global => Some(global_linearise(u_ambient, &embedding.y, Some(zero_col))?),
        Linearisation::Local => None,
    };
    Ok(ManlModel { u_ambient: u_ambient.clone(), embedding, zero_col, params: *params, global })
}

/// Stage-one POD to `d_bar` modes, then manifold learning on `Ȳ = ψᵀU`.
pub fn two_stage_offline(snapshots: &SnapshotSet, d_bar: usize, params: &ManlParams) -> Result<TwoStageModel> {
    if params.d >= d_bar {
        return Err(Error::InvalidArgument(format!("need d < d_bar, got d={}, d_bar={d_bar}", params.d)));
    }
    let stage1 = snapshot_pod(&snapshots.u, Truncation::Fixed(d_bar))?;
    let y_bar = stage1.psi.transpose() * &snapshots.u;
    let inner = train_manl(&y_bar, 0, params)?;
    Ok(TwoStageModel { psi_stage1: stage1.psi, inner })
}
