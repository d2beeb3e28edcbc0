//! Snapshot POD and clustered local POD (offline phase).

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{col_dist2, sym_eigen_ascending, thin_qr};

/// Load metadata of one snapshot column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    /// `None` for the zero column.
    pub path: Option<usize>,
    pub step: usize,
    pub h_bar: [[f64; 3]; 3],
}

/// Snapshot matrix `U` (D×s) whose column 0 is the zero state.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub u: DMatrix<f64>,
    pub meta: Vec<SnapshotMeta>,
}

impl SnapshotSet {
    pub fn new(u: DMatrix<f64>, meta: Vec<SnapshotMeta>) -> Result<Self> {
        if u.ncols() < 2 || meta.len() != u.ncols() {
            return Err(Error::InvalidArgument(format!(
                "need >= 2 snapshot columns with metadata, got {} columns and {} records",
                u.ncols(),
                meta.len()
            )));
        }
        if u.column(0).iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidArgument("snapshot column 0 must be the zero state".into()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite snapshot entry".into()));
        }
        Ok(SnapshotSet { u, meta })
    }

    /// Prepend the zero column to `columns`.
    pub fn with_zero_column(dim: usize, columns: &[DVector<f64>], meta: Vec<SnapshotMeta>) -> Result<Self> {
        let mut u = DMatrix::zeros(dim, columns.len() + 1);
        for (j, c) in columns.iter().enumerate() {
            u.set_column(j + 1, c);
        }
        let mut all = vec![SnapshotMeta { path: None, step: 0, h_bar: [[0.0; 3]; 3] }];
        all.extend(meta);
        Self::new(u, all)
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }
}

/// Fixed mode count or information ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Fixed(usize),
    Ratio(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// D×d orthonormal modes.
    pub psi: DMatrix<f64>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    pub d: usize,
}

/// Descending eigenvalues and eigenvectors of `UᵀU/(s−1)`, with tiny
/// negative values clamped.
fn covariance_eigen(u: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let s = u.ncols();
    let c = (u.transpose() * u) / ((s.max(2) - 1) as f64);
    let (vals, vecs) = sym_eigen_ascending(&c);
    let lam1 = vals.iter().cloned().fold(0.0f64, f64::max);
    let floor = -1e-12 * lam1.max(1.0);
    let mut out_vals = DVector::zeros(s);
    let mut out_vecs = DMatrix::zeros(s, s);
    for k in 0..s {
        let src = s - 1 - k;
        let v = vals[src];
        if v < floor {
            return Err(Error::NegativeEigenvalue(v));
        }
        out_vals[k] = v.max(0.0);
        out_vecs.set_column(k, &vecs.column(src));
    }
    Ok((out_vals, out_vecs))
}

/// Descending covariance eigenvalues of a snapshot matrix.
pub fn pod_eigenvalues(u: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(covariance_eigen(u)?.0)
}

/// Number of eigenvalues above `1e-12 λ₁`.
pub fn numerical_rank(eigenvalues: &DVector<f64>) -> usize {
    let lam1 = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if lam1 <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&v| v > 1e-12 * lam1).count()
}

/// Snapshot POD of the columns of `u`.
pub fn snapshot_pod(u: &DMatrix<f64>, trunc: Truncation) -> Result<PodBasis> {
    let (vals, vecs) = covariance_eigen(u)?;
    let rank = numerical_rank(&vals);
    let d = match trunc {
        Truncation::Fixed(d) => {
            if d == 0 || d > rank {
                return Err(Error::RankDeficient { requested: d, rank });
            }
            d
        }
        Truncation::Ratio(r) => {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidArgument(format!("information ratio must be in (0, 1], got {r}")));
            }
            if rank == 0 {
                return Err(Error::RankDeficient { requested: 1, rank });
            }
            let total: f64 = vals.iter().sum();
            let mut acc = 0.0;
            let mut pick = rank;
            for (i, v) in vals.iter().enumerate().take(rank) {
                acc += v;
                if acc / total > r {
                    pick = i + 1;
                    break;
                }
            }
            pick
        }
    };
    let mut psi = u * vecs.columns(0, d);
    for k in 0..d {
        let n = psi.column(k).norm();
        psi.column_mut(k).unscale_mut(n);
    }
    // second Gram-Schmidt pass for the weakly excited modes
    let (q, r) = thin_qr(&psi);
    let mut psi = q;
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            psi.column_mut(k).neg_mut();
        }
    }
    Ok(PodBasis { psi, eigenvalues: vals, d })
}

/// Seeded random stream used for every stochastic step.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngStream { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for a labelled purpose.
    pub fn derived(seed: u64, label: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label);
        RngStream { seed, rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// D×k centroids.
    pub centroids: DMatrix<f64>,
    /// Members of each cluster, ascending.
    pub clusters: Vec<Vec<usize>>,
    /// Cost after every assignment sweep of the accepted run.
    pub cost_history: Vec<f64>,
    pub restarts: usize,
}

fn nearest_centroid(u: &DMatrix<f64>, i: usize, c: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..c.ncols() {
        let d = col_dist2(u, i, c, j);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm with restarts until every cluster has `min_core` members.
pub fn kmeans_lloyd(u: &DMatrix<f64>, k: usize, rng: &mut RngStream, min_core: usize, max_restarts: usize) -> Result<KMeansResult> {
    let s = u.ncols();
    if k == 0 || k > s {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= s, got k={k}, s={s}")));
    }
    for attempt in 0..max_restarts.max(1) {
        let init = sample(rng.rng(), s, k).into_vec();
        let mut centroids = DMatrix::zeros(u.nrows(), k);
        for (j, &i) in init.iter().enumerate() {
            centroids.set_column(j, &u.column(i));
        }
        let mut assign = vec![usize::MAX; s];
        let mut history = Vec::new();
        for _ in 0..10_000 {
            let mut changed = false;
            let mut cost = 0.0;
            for i in 0..s {
                let (j, d) = nearest_centroid(u, i, &centroids);
                cost += d;
                if assign[i] != j {
                    assign[i] = j;
                    changed = true;
                }
            }
            history.push(cost);
            if !changed {
                break;
            }
            for j in 0..k {
                let members: Vec<usize> = (0..s).filter(|&i| assign[i] == j).collect();
                if members.is_empty() {
                    continue;
                }
                let mut c = DVector::zeros(u.nrows());
                for &i in &members {
                    c += u.column(i);
                }
                centroids.set_column(j, &(c / members.len() as f64));
            }
        }
        let clusters: Vec<Vec<usize>> = (0..k).map(|j| (0..s).filter(|&i| assign[i] == j).collect()).collect();
        if clusters.iter().all(|c| c.len() >= min_core) {
            return Ok(KMeansResult { centroids, clusters, cost_history: history, restarts: attempt });
        }
    }
    Err(Error::ClusteringFailed { restarts: max_restarts })
}

/// Cluster size limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterBounds {
    pub core_min: usize,
    pub min: usize,
    pub max: usize,
}

/// Grow each cluster with the nearest non-members of its centroid up to
/// `max(min, min(|C| + ceil(r |C|), max))`, capped at `s`.
pub fn enlarge_clusters(u: &DMatrix<f64>, centroids: &DMatrix<f64>, clusters: &[Vec<usize>], r: f64, bounds: &ClusterBounds) -> Vec<Vec<usize>> {
    let s = u.ncols();
    clusters
        .iter()
        .enumerate()
        .map(|(j, members)| {
            let n = members.len();
            let grown = n + (r * n as f64).ceil() as usize;
            let target = bounds.min.max(grown.min(bounds.max)).min(s).max(n);
            let mut out = members.clone();
            if target > n {
                let mut inside = vec![false; s];
                for &i in members {
                    inside[i] = true;
                }
                let mut cand: Vec<(f64, usize)> =
                    (0..s).filter(|&i| !inside[i]).map(|i| (col_dist2(u, i, centroids, j), i)).collect();
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                out.extend(cand.iter().take(target - n).map(|c| c.1));
            }
            out.sort_unstable();
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpodParams {
    pub k: usize,
    /// Overlap ratio.
    pub r: f64,
    pub bounds: ClusterBounds,
    pub max_restarts: usize,
}

impl Default for LpodParams {
    fn default() -> Self {
        LpodParams { k: 6, r: 1.0, bounds: ClusterBounds { core_min: 7, min: 30, max: 50 }, max_restarts: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpodModel {
    pub centroids: DMatrix<f64>,
    /// Enlarged memberships.
    pub clusters: Vec<Vec<usize>>,
    /// Core memberships from k-means.
    pub core_clusters: Vec<Vec<usize>>,
    /// One centroid-centred basis per cluster.
    pub bases: Vec<PodBasis>,
    pub params: LpodParams,
}

/// Cluster, enlarge and fit a centred POD basis per cluster.
pub fn lpod_offline(u: &DMatrix<f64>, params: &LpodParams, trunc: Truncation, rng: &mut RngStream) -> Result<LpodModel> {
    let km = kmeans_lloyd(u, params.k, rng, params.bounds.core_min, params.max_restarts)?;
    let clusters = enlarge_clusters(u, &km.centroids, &km.clusters, params.r, &params.bounds);
    let bases = clusters
        .iter()
        .enumerate()
        .map(|(j, members)| {
            let mut local = DMatrix::zeros(u.nrows(), members.len());
            for (c, &i) in members.iter().enumerate() {
                local.set_column(c, &(u.column(i) - km.centroids.column(j)));
            }
            snapshot_pod(&local, trunc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LpodModel { centroids: km.centroids, clusters, core_clusters: km.clusters, bases, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_orthogonal_snapshots() {
        let u = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let b = snapshot_pod(&u, Truncation::Fixed(2)).unwrap();
        assert_relative_eq!(b.psi.column(0).abs(), DVector::from_vec(vec![1.0, 0.0, 0.0]), epsilon = 1e-12);
        assert_relative_eq!(b.psi.column(1).abs(), DVector::from_vec(vec![0.0, 1.0, 0.0]), epsilon = 1e-12);
        assert_relative_eq!(b.eigenvalues[0] / b.eigenvalues[1], 9.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn single_snapshot() {
        let u = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let b = snapshot_pod(&u, Truncation::Fixed(1)).unwrap();
        assert_relative_eq!(b.psi.column(0).abs(), DVector::from_vec(vec![0.6, 0.8]), epsilon = 1e-12);
    }

    #[test]
    fn too_many_modes() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(snapshot_pod(&u, Truncation::Fixed(2)), Err(Error::RankDeficient { requested: 2, rank: 1 })));
    }

    #[test]
    fn line_clusters() {
        let u = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 10.0, 11.0]);
        for seed in 0..10 {
            let km = kmeans_lloyd(&u, 2, &mut RngStream::new(seed), 1, 100).unwrap();
            let mut sets = km.clusters.clone();
            sets.sort();
            assert_eq!(sets, vec![vec![0, 1], vec![2, 3]]);
            let mut c: Vec<f64> = km.centroids.iter().cloned().collect();
            c.sort_by(f64::total_cmp);
            assert_eq!(c, vec![0.5, 10.5]);
        }
    }

    #[test]
    fn enlarge_to_all() {
        let u = DMatrix::from_row_slice(1, 5, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let c = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = ClusterBounds { core_min: 1, min: 30, max: 50 };
        let out = enlarge_clusters(&u, &c, &[vec![0, 1, 2]], 1.0, &b);
        assert_eq!(out, vec![vec![0, 1, 2, 3, 4]]);
    }
}
