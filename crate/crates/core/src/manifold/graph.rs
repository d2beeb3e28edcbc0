use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_dist2;

/// Neighbourhood rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphMethod {
    /// Connect all pairs closer than `eps`.
    EpsBall { eps: f64 },
    /// Edge if either point is among the other's `k` nearest.
    SymmetricKnn { k: usize },
    /// Edge only if each is among the other's `k` nearest.
    MutualKnn { k: usize },
}

/// Symmetric graph over the snapshot columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub adjacency: Vec<Vec<bool>>,
    /// Gaussian heat-kernel weights on the edges.
    pub weights: DMatrix<f64>,
    pub method: GraphMethod,
    /// Kernel width; `None` means unweighted.
    pub t_gauss: Option<f64>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.adjacency[i][j]).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(|r| r.iter().filter(|&&b| b).count()).collect()
    }

    /// Minimum, quartiles and maximum of the neighbour counts.
    pub fn degree_stats(&self) -> [usize; 5] {
        let mut d = self.degrees();
        d.sort_unstable();
        let q = |f: f64| d[((d.len() - 1) as f64 * f).round() as usize];
        [d[0], q(0.25), q(0.5), q(0.75), d[d.len() - 1]]
    }
}

/// Indices of the `k` nearest other points to `i`, ties to the lower index.
pub(crate) fn knn_row(dist2: &DMatrix<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..dist2.ncols()).filter(|&j| j != i).collect();
    cand.sort_by(|&a, &b| dist2[(i, a)].total_cmp(&dist2[(i, b)]).then(a.cmp(&b)));
    cand.truncate(k);
    cand
}

fn components(adj: &[Vec<bool>]) -> usize {
    let s = adj.len();
    let mut seen = vec![false; s];
    let mut count = 0;
    for start in 0..s {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for w in 0..s {
                if adj[v][w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// Build a connected neighbourhood graph on the columns of `x`.
pub fn build_graph(x: &DMatrix<f64>, method: GraphMethod, t_gauss: Option<f64>) -> Result<NeighborGraph> {
    let s = x.ncols();
    if s < 3 {
        return Err(Error::InvalidArgument(format!("graph needs at least 3 points, got {s}")));
    }
    if let Some(t) = t_gauss {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("kernel width must be positive, got {t}")));
        }
    }
    let d2 = pairwise_dist2(x);
    let mut adj = vec![vec![false; s]; s];
    match method {
        GraphMethod::EpsBall { eps } => {
            for i in 0..s {
                for j in 0..s {
                    adj[i][j] = i != j && d2[(i, j)] < eps * eps;
                }
            }
        }
        GraphMethod::SymmetricKnn { k } | GraphMethod::MutualKnn { k } => {
            if k == 0 || k >= s {
                return Err(Error::InvalidArgument(format!("need 1 <= k < s, got k={k}, s={s}")));
            }
            let mut directed = vec![vec![false; s]; s];
            for (i, row) in directed.iter_mut().enumerate() {
                for j in knn_row(&d2, i, k) {
                    row[j] = true;
                }
            }
            let mutual = matches!(method, GraphMethod::MutualKnn { .. });
            for i in 0..s {
                for j in 0..s {
                    adj[i][j] = if mutual { directed[i][j] && directed[j][i] } else { directed[i][j] || directed[j][i] };
                }
            }
        }
    }
    let comps = components(&adj);
    if comps > 1 {
        return Err(Error::DisconnectedGraph { components: comps });
    }
    let weights = DMatrix::from_fn(s, s, |i, j| {
        if !adj[i][j] {
            0.0
        } else {
            match t_gauss {
                None => 1.0,
                Some(t) => (-d2[(i, j)] / t).exp(),
            }
        }
    });
    Ok(NeighborGraph { adjacency: adj, weights, method, t_gauss })
}
