//! Structured Tet10 cube meshes, pore carving and periodic node pairing.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local edge table for Tet10 midside nodes 4..9.
pub const TET10_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)];

/// Quadratic tetrahedral mesh of a cube `[0, L]^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    /// Node coordinates in mm.
    pub nodes: Vec<[f64; 3]>,
    /// Corner nodes 0..4 then midside nodes per [`TET10_EDGES`].
    pub elements: Vec<[usize; 10]>,
    /// Cube edge length in mm.
    pub edge_length: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 10] {
        let mut x = [[0.0; 3]; 10];
        for (a, &n) in self.elements[e].iter().enumerate() {
            x[a] = self.nodes[n];
        }
        x
    }

    /// Volume of the straight-sided tetrahedron spanned by the corners of `e`.
    pub fn element_volume(&self, e: usize) -> f64 {
        let x = self.element_coords(e);
        tet_volume(&x[0], &x[1], &x[2], &x[3])
    }

    /// Centroid of the corner nodes.
    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let x = self.element_coords(e);
        let mut c = [0.0; 3];
        for a in 0..4 {
            for k in 0..3 {
                c[k] += 0.25 * x[a][k];
            }
        }
        c
    }
}

fn tet_volume(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], d: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]);
    det / 6.0
}

/// Spherical voids to carve out of the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoreSpec {
    pub centers: Vec<[f64; 3]>,
    pub radius: f64,
}

impl PoreSpec {
    pub fn none() -> Self {
        PoreSpec { centers: Vec::new(), radius: 0.0 }
    }
}

/// Structured cube mesh: `n^3` hexahedra, each split into six Kuhn tetrahedra,
/// promoted to Tet10.
pub fn generate_cube_mesh(edge_length: f64, divisions: usize) -> Result<Mesh> {
    if divisions < 1 || !(edge_length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need edge_length > 0 and divisions >= 1, got {edge_length}, {divisions}"
        )));
    }
    let n = divisions;
    let h = edge_length / n as f64;
    let coord = |i: usize| if i == n { edge_length } else { i as f64 * h };
    let vid = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;

    let mut nodes = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([coord(i), coord(j), coord(k)]);
            }
        }
    }

    // Each permutation of the axes gives a monotone path from corner 000 to 111.
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets: Vec<[usize; 4]> = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut p = [i, j, k];
                    let mut t = [vid(p[0], p[1], p[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        t[step + 1] = vid(p[0], p[1], p[2]);
                    }
                    if tet_volume(&nodes[t[0]], &nodes[t[1]], &nodes[t[2]], &nodes[t[3]]) < 0.0 {
                        t.swap(1, 2);
                    }
                    tets.push(t);
                }
            }
        }
    }

    let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::with_capacity(tets.len());
    for t in &tets {
        let mut el = [0usize; 10];
        el[..4].copy_from_slice(t);
        for (m, &(a, b)) in TET10_EDGES.iter().enumerate() {
            let key = (t[a].min(t[b]), t[a].max(t[b]));
            let id = *edge_mid.entry(key).or_insert_with(|| {
                let (xa, xb) = (nodes[key.0], nodes[key.1]);
                nodes.push([
                    0.5 * (xa[0] + xb[0]),
                    0.5 * (xa[1] + xb[1]),
                    0.5 * (xa[2] + xb[2]),
                ]);
                nodes.len() - 1
            });
            el[4 + m] = id;
        }
        elements.push(el);
    }
    Ok(Mesh { nodes, elements, edge_length })
}

/// Remove elements whose corner centroid lies inside a pore, then drop
/// fragments that are not face-connected to the main solid and renumber.
pub fn carve_pores(mesh: &Mesh, pores: &PoreSpec) -> Result<Mesh> {
    let l = mesh.edge_length;
    for (idx, c) in pores.centers.iter().enumerate() {
        if c.iter().any(|&x| x - pores.radius <= 0.0 || x + pores.radius >= l) {
            return Err(Error::PoreTouchesBoundary { index: idx });
        }
    }
    if pores.centers.is_empty() {
        return Ok(mesh.clone());
    }
    let r2 = pores.radius * pores.radius;
    let kept: Vec<usize> = (0..mesh.element_count())
        .filter(|&e| {
            let c = mesh.element_centroid(e);
            !pores.centers.iter().any(|p| {
                let d2: f64 = (0..3).map(|k| (c[k] - p[k]).powi(2)).sum();
                d2 < r2
            })
        })
        .collect();
    let kept = largest_face_component(mesh, &kept);
    Ok(compact(mesh, &kept))
}

/// Elements of `subset` in the largest face-connected component, in order.
fn largest_face_component(mesh: &Mesh, subset: &[usize]) -> Vec<usize> {
    let mut faces: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
    for (pos, &e) in subset.iter().enumerate() {
        let c = &mesh.elements[e];
        for skip in 0..4 {
            let mut f = [0; 3];
            let mut m = 0;
            for a in 0..4 {
                if a != skip {
                    f[m] = c[a];
                    m += 1;
                }
            }
            f.sort_unstable();
            faces.entry(f).or_default().push(pos);
        }
    }
    let mut adj = vec![Vec::new(); subset.len()];
    for owners in faces.values() {
        if let [a, b] = owners[..] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut comp = vec![usize::MAX; subset.len()];
    let mut sizes = Vec::new();
    for start in 0..subset.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    let best = (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)));
    match best {
        Some(b) => subset.iter().enumerate().filter(|(p, _)| comp[*p] == b).map(|(_, &e)| e).collect(),
        None => Vec::new(),
    }
}

fn compact(mesh: &Mesh, kept: &[usize]) -> Mesh {
    let mut used = vec![false; mesh.node_count()];
    for &e in kept {
        for &n in &mesh.elements[e] {
            used[n] = true;
        }
    }
    let mut new_id = vec![usize::MAX; mesh.node_count()];
    let mut nodes = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            new_id[i] = nodes.len();
            nodes.push(mesh.nodes[i]);
        }
    }
    let elements = kept
        .iter()
        .map(|&e| {
            let mut el = mesh.elements[e];
            for n in el.iter_mut() {
                *n = new_id[*n];
            }
            el
        })
        .collect();
    Mesh { nodes, elements, edge_length: mesh.edge_length }
}

/// Periodic identification of boundary dofs.
///
/// Dofs are numbered `3 * node + component`. Each node on a plus face (any
/// coordinate equal to `L`) is slaved to the node obtained by replacing those
/// coordinates by 0. The node at the origin is pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPairing {
    /// Full dof indices kept as unknowns, ascending. Position = reduced index.
    pub independent_dofs: Vec<usize>,
    /// Full dof indices slaved to a partner, ascending.
    pub dependent_dofs: Vec<usize>,
    /// Dependent dof to the (independent or pinned) dof it copies.
    pub partner_of: BTreeMap<usize, usize>,
    /// Node whose three fluctuation dofs are fixed to zero.
    pub pinned_node: usize,
    /// Full dof to reduced index; `None` for pinned dofs and dependents of them.
    pub dof_map: Vec<Option<usize>>,
}

impl PeriodicPairing {
    /// Number of independent unknowns `D`.
    pub fn dim(&self) -> usize {
        self.independent_dofs.len()
    }

    pub fn full_dim(&self) -> usize {
        self.dof_map.len()
    }

    /// Full fluctuation field from independent values (`T u`).
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.dof_map.iter().map(|m| m.map_or(0.0, |i| u[i])).collect()
    }

    /// Independent values read off a full field.
    pub fn restrict(&self, u_full: &[f64]) -> Vec<f64> {
        self.independent_dofs.iter().map(|&d| u_full[d]).collect()
    }

    /// Transposed condensation `Tᵀ r`: sums dependent entries into partners.
    pub fn condense_vector(&self, r_full: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (d, m) in self.dof_map.iter().enumerate() {
            if let Some(i) = m {
                g[*i] += r_full[d];
            }
        }
        g
    }
}

/// Pair plus-face nodes with their minus-face masters.
pub fn build_periodic_pairing(mesh: &Mesh) -> Result<PeriodicPairing> {
    let l = mesh.edge_length;
    let tol = 1e-9 * l;
    let q = 1e-6 * l;
    let key = |x: &[f64; 3]| {
        [(x[0] / q).round() as i64, (x[1] / q).round() as i64, (x[2] / q).round() as i64]
    };
    let mut lookup: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, x) in mesh.nodes.iter().enumerate() {
        lookup.entry(key(x)).or_default().push(i);
    }
    let find = |x: &[f64; 3]| -> Option<usize> {
        let k = key(x);
        let mut best: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = lookup.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &n in c {
                            let y = mesh.nodes[n];
                            if (0..3).all(|a| (x[a] - y[a]).abs() <= tol) {
                                best = Some(best.map_or(n, |b: usize| b.min(n)));
                            }
                        }
                    }
                }
            }
        }
        best
    };

    let nn = mesh.node_count();
    let mut master = vec![usize::MAX; nn];
    for (i, x) in mesh.nodes.iter().enumerate() {
        let mut y = *x;
        let mut moved = false;
        for c in y.iter_mut() {
            if (*c - l).abs() <= tol {
                *c = 0.0;
                moved = true;
            }
        }
        master[i] = if moved {
            find(&y).ok_or(Error::UnpairedBoundaryNode { node: i })?
        } else {
            i
        };
    }
    let pinned_node = find(&[0.0, 0.0, 0.0]).ok_or(Error::UnpairedBoundaryNode { node: usize::MAX })?;

    let mut dof_map = vec![None; 3 * nn];
    let mut independent_dofs = Vec::new();
    for i in 0..nn {
        if master[i] == i && i != pinned_node {
            for c in 0..3 {
                dof_map[3 * i + c] = Some(independent_dofs.len());
                independent_dofs.push(3 * i + c);
            }
        }
    }
    let mut dependent_dofs = Vec::new();
    let mut partner_of = BTreeMap::new();
    for i in 0..nn {
        if master[i] != i {
            for c in 0..3 {
                let d = 3 * i + c;
                let p = 3 * master[i] + c;
                dof_map[d] = dof_map[p];
                dependent_dofs.push(d);
                partner_of.insert(d, p);
            }
        }
    }
    Ok(PeriodicPairing { independent_dofs, dependent_dofs, partner_of, pinned_node, dof_map })
}

/// Mesh plus pairing as written by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshFile {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 10]>,
    pub edge_length: f64,
    pub pairing: PeriodicPairing,
}

impl MeshFile {
    pub fn new(mesh: &Mesh, pairing: &PeriodicPairing) -> Self {
        MeshFile {
            nodes: mesh.nodes.clone(),
            elements: mesh.elements.clone(),
            edge_length: mesh.edge_length,
            pairing: pairing.clone(),
        }
    }

    pub fn mesh(&self) -> Mesh {
        Mesh { nodes: self.nodes.clone(), elements: self.elements.clone(), edge_length: self.edge_length }
    }
}
