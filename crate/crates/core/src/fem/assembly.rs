//! Global assembly and periodic condensation.

use nalgebra::{DVector, Matrix3};
use rayon::prelude::*;

use super::element::{ElementGeometry, QuadratureRule};
use super::material::MaterialParams;
use super::sparse::CsrMatrix;
use crate::error::Result;
use crate::mesh::{Mesh, PeriodicPairing};

const SKIP: u32 = u32::MAX;

/// Condensed tangent and residual on the independent dofs.
#[derive(Debug, Clone)]
pub struct FullSystem {
    pub k_bc: CsrMatrix,
    pub g_bc: DVector<f64>,
}

/// Element loop with cached geometry and a fixed scatter pattern.
///
/// Element dofs are mapped through `dof_map` (full dof to unknown index, or
/// `None` when eliminated). Using the periodic map assembles `Tᵀ K T` and
/// `Tᵀ r` directly.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: Mesh,
    mat: MaterialParams,
    geometry: Vec<ElementGeometry>,
    dof_map: Vec<Option<usize>>,
    pattern: CsrMatrix,
    /// Per element: 30 unknown indices then 900 value positions.
    scatter: Vec<u32>,
}

const STRIDE: usize = 30 + 900;

impl Assembler {
    pub fn new(mesh: &Mesh, mat: MaterialParams, rule: QuadratureRule, dof_map: Vec<Option<usize>>, n: usize) -> Result<Self> {
        let geometry = (0..mesh.element_count())
            .map(|e| ElementGeometry::new(&mesh.element_coords(e), rule).map_err(|err| err.in_element(e)))
            .collect::<Result<Vec<_>>>()?;
        let local = |e: usize| -> [Option<usize>; 30] {
            let mut m = [None; 30];
            for (a, &node) in mesh.elements[e].iter().enumerate() {
                for c in 0..3 {
                    m[3 * a + c] = dof_map[3 * node + c];
                }
            }
            m
        };
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.element_count() {
            let m = local(e);
            for i in m.iter().flatten() {
                rows[*i].extend(m.iter().flatten());
            }
        }
        let pattern = CsrMatrix::from_pattern(rows);
        let mut scatter = Vec::with_capacity(mesh.element_count() * STRIDE);
        for e in 0..mesh.element_count() {
            let m = local(e);
            scatter.extend(m.iter().map(|x| x.map_or(SKIP, |i| i as u32)));
            for a in 0..30 {
                for b in 0..30 {
                    scatter.push(match (m[a], m[b]) {
                        (Some(i), Some(j)) => pattern.position(i, j).expect("pattern entry") as u32,
                        _ => SKIP,
                    });
                }
            }
        }
        Ok(Assembler { mesh: mesh.clone(), mat, geometry, dof_map, pattern, scatter })
    }

    /// Unconstrained assembly over all `3 N` dofs.
    pub fn full(mesh: &Mesh, mat: MaterialParams, rule: QuadratureRule) -> Result<Self> {
        let n = 3 * mesh.node_count();
        Self::new(mesh, mat, rule, (0..n).map(Some).collect(), n)
    }

    /// Assembly condensed onto the independent periodic dofs.
    pub fn periodic(mesh: &Mesh, pairing: &PeriodicPairing, mat: MaterialParams, rule: QuadratureRule) -> Result<Self> {
        Self::new(mesh, mat, rule, pairing.dof_map.clone(), pairing.dim())
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> &MaterialParams {
        &self.mat
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    fn gather(&self, e: usize, u_full: &[f64]) -> [f64; 30] {
        let mut el = [0.0; 30];
        for (a, &node) in self.mesh.elements[e].iter().enumerate() {
            el[3 * a..3 * a + 3].copy_from_slice(&u_full[3 * node..3 * node + 3]);
        }
        el
    }

    /// Residual only.
    pub fn residual(&self, u_full: &[f64], h_bar: &Matrix3<f64>) -> Result<DVector<f64>> {
        let locals = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let mut r = [0.0; 30];
                self.geometry[e]
                    .residual(&self.gather(e, u_full), h_bar, &self.mat, &mut r)
                    .map_err(|err| err.in_element(e))?;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = DVector::zeros(self.dim());
        for (e, r) in locals.iter().enumerate() {
            let map = &self.scatter[e * STRIDE..e * STRIDE + 30];
            for a in 0..30 {
                if map[a] != SKIP {
                    g[map[a] as usize] += r[a];
                }
            }
        }
        Ok(g)
    }

    /// Tangent and residual.
    pub fn system(&self, u_full: &[f64], h_bar: &Matrix3<f64>) -> Result<FullSystem> {
        let locals = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let mut k = Box::new([0.0; 900]);
                let mut r = [0.0; 30];
                self.geometry[e]
                    .stiffness_residual(&self.gather(e, u_full), h_bar, &self.mat, &mut k, &mut r)
                    .map_err(|err| err.in_element(e))?;
                Ok((k, r))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut k_bc = self.pattern.clone();
        let mut g = DVector::zeros(self.dim());
        for (e, (k, r)) in locals.iter().enumerate() {
            let map = &self.scatter[e * STRIDE..(e + 1) * STRIDE];
            for a in 0..30 {
                if map[a] != SKIP {
                    g[map[a] as usize] += r[a];
                }
            }
            for (p, v) in map[30..].iter().zip(k.iter()) {
                if *p != SKIP {
                    k_bc.values[*p as usize] += v;
                }
            }
        }
        Ok(FullSystem { k_bc, g_bc: g })
    }

    /// Total stored energy.
    pub fn energy(&self, u_full: &[f64], h_bar: &Matrix3<f64>) -> Result<f64> {
        let mut total = 0.0;
        for e in 0..self.geometry.len() {
            total += self.geometry[e].energy(&self.gather(e, u_full), h_bar, &self.mat).map_err(|err| err.in_element(e))?;
        }
        Ok(total)
    }

    /// Volume average of P over the full cube volume.
    pub fn average_stress(&self, u_full: &[f64], h_bar: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        let mut acc = Matrix3::zeros();
        for e in 0..self.geometry.len() {
            acc += self.geometry[e]
                .stress_integral(&self.gather(e, u_full), h_bar, &self.mat)
                .map_err(|err| err.in_element(e))?;
        }
        Ok(acc / self.mesh.edge_length.powi(3))
    }

    pub fn dof_map(&self) -> &[Option<usize>] {
        &self.dof_map
    }
}

/// Full stiffness and internal force over `3 N` dofs (default quadrature).
pub fn assemble(mesh: &Mesh, u_full: &[f64], h_bar: &Matrix3<f64>, mat: &MaterialParams) -> Result<(CsrMatrix, DVector<f64>)> {
    let sys = Assembler::full(mesh, *mat, QuadratureRule::default())?.system(u_full, h_bar)?;
    Ok((sys.k_bc, sys.g_bc))
}

/// `K_bc = Tᵀ K T`, `g_bc = Tᵀ r` with pinned dofs removed.
pub fn apply_periodic(k_full: &CsrMatrix, r_full: &DVector<f64>, pairing: &PeriodicPairing) -> FullSystem {
    let map = &pairing.dof_map;
    let n = pairing.dim();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..k_full.n {
        if let Some(ri) = map[i] {
            for p in k_full.row_ptr[i]..k_full.row_ptr[i + 1] {
                if let Some(cj) = map[k_full.col_idx[p]] {
                    rows[ri].push(cj);
                }
            }
        }
    }
    let mut k_bc = CsrMatrix::from_pattern(rows);
    for i in 0..k_full.n {
        if let Some(ri) = map[i] {
            for p in k_full.row_ptr[i]..k_full.row_ptr[i + 1] {
                if let Some(cj) = map[k_full.col_idx[p]] {
                    let pos = k_bc.position(ri, cj).expect("pattern entry");
                    k_bc.values[pos] += k_full.values[p];
                }
            }
        }
    }
    let g_bc = DVector::from_vec(pairing.condense_vector(r_full.as_slice()));
    FullSystem { k_bc, g_bc }
}

/// `P̄ = (1/V₀) Σ ∫ P dV` with `V₀` the full cube volume.
pub fn volume_average_stress(mesh: &Mesh, u_full: &[f64], h_bar: &Matrix3<f64>, mat: &MaterialParams) -> Result<Matrix3<f64>> {
    let n = 3 * mesh.node_count();
    // geometry only; the dof map is irrelevant here
    Assembler::new(mesh, *mat, QuadratureRule::default(), vec![None; n], 0)?.average_stress(u_full, h_bar)
}
