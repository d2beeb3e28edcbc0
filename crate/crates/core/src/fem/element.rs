//! Tet10 shape functions, quadrature and element integrals.

use nalgebra::{Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::material::{neo_hooke, neo_hooke_energy, neo_hooke_stress, MaterialParams};
use crate::error::{Error, Result};
use crate::mesh::TET10_EDGES;

/// Gauss rules on the reference tetrahedron.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Degree 2, four interior points.
    #[default]
    FourPoint,
    /// Degree 3, five points (negative centroid weight).
    FivePoint,
}

impl QuadratureRule {
    /// Barycentric points and weights summing to 1/6.
    pub fn points(self) -> Vec<([f64; 4], f64)> {
        match self {
            QuadratureRule::FourPoint => {
                let a = 0.585_410_196_624_968_5;
                let b = 0.138_196_601_125_010_5;
                (0..4)
                    .map(|k| {
                        let mut l = [b; 4];
                        l[k] = a;
                        (l, 1.0 / 24.0)
                    })
                    .collect()
            }
            QuadratureRule::FivePoint => {
                let mut pts = vec![([0.25; 4], -2.0 / 15.0)];
                for k in 0..4 {
                    let mut l = [1.0 / 6.0; 4];
                    l[k] = 0.5;
                    pts.push((l, 3.0 / 40.0));
                }
                pts
            }
        }
    }
}

/// Shape function values at barycentric point `l`.
pub fn shape_values(l: &[f64; 4]) -> [f64; 10] {
    let mut n = [0.0; 10];
    for a in 0..4 {
        n[a] = l[a] * (2.0 * l[a] - 1.0);
    }
    for (m, &(a, b)) in TET10_EDGES.iter().enumerate() {
        n[4 + m] = 4.0 * l[a] * l[b];
    }
    n
}

/// Derivatives with respect to the reference coordinates `(xi, eta, zeta)`,
/// where `l = (1 - xi - eta - zeta, xi, eta, zeta)`.
pub fn shape_gradients_ref(l: &[f64; 4]) -> [[f64; 3]; 10] {
    const DL: [[f64; 3]; 4] = [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut g = [[0.0; 3]; 10];
    for a in 0..4 {
        for k in 0..3 {
            g[a][k] = (4.0 * l[a] - 1.0) * DL[a][k];
        }
    }
    for (m, &(a, b)) in TET10_EDGES.iter().enumerate() {
        for k in 0..3 {
            g[4 + m][k] = 4.0 * (l[a] * DL[b][k] + l[b] * DL[a][k]);
        }
    }
    g
}

/// Physical shape gradients and integration weights of one element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// `grad[q][a]` = dN_a/dX at quadrature point `q`.
    pub grad: Vec<[[f64; 3]; 10]>,
    /// Weight times Jacobian determinant.
    pub wdet: Vec<f64>,
}

impl ElementGeometry {
    pub fn new(x: &[[f64; 3]; 10], rule: QuadratureRule) -> Result<Self> {
        let pts = rule.points();
        let mut grad = Vec::with_capacity(pts.len());
        let mut wdet = Vec::with_capacity(pts.len());
        for (l, w) in pts {
            let gr = shape_gradients_ref(&l);
            let mut jac = Matrix3::zeros();
            for a in 0..10 {
                for i in 0..3 {
                    for j in 0..3 {
                        jac[(i, j)] += x[a][i] * gr[a][j];
                    }
                }
            }
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(Error::NonPositiveJacobian { j: det, element: None, step: None });
            }
            let inv = jac.try_inverse().ok_or(Error::NonPositiveJacobian { j: det, element: None, step: None })?;
            let mut g = [[0.0; 3]; 10];
            for a in 0..10 {
                for k in 0..3 {
                    g[a][k] = (0..3).map(|j| gr[a][j] * inv[(j, k)]).sum();
                }
            }
            grad.push(g);
            wdet.push(w * det);
        }
        Ok(ElementGeometry { grad, wdet })
    }

    /// Integral of 1 over the element.
    pub fn volume(&self) -> f64 {
        self.wdet.iter().sum()
    }

    /// `F = I + H + sum_a u_a ⊗ grad N_a` at quadrature point `q`.
    pub fn deformation_gradient(&self, q: usize, el_u: &[f64; 30], h_bar: &Matrix3<f64>) -> Matrix3<f64> {
        let mut f = Matrix3::identity() + h_bar;
        let g = &self.grad[q];
        for a in 0..10 {
            for i in 0..3 {
                let u = el_u[3 * a + i];
                for j in 0..3 {
                    f[(i, j)] += u * g[a][j];
                }
            }
        }
        f
    }

    /// Internal force vector.
    pub fn residual(&self, el_u: &[f64; 30], h_bar: &Matrix3<f64>, mat: &MaterialParams, r: &mut [f64; 30]) -> Result<()> {
        r.fill(0.0);
        for q in 0..self.wdet.len() {
            let p = neo_hooke_stress(&self.deformation_gradient(q, el_u, h_bar), mat)?;
            let g = &self.grad[q];
            let w = self.wdet[q];
            for a in 0..10 {
                for i in 0..3 {
                    r[3 * a + i] += w * (p[(i, 0)] * g[a][0] + p[(i, 1)] * g[a][1] + p[(i, 2)] * g[a][2]);
                }
            }
        }
        Ok(())
    }

    /// Tangent (row-major 30×30) and internal force.
    pub fn stiffness_residual(
        &self,
        el_u: &[f64; 30],
        h_bar: &Matrix3<f64>,
        mat: &MaterialParams,
        k: &mut [f64; 900],
        r: &mut [f64; 30],
    ) -> Result<()> {
        k.fill(0.0);
        r.fill(0.0);
        for q in 0..self.wdet.len() {
            let s = neo_hooke(&self.deformation_gradient(q, el_u, h_bar), mat)?;
            let g = &self.grad[q];
            let w = self.wdet[q];
            for a in 0..10 {
                for i in 0..3 {
                    r[3 * a + i] += w * (s.p[(i, 0)] * g[a][0] + s.p[(i, 1)] * g[a][1] + s.p[(i, 2)] * g[a][2]);
                }
            }
            for b in 0..10 {
                // c[iJ][k] = sum_L A_iJkL dN_b/dX_L
                let mut c = [[0.0; 3]; 9];
                for ij in 0..9 {
                    for kk in 0..3 {
                        c[ij][kk] = s.a[ij][3 * kk] * g[b][0] + s.a[ij][3 * kk + 1] * g[b][1] + s.a[ij][3 * kk + 2] * g[b][2];
                    }
                }
                for a in 0..10 {
                    let ga = g[a];
                    for i in 0..3 {
                        let row = (3 * a + i) * 30 + 3 * b;
                        for kk in 0..3 {
                            k[row + kk] += w * (ga[0] * c[3 * i][kk] + ga[1] * c[3 * i + 1][kk] + ga[2] * c[3 * i + 2][kk]);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Stored energy of the element.
    pub fn energy(&self, el_u: &[f64; 30], h_bar: &Matrix3<f64>, mat: &MaterialParams) -> Result<f64> {
        let mut e = 0.0;
        for q in 0..self.wdet.len() {
            e += self.wdet[q] * neo_hooke_energy(&self.deformation_gradient(q, el_u, h_bar), mat)?;
        }
        Ok(e)
    }

    /// Integral of the first Piola–Kirchhoff stress.
    pub fn stress_integral(&self, el_u: &[f64; 30], h_bar: &Matrix3<f64>, mat: &MaterialParams) -> Result<Matrix3<f64>> {
        let mut acc = Matrix3::zeros();
        for q in 0..self.wdet.len() {
            acc += neo_hooke_stress(&self.deformation_gradient(q, el_u, h_bar), mat)? * self.wdet[q];
        }
        Ok(acc)
    }
}

/// Element tangent and internal force for nodal coordinates `x`.
pub fn element_stiffness_residual(
    x: &[[f64; 3]; 10],
    el_u: &[f64; 30],
    h_bar: &Matrix3<f64>,
    mat: &MaterialParams,
    rule: QuadratureRule,
) -> Result<(SMatrix<f64, 30, 30>, SVector<f64, 30>)> {
    let geo = ElementGeometry::new(x, rule)?;
    let mut k = [0.0; 900];
    let mut r = [0.0; 30];
    geo.stiffness_residual(el_u, h_bar, mat, &mut k, &mut r)?;
    Ok((SMatrix::from_row_slice(&k), SVector::from_row_slice(&r)))
}
