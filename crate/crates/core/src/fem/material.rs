//! Compressible neo-Hooke law with isochoric split.
//!
//! `W = mu/2 (J^{-2/3} I_c - 3) + kappa/4 (J^2 - 1 - 2 ln J)`, which is stress
//! free at `F = I` and linearises to isotropic elasticity with shear modulus
//! `mu` and bulk modulus `kappa`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Shear modulus, N/mm².
    pub mu: f64,
    /// Bulk modulus, N/mm².
    pub kappa: f64,
}

impl MaterialParams {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !(mu > 0.0 && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("moduli must be positive, got mu={mu}, kappa={kappa}")));
        }
        Ok(MaterialParams { mu, kappa })
    }

    /// Convert Young's modulus and Poisson ratio.
    pub fn from_youngs(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !(nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!("need E > 0 and -1 < nu < 0.5, got E={e}, nu={nu}")));
        }
        Ok(MaterialParams { mu: e / (2.0 * (1.0 + nu)), kappa: e / (3.0 * (1.0 - 2.0 * nu)) })
    }
}

/// Constitutive response at one material point.
#[derive(Debug, Clone)]
pub struct StressState {
    pub f: Matrix3<f64>,
    /// First Piola–Kirchhoff stress.
    pub p: Matrix3<f64>,
    /// `a[3*i+J][3*k+L] = dP_iJ / dF_kL`.
    pub a: [[f64; 9]; 9],
    /// Stored energy density.
    pub w: f64,
    pub j: f64,
}

impl StressState {
    pub fn tangent(&self, i: usize, jj: usize, k: usize, l: usize) -> f64 {
        self.a[3 * i + jj][3 * k + l]
    }
}

/// Energy density only.
pub fn neo_hooke_energy(f: &Matrix3<f64>, mat: &MaterialParams) -> Result<f64> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { j, element: None, step: None });
    }
    let ic = f.norm_squared();
    let a = j.powf(-2.0 / 3.0);
    Ok(0.5 * mat.mu * (a * ic - 3.0) + 0.25 * mat.kappa * (j * j - 1.0 - 2.0 * j.ln()))
}

/// Stress only, skipping the tangent.
pub fn neo_hooke_stress(f: &Matrix3<f64>, mat: &MaterialParams) -> Result<Matrix3<f64>> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { j, element: None, step: None });
    }
    let g = f.try_inverse().ok_or(Error::NonPositiveJacobian { j, element: None, step: None })?.transpose();
    let ic = f.norm_squared();
    let a = j.powf(-2.0 / 3.0);
    Ok((f - g * (ic / 3.0)) * (mat.mu * a) + g * (0.5 * mat.kappa * (j * j - 1.0)))
}

/// Energy, stress and tangent.
pub fn neo_hooke(f: &Matrix3<f64>, mat: &MaterialParams) -> Result<StressState> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian { j, element: None, step: None });
    }
    let g = f.try_inverse().ok_or(Error::NonPositiveJacobian { j, element: None, step: None })?.transpose();
    let ic = f.norm_squared();
    let a = j.powf(-2.0 / 3.0);
    let (mu, kappa) = (mat.mu, mat.kappa);
    let w = 0.5 * mu * (a * ic - 3.0) + 0.25 * kappa * (j * j - 1.0 - 2.0 * j.ln());
    let p = (f - g * (ic / 3.0)) * (mu * a) + g * (0.5 * kappa * (j * j - 1.0));

    let mua = mu * a;
    let vol1 = kappa * j * j;
    let vol2 = 0.5 * kappa * (j * j - 1.0);
    let mut t = [[0.0; 9]; 9];
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let d = if i == k && jj == l { 1.0 } else { 0.0 };
                    let iso = d - (2.0 / 3.0) * (g[(k, l)] * f[(i, jj)] + f[(k, l)] * g[(i, jj)])
                        + (2.0 / 9.0) * ic * g[(i, jj)] * g[(k, l)]
                        + (ic / 3.0) * g[(i, l)] * g[(k, jj)];
                    t[3 * i + jj][3 * k + l] =
                        mua * iso + vol1 * g[(i, jj)] * g[(k, l)] - vol2 * g[(i, l)] * g[(k, jj)];
                }
            }
        }
    }
    Ok(StressState { f: *f, p, a: t, w, j })
}
