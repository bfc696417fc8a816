//! Kelvin-notation 2D elasticity tensors, strain and stress vectors.
//!
//! Strains are stored as `(e11, e22, sqrt(2) e12)` and stresses as
//! `(s11, s22, sqrt(2) s12)`, so the Frobenius norm of a [`KelvinMatrix`]
//! equals the norm of the fourth-order tensor it represents.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// A 3x3 symmetric matrix in Kelvin notation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 3]; 3]", from = "[[f64; 3]; 3]")]
pub struct KelvinMatrix(pub Matrix3<f64>);

impl From<KelvinMatrix> for [[f64; 3]; 3] {
    fn from(m: KelvinMatrix) -> Self {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m.0[(i, j)];
            }
        }
        out
    }
}

impl From<[[f64; 3]; 3]> for KelvinMatrix {
    fn from(a: [[f64; 3]; 3]) -> Self {
        KelvinMatrix(Matrix3::from_fn(|i, j| a[i][j]))
    }
}

/// Projector onto the hydrostatic Kelvin subspace, `(1,1,0)(1,1,0)^T / 2`.
pub fn hydrostatic_projector() -> Matrix3<f64> {
    Matrix3::new(0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0)
}

/// Projector onto the deviatoric Kelvin subspace, `I - P_hyd`.
pub fn deviatoric_projector() -> Matrix3<f64> {
    Matrix3::identity() - hydrostatic_projector()
}

impl KelvinMatrix {
    pub fn zeros() -> Self {
        KelvinMatrix(Matrix3::zeros())
    }

    pub fn identity() -> Self {
        KelvinMatrix(Matrix3::identity())
    }

    pub fn scaled_identity(s: f64) -> Self {
        KelvinMatrix(Matrix3::identity() * s)
    }

    /// Isotropic tensor `a P_hyd + b P_dev` (`a = 2k`, `b = 2g`).
    pub fn isotropic(a: f64, b: f64) -> Self {
        KelvinMatrix(hydrostatic_projector() * a + deviatoric_projector() * b)
    }

    /// Builds a tensor from its upper triangle `(11, 12, 13, 22, 23, 33)`.
    pub fn from_upper(u: [f64; 6]) -> Self {
        KelvinMatrix(Matrix3::new(
            u[0], u[1], u[2], u[1], u[3], u[4], u[2], u[4], u[5],
        ))
    }

    /// The six independent entries `(11, 12, 13, 22, 23, 33)`.
    pub fn upper(&self) -> [f64; 6] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 2)],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0 - self.0.transpose()).amax() <= tol
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let sym = 0.5 * (self.0 + self.0.transpose());
        let mut ev: Vec<f64> = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        [ev[0], ev[1], ev[2]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn inverse(&self) -> Result<KelvinMatrix> {
        self.0
            .try_inverse()
            .map(KelvinMatrix)
            .ok_or_else(|| Error::Solver("singular elasticity tensor".into()))
    }

    pub fn scale(&self, s: f64) -> KelvinMatrix {
        KelvinMatrix(self.0 * s)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Recovers `(E, nu)` from an isotropic plane-stress tensor.
    pub fn isotropic_constants(&self) -> (f64, f64) {
        let d11 = self.0[(0, 0)];
        let nu = self.0[(0, 1)] / d11;
        (d11 * (1.0 - nu * nu), nu)
    }
}

impl std::ops::Add for KelvinMatrix {
    type Output = KelvinMatrix;
    fn add(self, rhs: KelvinMatrix) -> KelvinMatrix {
        KelvinMatrix(self.0 + rhs.0)
    }
}

impl std::ops::Sub for KelvinMatrix {
    type Output = KelvinMatrix;
    fn sub(self, rhs: KelvinMatrix) -> KelvinMatrix {
        KelvinMatrix(self.0 - rhs.0)
    }
}

/// Isotropic plane-stress constitutive matrix in Kelvin form.
pub fn base_material(e: f64, nu: f64) -> Result<KelvinMatrix> {
    if !(e > 0.0) || !e.is_finite() {
        return param(format!("Young's modulus must be positive, got {e}"));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return param(format!("Poisson's ratio must lie in (-1, 0.5), got {nu}"));
    }
    let c = e / (1.0 - nu * nu);
    Ok(KelvinMatrix(Matrix3::new(
        c,
        c * nu,
        0.0,
        c * nu,
        c,
        0.0,
        0.0,
        0.0,
        e / (1.0 + nu),
    )))
}

/// Kelvin strain vector `(e11, e22, sqrt(2) e12)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct StrainState(pub Vector3<f64>);

/// Kelvin stress vector `(s11, s22, sqrt(2) s12)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct StressState(pub Vector3<f64>);

macro_rules! kelvin_vector {
    ($t:ident) => {
        impl From<$t> for [f64; 3] {
            fn from(v: $t) -> Self {
                [v.0[0], v.0[1], v.0[2]]
            }
        }
        impl From<[f64; 3]> for $t {
            fn from(a: [f64; 3]) -> Self {
                $t(Vector3::new(a[0], a[1], a[2]))
            }
        }
        impl $t {
            pub fn new(a: f64, b: f64, c: f64) -> Self {
                $t(Vector3::new(a, b, c))
            }
            pub fn zeros() -> Self {
                $t(Vector3::zeros())
            }
            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
            /// Rotates the in-plane tensor by `theta` (radians).
            pub fn rotated(&self, theta: f64) -> Self {
                $t(rotation_matrix(theta) * self.0)
            }
        }
    };
}

kelvin_vector!(StrainState);
kelvin_vector!(StressState);

impl StrainState {
    /// From engineering components with shear strain `gamma12 = 2 e12`.
    pub fn from_engineering(e11: f64, e22: f64, gamma12: f64) -> Self {
        StrainState::new(e11, e22, gamma12 / SQRT_2)
    }
}

impl StressState {
    pub fn from_components(s11: f64, s22: f64, s12: f64) -> Self {
        StressState::new(s11, s22, SQRT_2 * s12)
    }

    pub fn shear(&self) -> f64 {
        self.0[2] / SQRT_2
    }

    /// Plane-stress von Mises equivalent stress.
    pub fn von_mises(&self) -> f64 {
        let (s11, s22, s12) = (self.0[0], self.0[1], self.shear());
        (s11 * s11 - s11 * s22 + s22 * s22 + 3.0 * s12 * s12)
            .max(0.0)
            .sqrt()
    }
}

/// Kelvin-space rotation for an in-plane rotation by `theta`. Orthogonal.
pub fn rotation_matrix(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(
        c * c,
        s * s,
        -SQRT_2 * s * c,
        s * s,
        c * c,
        SQRT_2 * s * c,
        SQRT_2 * s * c,
        -SQRT_2 * s * c,
        c * c - s * s,
    )
}
