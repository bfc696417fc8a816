//! Bilinear four-node square element in plane stress.
//!
//! Local node order is counter-clockwise from the lower-left corner and the
//! element dof vector is `[u0, v0, u1, v1, u2, v2, u3, v3]`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{SMatrix, Vector3};

use crate::error::{param, Result};
use crate::kelvin::{KelvinMatrix, StressState};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Vector8 = SMatrix<f64, 8, 1>;
pub type StrainDisplacement = SMatrix<f64, 3, 8>;

const NODE_SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Quadrature points and weights in natural coordinates.
fn gauss_rule(n_gauss: usize) -> Result<Vec<(f64, f64, f64)>> {
    match n_gauss {
        1 => Ok(vec![(0.0, 0.0, 4.0)]),
        2 => {
            let g = 1.0 / 3f64.sqrt();
            Ok(NODE_SIGNS
                .iter()
                .map(|&(a, b)| (a * g, b * g, 1.0))
                .collect())
        }
        _ => param(format!("n_gauss must be 1 or 2 per axis, got {n_gauss}")),
    }
}

/// Physical shape-function gradients `[dN/dx, dN/dy]` at natural point `(xi, eta)`.
pub fn shape_gradients(xi: f64, eta: f64, elem_size: f64) -> [[f64; 2]; 4] {
    let s = 2.0 / elem_size;
    let mut g = [[0.0; 2]; 4];
    for (a, &(xa, ya)) in NODE_SIGNS.iter().enumerate() {
        g[a][0] = 0.25 * xa * (1.0 + ya * eta) * s;
        g[a][1] = 0.25 * ya * (1.0 + xa * xi) * s;
    }
    g
}

/// Kelvin strain-displacement matrix at a natural point.
pub fn strain_displacement(xi: f64, eta: f64, elem_size: f64) -> StrainDisplacement {
    let g = shape_gradients(xi, eta, elem_size);
    let mut b = StrainDisplacement::zeros();
    for a in 0..4 {
        b[(0, 2 * a)] = g[a][0];
        b[(1, 2 * a + 1)] = g[a][1];
        b[(2, 2 * a)] = g[a][1] * FRAC_1_SQRT_2;
        b[(2, 2 * a + 1)] = g[a][0] * FRAC_1_SQRT_2;
    }
    b
}

/// Strain-displacement matrix at the element centroid.
pub fn centroid_b(elem_size: f64) -> StrainDisplacement {
    strain_displacement(0.0, 0.0, elem_size)
}

/// `K_e = sum_g w_g B_g^T D B_g det J`.
pub fn element_stiffness(d: &KelvinMatrix, elem_size: f64, n_gauss: usize) -> Result<Matrix8> {
    if !d.is_psd(1e-10 * d.frobenius().max(1.0)) {
        log::warn!("element stiffness requested for a non-PSD tensor");
    }
    let det_j = 0.25 * elem_size * elem_size;
    let mut k = Matrix8::zeros();
    for (xi, eta, w) in gauss_rule(n_gauss)? {
        let b = strain_displacement(xi, eta, elem_size);
        k += b.transpose() * d.0 * b * (w * det_j);
    }
    Ok(0.5 * (k + k.transpose()))
}

/// Stress second moment `sum_g w_g det J (D B_g u)(D B_g u)^T` of one element.
pub fn stress_moment(d: &KelvinMatrix, u_e: &Vector8, elem_size: f64) -> nalgebra::Matrix3<f64> {
    let det_j = 0.25 * elem_size * elem_size;
    let mut m = nalgebra::Matrix3::zeros();
    for (xi, eta, w) in gauss_rule(2).expect("2-point rule") {
        let s = d.0 * (strain_displacement(xi, eta, elem_size) * u_e);
        m += s * s.transpose() * (w * det_j);
    }
    m
}

/// Geometric stiffness `-int dN^T sigma dN` for a constant Kelvin stress.
pub fn geometric_stiffness(stress: &StressState, elem_size: f64) -> Matrix8 {
    let s11 = stress.0[0];
    let s22 = stress.0[1];
    let s12 = stress.shear();
    let det_j = 0.25 * elem_size * elem_size;
    let mut k = Matrix8::zeros();
    for (xi, eta, w) in gauss_rule(2).expect("2-point rule") {
        let g = shape_gradients(xi, eta, elem_size);
        for a in 0..4 {
            for b in 0..4 {
                let v = g[a][0] * (s11 * g[b][0] + s12 * g[b][1])
                    + g[a][1] * (s12 * g[b][0] + s22 * g[b][1]);
                let c = -v * w * det_j;
                k[(2 * a, 2 * b)] += c;
                k[(2 * a + 1, 2 * b + 1)] += c;
            }
        }
    }
    k
}

/// Geometric stiffness for each unit Kelvin stress component; `G(s) = sum_c s_c G_c`.
pub fn geometric_stiffness_basis(elem_size: f64) -> [Matrix8; 3] {
    let unit = |c: usize| {
        let mut v = Vector3::zeros();
        v[c] = 1.0;
        geometric_stiffness(&StressState(v), elem_size)
    };
    [unit(0), unit(1), unit(2)]
}

/// Nodal displacements of a homogeneous Kelvin strain, relative to the lower-left node.
pub fn affine_displacement(strain: &Vector3<f64>, elem_size: f64) -> Vector8 {
    let e12 = strain[2] * FRAC_1_SQRT_2;
    let mut u = Vector8::zeros();
    for (a, &(xa, ya)) in NODE_SIGNS.iter().enumerate() {
        let x = 0.5 * (xa + 1.0) * elem_size;
        let y = 0.5 * (ya + 1.0) * elem_size;
        u[2 * a] = strain[0] * x + e12 * y;
        u[2 * a + 1] = e12 * x + strain[1] * y;
    }
    u
}
