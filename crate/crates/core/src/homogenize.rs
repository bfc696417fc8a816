//! Periodic homogenization of a voxel density grid.
//!
//! The cell is the unit square split into `N x N` elements of size `1/N`, so
//! `|Y| = 1`. Unit test strains are the Kelvin basis vectors.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::fe::element::{affine_displacement, element_stiffness, Matrix8, Vector8};
use crate::fe::mesh::{assemble_matrices, QuadMesh};
use crate::fe::periodic::{periodic_reduce, PeriodicMap};
use crate::fe::sparse::{Cholesky, CsrMatrix};
use crate::kelvin::KelvinMatrix;
use crate::lattice::DensityGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroCell {
    pub grid: DensityGrid,
    pub base: KelvinMatrix,
    pub penal: f64,
    pub e_min: f64,
}

impl MicroCell {
    pub fn new(grid: DensityGrid, base: KelvinMatrix, penal: f64, e_min: f64) -> Result<MicroCell> {
        if !(penal >= 1.0) {
            return param(format!("penalization must be at least 1, got {penal}"));
        }
        if !(e_min > 0.0 && e_min < 1.0) {
            return param(format!("E_min must lie in (0, 1), got {e_min}"));
        }
        Ok(MicroCell {
            grid,
            base,
            penal,
            e_min,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn elem_size(&self) -> f64 {
        1.0 / self.grid.n as f64
    }

    /// Stiffness factor `E_min + rho^p (1 - E_min)` of every element.
    pub fn stiffness_factors(&self) -> Vec<f64> {
        self.grid
            .rho
            .iter()
            .map(|&r| self.e_min + r.powf(self.penal) * (1.0 - self.e_min))
            .collect()
    }

    /// `d E / d rho` of every element.
    pub fn stiffness_factor_derivatives(&self) -> Vec<f64> {
        let p = self.penal;
        self.grid
            .rho
            .iter()
            .map(|&r| p * r.powf(p - 1.0) * (1.0 - self.e_min))
            .collect()
    }

    pub fn with_e_min(&self, e_min: f64) -> MicroCell {
        MicroCell {
            e_min,
            ..self.clone()
        }
    }
}

/// Factorized periodic stiffness of a cell with node 0 pinned.
#[derive(Debug)]
pub struct CellSystem {
    pub map: PeriodicMap,
    pub k0: Matrix8,
    pub factors: Vec<f64>,
    /// Reduced periodic stiffness restricted to the unpinned dofs.
    pub k: CsrMatrix,
    pub chol: Cholesky,
}

impl CellSystem {
    pub fn new(cell: &MicroCell) -> Result<CellSystem> {
        let n = cell.n();
        let mesh = QuadMesh::new(n, n, cell.elem_size())?;
        let map = periodic_reduce(&mesh);
        let k0 = element_stiffness(&cell.base, cell.elem_size(), 2)?;
        let factors = cell.stiffness_factors();
        let scaled: Vec<Matrix8> = factors.iter().map(|&f| k0 * f).collect();
        let full = assemble_matrices(
            map.n_reduced(),
            (0..n * n).map(|e| (map.element_dofs(e), &scaled[e])),
        );
        let k = full.submatrix(&(2..map.n_reduced()).collect::<Vec<_>>());
        let chol = Cholesky::factor(&k)?;
        Ok(CellSystem {
            map,
            k0,
            factors,
            k,
            chol,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.factors.len()
    }

    /// Solves with node 0 pinned; input and output are full reduced vectors.
    pub fn solve(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let trimmed: Vec<Vec<f64>> = rhs.iter().map(|r| r[2..].to_vec()).collect();
        self.chol
            .solve_many(&trimmed)
            .into_iter()
            .map(|x| {
                let mut v = vec![0.0; 2];
                v.extend(x);
                v
            })
            .collect()
    }

    pub fn gather(&self, v: &[f64], e: usize) -> Vector8 {
        let d = self.map.element_dofs(e);
        Vector8::from_fn(|i, _| v[d[i]])
    }
}

/// Element displacement of unit test strain `a`.
pub fn unit_strain_displacement(a: usize, elem_size: f64) -> Vector8 {
    let mut e = Vector3::zeros();
    e[a] = 1.0;
    affine_displacement(&e, elem_size)
}

fn loads_for(system: &CellSystem, h: f64) -> [Vec<f64>; 3] {
    let mut out: [Vec<f64>; 3] = Default::default();
    for (a, f) in out.iter_mut().enumerate() {
        let u0 = unit_strain_displacement(a, h);
        let fe = system.k0 * u0;
        let mut v = vec![0.0; system.map.n_reduced()];
        for e in 0..system.n_elements() {
            let d = system.map.element_dofs(e);
            for i in 0..8 {
                v[d[i]] += system.factors[e] * fe[i];
            }
        }
        *f = v;
    }
    out
}

/// Consistent periodic nodal loads `sum_e K_e u0^A` of the three unit strains.
pub fn test_strain_loads(cell: &MicroCell) -> Result<[Vec<f64>; 3]> {
    let system = CellSystem::new(cell)?;
    Ok(loads_for(&system, cell.elem_size()))
}

#[derive(Debug)]
pub struct CellSolution {
    /// Periodic fluctuation fields, one per unit test strain, on the reduced dofs.
    pub chi: [Vec<f64>; 3],
    pub dh: KelvinMatrix,
    pub system: CellSystem,
}

impl CellSolution {
    /// `u0^A - chi^A` on element `e`, one column per test strain.
    pub fn element_fields(&self, e: usize, h: f64) -> nalgebra::SMatrix<f64, 8, 3> {
        let mut m = nalgebra::SMatrix::<f64, 8, 3>::zeros();
        for a in 0..3 {
            let col = unit_strain_displacement(a, h) - self.system.gather(&self.chi[a], e);
            m.set_column(a, &col);
        }
        m
    }
}

pub fn solve_cell(cell: &MicroCell) -> Result<CellSolution> {
    let system = CellSystem::new(cell)?;
    let h = cell.elem_size();
    let loads = loads_for(&system, h);
    let sol = system.solve(&loads);
    let chi: [Vec<f64>; 3] = [sol[0].clone(), sol[1].clone(), sol[2].clone()];
    let mut out = CellSolution {
        chi,
        dh: KelvinMatrix::zeros(),
        system,
    };
    let parts: Vec<Matrix3<f64>> = (0..out.system.n_elements())
        .into_par_iter()
        .map(|e| {
            let w = out.element_fields(e, h);
            (w.transpose() * out.system.k0 * w) * out.system.factors[e]
        })
        .collect();
    let dh = parts.iter().fold(Matrix3::zeros(), |acc, m| acc + m);
    out.dh = KelvinMatrix(0.5 * (dh + dh.transpose()));
    Ok(out)
}

/// `d DH / d rho_e` for every voxel.
pub fn dh_sensitivity(cell: &MicroCell, solution: &CellSolution) -> Vec<Matrix3<f64>> {
    let h = cell.elem_size();
    let de = cell.stiffness_factor_derivatives();
    (0..cell.grid.rho.len())
        .into_par_iter()
        .map(|e| {
            if de[e] == 0.0 {
                return Matrix3::zeros();
            }
            let w = solution.element_fields(e, h);
            (w.transpose() * solution.system.k0 * w) * de[e]
        })
        .collect()
}
