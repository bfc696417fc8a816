//! Structured quad meshes and global assembly.

use rayon::prelude::*;

use super::element::{element_stiffness, Matrix8};
use super::sparse::{solve_dirichlet, CsrMatrix};
use crate::error::{param, Result};
use crate::kelvin::KelvinMatrix;

/// Rectangular grid of square elements. Node `(i, j)` has index `j (nx + 1) + i`
/// and element `(ex, ey)` has index `ey nx + ex`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    pub nx: usize,
    pub ny: usize,
    pub elem_size: f64,
    pub fixed_dofs: Vec<usize>,
    pub loads: Vec<f64>,
}

impl QuadMesh {
    pub fn new(nx: usize, ny: usize, elem_size: f64) -> Result<QuadMesh> {
        if nx == 0 || ny == 0 {
            return param(format!(
                "mesh needs at least one element per axis, got {nx}x{ny}"
            ));
        }
        if !(elem_size > 0.0) {
            return param(format!("element size must be positive, got {elem_size}"));
        }
        let ndof = 2 * (nx + 1) * (ny + 1);
        Ok(QuadMesh {
            nx,
            ny,
            elem_size,
            fixed_dofs: Vec::new(),
            loads: vec![0.0; ndof],
        })
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_coords(&self, n: usize) -> (f64, f64) {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        (i as f64 * self.elem_size, j as f64 * self.elem_size)
    }

    /// Corner nodes counter-clockwise from the lower-left.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let ex = e % self.nx;
        let ey = e / self.nx;
        [
            self.node(ex, ey),
            self.node(ex + 1, ey),
            self.node(ex + 1, ey + 1),
            self.node(ex, ey + 1),
        ]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        let mut d = [0; 8];
        for a in 0..4 {
            d[2 * a] = 2 * n[a];
            d[2 * a + 1] = 2 * n[a] + 1;
        }
        d
    }

    pub fn element_centroid(&self, e: usize) -> (f64, f64) {
        let ex = (e % self.nx) as f64;
        let ey = (e / self.nx) as f64;
        ((ex + 0.5) * self.elem_size, (ey + 0.5) * self.elem_size)
    }

    pub fn gather(&self, u: &[f64], e: usize) -> super::element::Vector8 {
        let d = self.element_dofs(e);
        super::element::Vector8::from_fn(|i, _| u[d[i]])
    }

    /// Checks dof ranges and that the supports remove all three rigid-body modes.
    pub fn validate(&self) -> Result<()> {
        let ndof = self.n_dofs();
        if self.loads.len() != ndof {
            return param(format!(
                "load vector has length {}, expected {ndof}",
                self.loads.len()
            ));
        }
        if let Some(&d) = self.fixed_dofs.iter().find(|&&d| d >= ndof) {
            return param(format!("fixed dof {d} out of range (mesh has {ndof} dofs)"));
        }
        let fixed: Vec<(f64, f64, usize)> = self
            .fixed_dofs
            .iter()
            .map(|&d| {
                let (x, y) = self.node_coords(d / 2);
                (x, y, d % 2)
            })
            .collect();
        // Rigid modes: u = (1,0), (0,1), (-y, x). Each must be blocked by some
        // combination of constraints, i.e. the 3 x nfixed restriction has rank 3.
        let rows: Vec<[f64; 3]> = fixed
            .iter()
            .map(|&(x, y, c)| {
                if c == 0 {
                    [1.0, 0.0, -y]
                } else {
                    [0.0, 1.0, x]
                }
            })
            .collect();
        let m = nalgebra::DMatrix::from_fn(rows.len().max(1), 3, |i, j| {
            rows.get(i).map_or(0.0, |r| r[j])
        });
        let rank = m.svd(false, false).rank(1e-9 * self.elem_size.max(1.0));
        if rank < 3 {
            return param("supports do not remove all rigid-body modes");
        }
        Ok(())
    }
}

/// Assembles `sum_e K_e(D_e)` over the mesh.
pub fn assemble(mesh: &QuadMesh, field: &[KelvinMatrix]) -> Result<CsrMatrix> {
    if field.len() != mesh.n_elements() {
        return param(format!(
            "field has {} tensors but mesh has {} elements",
            field.len(),
            mesh.n_elements()
        ));
    }
    let kes: Vec<Matrix8> = field
        .par_iter()
        .map(|d| element_stiffness(d, mesh.elem_size, 2))
        .collect::<Result<_>>()?;
    Ok(assemble_matrices(
        mesh.n_dofs(),
        (0..mesh.n_elements()).map(|e| (mesh.element_dofs(e), &kes[e])),
    ))
}

/// Scatters element matrices into a global `n x n` matrix.
pub fn assemble_matrices<'a>(
    n: usize,
    items: impl Iterator<Item = ([usize; 8], &'a Matrix8)>,
) -> CsrMatrix {
    let mut trip = Vec::new();
    for (dofs, ke) in items {
        for a in 0..8 {
            for b in 0..8 {
                let v = ke[(a, b)];
                if v != 0.0 {
                    trip.push((dofs[a], dofs[b], v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, &trip)
}

/// Solves the mesh's equilibrium problem for the given tensor field.
pub fn solve_mesh(mesh: &QuadMesh, field: &[KelvinMatrix]) -> Result<(CsrMatrix, Vec<f64>)> {
    mesh.validate()?;
    let k = assemble(mesh, field)?;
    let u = solve_dirichlet(&k, &mesh.loads, &mesh.fixed_dofs)?;
    Ok((k, u))
}
