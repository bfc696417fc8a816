//! Linear buckling of a periodic cell under a macroscopic strain load.

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};
use crate::fe::element::{centroid_b, geometric_stiffness_basis, Matrix8};
use crate::fe::mesh::assemble_matrices;
use crate::fe::periodic::PeriodicMap;
use crate::fe::sparse::{dot, norm, Cholesky, CsrMatrix};
use crate::homogenize::{CellSolution, MicroCell};
use crate::kelvin::{StrainState, StressState};

/// `(E_min + rho^p (1 - E_min), rho^p)`: factors for the elastic and geometric matrices.
pub fn simp_interpolate(rho: f64, penal: f64, e_min: f64) -> (f64, f64) {
    let r = rho.powf(penal);
    (e_min + r * (1.0 - e_min), r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub stresses: Vec<StressState>,
}

/// Centroid strain `(I - B X_e) eps_bar` of every element.
pub fn local_strains(
    cell: &MicroCell,
    solution: &CellSolution,
    eps_bar: &StrainState,
) -> Vec<Vector3<f64>> {
    let h = cell.elem_size();
    let b = centroid_b(h);
    (0..cell.grid.rho.len())
        .map(|e| b * (solution.element_fields(e, h) * eps_bar.0))
        .collect()
}

pub fn stress_recovery(
    cell: &MicroCell,
    solution: &CellSolution,
    eps_bar: &StrainState,
) -> StressField {
    let stresses = local_strains(cell, solution, eps_bar)
        .iter()
        .zip(&cell.grid.rho)
        .map(|(eps, &rho)| {
            StressState(cell.base.0 * eps * simp_interpolate(rho, cell.penal, cell.e_min).1)
        })
        .collect();
    StressField { stresses }
}

/// Geometric stiffness on the reduced periodic dofs.
pub fn geometric_stiffness(stress: &StressField, map: &PeriodicMap, elem_size: f64) -> CsrMatrix {
    let basis = geometric_stiffness_basis(elem_size);
    let ges: Vec<Matrix8> = stress
        .stresses
        .iter()
        .map(|s| basis[0] * s.0[0] + basis[1] * s.0[1] + basis[2] * s.0[2])
        .collect();
    assemble_matrices(
        map.n_reduced(),
        (0..ges.len()).map(|e| (map.element_dofs(e), &ges[e])),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EigenOptions {
    /// Relative residual bound `||G y - kappa K y|| <= tol max(|kappa|, floor) ||K y||`.
    pub tol: f64,
    pub max_basis: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_basis: 160,
            max_iter: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucklingSpectrum {
    /// Largest `kappa` of `G phi = kappa K phi`, descending.
    pub kappas: Vec<f64>,
    /// `1 / kappa` of the positive entries, ascending.
    pub load_factors: Vec<f64>,
    /// K-normalized modes matching `kappas`.
    pub modes: Vec<Vec<f64>>,
    pub kappa_ks: f64,
    pub c_b: f64,
    pub mu: f64,
    /// `d kappa_ks / d kappa_j`.
    pub ks_weights: Vec<f64>,
    pub converged: bool,
}

impl BucklingSpectrum {
    pub fn buckles(&self) -> bool {
        self.kappa_ks > 0.0
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    kv: Vec<Vec<f64>>,
    gv: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl Basis {
    fn len(&self) -> usize {
        self.v.len()
    }

    /// K-orthogonalizes `w` against the basis and appends it unless it is negligible.
    fn push(&mut self, mut w: Vec<f64>, k: &CsrMatrix, g: &CsrMatrix) -> bool {
        let mut kw = k.matvec(&w);
        let start = dot(&w, &kw).max(0.0).sqrt();
        if !(start > 0.0) || !start.is_finite() {
            return false;
        }
        // Repeated Gram-Schmidt until a pass no longer removes a large share of the vector.
        let mut nrm = start;
        for _ in 0..3 {
            for v in &self.v {
                let c = dot(v, &kw);
                for i in 0..w.len() {
                    w[i] -= c * v[i];
                }
            }
            kw = k.matvec(&w);
            let next = dot(&w, &kw).max(0.0).sqrt();
            let settled = next > 0.7 * nrm;
            nrm = next;
            if settled {
                break;
            }
        }
        if nrm < 1e-8 * start {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        kw.iter_mut().for_each(|x| *x /= nrm);
        let gw = g.matvec(&w);
        let row: Vec<f64> = self.v.iter().map(|v| dot(v, &gw)).collect();
        for (r, &x) in self.h.iter_mut().zip(&row) {
            r.push(x);
        }
        let mut last = row;
        last.push(dot(&w, &gw));
        self.h.push(last);
        self.v.push(w);
        self.kv.push(kw);
        self.gv.push(gw);
        true
    }

    fn combine(cols: &[Vec<f64>], s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cols[0].len()];
        for (c, &a) in cols.iter().zip(s) {
            if a != 0.0 {
                for (o, x) in out.iter_mut().zip(c) {
                    *o += a * x;
                }
            }
        }
        out
    }
}

/// Largest `nev` eigenpairs of `G y = kappa K y` by restarted Rayleigh-Ritz on
/// a Krylov space of `K^{-1} G`. Returns `(kappas descending, K-normalized vectors, converged)`.
pub fn largest_pencil_eigs(
    k: &CsrMatrix,
    chol: &Cholesky,
    g: &CsrMatrix,
    nev: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, bool)> {
    let n = k.dim();
    if g.dim() != n || chol.dim() != n {
        return param("K and G must have the same dimension");
    }
    if nev == 0 || nev > n {
        return param(format!(
            "cannot compute {nev} eigenpairs of a size-{n} pencil"
        ));
    }
    let block = (nev + 2).min(n);
    let max_basis = opts.max_basis.max(3 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis {
        v: Vec::new(),
        kv: Vec::new(),
        gv: Vec::new(),
        h: Vec::new(),
    };
    let random = |rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    for _ in 0..block {
        let w = random(&mut rng);
        let kw = chol.solve(&w);
        basis.push(kw, k, g);
    }
    let mut best = (Vec::new(), Vec::new());
    for _ in 0..opts.max_iter {
        let m = basis.len();
        let hm = DMatrix::from_fn(m, m, |i, j| 0.5 * (basis.h[i][j] + basis.h[j][i]));
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let coeff: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        let scale = theta.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let floor = 1e-8 * scale;
        let take = nev.min(m);
        let mut residuals = Vec::with_capacity(block.min(m));
        let mut all_ok = take == nev;
        for j in 0..block.min(m) {
            let gy = Basis::combine(&basis.gv, &coeff[j]);
            let ky = Basis::combine(&basis.kv, &coeff[j]);
            let r: Vec<f64> = gy.iter().zip(&ky).map(|(a, b)| a - theta[j] * b).collect();
            let ok = norm(&r) <= opts.tol * theta[j].abs().max(floor) * norm(&ky) || scale == 0.0;
            if j < take && !ok {
                all_ok = false;
            }
            residuals.push((r, ok));
        }
        best = (
            theta[..take].to_vec(),
            (0..take)
                .map(|j| Basis::combine(&basis.v, &coeff[j]))
                .collect::<Vec<_>>(),
        );
        if all_ok {
            return Ok((best.0, best.1, true));
        }
        if m + block > max_basis {
            let keep = (nev + block).min(m);
            let mut next = Basis {
                v: Vec::new(),
                kv: Vec::new(),
                gv: Vec::new(),
                h: Vec::new(),
            };
            for j in 0..keep {
                next.v.push(Basis::combine(&basis.v, &coeff[j]));
                next.kv.push(Basis::combine(&basis.kv, &coeff[j]));
                next.gv.push(Basis::combine(&basis.gv, &coeff[j]));
            }
            next.h = (0..keep)
                .map(|i| {
                    (0..keep)
                        .map(|j| if i == j { theta[i] } else { 0.0 })
                        .collect()
                })
                .collect();
            basis = next;
        }
        let dirs: Vec<Vec<f64>> = residuals
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(r, _)| r.clone())
            .collect();
        let mut added = 0;
        for w in chol.solve_many(&dirs) {
            if basis.push(w, k, g) {
                added += 1;
            }
        }
        if added == 0 {
            let w = random(&mut rng);
            if !basis.push(chol.solve(&w), k, g) && basis.len() >= n {
                break;
            }
        }
    }
    log::warn!("buckling eigensolver stopped before reaching the residual tolerance");
    Ok((best.0, best.1, false))
}

/// `(kappa_ks, c_b)` with `kappa_1 = max(kappas)`.
pub fn ks_eigen_aggregate(kappas: &[f64], mu: f64) -> (f64, f64) {
    let k1 = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = kappas.iter().map(|&k| (mu * (k - k1)).exp()).sum();
    let ks = k1 + s.ln() / mu;
    (ks, k1 / ks)
}

/// `P_lower kappa_ks - 1`.
pub fn buckling_constraint(kappa_ks: f64, p_lower: f64) -> f64 {
    p_lower * kappa_ks - 1.0
}

/// Aggregate, correction and total derivative weights for a descending `kappa` list.
///
/// The aggregation parameter `mu = 100 / kappa_1` moves with `kappa_1`, which adds
/// `(ks - sum_j s_j kappa_j) / kappa_1` to the softmax weight of the leading mode.
pub fn ks_with_weights(kappas: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let k1 = kappas.first().copied().unwrap_or(0.0);
    let scale = kappas.iter().fold(0.0f64, |a, k| a.max(k.abs()));
    if kappas.is_empty() || !(k1 > 1e-10 * scale) {
        return (0.0, 1.0, 0.0, vec![0.0; kappas.len()]);
    }
    let mu = 100.0 / k1;
    let (ks, c_b) = ks_eigen_aggregate(kappas, mu);
    let e: Vec<f64> = kappas.iter().map(|&k| (mu * (k - k1)).exp()).collect();
    let s: f64 = e.iter().sum();
    let mut w: Vec<f64> = e.iter().map(|x| x / s).collect();
    let mean: f64 = w.iter().zip(kappas).map(|(a, b)| a * b).sum();
    w[0] += (ks - mean) / k1;
    (ks, c_b, mu, w)
}

/// Buckling spectrum of the pencil `(K, G)`; `K` must be positive definite.
pub fn buckling_eigens(
    k: &CsrMatrix,
    chol: &Cholesky,
    g: &CsrMatrix,
    n_b: usize,
    opts: &EigenOptions,
) -> Result<BucklingSpectrum> {
    let nev = n_b.min(k.dim());
    let (kappas, modes, converged) = largest_pencil_eigs(k, chol, g, nev, opts)?;
    if kappas.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver("non-finite buckling eigenvalue".into()));
    }
    let (kappa_ks, c_b, mu, ks_weights) = ks_with_weights(&kappas);
    let mut load_factors: Vec<f64> = if kappa_ks > 0.0 {
        let cut = 1e-10 * kappas[0];
        kappas
            .iter()
            .filter(|&&x| x > cut)
            .map(|x| 1.0 / x)
            .collect()
    } else {
        Vec::new()
    };
    load_factors.sort_by(|a, b| a.total_cmp(b));
    Ok(BucklingSpectrum {
        kappas,
        load_factors,
        modes,
        kappa_ks,
        c_b,
        mu,
        ks_weights,
        converged,
    })
}

/// Stiffness, geometric stiffness and spectrum of a cell, all with node 0 pinned.
#[derive(Debug)]
pub struct CellBuckling {
    pub stress: StressField,
    pub strains: Vec<Vector3<f64>>,
    pub g: CsrMatrix,
    pub spectrum: BucklingSpectrum,
}

/// Runs stress recovery and the eigensolve on a cell solved with the buckling `E_min`.
pub fn analyze_cell(
    cell: &MicroCell,
    solution: &CellSolution,
    eps_bar: &StrainState,
    n_b: usize,
    opts: &EigenOptions,
) -> Result<CellBuckling> {
    let strains = local_strains(cell, solution, eps_bar);
    let stress = stress_recovery(cell, solution, eps_bar);
    let sys = &solution.system;
    let keep: Vec<usize> = (2..sys.map.n_reduced()).collect();
    let g = geometric_stiffness(&stress, &sys.map, cell.elem_size()).submatrix(&keep);
    let spectrum = buckling_eigens(&sys.k, &sys.chol, &g, n_b, opts)?;
    Ok(CellBuckling {
        stress,
        strains,
        g,
        spectrum,
    })
}
