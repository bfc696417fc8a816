//! Free material optimization with trace and eigenvalue bounds.
//!
//! Each iteration solves equilibrium for the current field, forms the element
//! stress second moments `T_e`, and minimizes the complementary-energy bound
//! `sum_e tr(D_e^-1 T_e)` over the feasible set. The minimizer has a closed form
//! per element up to one scalar multiplier per element (its trace bounds) and
//! one global multiplier (the budget), found by bisection.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fe::element::stress_moment;
use crate::fe::mesh::{assemble, QuadMesh};
use crate::fe::sparse::{dot, solve_dirichlet};
use crate::kelvin::{deviatoric_projector, hydrostatic_projector, KelvinMatrix, StrainState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialClass {
    Free,
    Orthotropic,
    Isotropic,
}

#[derive(Debug, Clone)]
pub struct FmoProblem {
    pub mesh: QuadMesh,
    pub t0: f64,
    pub t_low: f64,
    pub t_high: f64,
    pub delta: f64,
    pub material_class: MaterialClass,
    pub max_iter: usize,
    pub tol: f64,
}

impl FmoProblem {
    pub fn new(
        mesh: QuadMesh,
        t0: f64,
        t_low: f64,
        t_high: f64,
        delta: f64,
        material_class: MaterialClass,
    ) -> FmoProblem {
        FmoProblem {
            mesh,
            t0,
            t_low,
            t_high,
            delta,
            material_class,
            max_iter: 200,
            tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mesh.n_elements() as f64;
        let finite = [self.t0, self.t_low, self.t_high, self.delta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return param("FMO bounds must be finite");
        }
        if self.delta < 0.0 || self.t_low < 0.0 {
            return param("delta and T_low must be non-negative");
        }
        if self.t_low > self.t_high {
            return Err(Error::Infeasible(format!(
                "T_low {} exceeds T_high {}",
                self.t_low, self.t_high
            )));
        }
        if 3.0 * self.delta > self.t_high + 1e-12 * self.t_high.abs() {
            return Err(Error::Infeasible(format!(
                "eigenvalue floor {} needs trace {} above T_high {}",
                self.delta,
                3.0 * self.delta,
                self.t_high
            )));
        }
        let min_total = m * self.t_low.max(3.0 * self.delta);
        if min_total > self.t0 * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "global budget {} is below the minimum total trace {min_total}",
                self.t0
            )));
        }
        if self.max_iter == 0 {
            return param("max_iter must be positive");
        }
        self.mesh.validate()
    }

    fn floor_trace(&self) -> f64 {
        self.t_low.max(3.0 * self.delta)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FmoSolution {
    pub field: Vec<KelvinMatrix>,
    pub displacement: Vec<f64>,
    pub compliance: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Frobenius-nearest member of the material class.
pub fn project_to_class(d: &KelvinMatrix, class: MaterialClass) -> KelvinMatrix {
    let s = 0.5 * (d.0 + d.0.transpose());
    match class {
        MaterialClass::Free => KelvinMatrix(s),
        MaterialClass::Orthotropic => {
            let mut m = s;
            m[(0, 2)] = 0.0;
            m[(2, 0)] = 0.0;
            m[(1, 2)] = 0.0;
            m[(2, 1)] = 0.0;
            KelvinMatrix(m)
        }
        MaterialClass::Isotropic => {
            let (a, b) = isotropic_coefficients(&s);
            KelvinMatrix::isotropic(a, b)
        }
    }
}

/// Coefficients of the projection onto `a P_hyd + b P_dev`.
fn isotropic_coefficients(m: &Matrix3<f64>) -> (f64, f64) {
    let a = (hydrostatic_projector() * m).trace();
    let b = (deviatoric_projector() * m).trace() / 2.0;
    (a, b)
}

fn minimal_tensor(t_low: f64, delta: f64) -> KelvinMatrix {
    KelvinMatrix::scaled_identity(delta + (t_low - 3.0 * delta) / 3.0)
}

/// Maximizes `eps^T D eps` over one element's feasible set.
pub fn element_update(
    strain: &StrainState,
    t_low: f64,
    t_high: f64,
    delta: f64,
    class: MaterialClass,
) -> Result<KelvinMatrix> {
    if !(0.0 <= delta
        && 3.0 * delta <= t_low.max(3.0 * delta)
        && t_low <= t_high
        && 3.0 * delta <= t_high)
    {
        return Err(Error::Infeasible(format!(
            "inconsistent element bounds T_low={t_low}, T_high={t_high}, delta={delta}"
        )));
    }
    if !strain.is_finite() {
        return param("strain has non-finite entries");
    }
    let e = strain.0;
    let n2 = e.norm_squared();
    if n2 == 0.0 {
        return Ok(minimal_tensor(t_low.max(3.0 * delta), delta));
    }
    let free_trace = t_high - 3.0 * delta;
    let base = Matrix3::identity() * delta;
    let d = match class {
        MaterialClass::Free => {
            let v = e / n2.sqrt();
            base + v * v.transpose() * free_trace
        }
        MaterialClass::Orthotropic => {
            let inplane = e[0] * e[0] + e[1] * e[1];
            let shear = e[2] * e[2];
            let mut m = base;
            if inplane >= shear {
                let v = Vector3::new(e[0], e[1], 0.0) / inplane.sqrt();
                m += v * v.transpose() * free_trace;
            } else {
                m[(2, 2)] += free_trace;
            }
            m
        }
        MaterialClass::Isotropic => {
            let eh = e.dot(&(hydrostatic_projector() * e));
            let ed = e.dot(&(deviatoric_projector() * e));
            let (a, b) = if eh > ed / 2.0 {
                (t_high - 2.0 * delta, delta)
            } else if eh < ed / 2.0 {
                (delta, (t_high - delta) / 2.0)
            } else {
                (t_high / 3.0, t_high / 3.0)
            };
            return Ok(KelvinMatrix::isotropic(a, b));
        }
    };
    Ok(KelvinMatrix(d))
}

/// Compliance `f^T u`, cross-checked against `u^T K u`.
pub fn compliance(field: &[KelvinMatrix], mesh: &QuadMesh) -> Result<f64> {
    mesh.validate()?;
    let k = assemble(mesh, field)?;
    let u = solve_dirichlet(&k, &mesh.loads, &mesh.fixed_dofs)?;
    checked_compliance(&k, &u, &mesh.loads)
}

fn checked_compliance(k: &crate::fe::CsrMatrix, u: &[f64], f: &[f64]) -> Result<f64> {
    let c1 = dot(f, u);
    let c2 = k.quadratic_form(u);
    if (c1 - c2).abs() > 1e-9 * c1.abs().max(c2.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!(
            "compliance mismatch: f.u = {c1}, u.K.u = {c2}"
        )));
    }
    Ok(c1)
}

/// Closed-form structure of `argmin tr(D^-1 T) + lambda tr D` within one class.
/// The minimizer has eigen-coordinates `d_i = max(delta, s_i u)` with `u = lambda^-1/2`.
#[derive(Debug, Clone)]
struct Spectral {
    class: MaterialClass,
    basis: Matrix3<f64>,
    s: [f64; 3],
    mult: [f64; 3],
}

impl Spectral {
    fn new(t: &Matrix3<f64>, class: MaterialClass) -> Spectral {
        let t = 0.5 * (t + t.transpose());
        match class {
            MaterialClass::Free => {
                let eig = SymmetricEigen::new(t);
                let s = [0, 1, 2].map(|i| eig.eigenvalues[i].max(0.0).sqrt());
                Spectral {
                    class,
                    basis: eig.eigenvectors,
                    s,
                    mult: [1.0; 3],
                }
            }
            MaterialClass::Orthotropic => {
                let block = Matrix2::new(t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)]);
                let eig = SymmetricEigen::new(block);
                let mut basis = Matrix3::zeros();
                for c in 0..2 {
                    basis[(0, c)] = eig.eigenvectors[(0, c)];
                    basis[(1, c)] = eig.eigenvectors[(1, c)];
                }
                basis[(2, 2)] = 1.0;
                let s = [
                    eig.eigenvalues[0].max(0.0).sqrt(),
                    eig.eigenvalues[1].max(0.0).sqrt(),
                    t[(2, 2)].max(0.0).sqrt(),
                ];
                Spectral {
                    class,
                    basis,
                    s,
                    mult: [1.0; 3],
                }
            }
            MaterialClass::Isotropic => {
                let (th, td2) = isotropic_coefficients(&t);
                // tr(P_dev T) = 2 td2; the deviatoric coordinate b has multiplicity 2.
                let s = [th.max(0.0).sqrt(), td2.max(0.0).sqrt(), 0.0];
                Spectral {
                    class,
                    basis: Matrix3::identity(),
                    s,
                    mult: [1.0, 2.0, 0.0],
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.s
            .iter()
            .zip(&self.mult)
            .all(|(&s, &m)| s == 0.0 || m == 0.0)
    }

    fn trace_at(&self, u: f64, delta: f64) -> f64 {
        (0..3)
            .map(|i| self.mult[i] * delta.max(self.s[i] * u))
            .sum()
    }

    /// Smallest `u` with `trace_at(u) = target`; requires `target >= trace_at(0)`.
    fn invert(&self, target: f64, delta: f64) -> f64 {
        let mut idx: Vec<usize> = (0..3)
            .filter(|&i| self.mult[i] > 0.0 && self.s[i] > 0.0)
            .collect();
        idx.sort_by(|&a, &b| (delta / self.s[a]).total_cmp(&(delta / self.s[b])));
        // Walk segments in order of activation; in each, trace = slope u + fixed.
        let mut fixed: f64 = (0..3).map(|i| self.mult[i] * delta).sum();
        let mut slope = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            fixed -= self.mult[i] * delta;
            slope += self.mult[i] * self.s[i];
            let u = (target - fixed) / slope;
            let next = idx.get(k + 1).map_or(f64::INFINITY, |&j| delta / self.s[j]);
            if u <= next {
                return u.max(delta / self.s[i]);
            }
        }
        0.0
    }

    fn tensor(&self, u: f64, delta: f64) -> KelvinMatrix {
        let d = [0, 1, 2].map(|i| delta.max(self.s[i] * u));
        match self.class {
            MaterialClass::Isotropic => KelvinMatrix::isotropic(d[0], d[1]),
            _ => {
                let q = self.basis;
                let m = q * Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2])) * q.transpose();
                KelvinMatrix(0.5 * (m + m.transpose()))
            }
        }
    }
}

/// Element trace chosen for global multiplier parameter `u`.
fn group_trace(sp: &Spectral, u: f64, p: &FmoProblem) -> f64 {
    if sp.is_zero() {
        return p.floor_trace();
    }
    sp.trace_at(u, p.delta).clamp(p.floor_trace(), p.t_high)
}

fn group_tensor(sp: &Spectral, trace: f64, p: &FmoProblem) -> KelvinMatrix {
    if sp.is_zero() {
        return minimal_tensor(p.floor_trace(), p.delta);
    }
    let u = sp.invert(trace, p.delta);
    sp.tensor(u, p.delta)
}

/// Minimizes the complementary-energy bound for given group moments and weights.
fn update_groups(moments: &[Matrix3<f64>], weights: &[f64], p: &FmoProblem) -> Vec<KelvinMatrix> {
    let specs: Vec<Spectral> = moments
        .par_iter()
        .map(|t| Spectral::new(t, p.material_class))
        .collect();
    let total = |u: f64| -> f64 {
        specs
            .iter()
            .zip(weights)
            .map(|(s, w)| w * group_trace(s, u, p))
            .sum()
    };
    let max_total: f64 = specs
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            w * if s.is_zero() {
                p.floor_trace()
            } else {
                p.t_high
            }
        })
        .sum();
    let traces: Vec<f64> = if max_total <= p.t0 {
        specs
            .iter()
            .map(|s| group_trace(s, f64::INFINITY, p))
            .collect()
    } else {
        let mut hi = 1.0;
        while total(hi) < p.t0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) <= p.t0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        specs.iter().map(|s| group_trace(s, lo, p)).collect()
    };
    specs
        .par_iter()
        .zip(traces.par_iter())
        .map(|(s, &t)| group_tensor(s, t, p))
        .collect()
}

/// Tensors used for the equilibrium solve; a tiny isotropic floor keeps rank-deficient
/// iterates solvable when `delta` is zero.
fn solve_field(field: &[KelvinMatrix], p: &FmoProblem) -> Vec<KelvinMatrix> {
    let eps = 1e-9 * p.t_high;
    if p.delta >= eps {
        return field.to_vec();
    }
    let add = eps - p.delta;
    field
        .iter()
        .map(|d| KelvinMatrix(d.0 + Matrix3::identity() * add))
        .collect()
}

fn initial_field(p: &FmoProblem) -> Vec<KelvinMatrix> {
    let m = p.mesh.n_elements() as f64;
    let t = (p.t0 / m).clamp(p.floor_trace(), p.t_high);
    vec![KelvinMatrix::scaled_identity(t / 3.0); p.mesh.n_elements()]
}

pub fn solve_fmo(problem: &FmoProblem) -> Result<FmoSolution> {
    let groups: Vec<usize> = (0..problem.mesh.n_elements()).collect();
    solve_grouped(problem, &groups, None)
}

/// Solves FMO with one shared tensor per group; `labels[e]` is element `e`'s group.
pub fn solve_grouped(
    problem: &FmoProblem,
    labels: &[usize],
    warm_start: Option<&[KelvinMatrix]>,
) -> Result<FmoSolution> {
    problem.validate()?;
    let mesh = &problem.mesh;
    let m = mesh.n_elements();
    if labels.len() != m {
        return param(format!("{} labels for {m} elements", labels.len()));
    }
    let n_groups = labels.iter().max().map_or(0, |&k| k + 1);
    let mut counts = vec![0usize; n_groups];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return param("every group must have at least one element");
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();

    let mut field = match warm_start {
        Some(w) if w.len() == n_groups => labels.iter().map(|&l| w[l]).collect(),
        Some(w) if w.len() == m => w.to_vec(),
        Some(w) => return param(format!("warm start has {} tensors", w.len())),
        None => initial_field(problem),
    };

    let mut history: Vec<f64> = Vec::new();
    let mut streak = 0;
    let mut converged = false;
    let h = mesh.elem_size;
    loop {
        let sfield = solve_field(&field, problem);
        let k = assemble(mesh, &sfield)?;
        let u = solve_dirichlet(&k, &mesh.loads, &mesh.fixed_dofs)?;
        let c = checked_compliance(&k, &u, &mesh.loads)?;
        if let Some(&prev) = history.last() {
            let rel = (prev - c).abs() / prev.abs().max(f64::MIN_POSITIVE);
            streak = if rel < problem.tol { streak + 1 } else { 0 };
            if c > prev * (1.0 + 1e-9) {
                log::debug!("compliance increased from {prev} to {c}");
            }
        }
        history.push(c);
        if streak >= 5 {
            converged = true;
        }
        if converged || history.len() >= problem.max_iter || c == 0.0 {
            return Ok(FmoSolution {
                field,
                displacement: u,
                compliance: c,
                history,
                converged: converged || c == 0.0,
            });
        }
        let element_moments: Vec<Matrix3<f64>> = (0..m)
            .into_par_iter()
            .map(|e| stress_moment(&sfield[e], &mesh.gather(&u, e), h))
            .collect();
        let mut moments = vec![Matrix3::zeros(); n_groups];
        for e in 0..m {
            moments[labels[e]] += element_moments[e];
        }
        for (t, w) in moments.iter_mut().zip(&weights) {
            *t /= *w;
        }
        let groups = update_groups(&moments, &weights, problem);
        field = labels.iter().map(|&l| groups[l]).collect();
    }
}

/// Checks every constraint of the problem on a field.
pub fn check_feasible(field: &[KelvinMatrix], p: &FmoProblem, tol: f64) -> Result<()> {
    let mut total = 0.0;
    for (e, d) in field.iter().enumerate() {
        let tr = d.trace();
        total += tr;
        if tr < p.t_low - tol || tr > p.t_high + tol {
            return Err(Error::Infeasible(format!(
                "element {e} trace {tr} outside bounds"
            )));
        }
        if d.min_eigenvalue() < p.delta - tol {
            return Err(Error::Infeasible(format!(
                "element {e} violates the eigenvalue floor"
            )));
        }
        if (project_to_class(d, p.material_class).0 - d.0).amax() > tol {
            return Err(Error::Infeasible(format!(
                "element {e} leaves its material class"
            )));
        }
    }
    if total > p.t0 + 1e-6 {
        return Err(Error::Infeasible(format!(
            "total trace {total} exceeds budget {}",
            p.t0
        )));
    }
    Ok(())
}
