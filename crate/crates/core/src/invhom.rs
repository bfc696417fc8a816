//! Buckling-aware inverse homogenization over bar widths.
//!
//! The objective is `(1 - lambda) ||DH - D0||_F + lambda kappa_ks`, subject to a
//! volume fraction bound and, optionally, `P_lower kappa_ks - 1 <= 0`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buckling::{
    analyze_cell, buckling_constraint, simp_interpolate, CellBuckling, EigenOptions,
};
use crate::error::{param, Result};
use crate::fe::element::{centroid_b, geometric_stiffness_basis};
use crate::gcmma::{Evaluation, Gcmma, GcmmaOptions};
use crate::homogenize::{
    dh_sensitivity, solve_cell, unit_strain_displacement, CellSolution, MicroCell,
};
use crate::kelvin::{base_material, KelvinMatrix, StrainState};
use crate::lattice::{density_gradient, rasterize, DensityGrid, LatticeUnit};

#[derive(Debug, Clone, PartialEq)]
pub struct InvHomProblem {
    pub target: KelvinMatrix,
    pub strain_load: StrainState,
    /// Bar layout; the widths are the design variables.
    pub unit: LatticeUnit,
    pub v_star: f64,
    pub lambda_b: f64,
    pub p_lower: f64,
    pub n_b: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n: usize,
    pub base: KelvinMatrix,
    pub penal: f64,
    pub e_min_static: f64,
    pub e_min_buckling: f64,
    /// Adds `f_P <= 0` as a second constraint.
    pub enforce_buckling: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub eigen: EigenOptions,
    pub gcmma: GcmmaOptions,
}

impl InvHomProblem {
    pub fn new(target: KelvinMatrix, strain_load: StrainState, unit: LatticeUnit) -> InvHomProblem {
        InvHomProblem {
            target,
            strain_load,
            unit,
            v_star: 0.35,
            lambda_b: 0.0,
            p_lower: 1.0,
            n_b: 6,
            p_min: 0.005,
            p_max: 0.5,
            n: 40,
            base: base_material(1.0, 0.3).expect("valid base material"),
            penal: 3.0,
            e_min_static: 1e-3,
            e_min_buckling: 1e-4,
            enforce_buckling: false,
            max_iter: 150,
            tol: 1e-4,
            eigen: EigenOptions::default(),
            gcmma: GcmmaOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_b) {
            return param(format!(
                "lambda_B must lie in [0, 1], got {}",
                self.lambda_b
            ));
        }
        if !(self.v_star > 0.0 && self.v_star < 1.0) {
            return param(format!("V* must lie in (0, 1), got {}", self.v_star));
        }
        if !(self.p_min > 0.0 && self.p_min < self.p_max && self.p_max <= 1.0) {
            return param(format!(
                "width bounds must satisfy 0 < p_min < p_max <= 1, got [{}, {}]",
                self.p_min, self.p_max
            ));
        }
        if !(self.p_lower > 0.0) {
            return param("P_lower must be positive");
        }
        if self.n_b == 0 {
            return param("n_b must be at least 1");
        }
        if !self.strain_load.is_finite() || !self.target.0.iter().all(|v| v.is_finite()) {
            return param("target tensor and strain load must be finite");
        }
        self.unit.validate()
    }

    pub fn cell(&self, grid: DensityGrid, e_min: f64) -> Result<MicroCell> {
        MicroCell::new(grid, self.base, self.penal, e_min)
    }

    /// Uniform width whose rasterized volume sits just under `v_star`, found by bisection.
    /// Falls back to `p_min` when even the thinnest unit exceeds the budget.
    pub fn initial_widths(&self) -> Result<Vec<f64>> {
        let nb = self.unit.bars.len();
        let volume = |w: f64| -> Result<f64> {
            Ok(rasterize(&self.unit.with_widths(&vec![w; nb]), self.n)?.volume_fraction())
        };
        let (mut lo, mut hi) = (self.p_min, self.p_max);
        if volume(lo)? > self.v_star {
            return Ok(vec![lo; nb]);
        }
        if volume(hi)? <= self.v_star {
            return Ok(vec![hi; nb]);
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if volume(mid)? <= self.v_star {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(vec![lo; nb])
    }
}

/// Everything `evaluate` computed, kept for the sensitivity pass.
#[derive(Debug)]
pub struct EvalCache {
    pub widths: Vec<f64>,
    pub unit: LatticeUnit,
    pub static_cell: MicroCell,
    pub static_solution: CellSolution,
    pub buckling_cell: MicroCell,
    pub buckling_solution: CellSolution,
    pub buckling: CellBuckling,
    pub dh: KelvinMatrix,
    pub frob: f64,
    pub j: f64,
    pub volume: f64,
    pub f_p: f64,
}

impl EvalCache {
    pub fn grid(&self) -> &DensityGrid {
        &self.static_cell.grid
    }

    pub fn kappa_ks(&self) -> f64 {
        self.buckling.spectrum.kappa_ks
    }

    pub fn c_b(&self) -> f64 {
        self.buckling.spectrum.c_b
    }
}

pub fn evaluate(p: &[f64], problem: &InvHomProblem) -> Result<EvalCache> {
    if p.len() != problem.unit.bars.len() {
        return param(format!(
            "expected {} widths, got {}",
            problem.unit.bars.len(),
            p.len()
        ));
    }
    let unit = problem.unit.with_widths(p);
    let grid = rasterize(&unit, problem.n)?;
    evaluate_grid(unit, grid, problem)
}

/// Evaluates a given density grid; `unit` is only carried along for the width chain rule.
pub fn evaluate_grid(
    unit: LatticeUnit,
    grid: DensityGrid,
    problem: &InvHomProblem,
) -> Result<EvalCache> {
    let static_cell = problem.cell(grid.clone(), problem.e_min_static)?;
    let buckling_cell = problem.cell(grid, problem.e_min_buckling)?;
    let (static_solution, buckling_solution) =
        rayon::join(|| solve_cell(&static_cell), || solve_cell(&buckling_cell));
    let (static_solution, buckling_solution) = (static_solution?, buckling_solution?);
    let buckling = analyze_cell(
        &buckling_cell,
        &buckling_solution,
        &problem.strain_load,
        problem.n_b,
        &problem.eigen,
    )?;
    let dh = static_solution.dh;
    let frob = (dh.0 - problem.target.0).norm();
    let kappa_ks = buckling.spectrum.kappa_ks;
    let j = (1.0 - problem.lambda_b) * frob + problem.lambda_b * kappa_ks;
    let volume = static_cell.grid.volume_fraction();
    let f_p = buckling_constraint(kappa_ks, problem.p_lower);
    Ok(EvalCache {
        widths: unit.widths(),
        unit,
        static_cell,
        static_solution,
        buckling_cell,
        buckling_solution,
        buckling,
        dh,
        frob,
        j,
        volume,
        f_p,
    })
}

/// `d ||DH - D0||_F / d rho` per voxel.
pub fn frobenius_sensitivity(cache: &EvalCache, problem: &InvHomProblem) -> Vec<f64> {
    let diff = cache.dh.0 - problem.target.0;
    let nrm = diff.norm();
    let nv = cache.grid().rho.len();
    if nrm <= 1e-12 {
        return vec![0.0; nv];
    }
    let w = diff / nrm;
    dh_sensitivity(&cache.static_cell, &cache.static_solution)
        .iter()
        .map(|d| w.component_mul(d).sum())
        .collect()
}

/// Per-element `phi_e^T G_c phi_e` for the three unit stress components and `phi_e^T k0 phi_e`.
fn mode_element_terms(cache: &EvalCache, mode: &[f64]) -> Vec<([f64; 3], f64)> {
    let sys = &cache.buckling_solution.system;
    let basis = geometric_stiffness_basis(cache.buckling_cell.elem_size());
    let full: Vec<f64> = [0.0, 0.0].into_iter().chain(mode.iter().copied()).collect();
    (0..sys.n_elements())
        .into_par_iter()
        .map(|e| {
            let u = sys.gather(&full, e);
            let g = [0, 1, 2].map(|c| (u.transpose() * basis[c] * u)[0]);
            (g, (u.transpose() * sys.k0 * u)[0])
        })
        .collect()
}

fn weighted_eigen_sensitivity(
    cache: &EvalCache,
    problem: &InvHomProblem,
    weights: &[f64],
    adjoint: bool,
) -> Vec<f64> {
    let cell = &cache.buckling_cell;
    let sol = &cache.buckling_solution;
    let sys = &sol.system;
    let ne = sys.n_elements();
    let h = cell.elem_size();
    let eps = problem.strain_load.0;
    let d0 = cell.base.0;
    let db = d0 * centroid_b(h);
    let de = cell.stiffness_factor_derivatives();
    let mut out = vec![0.0; ne];
    let mut rhs = vec![vec![0.0; sys.map.n_reduced()]; 3];
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let kappa = cache.buckling.spectrum.kappas[j];
        let terms = mode_element_terms(cache, &cache.buckling.spectrum.modes[j]);
        for e in 0..ne {
            let (g, ek) = terms[e];
            let gv = nalgebra::Vector3::from(g);
            let rho = cell.grid.rho[e];
            let dg = cell.penal * rho.powf(cell.penal - 1.0);
            let sigma_unit = d0 * cache.buckling.strains[e];
            out[e] += w * (dg * sigma_unit.dot(&gv) - kappa * de[e] * ek);
            if adjoint {
                let r = simp_interpolate(rho, cell.penal, cell.e_min).1;
                if r != 0.0 {
                    let contrib = db.transpose() * gv * (-r);
                    let dofs = sys.map.element_dofs(e);
                    for k in 0..3 {
                        if eps[k] != 0.0 {
                            for i in 0..8 {
                                rhs[k][dofs[i]] += w * eps[k] * contrib[i];
                            }
                        }
                    }
                }
            }
        }
    }
    if adjoint {
        let v = sys.solve(&rhs);
        let adj: Vec<f64> = (0..ne)
            .into_par_iter()
            .map(|e| {
                if de[e] == 0.0 {
                    return 0.0;
                }
                let mut s = 0.0;
                for k in 0..3 {
                    let field = unit_strain_displacement(k, h) - sys.gather(&sol.chi[k], e);
                    s += (sys.gather(&v[k], e).transpose() * sys.k0 * field)[0];
                }
                de[e] * s
            })
            .collect();
        for (o, a) in out.iter_mut().zip(adj) {
            *o += a;
        }
    }
    out
}

/// `d kappa_j / d rho` per voxel, including the dependence of the stress state on the cell solutions.
pub fn eigen_sensitivity(cache: &EvalCache, problem: &InvHomProblem, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; cache.buckling.spectrum.kappas.len()];
    w[j] = 1.0;
    check_gap(cache, j);
    weighted_eigen_sensitivity(cache, problem, &w, true)
}

/// The explicit part of `d kappa_j / d rho` with the cell solutions held fixed.
pub fn eigen_sensitivity_direct(cache: &EvalCache, problem: &InvHomProblem, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; cache.buckling.spectrum.kappas.len()];
    w[j] = 1.0;
    weighted_eigen_sensitivity(cache, problem, &w, false)
}

fn check_gap(cache: &EvalCache, j: usize) {
    let k = &cache.buckling.spectrum.kappas;
    let scale = k[j].abs().max(1e-300);
    let near = |i: usize| i < k.len() && i != j && ((k[i] - k[j]).abs() / scale) <= 1e-6;
    if near(j + 1) || (j > 0 && near(j - 1)) {
        log::warn!("buckling mode {j} is nearly repeated; its sensitivity is not well defined");
    }
}

/// `d kappa_ks / d rho` per voxel.
pub fn kappa_ks_sensitivity(cache: &EvalCache, problem: &InvHomProblem) -> Vec<f64> {
    let sp = &cache.buckling.spectrum;
    if !sp.buckles() {
        return vec![0.0; cache.grid().rho.len()];
    }
    weighted_eigen_sensitivity(cache, problem, &sp.ks_weights, true)
}

/// `d f_P / d rho` per voxel.
pub fn ks_sensitivity(cache: &EvalCache, problem: &InvHomProblem) -> Vec<f64> {
    kappa_ks_sensitivity(cache, problem)
        .into_iter()
        .map(|v| v * problem.p_lower)
        .collect()
}

/// Contracts a per-voxel sensitivity with `d rho / d p`.
pub fn chain_to_widths(sens: &[f64], unit: &LatticeUnit, n: usize) -> Result<Vec<f64>> {
    if sens.len() != n * n {
        return param(format!(
            "sensitivity has {} entries, grid has {}",
            sens.len(),
            n * n
        ));
    }
    Ok(density_gradient(unit, n)?.chain(sens))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthGradients {
    pub dj: Vec<f64>,
    pub dv: Vec<f64>,
    pub df_p: Vec<f64>,
}

pub fn gradients(cache: &EvalCache, problem: &InvHomProblem) -> Result<WidthGradients> {
    let n = problem.n;
    let dg = density_gradient(&cache.unit, n)?;
    let lam = problem.lambda_b;
    let frob = if lam < 1.0 {
        frobenius_sensitivity(cache, problem)
    } else {
        vec![0.0; n * n]
    };
    let ks = kappa_ks_sensitivity(cache, problem);
    let dj: Vec<f64> = frob
        .iter()
        .zip(&ks)
        .map(|(f, k)| (1.0 - lam) * f + lam * k)
        .collect();
    let dv = vec![1.0 / (n * n) as f64; n * n];
    let dfp: Vec<f64> = ks.iter().map(|k| k * problem.p_lower).collect();
    Ok(WidthGradients {
        dj: dg.chain(&dj),
        dv: dg.chain(&dv),
        df_p: dg.chain(&dfp),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub frob_term: f64,
    pub kappa_ks: f64,
    pub c_b: f64,
    pub volume: f64,
    #[serde(rename = "f_P")]
    pub f_p: f64,
    pub max_width_change: f64,
}

#[derive(Debug, Clone)]
pub struct InvHomResult {
    pub widths: Vec<f64>,
    pub unit: LatticeUnit,
    pub grid: DensityGrid,
    pub dh: KelvinMatrix,
    pub j: f64,
    pub kappa_ks: f64,
    pub volume: f64,
    pub history: Vec<IterationLog>,
    pub converged: bool,
}

impl InvHomResult {
    pub fn j_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.j).collect()
    }

    pub fn kappa_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.kappa_ks).collect()
    }

    pub fn volume_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.volume).collect()
    }
}

pub fn write_log_csv(path: &Path, history: &[IterationLog]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for h in history {
        w.serialize(h)?;
    }
    w.flush()?;
    Ok(())
}

fn feasible(c: &EvalCache, problem: &InvHomProblem) -> bool {
    c.volume <= problem.v_star + 1e-3 && (!problem.enforce_buckling || c.f_p <= 1e-6)
}

fn log_entry(iter: usize, c: &EvalCache, problem: &InvHomProblem, change: f64) -> IterationLog {
    IterationLog {
        iter,
        j: c.j,
        frob_term: (1.0 - problem.lambda_b) * c.frob,
        kappa_ks: c.kappa_ks(),
        c_b: c.c_b(),
        volume: c.volume,
        f_p: c.f_p,
        max_width_change: change,
    }
}

fn constraints(c: &EvalCache, problem: &InvHomProblem) -> Vec<f64> {
    let mut f = vec![c.volume - problem.v_star];
    if problem.enforce_buckling {
        f.push(c.f_p);
    }
    f
}

/// Runs GCMMA from the volume-matched uniform widths and returns the best feasible iterate.
pub fn solve_invhom(problem: &InvHomProblem) -> Result<InvHomResult> {
    solve_invhom_from(problem, &problem.initial_widths()?)
}

pub fn solve_invhom_from(problem: &InvHomProblem, start: &[f64]) -> Result<InvHomResult> {
    problem.validate()?;
    let nb = problem.unit.bars.len();
    let m = 1 + usize::from(problem.enforce_buckling);
    let mut opt = Gcmma::new(
        vec![problem.p_min; nb],
        vec![problem.p_max; nb],
        m,
        problem.gcmma,
    )?;
    let mut x: Vec<f64> = start
        .iter()
        .map(|v| v.clamp(problem.p_min, problem.p_max))
        .collect();
    let mut cache = evaluate(&x, problem)?;
    let mut history = vec![log_entry(0, &cache, problem, 0.0)];
    let mut best: Option<(f64, Vec<f64>)> = feasible(&cache, problem).then(|| (cache.j, x.clone()));
    let mut converged = false;
    for iter in 1..=problem.max_iter {
        let g = gradients(&cache, problem)?;
        let mut df = vec![g.dv];
        if problem.enforce_buckling {
            df.push(g.df_p);
        }
        let ev = Evaluation {
            f0: cache.j,
            df0: g.dj,
            f: constraints(&cache, problem),
            df,
        };
        let mut last: Option<EvalCache> = None;
        let out = opt.step(&x, &ev, |y| {
            let c = evaluate(y, problem)?;
            let r = (c.j, constraints(&c, problem));
            last = Some(c);
            Ok(r)
        })?;
        let change = out
            .x
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        cache = last.expect("gcmma evaluates at least once");
        x = out.x;
        history.push(log_entry(iter, &cache, problem, change));
        if feasible(&cache, problem) && best.as_ref().map_or(true, |(j, _)| cache.j < *j) {
            best = Some((cache.j, x.clone()));
        }
        log::debug!(
            "invhom iter {iter}: J = {:.6e}, V = {:.4}, dp = {change:.2e}",
            cache.j,
            cache.volume
        );
        if change < problem.tol {
            converged = true;
            break;
        }
    }
    let widths = match best {
        Some((_, w)) => w,
        None => {
            log::warn!("no iterate satisfied the volume bound; returning the last one");
            x
        }
    };
    let final_eval = if widths == cache.widths {
        cache
    } else {
        evaluate(&widths, problem)?
    };
    Ok(InvHomResult {
        widths,
        unit: final_eval.unit.clone(),
        grid: final_eval.grid().clone(),
        dh: final_eval.dh,
        j: final_eval.j,
        kappa_ks: final_eval.kappa_ks(),
        volume: final_eval.volume,
        history,
        converged,
    })
}
