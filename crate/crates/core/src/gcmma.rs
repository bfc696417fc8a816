//! Globally convergent method of moving asymptotes for
//! `min f0(x)` subject to `f_i(x) <= 0`, `xmin <= x <= xmax`.

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GcmmaOptions {
    pub asy_init: f64,
    pub asy_incr: f64,
    pub asy_decr: f64,
    pub move_limit: f64,
    /// Linear and quadratic penalty on the elastic variables `y_i`.
    pub c: f64,
    pub d: f64,
    pub max_inner: usize,
    pub kkt_tol: f64,
    pub conservative_tol: f64,
}

impl Default for GcmmaOptions {
    fn default() -> Self {
        GcmmaOptions {
            asy_init: 0.5,
            asy_incr: 1.2,
            asy_decr: 0.7,
            move_limit: 0.1,
            c: 1000.0,
            d: 1.0,
            max_inner: 20,
            kkt_tol: 1e-10,
            conservative_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcmmaState {
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    pub xold1: Option<Vec<f64>>,
    pub xold2: Option<Vec<f64>>,
    pub iter: usize,
    /// Conservatism of the objective followed by each constraint.
    pub raa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: Vec<f64>,
    pub f0: f64,
    pub f: Vec<f64>,
    pub inner_iterations: usize,
    pub conservative: bool,
}

/// Function values and gradients at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f0: f64,
    pub df0: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Gcmma {
    pub xmin: Vec<f64>,
    pub xmax: Vec<f64>,
    pub m: usize,
    pub opts: GcmmaOptions,
    pub state: GcmmaState,
}

/// Convex separable approximation `sum_j p_ij/(U_j - x_j) + q_ij/(x_j - L_j) + r_i`.
#[derive(Debug, Clone)]
struct Approx {
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<f64>,
}

struct Subproblem<'a> {
    a: &'a Approx,
    low: &'a [f64],
    upp: &'a [f64],
    alpha: &'a [f64],
    beta: &'a [f64],
    c: f64,
    d: f64,
}

impl Approx {
    /// `f~_i(xn) - f_i(x)`, accumulated without cancellation against `r`.
    fn change(&self, i: usize, x: &[f64], xn: &[f64], low: &[f64], upp: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..x.len() {
            let dx = xn[j] - x[j];
            s += self.p[i][j] * dx / ((upp[j] - xn[j]) * (upp[j] - x[j]))
                - self.q[i][j] * dx / ((xn[j] - low[j]) * (x[j] - low[j]));
        }
        s
    }

    fn value(&self, i: usize, x: &[f64], low: &[f64], upp: &[f64]) -> f64 {
        let mut s = self.r[i];
        for j in 0..x.len() {
            s += self.p[i][j] / (upp[j] - x[j]) + self.q[i][j] / (x[j] - low[j]);
        }
        s
    }
}

impl Subproblem<'_> {
    fn m(&self) -> usize {
        self.a.r.len() - 1
    }

    fn primal(&self, lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.low.len();
        let x = (0..n)
            .map(|j| {
                let mut pt = self.a.p[0][j];
                let mut qt = self.a.q[0][j];
                for (i, &l) in lam.iter().enumerate() {
                    pt += l * self.a.p[i + 1][j];
                    qt += l * self.a.q[i + 1][j];
                }
                let (sp, sq) = (pt.sqrt(), qt.sqrt());
                let xs = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
                xs.clamp(self.alpha[j], self.beta[j])
            })
            .collect();
        let y = lam
            .iter()
            .map(|&l| ((l - self.c) / self.d).max(0.0))
            .collect();
        (x, y)
    }

    /// Dual value and gradient.
    fn dual(&self, lam: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (x, y) = self.primal(lam);
        let mut w = self.a.value(0, &x, self.low, self.upp);
        let mut grad = vec![0.0; lam.len()];
        for i in 0..lam.len() {
            let gi = self.a.value(i + 1, &x, self.low, self.upp);
            grad[i] = gi - y[i];
            w += lam[i] * gi + self.c * y[i] + 0.5 * self.d * y[i] * y[i] - lam[i] * y[i];
        }
        (w, grad, x, y)
    }

    fn hessian(&self, lam: &[f64], x: &[f64]) -> DMatrix<f64> {
        let m = lam.len();
        let mut h = DMatrix::zeros(m, m);
        for j in 0..x.len() {
            if x[j] <= self.alpha[j] || x[j] >= self.beta[j] {
                continue;
            }
            let (u, l) = (self.upp[j] - x[j], x[j] - self.low[j]);
            let mut pt = self.a.p[0][j];
            let mut qt = self.a.q[0][j];
            for (i, &lv) in lam.iter().enumerate() {
                pt += lv * self.a.p[i + 1][j];
                qt += lv * self.a.q[i + 1][j];
            }
            let curv = 2.0 * pt / u.powi(3) + 2.0 * qt / l.powi(3);
            let dg: Vec<f64> = (0..m)
                .map(|i| self.a.p[i + 1][j] / (u * u) - self.a.q[i + 1][j] / (l * l))
                .collect();
            for a in 0..m {
                for b in 0..m {
                    h[(a, b)] -= dg[a] * dg[b] / curv;
                }
            }
        }
        for i in 0..m {
            if lam[i] > self.c {
                h[(i, i)] -= 1.0 / self.d;
            }
        }
        h
    }

    fn kkt(lam: &[f64], grad: &[f64]) -> f64 {
        lam.iter()
            .zip(grad)
            .map(|(&l, &g)| if l > 0.0 { g.abs() } else { g.max(0.0) })
            .fold(0.0, f64::max)
    }

    /// Maximizes the concave dual along the projected ray `max(lam + t s, 0)`.
    fn line_max(&self, lam: &[f64], s: &[f64]) -> Vec<f64> {
        let at = |t: f64| -> Vec<f64> {
            lam.iter()
                .zip(s)
                .map(|(&l, &d)| (l + t * d).max(0.0))
                .collect()
        };
        let slope = |t: f64| -> f64 {
            let p = at(t);
            let (_, g, _, _) = self.dual(&p);
            p.iter()
                .zip(s)
                .zip(&g)
                .map(|((&pi, &si), &gi)| if pi > 0.0 || si > 0.0 { si * gi } else { 0.0 })
                .sum()
        };
        let mut hi = 1.0;
        let mut guard = 0;
        while slope(hi) > 0.0 && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        at(0.5 * (lo + hi))
    }

    /// Projected Newton ascent on the dual; returns `(lambda, x, y, kkt residual)`.
    fn solve(&self, tol: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let m = self.m();
        let mut lam = vec![0.0; m];
        if m == 0 {
            let (x, y) = self.primal(&lam);
            return (lam, x, y, 0.0);
        }
        let mut res = f64::INFINITY;
        for _ in 0..500 {
            let (w, grad, x, _) = self.dual(&lam);
            res = Self::kkt(&lam, &grad);
            if res <= tol {
                break;
            }
            let free: Vec<usize> = (0..m).filter(|&i| lam[i] > 0.0 || grad[i] > 0.0).collect();
            let h = self.hessian(&lam, &x);
            let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| -h[(free[a], free[b])]);
            let gf = DVector::from_fn(free.len(), |a, _| grad[free[a]]);
            let scale = hf.amax().max(1e-300);
            let newton = hf
                .clone()
                .cholesky()
                .filter(|c| c.l().diagonal().iter().all(|&v| v * v > 1e-12 * scale))
                .map(|c| c.solve(&gf));
            let mut next = None;
            if let Some(sf) = newton {
                let mut s = vec![0.0; m];
                for (a, &i) in free.iter().enumerate() {
                    s[i] = sf[a];
                }
                let mut t = 1.0;
                let ascent: f64 = s.iter().zip(&grad).map(|(a, b)| a * b).sum();
                for _ in 0..40 {
                    let cand: Vec<f64> = lam
                        .iter()
                        .zip(&s)
                        .map(|(&l, &d)| (l + t * d).max(0.0))
                        .collect();
                    let (wc, gc, _, _) = self.dual(&cand);
                    if wc >= w + 1e-4 * t * ascent || Self::kkt(&cand, &gc) < res * 0.5 {
                        next = Some(cand);
                        break;
                    }
                    t *= 0.5;
                }
            }
            let cand = match next {
                Some(c) => c,
                None => {
                    let s: Vec<f64> = (0..m)
                        .map(|i| if free.contains(&i) { grad[i] } else { 0.0 })
                        .collect();
                    self.line_max(&lam, &s)
                }
            };
            if cand == lam {
                break;
            }
            lam = cand;
        }
        let (x, y) = self.primal(&lam);
        (lam, x, y, res)
    }
}

impl Gcmma {
    pub fn new(xmin: Vec<f64>, xmax: Vec<f64>, m: usize, opts: GcmmaOptions) -> Result<Gcmma> {
        if xmin.len() != xmax.len() || xmin.is_empty() {
            return param("bound vectors must be non-empty and of equal length");
        }
        if xmin
            .iter()
            .zip(&xmax)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return param("each lower bound must be finite and below its upper bound");
        }
        let n = xmin.len();
        let state = GcmmaState {
            low: vec![0.0; n],
            upp: vec![0.0; n],
            xold1: None,
            xold2: None,
            iter: 0,
            raa: vec![0.01; m + 1],
        };
        Ok(Gcmma {
            xmin,
            xmax,
            m,
            opts,
            state,
        })
    }

    pub fn n(&self) -> usize {
        self.xmin.len()
    }

    fn update_asymptotes(&mut self, x: &[f64]) {
        let o = &self.opts;
        let st = &mut self.state;
        for j in 0..x.len() {
            let range = self.xmax[j] - self.xmin[j];
            match (&st.xold1, &st.xold2) {
                (Some(x1), Some(x2)) => {
                    let z = (x[j] - x1[j]) * (x1[j] - x2[j]);
                    let f = if z < 0.0 {
                        o.asy_decr
                    } else if z > 0.0 {
                        o.asy_incr
                    } else {
                        1.0
                    };
                    st.low[j] = x[j] - f * (x1[j] - st.low[j]);
                    st.upp[j] = x[j] + f * (st.upp[j] - x1[j]);
                    st.low[j] = st.low[j].clamp(x[j] - 10.0 * range, x[j] - 0.01 * range);
                    st.upp[j] = st.upp[j].clamp(x[j] + 0.01 * range, x[j] + 10.0 * range);
                }
                _ => {
                    st.low[j] = x[j] - o.asy_init * range;
                    st.upp[j] = x[j] + o.asy_init * range;
                }
            }
        }
    }

    fn approximation(&self, x: &[f64], ev: &Evaluation, raa: &[f64]) -> Approx {
        let n = x.len();
        let m = self.m;
        let st = &self.state;
        let mut p = vec![vec![0.0; n]; m + 1];
        let mut q = vec![vec![0.0; n]; m + 1];
        let mut r = vec![0.0; m + 1];
        for i in 0..=m {
            let (fi, dfi) = if i == 0 {
                (ev.f0, &ev.df0)
            } else {
                (ev.f[i - 1], &ev.df[i - 1])
            };
            let mut s = fi;
            for j in 0..n {
                let range = (self.xmax[j] - self.xmin[j]).max(1e-5);
                let (ux, xl) = (st.upp[j] - x[j], x[j] - st.low[j]);
                let (pos, neg) = (dfi[j].max(0.0), (-dfi[j]).max(0.0));
                let extra = raa[i] / range;
                p[i][j] = (1.001 * pos + 0.001 * neg + extra) * ux * ux;
                q[i][j] = (0.001 * pos + 1.001 * neg + extra) * xl * xl;
                s -= p[i][j] / ux + q[i][j] / xl;
            }
            r[i] = s;
        }
        Approx { p, q, r }
    }

    /// Move-limited box `[alpha, beta]` of the current subproblem.
    pub fn move_box(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let st = &self.state;
        let ml = self.opts.move_limit;
        let alpha = (0..x.len())
            .map(|j| {
                let range = self.xmax[j] - self.xmin[j];
                self.xmin[j]
                    .max(st.low[j] + 0.1 * (x[j] - st.low[j]))
                    .max(x[j] - ml * range)
            })
            .collect();
        let beta = (0..x.len())
            .map(|j| {
                let range = self.xmax[j] - self.xmin[j];
                self.xmax[j]
                    .min(st.upp[j] - 0.1 * (st.upp[j] - x[j]))
                    .min(x[j] + ml * range)
            })
            .collect();
        (alpha, beta)
    }

    /// One outer iteration. `eval` returns `(f0, f)` at trial points.
    pub fn step<F>(&mut self, x: &[f64], ev: &Evaluation, mut eval: F) -> Result<StepOutcome>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let n = self.n();
        if x.len() != n || ev.df0.len() != n || ev.f.len() != self.m || ev.df.len() != self.m {
            return param("gcmma input dimensions do not match the problem");
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !ev.f0.is_finite()
            || !finite(&ev.df0)
            || !finite(&ev.f)
            || ev.df.iter().any(|r| r.len() != n || !finite(r))
        {
            return param("gcmma received non-finite function values or gradients");
        }
        if !finite(x) {
            return param("gcmma received a non-finite iterate");
        }
        let x: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| v.clamp(self.xmin[j], self.xmax[j]))
            .collect();
        self.update_asymptotes(&x);
        let (alpha, beta) = self.move_box(&x);
        let mut raa: Vec<f64> = (0..=self.m)
            .map(|i| {
                let d = if i == 0 { &ev.df0 } else { &ev.df[i - 1] };
                let s: f64 = d
                    .iter()
                    .enumerate()
                    .map(|(j, g)| g.abs() * (self.xmax[j] - self.xmin[j]))
                    .sum();
                (0.1 * s / n as f64).max(1e-6)
            })
            .collect();
        let mut outcome = None;
        for inner in 1..=self.opts.max_inner {
            let approx = self.approximation(&x, ev, &raa);
            let sub = Subproblem {
                a: &approx,
                low: &self.state.low,
                upp: &self.state.upp,
                alpha: &alpha,
                beta: &beta,
                c: self.opts.c,
                d: self.opts.d,
            };
            let (_, xn, _, res) = sub.solve(self.opts.kkt_tol);
            if res > self.opts.kkt_tol {
                log::debug!("gcmma dual stopped at KKT residual {res:e}");
            }
            let (f0n, fnv) = eval(&xn)?;
            if fnv.len() != self.m {
                return param("constraint evaluation returned the wrong number of values");
            }
            let base: Vec<f64> = std::iter::once(ev.f0).chain(ev.f.iter().copied()).collect();
            let true_vals: Vec<f64> = std::iter::once(f0n).chain(fnv.iter().copied()).collect();
            let change: Vec<f64> = (0..=self.m)
                .map(|i| approx.change(i, &x, &xn, &self.state.low, &self.state.upp))
                .collect();
            // Shortfall of the approximation below the true value, relative to the values involved.
            let shortfall: Vec<f64> = (0..=self.m)
                .map(|i| {
                    let gap = true_vals[i] - (base[i] + change[i]);
                    let scale = base[i].abs().max(true_vals[i].abs()).max(change[i].abs());
                    if gap > self.opts.conservative_tol * scale {
                        gap
                    } else {
                        0.0
                    }
                })
                .collect();
            let conservative = shortfall.iter().all(|&g| g == 0.0);
            outcome = Some(StepOutcome {
                x: xn.clone(),
                f0: f0n,
                f: fnv,
                inner_iterations: inner,
                conservative,
            });
            if conservative {
                break;
            }
            let st = &self.state;
            let dist: f64 = (0..n)
                .map(|j| {
                    let range = (self.xmax[j] - self.xmin[j]).max(1e-5);
                    (st.upp[j] - st.low[j]) * (xn[j] - x[j]).powi(2)
                        / ((st.upp[j] - xn[j]) * (xn[j] - st.low[j]) * range)
                })
                .sum::<f64>()
                .max(1e-16);
            for i in 0..=self.m {
                if shortfall[i] > 0.0 {
                    let delta = shortfall[i] / dist;
                    raa[i] = (1.1 * (raa[i] + delta)).min(10.0 * raa[i]);
                }
            }
        }
        let outcome = outcome.expect("at least one inner iteration");
        if !outcome.conservative {
            log::warn!("gcmma inner loop did not reach a conservative approximation");
        }
        self.state.raa = raa;
        self.state.xold2 = self.state.xold1.take();
        self.state.xold1 = Some(x);
        self.state.iter += 1;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_eval(a: &[f64], x: &[f64]) -> Evaluation {
        Evaluation {
            f0: x.iter().zip(a).map(|(x, a)| (x - a).powi(2)).sum(),
            df0: x.iter().zip(a).map(|(x, a)| 2.0 * (x - a)).collect(),
            f: vec![],
            df: vec![],
        }
    }

    #[test]
    fn quadratic_reaches_minimizer() {
        let a = [0.3, -0.7, 1.6];
        let mut opt = Gcmma::new(vec![-2.0; 3], vec![2.0; 3], 0, GcmmaOptions::default()).unwrap();
        let mut x = vec![1.5, 1.0, -1.0];
        let mut iters = 0;
        for _ in 0..30 {
            let ev = quad_eval(&a, &x);
            let out = opt
                .step(&x, &ev, |y| Ok((quad_eval(&a, y).f0, vec![])))
                .unwrap();
            assert!(out.inner_iterations <= 20);
            let done = out.x.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9);
            x = out.x;
            iters += 1;
            if done {
                break;
            }
        }
        assert!(iters <= 30);
        for (xi, ai) in x.iter().zip(&a) {
            assert!((xi - ai).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn linear_program_reaches_vertex() {
        // min -x1 - 2 x2  s.t.  x1 + x2 <= 1.5,  0 <= x <= 1  ->  (0.5, 1).
        let lp = |x: &[f64]| Evaluation {
            f0: -x[0] - 2.0 * x[1],
            df0: vec![-1.0, -2.0],
            f: vec![x[0] + x[1] - 1.5],
            df: vec![vec![1.0, 1.0]],
        };
        let mut opt = Gcmma::new(vec![0.0; 2], vec![1.0; 2], 1, GcmmaOptions::default()).unwrap();
        let mut x = vec![0.1, 0.1];
        let mut worst: f64 = 0.0;
        for k in 0..200 {
            let out = opt.step(&x, &lp(&x), |y| Ok((lp(y).f0, lp(y).f))).unwrap();
            assert!(out.conservative && out.inner_iterations <= 20);
            if k > 50 {
                worst = worst.max(out.f[0]);
            }
            x = out.x;
        }
        assert!(
            (x[0] - 0.5).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5,
            "{x:?}"
        );
        assert!(worst <= 1e-6);
    }

    #[test]
    fn stationary_point_is_kept() {
        let mut opt = Gcmma::new(vec![0.0; 2], vec![1.0; 2], 0, GcmmaOptions::default()).unwrap();
        let x = vec![0.5, 0.25];
        let ev = Evaluation {
            f0: 0.0,
            df0: vec![0.0, 0.0],
            f: vec![],
            df: vec![],
        };
        let out = opt
            .step(&x, &ev, |y| Ok((quad_eval(&[0.5, 0.25], y).f0, vec![])))
            .unwrap();
        for (a, b) in out.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonconvex_problem_stays_conservative() {
        // Rosenbrock-like objective with a disk constraint.
        let f = |x: &[f64]| Evaluation {
            f0: (1.0 - x[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2),
            df0: vec![
                -2.0 * (1.0 - x[0]) - 40.0 * x[0] * (x[1] - x[0] * x[0]),
                20.0 * (x[1] - x[0] * x[0]),
            ],
            f: vec![x[0] * x[0] + x[1] * x[1] - 1.0],
            df: vec![vec![2.0 * x[0], 2.0 * x[1]]],
        };
        let mut opt = Gcmma::new(vec![-1.5; 2], vec![1.5; 2], 1, GcmmaOptions::default()).unwrap();
        let mut x = vec![-1.0, 0.5];
        let mut prev = f(&x).f0;
        for _ in 0..100 {
            let out = opt.step(&x, &f(&x), |y| Ok((f(y).f0, f(y).f))).unwrap();
            assert!(out.inner_iterations <= 20);
            assert!(out.conservative);
            let (lo, hi) = (&opt.state.low, &opt.state.upp);
            for j in 0..2 {
                assert!(lo[j] < out.x[j] && out.x[j] < hi[j]);
            }
            if out.f[0] <= 1e-9 {
                assert!(out.f0 <= prev + 1e-9 || prev.is_nan());
                prev = out.f0;
            }
            x = out.x;
        }
        assert!(f(&x).f[0] <= 1e-6);
        // The unconstrained minimizer (1, 1) is outside the disk, so the optimum lies on the circle.
        let best = (0..=200_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 200_000.0;
                f(&[t.cos(), t.sin()]).f0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((f(&x).f0 - best).abs() < 1e-5, "{x:?}");
    }

    #[test]
    fn oscillation_shrinks_asymptotes() {
        let mut opt = Gcmma::new(vec![0.0], vec![1.0], 0, GcmmaOptions::default()).unwrap();
        opt.state.xold2 = Some(vec![0.4]);
        opt.state.xold1 = Some(vec![0.6]);
        opt.state.low = vec![0.2];
        opt.state.upp = vec![1.0];
        opt.update_asymptotes(&[0.5]);
        assert!((opt.state.low[0] - (0.5 - 0.7 * 0.4)).abs() < 1e-15);
        assert!((opt.state.upp[0] - (0.5 + 0.7 * 0.4)).abs() < 1e-15);
        opt.state.xold2 = Some(vec![0.4]);
        opt.state.xold1 = Some(vec![0.5]);
        opt.state.low = vec![0.3];
        opt.state.upp = vec![0.7];
        opt.update_asymptotes(&[0.6]);
        assert!((opt.state.low[0] - (0.6 - 1.2 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Gcmma::new(vec![1.0], vec![0.0], 0, GcmmaOptions::default()).is_err());
        let mut opt = Gcmma::new(vec![0.0], vec![1.0], 0, GcmmaOptions::default()).unwrap();
        let ev = Evaluation {
            f0: f64::NAN,
            df0: vec![0.0],
            f: vec![],
            df: vec![],
        };
        assert!(opt.step(&[0.5], &ev, |_| Ok((0.0, vec![]))).is_err());
    }
}
