//! Implicit bar lattices: capsule level sets, soft union, Heaviside projection
//! and rasterization onto a periodic voxel grid.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub v1: Point,
    pub v2: Point,
    pub p: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub connector: bool,
}

impl Bar {
    pub fn new(v1: Point, v2: Point, p: f64) -> Bar {
        Bar {
            v1,
            v2,
            p,
            connector: false,
        }
    }

    pub fn length(&self) -> f64 {
        ((self.v2[0] - self.v1[0]).powi(2) + (self.v2[1] - self.v1[1]).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !self.p.is_finite() {
            return param(format!("bar width must be positive, got {}", self.p));
        }
        if self.length() == 0.0 {
            return param("bar endpoints coincide");
        }
        let inside = |v: &Point| v.iter().all(|&c| (-1e-9..=1.0 + 1e-9).contains(&c));
        if !inside(&self.v1) || !inside(&self.v2) {
            return param("bar endpoints must lie in the unit cell");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryGroup {
    QuarterMirror,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeUnit {
    pub bars: Vec<Bar>,
    pub symmetry: SymmetryGroup,
    pub ks_k: f64,
    pub gamma: f64,
}

impl LatticeUnit {
    pub fn validate(&self) -> Result<()> {
        if self.bars.is_empty() {
            return Err(Error::EmptyUnit);
        }
        if !(self.ks_k > 0.0) || !(self.gamma > 0.0) {
            return param("ks_k and gamma must be positive");
        }
        for b in &self.bars {
            b.validate()?;
            if self.symmetry == SymmetryGroup::QuarterMirror {
                let inside = |v: &Point| v.iter().all(|&c| c <= 0.5 + 1e-9);
                if !inside(&b.v1) || !inside(&b.v2) {
                    return param("quarter-mirror bars must lie in [0, 0.5]^2");
                }
            }
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.p).collect()
    }

    pub fn with_widths(&self, p: &[f64]) -> LatticeUnit {
        assert_eq!(p.len(), self.bars.len());
        let mut u = self.clone();
        for (b, &w) in u.bars.iter_mut().zip(p) {
            b.p = w;
        }
        u
    }

    /// Bars of the whole cell after applying the mirror group, duplicates dropped.
    pub fn full_cell_bars(&self) -> Vec<Bar> {
        let mirrors: &[(bool, bool)] = match self.symmetry {
            SymmetryGroup::QuarterMirror => {
                &[(false, false), (true, false), (false, true), (true, true)]
            }
            SymmetryGroup::None => &[(false, false)],
        };
        let key = |v: Point| ((v[0] * 1e9).round() as i64, (v[1] * 1e9).round() as i64);
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for bar in &self.bars {
            for &(mx, my) in mirrors {
                let f = |v: Point| {
                    [
                        if mx { 1.0 - v[0] } else { v[0] },
                        if my { 1.0 - v[1] } else { v[1] },
                    ]
                };
                let (a, b) = (f(bar.v1), f(bar.v2));
                let (ka, kb) = (key(a), key(b));
                if seen.insert(if ka <= kb { (ka, kb) } else { (kb, ka) }) {
                    out.push(Bar {
                        v1: a,
                        v2: b,
                        ..*bar
                    });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<LatticeUnit> {
        let u: LatticeUnit = serde_json::from_str(s)?;
        u.validate()?;
        Ok(u)
    }
}

/// Distance from `x` to the segment `[v1, v2]`.
pub fn bar_distance(x: Point, v1: Point, v2: Point) -> f64 {
    let a = [x[0] - v1[0], x[1] - v1[1]];
    let b = [v2[0] - v1[0], v2[1] - v1[1]];
    let ab = a[0] * b[0] + a[1] * b[1];
    let bb = b[0] * b[0] + b[1] * b[1];
    if ab <= 0.0 {
        (a[0] * a[0] + a[1] * a[1]).sqrt()
    } else if ab >= bb {
        ((x[0] - v2[0]).powi(2) + (x[1] - v2[1]).powi(2)).sqrt()
    } else {
        (a[0] * b[1] - a[1] * b[0]).abs() / bb.sqrt()
    }
}

/// Capsule level set: negative inside, zero on the boundary.
pub fn bar_levelset(x: Point, bar: &Bar) -> f64 {
    bar_distance(x, bar.v1, bar.v2) - 0.5 * bar.p
}

/// Soft minimum `-(1/k) ln sum exp(-k v_i)`.
pub fn ks_blend(values: &[f64], k: f64) -> f64 {
    assert!(!values.is_empty() && k > 0.0);
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|&v| (-k * (v - m)).exp()).sum();
    m - s.ln() / k
}

/// Cubic regularized Heaviside, 1 inside (`omega < -gamma`) and 0 outside.
pub fn heaviside(omega: f64, gamma: f64) -> f64 {
    if omega <= -gamma {
        1.0
    } else if omega >= gamma {
        0.0
    } else {
        let t = omega / gamma;
        -0.75 * (t - t * t * t / 3.0) + 0.5
    }
}

pub fn heaviside_derivative(omega: f64, gamma: f64) -> f64 {
    if omega.abs() >= gamma {
        0.0
    } else {
        3.0 * (omega * omega - gamma * gamma) / (4.0 * gamma.powi(3))
    }
}

/// Full-grid voxel to design-voxel map. Voxel `(ix, iy)` has index `iy n + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryMap {
    pub n: usize,
    pub group: SymmetryGroup,
    pub map: Vec<usize>,
    pub n_design: usize,
    /// A representative full voxel for each design index.
    pub representative: Vec<usize>,
}

impl SymmetryMap {
    pub fn new(n: usize, group: SymmetryGroup) -> Result<SymmetryMap> {
        if n == 0 {
            return param("grid resolution must be positive");
        }
        match group {
            SymmetryGroup::None => Ok(SymmetryMap {
                n,
                group,
                map: (0..n * n).collect(),
                n_design: n * n,
                representative: (0..n * n).collect(),
            }),
            SymmetryGroup::QuarterMirror => {
                if n % 2 != 0 {
                    return param(format!(
                        "quarter-mirror grids need an even resolution, got {n}"
                    ));
                }
                let h = n / 2;
                let mut map = vec![0; n * n];
                for iy in 0..n {
                    for ix in 0..n {
                        let fx = ix.min(n - 1 - ix);
                        let fy = iy.min(n - 1 - iy);
                        map[iy * n + ix] = fy * h + fx;
                    }
                }
                let representative = (0..h * h).map(|d| (d / h) * n + d % h).collect();
                Ok(SymmetryMap {
                    n,
                    group,
                    map,
                    n_design: h * h,
                    representative,
                })
            }
        }
    }

    /// Number of full voxels mapped to each design index.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.n_design];
        for &d in &self.map {
            m[d] += 1;
        }
        m
    }

    /// `L^T v`: sums full-voxel values onto design indices.
    pub fn fold(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_design];
        for (v, &d) in full.iter().zip(&self.map) {
            out[d] += v;
        }
        out
    }

    /// `L mu`.
    pub fn expand(&self, design: &[f64]) -> Vec<f64> {
        self.map.iter().map(|&d| design[d]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub n: usize,
    pub rho: Vec<f64>,
}

impl DensityGrid {
    pub fn new(n: usize, rho: Vec<f64>) -> Result<DensityGrid> {
        if rho.len() != n * n {
            return param(format!(
                "grid of size {n} needs {} values, got {}",
                n * n,
                rho.len()
            ));
        }
        if rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return param("densities must lie in [0, 1]");
        }
        Ok(DensityGrid { n, rho })
    }

    pub fn filled(n: usize, value: f64) -> DensityGrid {
        DensityGrid {
            n,
            rho: vec![value; n * n],
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.rho[iy * self.n + ix]
    }

    pub fn volume_fraction(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    /// One row per `iy`, comma separated.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        for iy in 0..self.n {
            w.write_record(
                self.rho[iy * self.n..(iy + 1) * self.n]
                    .iter()
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<DensityGrid> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        let mut rho = Vec::new();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            for f in rec.iter() {
                rho.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parameter(format!("bad density {f}: {e}")))?,
                );
            }
            rows += 1;
        }
        DensityGrid::new(rows, rho)
    }

    /// Binary 8-bit PGM with `iy = n - 1` as the top row.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.n, self.n, &self.rho)
    }
}

/// Writes a `width x height` row-major (bottom row first) density image.
pub fn write_pgm(path: &Path, width: usize, height: usize, rho: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    let mut buf = Vec::with_capacity(width * height);
    for iy in (0..height).rev() {
        for ix in 0..width {
            buf.push((rho[iy * width + ix].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    f.write_all(&buf)?;
    f.flush()?;
    Ok(())
}

/// One placed copy of a design bar in the periodic plane.
#[derive(Debug, Clone, Copy)]
struct Image {
    a: Point,
    b: Point,
    half: f64,
    design: usize,
}

fn segment_box_distance(a: Point, b: Point) -> f64 {
    // Distance from the segment to the unit square, bounded via endpoint clamping.
    let clamp = |v: Point| [v[0].clamp(0.0, 1.0), v[1].clamp(0.0, 1.0)];
    let mut best = f64::INFINITY;
    for t in 0..=16 {
        let s = t as f64 / 16.0;
        let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let c = clamp(p);
        best = best.min(((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt());
    }
    best
}

fn expand_images(unit: &LatticeUnit) -> Vec<Image> {
    let mirrors: &[(bool, bool)] = match unit.symmetry {
        SymmetryGroup::QuarterMirror => {
            &[(false, false), (true, false), (false, true), (true, true)]
        }
        SymmetryGroup::None => &[(false, false)],
    };
    let key = |v: f64| (v * 1e9).round() as i64;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, bar) in unit.bars.iter().enumerate() {
        for &(mx, my) in mirrors {
            let f = |v: Point| {
                [
                    if mx { 1.0 - v[0] } else { v[0] },
                    if my { 1.0 - v[1] } else { v[1] },
                ]
            };
            for tx in -1i32..=1 {
                for ty in -1i32..=1 {
                    let t = |v: Point| [v[0] + tx as f64, v[1] + ty as f64];
                    let (a, b) = (t(f(bar.v1)), t(f(bar.v2)));
                    if segment_box_distance(a, b) > 0.5 {
                        continue;
                    }
                    let (ka, kb) = ((key(a[0]), key(a[1])), (key(b[0]), key(b[1])));
                    let k = if ka <= kb { (ka, kb, i) } else { (kb, ka, i) };
                    if seen.insert(k) {
                        out.push(Image {
                            a,
                            b,
                            half: 0.5 * bar.p,
                            design: i,
                        });
                    }
                }
            }
        }
    }
    out
}

fn voxel_center(v: usize, n: usize) -> Point {
    [
        ((v % n) as f64 + 0.5) / n as f64,
        ((v / n) as f64 + 0.5) / n as f64,
    ]
}

/// Level set value and per-image softmin weights at a point.
fn blend_at(x: Point, images: &[Image], k: f64) -> (f64, Vec<f64>) {
    let vals: Vec<f64> = images
        .iter()
        .map(|im| bar_distance(x, im.a, im.b) - im.half)
        .collect();
    let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = vals.iter().map(|&v| (-k * (v - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    (m - s.ln() / k, e.into_iter().map(|w| w / s).collect())
}

/// Blended level set of a unit and its periodic images, evaluable at any point of the cell.
#[derive(Debug, Clone)]
pub struct LevelSet {
    images: Vec<Image>,
    k: f64,
}

impl LevelSet {
    pub fn new(unit: &LatticeUnit) -> LevelSet {
        LevelSet {
            images: expand_images(unit),
            k: unit.ks_k,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        blend_at(x, &self.images, self.k).0
    }
}

/// Level set `omega` on the design voxels.
pub fn levelset_design(unit: &LatticeUnit, map: &SymmetryMap) -> Vec<f64> {
    let images = expand_images(unit);
    map.representative
        .par_iter()
        .map(|&v| blend_at(voxel_center(v, map.n), &images, unit.ks_k).0)
        .collect()
}

pub fn rasterize(unit: &LatticeUnit, n: usize) -> Result<DensityGrid> {
    unit.validate()?;
    if n < 4 {
        return param(format!("grid resolution must be at least 4, got {n}"));
    }
    let map = SymmetryMap::new(n, unit.symmetry)?;
    let design: Vec<f64> = levelset_design(unit, &map)
        .iter()
        .map(|&w| heaviside(w, unit.gamma))
        .collect();
    Ok(DensityGrid {
        n,
        rho: map.expand(&design),
    })
}

/// Sparse `d rho / d p`: for each design voxel, the nonzero `(bar, derivative)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGradient {
    pub map: SymmetryMap,
    pub n_bars: usize,
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl DensityGradient {
    /// Chains a full-grid sensitivity `df/drho` to the bar widths.
    pub fn chain(&self, df_drho: &[f64]) -> Vec<f64> {
        assert_eq!(df_drho.len(), self.map.n * self.map.n);
        let folded = self.map.fold(df_drho);
        let mut out = vec![0.0; self.n_bars];
        for (d, row) in self.entries.iter().enumerate() {
            for &(i, g) in row {
                out[i] += folded[d] * g;
            }
        }
        out
    }

    /// Dense full-grid derivative column for bar `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        let design: Vec<f64> = self
            .entries
            .iter()
            .map(|row| row.iter().filter(|e| e.0 == i).map(|e| e.1).sum())
            .collect();
        self.map.expand(&design)
    }
}

pub fn density_gradient(unit: &LatticeUnit, n: usize) -> Result<DensityGradient> {
    unit.validate()?;
    let map = SymmetryMap::new(n, unit.symmetry)?;
    let images = expand_images(unit);
    let nb = unit.bars.len();
    let entries: Vec<Vec<(usize, f64)>> = map
        .representative
        .par_iter()
        .map(|&v| {
            let (omega, w) = blend_at(voxel_center(v, n), &images, unit.ks_k);
            let dh = heaviside_derivative(omega, unit.gamma);
            if dh == 0.0 {
                return Vec::new();
            }
            let mut g = vec![0.0; nb];
            for (im, wi) in images.iter().zip(&w) {
                g[im.design] += -0.5 * wi;
            }
            g.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, dh * x))
                .collect()
        })
        .collect();
    Ok(DensityGradient {
        map,
        n_bars: nb,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, nbars: usize) -> LatticeUnit {
        let mut bars = Vec::new();
        while bars.len() < nbars {
            let v1 = [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)];
            let v2 = [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)];
            if bar_distance(v1, v2, v2) > 0.05 {
                bars.push(Bar::new(v1, v2, rng.gen_range(0.03..0.2)));
            }
        }
        LatticeUnit {
            bars,
            symmetry: SymmetryGroup::QuarterMirror,
            ks_k: 30.0,
            gamma: 0.02,
        }
    }

    #[test]
    fn distance_branches() {
        assert_eq!(bar_distance([0.5, 0.5], [0.2, 0.5], [0.8, 0.5]), 0.0);
        let d = bar_distance([1.1, 0.5], [0.2, 0.5], [0.8, 0.5]);
        assert!((d - 0.3).abs() < 1e-15);
        let d = bar_distance([0.0, 0.5], [0.2, 0.5], [0.8, 0.5]);
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distance_matches_sampled_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v1 = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let v2 = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let x = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let n = 100_000;
            let sampled = (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    ((x[0] - v1[0] - t * (v2[0] - v1[0])).powi(2)
                        + (x[1] - v1[1] - t * (v2[1] - v1[1])).powi(2))
                    .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((bar_distance(x, v1, v2) - sampled).abs() < 1e-4);
        }
    }

    #[test]
    fn levelset_examples() {
        let bar = Bar::new([0.1, 0.2], [0.4, 0.2], 0.1);
        assert!((bar_levelset([0.2, 0.2], &bar) + 0.05).abs() < 1e-15);
        assert!(bar_levelset([0.2, 0.25], &bar).abs() < 1e-15);
        assert!((bar_levelset([0.2, 0.3], &bar) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn ks_blend_examples() {
        assert_eq!(ks_blend(&[0.37], 30.0), 0.37);
        assert!((ks_blend(&[0.2, 0.2], 7.0) - (0.2 - 2f64.ln() / 7.0)).abs() < 1e-15);
        let v = ks_blend(&[0.0, 10.0], 10.0);
        assert!(v <= 0.0 && v > -1e-12);
        assert!(ks_blend(&[-5000.0, 3.0], 50.0).is_finite());
    }

    #[test]
    fn heaviside_examples() {
        let g = 0.005;
        assert_eq!(heaviside(-g, g), 1.0);
        assert_eq!(heaviside(0.0, g), 0.5);
        assert!((heaviside(g / 2.0, g) - 5.0 / 32.0).abs() < 1e-15);
        assert_eq!(heaviside(g, g), 0.0);
        assert!((heaviside(-g * (1.0 - 1e-12), g) - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn ks_blend_bounds_and_monotone(vals in prop::collection::vec(-1.0f64..1.0, 1..10), k in 1.0f64..100.0, i in 0usize..10, d in 0.001f64..0.5) {
            let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let w = ks_blend(&vals, k);
            prop_assert!(w <= m + 1e-15);
            prop_assert!(w >= m - (vals.len() as f64).ln() / k - 1e-15);
            let mut lower = vals.clone();
            let i = i % vals.len();
            lower[i] -= d;
            prop_assert!(ks_blend(&lower, k) <= w + 1e-12);
        }

        #[test]
        fn heaviside_monotone_in_range(a in -0.02f64..0.02, b in -0.02f64..0.02) {
            let g = 0.005;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(heaviside(lo, g) >= heaviside(hi, g));
            prop_assert!((0.0..=1.0).contains(&heaviside(a, g)));
        }

        #[test]
        fn widening_adds_material(seed in 0u64..500, s in 1.0f64..1.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unit(&mut rng, 4);
            let wide = u.with_widths(&u.widths().iter().map(|p| p * s).collect::<Vec<_>>());
            let a = rasterize(&u, 12).unwrap();
            let b = rasterize(&wide, 12).unwrap();
            for (x, y) in a.rho.iter().zip(&b.rho) {
                prop_assert!(*y >= *x - 1e-12);
            }
        }
    }

    #[test]
    fn horizontal_bar_area() {
        let u = LatticeUnit {
            bars: vec![Bar::new([0.25, 0.5], [0.75, 0.5], 0.5)],
            symmetry: SymmetryGroup::None,
            ks_k: 30.0,
            gamma: 0.005,
        };
        let g = rasterize(&u, 40).unwrap();
        let area = 0.5 * 0.5 + std::f64::consts::PI * 0.25 * 0.25;
        assert!(
            (g.volume_fraction() - area).abs() <= 0.02 * area,
            "{} vs {area}",
            g.volume_fraction()
        );
    }

    #[test]
    fn thin_bars_vanish_off_axis() {
        let u = LatticeUnit {
            bars: vec![Bar::new([0.1, 0.1], [0.4, 0.1], 1e-4)],
            symmetry: SymmetryGroup::QuarterMirror,
            ks_k: 30.0,
            gamma: 0.005,
        };
        let g = rasterize(&u, 20).unwrap();
        assert!(g.rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn quarter_mirror_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_unit(&mut rng, 6);
        let n = 16;
        let g = rasterize(&u, n).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                assert_eq!(g.get(ix, iy).to_bits(), g.get(n - 1 - ix, iy).to_bits());
                assert_eq!(g.get(ix, iy).to_bits(), g.get(ix, n - 1 - iy).to_bits());
            }
        }
        let m = SymmetryMap::new(n, SymmetryGroup::QuarterMirror).unwrap();
        assert!(m.multiplicity().iter().all(|&c| c == 4));
        assert!(SymmetryMap::new(7, SymmetryGroup::QuarterMirror).is_err());
    }

    #[test]
    fn gradient_outside_band_is_zero_and_single_bar_sign() {
        let u = LatticeUnit {
            bars: vec![Bar::new([0.1, 0.25], [0.4, 0.25], 0.2)],
            symmetry: SymmetryGroup::None,
            ks_k: 30.0,
            gamma: 0.02,
        };
        let n = 20;
        let grad = density_gradient(&u, n).unwrap();
        let map = SymmetryMap::new(n, SymmetryGroup::None).unwrap();
        let omega = levelset_design(&u, &map);
        for (d, row) in grad.entries.iter().enumerate() {
            if omega[d].abs() >= u.gamma {
                assert!(row.is_empty());
            } else {
                let expected =
                    0.5 * (-3.0 * (omega[d].powi(2) - u.gamma.powi(2)) / (4.0 * u.gamma.powi(3)));
                assert!(expected >= 0.0);
                assert!((row[0].1 - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
        assert!(grad.entries.iter().any(|r| !r.is_empty()));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut u = random_unit(&mut rng, 5);
        u.gamma = 0.05;
        let n = 16;
        let grad = density_gradient(&u, n).unwrap();
        let p = u.widths();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += h;
            let up = rasterize(&u.with_widths(&pp), n).unwrap();
            pp[i] -= 2.0 * h;
            let dn = rasterize(&u.with_widths(&pp), n).unwrap();
            let col = grad.column(i);
            for v in 0..n * n {
                let fd = (up.rho[v] - dn.rho[v]) / (2.0 * h);
                if col[v].abs() > 1e-8 {
                    assert!(
                        (fd - col[v]).abs() <= 1e-4 * col[v].abs(),
                        "bar {i} voxel {v}: {fd} vs {}",
                        col[v]
                    );
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u = random_unit(&mut rng, 3);
        u.bars[1].connector = true;
        let s = u.to_json().unwrap();
        assert!(s.contains("\"connector\": true"));
        assert_eq!(LatticeUnit::from_json(&s).unwrap(), u);
    }

    #[test]
    fn csv_and_pgm_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = rasterize(&random_unit(&mut rng, 3), 8).unwrap();
        let p = dir.path().join("g.csv");
        g.write_csv(&p).unwrap();
        assert_eq!(DensityGrid::read_csv(&p).unwrap(), g);
        let q = dir.path().join("g.pgm");
        g.write_pgm(&q).unwrap();
        let bytes = std::fs::read(&q).unwrap();
        let header = b"P5\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body.len(), 64);
        assert_eq!(body[0], (g.get(0, 7) * 255.0).round() as u8);
    }
}
