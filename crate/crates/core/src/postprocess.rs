//! Manufacturability repair: thin-bar pruning, voxel connectivity, volume
//! rescaling and connector bars between neighbouring cells.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::lattice::{
    bar_levelset, heaviside, ks_blend, rasterize, write_pgm, Bar, DensityGrid, LatticeUnit,
    LevelSet, Point, SymmetryGroup,
};

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.02;
pub const DEFAULT_RHO_CUT: f64 = 0.5;

fn endpoint_key(v: Point) -> (i64, i64) {
    ((v[0] * 1e9).round() as i64, (v[1] * 1e9).round() as i64)
}

/// Endpoints on the boundary of the design domain stay attached to neighbours or mirror copies.
fn on_boundary(v: Point, symmetry: SymmetryGroup) -> bool {
    let lines: &[f64] = match symmetry {
        SymmetryGroup::QuarterMirror => &[0.0, 0.5],
        SymmetryGroup::None => &[0.0, 1.0],
    };
    v.iter()
        .any(|&c| lines.iter().any(|&l| (c - l).abs() < 1e-9))
}

/// Indices of bars with a free endpoint: shared with no other bar and off the domain boundary.
pub fn dangling_bars(unit: &LatticeUnit) -> Vec<usize> {
    let mut degree: HashMap<(i64, i64), usize> = HashMap::new();
    for b in &unit.bars {
        *degree.entry(endpoint_key(b.v1)).or_default() += 1;
        *degree.entry(endpoint_key(b.v2)).or_default() += 1;
    }
    let free = |v: Point| degree[&endpoint_key(v)] == 1 && !on_boundary(v, unit.symmetry);
    (0..unit.bars.len())
        .filter(|&i| free(unit.bars[i].v1) || free(unit.bars[i].v2))
        .collect()
}

pub fn prune_bars(unit: &LatticeUnit, threshold: f64) -> Result<LatticeUnit> {
    if !(threshold >= 0.0) {
        return param(format!(
            "prune threshold must be non-negative, got {threshold}"
        ));
    }
    let mut out = unit.clone();
    out.bars.retain(|b| b.p >= threshold);
    loop {
        let dangling = dangling_bars(&out);
        if dangling.is_empty() {
            break;
        }
        let mut i = 0;
        out.bars.retain(|_| {
            let keep = dangling.binary_search(&i).is_err();
            i += 1;
            keep
        });
    }
    if out.bars.is_empty() {
        return Err(Error::EmptyUnit);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub components: usize,
    /// Voxel count of each component, largest first.
    pub sizes: Vec<usize>,
    pub dangling_bars: Vec<usize>,
}

/// 8-connected components of `{rho >= rho_cut}` on a `width x height` row-major image.
pub fn label_components(width: usize, height: usize, rho: &[f64], rho_cut: f64) -> Vec<usize> {
    assert_eq!(rho.len(), width * height);
    let solid = |i: usize| rho[i] >= rho_cut;
    let mut label = vec![usize::MAX; rho.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rho.len() {
        if !solid(start) || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut count = 0;
        label[start] = id;
        stack.push(start);
        while let Some(v) = stack.pop() {
            count += 1;
            let (x, y) = ((v % width) as isize, (v / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let w = ny as usize * width + nx as usize;
                    if solid(w) && label[w] == usize::MAX {
                        label[w] = id;
                        stack.push(w);
                    }
                }
            }
        }
        sizes.push(count);
    }
    sizes
}

pub fn connectivity_image(
    width: usize,
    height: usize,
    rho: &[f64],
    rho_cut: f64,
) -> Result<ConnectivityReport> {
    if !(rho_cut > 0.0 && rho_cut < 1.0) {
        return param(format!("rho_cut must lie in (0, 1), got {rho_cut}"));
    }
    let mut sizes = label_components(width, height, rho, rho_cut);
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ConnectivityReport {
        components: sizes.len(),
        sizes,
        dangling_bars: Vec::new(),
    })
}

pub fn connectivity(grid: &DensityGrid, rho_cut: f64) -> Result<ConnectivityReport> {
    connectivity_image(grid.n, grid.n, &grid.rho, rho_cut)
}

/// Voxel connectivity of a rasterized unit plus its dangling bars.
pub fn unit_connectivity(unit: &LatticeUnit, n: usize, rho_cut: f64) -> Result<ConnectivityReport> {
    let mut report = connectivity(&rasterize(unit, n)?, rho_cut)?;
    report.dangling_bars = dangling_bars(unit);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub unit: LatticeUnit,
    pub factor: f64,
    pub volume: f64,
    /// False when the clamps keep the volume out of the target band.
    pub reached: bool,
}

pub const RESCALE_BAND: f64 = 0.002;

/// Scales all widths by one factor so the rasterized volume lands in `[v_star - 0.002, v_star]`.
pub fn rescale_volume(
    unit: &LatticeUnit,
    v_star: f64,
    n: usize,
    p_min: f64,
    p_max: f64,
) -> Result<Rescaled> {
    unit.validate()?;
    if !(v_star > 0.0 && v_star < 1.0) || !(p_min > 0.0 && p_min < p_max) {
        return param("rescale needs 0 < v_star < 1 and 0 < p_min < p_max");
    }
    let widths = unit.widths();
    let scaled = |s: f64| {
        unit.with_widths(
            &widths
                .iter()
                .map(|w| (w * s).clamp(p_min, p_max))
                .collect::<Vec<_>>(),
        )
    };
    let volume = |s: f64| -> Result<f64> { Ok(rasterize(&scaled(s), n)?.volume_fraction()) };
    let in_band = |v: f64| v <= v_star && v >= v_star - RESCALE_BAND;
    let done = |s: f64, v: f64, reached: bool| Rescaled {
        unit: scaled(s),
        factor: s,
        volume: v,
        reached,
    };

    let v1 = volume(1.0)?;
    if in_band(v1) {
        return Ok(done(1.0, v1, true));
    }
    let wmin = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let (s_lo, s_hi) = (0.0, p_max / wmin);
    let (v_lo, v_hi) = (volume(s_lo)?, volume(s_hi)?);
    if v_lo > v_star {
        log::warn!(
            "volume budget {v_star} unreachable: thinnest admissible unit has volume {v_lo:.4}"
        );
        return Ok(done(s_lo, v_lo, false));
    }
    if v_hi < v_star - RESCALE_BAND {
        log::warn!(
            "volume budget {v_star} unreachable: thickest admissible unit has volume {v_hi:.4}"
        );
        return Ok(done(s_hi, v_hi, false));
    }
    let (mut lo, mut hi) = (s_lo, s_hi);
    let mut best = (s_lo, v_lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = volume(mid)?;
        if v <= v_star {
            lo = mid;
            best = (mid, v);
            if in_band(v) {
                return Ok(done(mid, v, true));
            }
        } else {
            hi = mid;
        }
    }
    log::warn!(
        "rescale bisection ended outside the band at volume {:.4}",
        best.1
    );
    Ok(done(best.0, best.1, in_band(best.1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharedEdge {
    /// Unit B sits to the right of unit A.
    Right,
    /// Unit B sits above unit A.
    Top,
}

impl SharedEdge {
    fn offset(self) -> Point {
        match self {
            SharedEdge::Right => [1.0, 0.0],
            SharedEdge::Top => [0.0, 1.0],
        }
    }

    fn axis(self) -> usize {
        match self {
            SharedEdge::Right => 0,
            SharedEdge::Top => 1,
        }
    }
}

/// Whether solid voxels of A's boundary layer touch (8-neighbourhood) solid voxels of B's.
fn interface_touches(a: &DensityGrid, b: &DensityGrid, edge: SharedEdge, rho_cut: f64) -> bool {
    let n = a.n;
    let (ra, rb): (Vec<f64>, Vec<f64>) = match edge {
        SharedEdge::Right => (
            (0..n).map(|i| a.get(n - 1, i)).collect(),
            (0..n).map(|i| b.get(0, i)).collect(),
        ),
        SharedEdge::Top => (
            (0..n).map(|i| a.get(i, n - 1)).collect(),
            (0..n).map(|i| b.get(i, 0)).collect(),
        ),
    };
    (0..n).any(|i| {
        ra[i] >= rho_cut && (i.saturating_sub(1)..=(i + 1).min(n - 1)).any(|j| rb[j] >= rho_cut)
    })
}

/// Connector bars (in A's frame, B offset by one cell along `edge`) joining two
/// neighbouring units whose boundary layers do not touch.
pub fn connect_adjacent(
    a: &LatticeUnit,
    b: &LatticeUnit,
    edge: SharedEdge,
    n: usize,
    rho_cut: f64,
) -> Result<Vec<Bar>> {
    let (ga, gb) = (rasterize(a, n)?, rasterize(b, n)?);
    if interface_touches(&ga, &gb, edge, rho_cut) {
        return Ok(Vec::new());
    }
    let ax = edge.axis();
    let off = edge.offset();
    let ends = |u: &LatticeUnit, near: &dyn Fn(Point) -> bool| -> Vec<(Point, f64)> {
        u.full_cell_bars()
            .iter()
            .flat_map(|bar| [(bar.v1, bar.p), (bar.v2, bar.p)])
            .filter(|(v, _)| near(*v))
            .collect()
    };
    let ca = ends(a, &|v: Point| 1.0 - v[ax] <= 0.5);
    let cb: Vec<(Point, f64)> = ends(b, &|v: Point| v[ax] <= 0.5)
        .into_iter()
        .map(|(v, p)| ([v[0] + off[0], v[1] + off[1]], p))
        .collect();
    if ca.is_empty() || cb.is_empty() {
        return Err(Error::Connector(format!(
            "{edge:?} edge: no bar endpoint within half a cell"
        )));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, (pa, _)) in ca.iter().enumerate() {
        for (j, (pb, _)) in cb.iter().enumerate() {
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            if best.map_or(true, |(bd, _, _)| d < bd) {
                best = Some((d, i, j));
            }
        }
    }
    let (d, i, j) = best.expect("non-empty candidate sets");
    if d == 0.0 {
        return Ok(Vec::new());
    }
    let mut bar = Bar::new(ca[i].0, cb[j].0, 0.5 * (ca[i].1 + cb[j].1));
    bar.connector = true;
    Ok(vec![bar])
}

/// A macro arrangement of lattice units: cell `(cx, cy)` uses `units[cells[cy * nx + cx]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<usize>,
    pub units: Vec<LatticeUnit>,
    /// Connector bars in tile coordinates (one unit per cell).
    pub connectors: Vec<Bar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileImage {
    pub width: usize,
    pub height: usize,
    pub rho: Vec<f64>,
}

impl TileImage {
    pub fn volume_fraction(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        for row in self.rho.chunks(self.width) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.width, self.height, &self.rho)
    }

    pub fn connectivity(&self, rho_cut: f64) -> Result<ConnectivityReport> {
        connectivity_image(self.width, self.height, &self.rho, rho_cut)
    }
}

fn segment_near_cell(bar: &Bar, cx: usize, cy: usize, reach: f64) -> bool {
    let (x0, y0) = (cx as f64 - reach, cy as f64 - reach);
    let (x1, y1) = (cx as f64 + 1.0 + reach, cy as f64 + 1.0 + reach);
    let lo = [bar.v1[0].min(bar.v2[0]), bar.v1[1].min(bar.v2[1])];
    let hi = [bar.v1[0].max(bar.v2[0]), bar.v1[1].max(bar.v2[1])];
    hi[0] >= x0 && lo[0] <= x1 && hi[1] >= y0 && lo[1] <= y1
}

impl Tile {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.cells.len() != self.nx * self.ny {
            return param("tile cell list does not match its dimensions");
        }
        if self.cells.iter().any(|&c| c >= self.units.len()) {
            return param("tile references a missing unit");
        }
        for u in &self.units {
            u.validate()?;
        }
        Ok(())
    }

    /// Inserts connectors across every interior interface whose units do not touch.
    pub fn connect(&mut self, n: usize, rho_cut: f64) -> Result<usize> {
        let mut cache: HashMap<(usize, usize, SharedEdge), Vec<Bar>> = HashMap::new();
        let mut added = 0;
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let a = self.cells[cy * self.nx + cx];
                let mut neighbours = Vec::new();
                if cx + 1 < self.nx {
                    neighbours.push((SharedEdge::Right, self.cells[cy * self.nx + cx + 1]));
                }
                if cy + 1 < self.ny {
                    neighbours.push((SharedEdge::Top, self.cells[(cy + 1) * self.nx + cx]));
                }
                for (edge, b) in neighbours {
                    let bars = match cache.get(&(a, b, edge)) {
                        Some(bars) => bars.clone(),
                        None => {
                            let bars =
                                connect_adjacent(&self.units[a], &self.units[b], edge, n, rho_cut)
                                    .map_err(|e| match e {
                                        Error::Connector(msg) => {
                                            Error::Connector(format!("cell ({cx}, {cy}) {msg}"))
                                        }
                                        other => other,
                                    })?;
                            cache.insert((a, b, edge), bars.clone());
                            bars
                        }
                    };
                    for bar in bars {
                        let t = |v: Point| [v[0] + cx as f64, v[1] + cy as f64];
                        self.connectors.push(Bar {
                            v1: t(bar.v1),
                            v2: t(bar.v2),
                            ..bar
                        });
                        added += 1;
                    }
                }
            }
        }
        Ok(added)
    }

    /// Rasterizes the tile at `n` voxels per cell; each voxel blends its own cell's
    /// level set with nearby connectors.
    pub fn rasterize(&self, n: usize) -> Result<TileImage> {
        self.validate()?;
        let sets: Vec<LevelSet> = self.units.iter().map(LevelSet::new).collect();
        let (width, height) = (self.nx * n, self.ny * n);
        let reach = 0.5;
        let near: Vec<Vec<&Bar>> = (0..self.nx * self.ny)
            .map(|c| {
                self.connectors
                    .iter()
                    .filter(|b| segment_near_cell(b, c % self.nx, c / self.nx, reach))
                    .collect()
            })
            .collect();
        let rho = (0..width * height)
            .into_par_iter()
            .map(|v| {
                let (ix, iy) = (v % width, v / width);
                let (cx, cy) = (ix / n, iy / n);
                let c = cy * self.nx + cx;
                let unit = &self.units[self.cells[c]];
                let local = [
                    ((ix % n) as f64 + 0.5) / n as f64,
                    ((iy % n) as f64 + 0.5) / n as f64,
                ];
                let global = [cx as f64 + local[0], cy as f64 + local[1]];
                let mut values = vec![sets[self.cells[c]].value(local)];
                values.extend(near[c].iter().map(|b| bar_levelset(global, b)));
                heaviside(ks_blend(&values, unit.ks_k), unit.gamma)
            })
            .collect();
        Ok(TileImage { width, height, rho })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(bars: Vec<Bar>) -> LatticeUnit {
        LatticeUnit {
            bars,
            symmetry: SymmetryGroup::None,
            ks_k: 100.0,
            gamma: 0.005,
        }
    }

    #[test]
    fn chain_prunes_to_fixed_point() {
        // chain hanging off the boundary; cutting its thin tip leaves the rest dangling in turn
        let u = unit(vec![
            Bar::new([0.0, 0.5], [0.3, 0.5], 0.1),
            Bar::new([0.3, 0.5], [0.5, 0.5], 0.1),
            Bar::new([0.5, 0.5], [0.7, 0.5], 0.01),
            Bar::new([0.5, 0.0], [0.5, 1.0], 0.1),
        ]);
        let p = prune_bars(&u, 0.02).unwrap();
        assert_eq!(p.bars.len(), 1);
        assert_eq!(p.bars[0].v1, [0.5, 0.0]);
    }

    #[test]
    fn all_pruned_is_an_error() {
        let u = unit(vec![Bar::new([0.2, 0.2], [0.4, 0.4], 0.01)]);
        assert!(matches!(prune_bars(&u, 0.02), Err(Error::EmptyUnit)));
    }

    #[test]
    fn diagonal_blocks_are_one_component() {
        let mut rho = vec![0.0; 16];
        for &i in &[0, 1, 4, 5, 10, 11, 14, 15] {
            rho[i] = 1.0;
        }
        let r = connectivity(&DensityGrid::new(4, rho).unwrap(), 0.5).unwrap();
        assert_eq!(r.components, 1);
        assert_eq!(r.sizes, vec![8]);
    }

    #[test]
    fn touching_units_need_no_connector() {
        let a = unit(vec![Bar::new([0.0, 0.5], [1.0, 0.5], 0.1)]);
        assert!(connect_adjacent(&a, &a, SharedEdge::Right, 20, 0.5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn facing_bars_get_mean_width_connector() {
        let a = unit(vec![
            Bar::new([0.1, 0.4], [0.9, 0.4], 0.1),
            Bar::new([0.1, 0.1], [0.1, 0.9], 0.1),
        ]);
        let b = unit(vec![
            Bar::new([0.1, 0.4], [0.9, 0.4], 0.2),
            Bar::new([0.9, 0.1], [0.9, 0.9], 0.2),
        ]);
        let c = connect_adjacent(&a, &b, SharedEdge::Right, 20, 0.5).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].connector);
        assert!((c[0].p - 0.15).abs() < 1e-15);
        assert_eq!(c[0].v1, [0.9, 0.4]);
        assert!((c[0].v2[0] - 1.1).abs() < 1e-15 && c[0].v2[1] == 0.4);
    }

    #[test]
    fn far_endpoints_fail() {
        let a = unit(vec![Bar::new([0.1, 0.1], [0.3, 0.3], 0.05)]);
        let b = unit(vec![Bar::new([0.7, 0.7], [0.9, 0.9], 0.05)]);
        assert!(matches!(
            connect_adjacent(&a, &b, SharedEdge::Right, 20, 0.5),
            Err(Error::Connector(_))
        ));
    }
}
