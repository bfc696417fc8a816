use latopt_core::lattice::{rasterize, Bar, DensityGrid, LatticeUnit, SymmetryGroup};
use latopt_core::postprocess::{
    connect_adjacent, connectivity, dangling_bars, prune_bars, rescale_volume, SharedEdge, Tile,
    RESCALE_BAND,
};
use latopt_core::templates::{UnitTemplate, DEFAULT_GAMMA, DEFAULT_KS_K};
use latopt_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_unit(bars: Vec<Bar>) -> LatticeUnit {
    LatticeUnit {
        bars,
        symmetry: SymmetryGroup::None,
        ks_k: DEFAULT_KS_K,
        gamma: DEFAULT_GAMMA,
    }
}

fn random_template_unit(seed: u64) -> LatticeUnit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = UnitTemplate::Full21.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    u.bars.retain(|_| rng.gen_bool(0.6));
    for b in &mut u.bars {
        b.p = rng.gen_range(0.005..0.08);
    }
    if u.bars.is_empty() {
        u.bars.push(Bar::new([0.0, 0.0], [0.25, 0.25], 0.05));
    }
    u
}

/// Removes one dangling bar at a time until none is left.
fn prune_one_by_one(unit: &LatticeUnit, threshold: f64) -> Vec<Bar> {
    let mut u = unit.clone();
    u.bars.retain(|b| b.p >= threshold);
    while let Some(&i) = dangling_bars(&u).last() {
        u.bars.remove(i);
    }
    u.bars
}

#[test]
fn prune_matches_single_step_oracle_and_is_idempotent() {
    for seed in 0..100 {
        let u = random_template_unit(seed);
        let oracle = prune_one_by_one(&u, 0.02);
        match prune_bars(&u, 0.02) {
            Ok(p) => {
                assert_eq!(p.bars, oracle, "seed {seed}");
                assert_eq!(prune_bars(&p, 0.02).unwrap(), p, "seed {seed}");
            }
            Err(Error::EmptyUnit) => assert!(oracle.is_empty(), "seed {seed}"),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn prune_keeps_units_without_thin_bars() {
    let u = UnitTemplate::Selfsupport10.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    assert_eq!(prune_bars(&u, 0.02).unwrap(), u);
}

#[test]
fn prune_removes_one_isolated_thin_bar() {
    let mut u = UnitTemplate::Full21.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    u.bars[20].p = 0.01;
    let p = prune_bars(&u, 0.02).unwrap();
    assert_eq!(p.bars.len(), 20);
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Two-pass raster labeling with union-find; returns sorted component sizes.
fn two_pass(grid: &DensityGrid, cut: f64) -> Vec<usize> {
    let n = grid.n;
    let mut uf = UnionFind((0..n * n).collect());
    let solid = |x: usize, y: usize| grid.get(x, y) >= cut;
    for y in 0..n {
        for x in 0..n {
            if !solid(x, y) {
                continue;
            }
            let here = y * n + x;
            let back: [(isize, isize); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
            for (dx, dy) in back {
                let (px, py) = (x as isize + dx, y as isize + dy);
                if px >= 0 && py >= 0 && (px as usize) < n && solid(px as usize, py as usize) {
                    uf.union(here, py as usize * n + px as usize);
                }
            }
        }
    }
    let mut counts = std::collections::HashMap::new();
    for y in 0..n {
        for x in 0..n {
            if solid(x, y) {
                *counts.entry(uf.find(y * n + x)).or_insert(0) += 1;
            }
        }
    }
    let mut sizes: Vec<usize> = counts.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labeling_matches_union_find(n in 2usize..24, seed in 0u64..1000, fill in 0.2f64..0.7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho: Vec<f64> = (0..n * n).map(|_| if rng.gen_bool(fill) { 1.0 } else { 0.0 }).collect();
        let grid = DensityGrid::new(n, rho).unwrap();
        let r = connectivity(&grid, 0.5).unwrap();
        let oracle = two_pass(&grid, 0.5);
        prop_assert_eq!(r.components, oracle.len());
        prop_assert_eq!(r.sizes, oracle);
    }

    #[test]
    fn prune_is_idempotent(seed in 0u64..10_000, threshold in 0.0f64..0.06) {
        let u = random_template_unit(seed);
        if let Ok(p) = prune_bars(&u, threshold) {
            prop_assert_eq!(prune_bars(&p, threshold).unwrap(), p);
        }
    }
}

#[test]
fn full_grid_is_one_component() {
    let r = connectivity(&DensityGrid::filled(10, 1.0), 0.5).unwrap();
    assert_eq!(r.components, 1);
    assert_eq!(r.sizes, vec![100]);
}

#[test]
fn rescale_keeps_topology_and_hits_band() {
    let u = UnitTemplate::Selfsupport10.unit(0.08, DEFAULT_KS_K, DEFAULT_GAMMA);
    let v0 = rasterize(&u, 40).unwrap().volume_fraction();
    let target = 0.5 * v0;
    let r = rescale_volume(&u, target, 40, 0.005, 0.5).unwrap();
    assert!(r.reached);
    assert!(r.factor < 1.0);
    assert!(r.volume <= target && r.volume >= target - RESCALE_BAND);
    assert_eq!(r.unit.bars.len(), u.bars.len());
    for (a, b) in r.unit.bars.iter().zip(&u.bars) {
        assert_eq!((a.v1, a.v2), (b.v1, b.v2));
    }
}

#[test]
fn rescale_at_target_is_identity() {
    let u = UnitTemplate::Selfsupport10.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    let v = rasterize(&u, 40).unwrap().volume_fraction();
    let r = rescale_volume(&u, v, 40, 0.005, 0.5).unwrap();
    assert!((r.factor - 1.0).abs() <= 1e-3);
}

#[test]
fn clamped_rescale_matches_scan() {
    let u = UnitTemplate::Full21.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    let (p_min, p_max, target) = (0.03, 0.5, 0.2);
    let r = rescale_volume(&u, target, 40, p_min, p_max).unwrap();
    assert!(!r.reached);
    let band_gap = |v: f64| {
        if v > target {
            v - target
        } else {
            (target - RESCALE_BAND - v).max(0.0)
        }
    };
    let best = (0..=2000)
        .map(|i| {
            let s = i as f64 * 1e-3;
            let w: Vec<f64> = u
                .widths()
                .iter()
                .map(|w| (w * s).clamp(p_min, p_max))
                .collect();
            rasterize(&u.with_widths(&w), 40).unwrap().volume_fraction()
        })
        .fold(f64::INFINITY, |acc, v| acc.min(band_gap(v)));
    assert!(
        (band_gap(r.volume) - best).abs() < 1e-12,
        "{} vs {best}",
        band_gap(r.volume)
    );
}

#[test]
fn connector_pair_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut bars = |lo: f64, hi: f64| -> Vec<Bar> {
            (0..4)
                .map(|_| {
                    Bar::new(
                        [rng.gen_range(lo..hi), rng.gen_range(0.1..0.9)],
                        [rng.gen_range(lo..hi), rng.gen_range(0.1..0.9)],
                        rng.gen_range(0.02..0.06),
                    )
                })
                .collect()
        };
        let a = free_unit(bars(0.1, 0.8));
        let b = free_unit(bars(0.2, 0.9));
        let found = connect_adjacent(&a, &b, SharedEdge::Right, 40, 0.5);
        let ends = |u: &LatticeUnit, dx: f64, keep: &dyn Fn(f64) -> bool| -> Vec<([f64; 2], f64)> {
            u.bars
                .iter()
                .flat_map(|b| [(b.v1, b.p), (b.v2, b.p)])
                .filter(|(v, _)| keep(v[0]))
                .map(|(v, p)| ([v[0] + dx, v[1]], p))
                .collect()
        };
        let ea = ends(&a, 0.0, &|x| x >= 0.5);
        let eb = ends(&b, 1.0, &|x| x <= 0.5);
        match found {
            Ok(c) if c.is_empty() => {}
            Ok(c) => {
                let mut best = (f64::INFINITY, 0.0);
                for (pa, wa) in &ea {
                    for (pb, wb) in &eb {
                        let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                        if d < best.0 {
                            best = (d, 0.5 * (wa + wb));
                        }
                    }
                }
                assert!((c[0].length() - best.0).abs() < 1e-12);
                assert!((c[0].p - best.1).abs() < 1e-15);
            }
            Err(Error::Connector(_)) => assert!(ea.is_empty() || eb.is_empty()),
            Err(e) => panic!("{e}"),
        }
    }
}

pub fn dissimilar_tile() -> Tile {
    let a = free_unit(vec![
        Bar::new([0.1, 0.5], [0.8, 0.5], 0.08),
        Bar::new([0.45, 0.15], [0.45, 0.85], 0.08),
    ]);
    let b = free_unit(vec![
        Bar::new([0.3, 0.2], [0.8, 0.8], 0.06),
        Bar::new([0.3, 0.8], [0.8, 0.2], 0.06),
    ]);
    Tile {
        nx: 2,
        ny: 1,
        cells: vec![0, 1],
        units: vec![a, b],
        connectors: Vec::new(),
    }
}

#[test]
fn connected_tile_is_one_component() {
    let mut tile = dissimilar_tile();
    let before = tile.rasterize(40).unwrap().connectivity(0.5).unwrap();
    assert_eq!(before.components, 2);
    assert_eq!(tile.connect(40, 0.5).unwrap(), 1);
    assert!((tile.connectors[0].p - 0.07).abs() < 1e-15);
    let after = tile.rasterize(40).unwrap().connectivity(0.5).unwrap();
    assert_eq!(after.components, 1);
}
