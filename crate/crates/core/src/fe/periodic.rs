//! Periodic dof condensation for square micro cells.

use super::mesh::QuadMesh;

/// Identifies opposite edges of an `nx x ny` grid. Node `(i, j)` maps to the
/// master node `(i mod nx, j mod ny)`, so the reduced space has `2 nx ny` dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMap {
    pub nx: usize,
    pub ny: usize,
    node_map: Vec<usize>,
}

impl PeriodicMap {
    pub fn n_reduced(&self) -> usize {
        2 * self.nx * self.ny
    }

    pub fn n_full(&self) -> usize {
        self.node_map.len() * 2
    }

    pub fn master_node(&self, full_node: usize) -> usize {
        self.node_map[full_node]
    }

    pub fn is_slave(&self, full_node: usize) -> bool {
        let i = full_node % (self.nx + 1);
        let j = full_node / (self.nx + 1);
        i == self.nx || j == self.ny
    }

    /// Reduced dofs of element `e`, in local element order.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let ex = e % self.nx;
        let ey = e / self.nx;
        let xs = [ex, (ex + 1) % self.nx, (ex + 1) % self.nx, ex];
        let ys = [ey, ey, (ey + 1) % self.ny, (ey + 1) % self.ny];
        let mut d = [0; 8];
        for a in 0..4 {
            let n = ys[a] * self.nx + xs[a];
            d[2 * a] = 2 * n;
            d[2 * a + 1] = 2 * n + 1;
        }
        d
    }

    /// Copies master values onto every full-grid node.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.n_reduced());
        let mut full = vec![0.0; self.n_full()];
        for (n, &m) in self.node_map.iter().enumerate() {
            full[2 * n] = reduced[2 * m];
            full[2 * n + 1] = reduced[2 * m + 1];
        }
        full
    }

    /// Reads the master-node values of a full-grid vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_full());
        let mut reduced = vec![0.0; self.n_reduced()];
        for (n, &m) in self.node_map.iter().enumerate() {
            if !self.is_slave(n) {
                reduced[2 * m] = full[2 * n];
                reduced[2 * m + 1] = full[2 * n + 1];
            }
        }
        reduced
    }

    /// Sums full-grid nodal forces onto their master dofs.
    pub fn fold(&self, full: &[f64]) -> Vec<f64> {
        let mut reduced = vec![0.0; self.n_reduced()];
        for (n, &m) in self.node_map.iter().enumerate() {
            reduced[2 * m] += full[2 * n];
            reduced[2 * m + 1] += full[2 * n + 1];
        }
        reduced
    }
}

pub fn periodic_reduce(grid: &QuadMesh) -> PeriodicMap {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut node_map = Vec::with_capacity(grid.n_nodes());
    for j in 0..=ny {
        for i in 0..=nx {
            node_map.push((j % ny) * nx + (i % nx));
        }
    }
    PeriodicMap { nx, ny, node_map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> QuadMesh {
        QuadMesh::new(n, n, 1.0).unwrap()
    }

    #[test]
    fn reduced_counts() {
        assert_eq!(periodic_reduce(&grid(1)).n_reduced(), 2);
        assert_eq!(periodic_reduce(&grid(2)).n_reduced(), 8);
        let m = periodic_reduce(&grid(1));
        assert!((0..4).all(|n| m.master_node(n) == 0));
    }

    #[test]
    fn count_matches_distinct_masters() {
        for n in 1..9 {
            let m = periodic_reduce(&grid(n));
            let mut masters: Vec<usize> =
                (0..(n + 1) * (n + 1)).map(|k| m.master_node(k)).collect();
            masters.sort_unstable();
            masters.dedup();
            assert_eq!(2 * masters.len(), m.n_reduced());
            assert_eq!(m.n_reduced(), 2 * n * n);
        }
    }

    #[test]
    fn boundary_nodes_are_master_or_slave_not_both() {
        let g = grid(4);
        let m = periodic_reduce(&g);
        for n in 0..g.n_nodes() {
            let own_index = (n / 5) * 4 + n % 5;
            let is_master = !m.is_slave(n) && m.master_node(n) == own_index;
            assert!(is_master != m.is_slave(n));
        }
    }

    #[test]
    fn element_dofs_agree_with_mesh_map() {
        let g = grid(3);
        let m = periodic_reduce(&g);
        for e in 0..9 {
            let full = g.element_nodes(e);
            let red = m.element_dofs(e);
            for a in 0..4 {
                assert_eq!(red[2 * a], 2 * m.master_node(full[a]));
            }
        }
    }

    proptest! {
        #[test]
        fn restrict_after_expand_is_identity(n in 1usize..7, seed in 0u64..1000) {
            let m = periodic_reduce(&grid(n));
            let v: Vec<f64> = (0..m.n_reduced()).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            prop_assert_eq!(m.restrict(&m.expand(&v)), v.clone());
            let full = m.expand(&v);
            prop_assert_eq!(m.expand(&m.restrict(&full)), full);
        }
    }
}
