use latopt_core::homogenize::{dh_sensitivity, solve_cell, MicroCell};
use latopt_core::kelvin::{base_material, KelvinMatrix};
use latopt_core::lattice::DensityGrid;
use nalgebra::{Matrix1, Matrix1x2, Matrix2, Matrix2x1, Matrix3, SymmetricEigen};
use proptest::prelude::*;

fn cell(n: usize, rho: Vec<f64>) -> MicroCell {
    MicroCell::new(
        DensityGrid::new(n, rho).unwrap(),
        base_material(1.0, 0.3).unwrap(),
        3.0,
        1e-3,
    )
    .unwrap()
}

fn min_eig(m: Matrix3<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Layers stacked along y: strain component 11 is shared, stresses 22 and 12 are shared.
fn laminate(phases: &[(f64, Matrix3<f64>)]) -> Matrix3<f64> {
    let split = |c: &Matrix3<f64>| {
        let caa = Matrix1::new(c[(0, 0)]);
        let cab = Matrix1x2::new(c[(0, 1)], c[(0, 2)]);
        let cbb = Matrix2::new(c[(1, 1)], c[(1, 2)], c[(2, 1)], c[(2, 2)]);
        (caa, cab, cbb)
    };
    let mut inv_bb = Matrix2::zeros();
    let mut ab_inv = Matrix1x2::zeros();
    let mut schur = Matrix1::zeros();
    for (f, c) in phases {
        let (caa, cab, cbb) = split(c);
        let ibb = cbb.try_inverse().unwrap();
        inv_bb += ibb * *f;
        ab_inv += cab * ibb * *f;
        schur += (caa - cab * ibb * cab.transpose()) * *f;
    }
    let bb = inv_bb.try_inverse().unwrap();
    let ab = ab_inv * bb;
    let aa = schur + ab_inv * bb * ab_inv.transpose();
    let ba: Matrix2x1<f64> = ab.transpose();
    Matrix3::new(
        aa[(0, 0)],
        ab[(0, 0)],
        ab[(0, 1)],
        ba[(0, 0)],
        bb[(0, 0)],
        bb[(0, 1)],
        ba[(1, 0)],
        bb[(1, 0)],
        bb[(1, 1)],
    )
}

#[test]
fn laminate_matches_closed_form() {
    let n = 64;
    let rho: Vec<f64> = (0..n * n)
        .map(|e| if e / n < n / 2 { 1.0 } else { 0.0 })
        .collect();
    let c = cell(n, rho);
    let dh = solve_cell(&c).unwrap().dh.0;
    let base = c.base.0;
    let oracle = laminate(&[(0.5, base), (0.5, base * 1e-3)]);
    let err = (dh - oracle).norm() / oracle.norm();
    assert!(err <= 1e-2, "laminate error {err}\n{dh}\n{oracle}");
    assert!(dh[(0, 0)] > 10.0 * dh[(1, 1)]);
}

#[test]
fn laminate_oracle_reduces_to_single_phase() {
    let base = base_material(2.0, 0.25).unwrap().0;
    let m = laminate(&[(0.3, base), (0.7, base)]);
    assert!((m - base).norm() < 1e-12);
}

#[test]
fn dh_sensitivity_matches_differences() {
    let n = 8;
    let rho: Vec<f64> = (0..n * n)
        .map(|e| 0.2 + 0.7 * ((e * 37 % 11) as f64 / 10.0))
        .collect();
    let c = cell(n, rho.clone());
    let s = solve_cell(&c).unwrap();
    let sens = dh_sensitivity(&c, &s);
    let h = 1e-6;
    for e in [0, 9, 27, 63] {
        let mut up = rho.clone();
        up[e] += h;
        let mut dn = rho.clone();
        dn[e] -= h;
        let fd = (solve_cell(&cell(n, up)).unwrap().dh.0 - solve_cell(&cell(n, dn)).unwrap().dh.0)
            / (2.0 * h);
        let err = (sens[e] - fd).norm() / fd.norm();
        assert!(err <= 1e-4, "voxel {e}: {err}");
    }
}

#[test]
fn zero_density_voxel_has_zero_sensitivity() {
    let n = 6;
    let mut rho = vec![0.7; n * n];
    rho[5] = 0.0;
    let c = cell(n, rho);
    let sens = dh_sensitivity(&c, &solve_cell(&c).unwrap());
    assert_eq!(sens[5].norm(), 0.0);
}

#[test]
fn all_void_without_floor_is_rejected() {
    let grid = DensityGrid::filled(4, 0.0);
    assert!(MicroCell::new(grid, base_material(1.0, 0.3).unwrap(), 3.0, 0.0).is_err());
}

fn grids() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (3usize..7).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..1.0, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dh_symmetric_psd_and_below_voigt((n, rho) in grids()) {
        let c = cell(n, rho);
        let dh = solve_cell(&c).unwrap().dh;
        prop_assert!(dh.is_symmetric(1e-10 * dh.frobenius()));
        prop_assert!(min_eig(dh.0) >= -1e-10);
        let mean: f64 = c.stiffness_factors().iter().sum::<f64>() / (n * n) as f64;
        prop_assert!(min_eig(c.base.0 * mean - dh.0) >= -1e-8);
    }

    #[test]
    fn dh_invariant_under_cyclic_shift((n, rho) in grids(), sx in 0usize..6, sy in 0usize..6) {
        let shifted: Vec<f64> = (0..n * n)
            .map(|e| {
                let (x, y) = (e % n, e / n);
                rho[((y + sy) % n) * n + (x + sx) % n]
            })
            .collect();
        let a = solve_cell(&cell(n, rho)).unwrap().dh.0;
        let b = solve_cell(&cell(n, shifted)).unwrap().dh.0;
        prop_assert!((a - b).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn raising_a_voxel_stiffens_diagonal((n, rho) in grids(), pick in 0usize..49, bump in 0.01f64..0.5) {
        let e = pick % (n * n);
        let a = solve_cell(&cell(n, rho.clone())).unwrap().dh.0;
        let mut up = rho;
        up[e] = (up[e] + bump).min(1.0);
        let b = solve_cell(&cell(n, up)).unwrap().dh.0;
        for i in 0..3 {
            prop_assert!(b[(i, i)] >= a[(i, i)] - 1e-12 * a[(i, i)]);
        }
    }
}

#[test]
fn homogenized_kelvin_round_trip() {
    let c = cell(4, vec![1.0; 16]);
    let dh: KelvinMatrix = solve_cell(&c).unwrap().dh;
    assert!((dh.0 - c.base.0).norm() <= 1e-10);
}
