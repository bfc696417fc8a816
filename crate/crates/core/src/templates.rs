//! Ground-structure bar templates on a 3x3 node grid over the quarter cell `[0, 0.5]^2`.

use serde::{Deserialize, Serialize};

use crate::lattice::{Bar, LatticeUnit, Point, SymmetryGroup};

/// Blend sharpness used by the templates unless configured otherwise.
/// Softer values let the many overlapping images of `full21` fill the whole cell.
pub const DEFAULT_KS_K: f64 = 100.0;
/// Heaviside half bandwidth.
pub const DEFAULT_GAMMA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitTemplate {
    Full21,
    Selfsupport10,
}

impl std::str::FromStr for UnitTemplate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full21" => Ok(UnitTemplate::Full21),
            "selfsupport10" => Ok(UnitTemplate::Selfsupport10),
            _ => Err(format!(
                "unknown template {s:?} (expected full21 or selfsupport10)"
            )),
        }
    }
}

impl std::fmt::Display for UnitTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnitTemplate::Full21 => "full21",
            UnitTemplate::Selfsupport10 => "selfsupport10",
        })
    }
}

fn node(i: usize, j: usize) -> Point {
    [0.25 * i as f64, 0.25 * j as f64]
}

fn small_diagonals() -> Vec<(Point, Point)> {
    let mut out = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            out.push((node(i, j), node(i + 1, j + 1)));
            out.push((node(i + 1, j), node(i, j + 1)));
        }
    }
    out
}

impl UnitTemplate {
    pub fn segments(&self) -> Vec<(Point, Point)> {
        match self {
            UnitTemplate::Full21 => {
                let mut out = Vec::new();
                for j in 0..3 {
                    for i in 0..2 {
                        out.push((node(i, j), node(i + 1, j)));
                        out.push((node(j, i), node(j, i + 1)));
                    }
                }
                out.extend(small_diagonals());
                out.push((node(0, 0), node(2, 2)));
                out
            }
            UnitTemplate::Selfsupport10 => {
                let mut out = small_diagonals();
                out.push((node(1, 0), node(1, 1)));
                out.push((node(1, 1), node(1, 2)));
                out
            }
        }
    }

    pub fn unit(&self, width: f64, ks_k: f64, gamma: f64) -> LatticeUnit {
        LatticeUnit {
            bars: self
                .segments()
                .into_iter()
                .map(|(a, b)| Bar::new(a, b, width))
                .collect(),
            symmetry: SymmetryGroup::QuarterMirror,
            ks_k,
            gamma,
        }
    }
}

/// Angle in degrees between a bar and the build axis `y`, in `[0, 90]`.
pub fn build_angle(bar: &Bar) -> f64 {
    let dx = (bar.v2[0] - bar.v1[0]).abs();
    let dy = (bar.v2[1] - bar.v1[1]).abs();
    dx.atan2(dy).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_angles() {
        let f = UnitTemplate::Full21.unit(0.1, 30.0, 0.005);
        assert_eq!(f.bars.len(), 21);
        f.validate().unwrap();
        let s = UnitTemplate::Selfsupport10.unit(0.1, 30.0, 0.005);
        assert_eq!(s.bars.len(), 10);
        for b in &s.bars {
            let a = build_angle(b);
            assert!(
                [0.0, 45.0, 90.0].iter().any(|t| (a - t).abs() < 1e-12),
                "angle {a}"
            );
        }
        let mut nodes: Vec<(i64, i64)> = f
            .bars
            .iter()
            .flat_map(|b| [b.v1, b.v2])
            .map(|v| ((v[0] * 4.0).round() as i64, (v[1] * 4.0).round() as i64))
            .collect();
        nodes.sort();
        nodes.dedup();
        assert_eq!(nodes.len(), 9);
    }

    #[test]
    fn no_duplicate_segments() {
        for t in [UnitTemplate::Full21, UnitTemplate::Selfsupport10] {
            let segs = t.segments();
            for (i, a) in segs.iter().enumerate() {
                for b in &segs[i + 1..] {
                    assert!(!(a == b || (a.0 == b.1 && a.1 == b.0)));
                }
            }
        }
    }
}
