//! Agglomerative Ward clustering of tensor fields and clustered FMO.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fe::element::centroid_b;
use crate::fe::mesh::QuadMesh;
use crate::fmo::{project_to_class, solve_grouped, FmoProblem, FmoSolution};
use crate::kelvin::{KelvinMatrix, StrainState, StressState};

/// One dendrogram merge. Clusters `0..n` are the observations and merge `i`
/// creates cluster `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub representatives: Vec<KelvinMatrix>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&e| self.labels[e] == cluster)
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStrain {
    pub cluster: usize,
    pub element: usize,
    pub stress: StressState,
    pub strain: StrainState,
    pub von_mises: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStrainLoads {
    pub entries: Vec<ClusterStrain>,
}

fn sq_dist(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ward linkage by the nearest-neighbour chain algorithm, merges sorted by height.
pub fn ward_linkage(points: &[[f64; 6]]) -> Vec<Merge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    // Squared Ward distances between active clusters, in slot indices 0..n.
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d2[i * n + j] = sq_dist(&points[i], &points[j]);
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push((0..n).find(|&i| active[i]).unwrap());
        }
        loop {
            let x = *chain.last().unwrap();
            let prev = if chain.len() >= 2 {
                Some(chain[chain.len() - 2])
            } else {
                None
            };
            // Nearest neighbour of x, preferring the chain predecessor on ties, then lowest index.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d2[x * n + p]);
            for y in 0..n {
                if y != x && active[y] && d2[x * n + y] < best_d {
                    best_d = d2[x * n + y];
                    best = Some(y);
                }
            }
            let y = best.unwrap();
            if Some(y) == prev {
                chain.pop();
                chain.pop();
                let (a, b) = (x.min(y), x.max(y));
                let (sa, sb) = (size[a] as f64, size[b] as f64);
                for k in 0..n {
                    if !active[k] || k == a || k == b {
                        continue;
                    }
                    let sk = size[k] as f64;
                    let t = sa + sb + sk;
                    let v =
                        ((sa + sk) * d2[a * n + k] + (sb + sk) * d2[b * n + k] - sk * best_d) / t;
                    d2[a * n + k] = v;
                    d2[k * n + a] = v;
                }
                raw.push((a, b, best_d));
                size[a] += size[b];
                active[b] = false;
                break;
            }
            chain.push(y);
        }
    }
    // Sort by height (stable) and relabel slots to scipy-style cluster ids.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].2.total_cmp(&raw[j].2));
    let mut parent: Vec<usize> = (0..n).collect();
    let find = |parent: &mut Vec<usize>, mut x: usize| {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    };
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut csize = vec![1usize; n];
    let mut merges = Vec::with_capacity(raw.len());
    for (step, &i) in order.iter().enumerate() {
        let (a, b, h) = raw[i];
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let (ia, ib) = (cluster_id[ra], cluster_id[rb]);
        let s = csize[ra] + csize[rb];
        let root = ra.min(rb);
        parent[ra.max(rb)] = root;
        cluster_id[root] = n + step;
        csize[root] = s;
        merges.push(Merge {
            a: ia.min(ib),
            b: ia.max(ib),
            height: h.max(0.0).sqrt(),
            size: s,
        });
    }
    merges
}

/// Applies the first `n - k` merges; labels are numbered by lowest member index.
pub fn cut_tree(n: usize, merges: &[Merge], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return param(format!("cluster count {k} must lie in [1, {n}]"));
    }
    let mut owner: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for (step, m) in merges.iter().take(n - k).enumerate() {
        let mut joined = std::mem::take(&mut members[m.a]);
        joined.extend(std::mem::take(&mut members[m.b]));
        for &e in &joined {
            owner[e] = n + step;
        }
        members.push(joined);
    }
    let mut relabel = std::collections::HashMap::new();
    let mut labels = vec![0; n];
    for e in 0..n {
        let next = relabel.len();
        labels[e] = *relabel.entry(owner[e]).or_insert(next);
    }
    Ok(labels)
}

fn cluster_means(field: &[KelvinMatrix], labels: &[usize], k: usize) -> Vec<KelvinMatrix> {
    let mut sums = vec![nalgebra::Matrix3::zeros(); k];
    let mut counts = vec![0.0; k];
    for (d, &l) in field.iter().zip(labels) {
        sums[l] += d.0;
        counts[l] += 1.0;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| KelvinMatrix(s / c))
        .collect()
}

pub fn hierarchical_cluster(field: &[KelvinMatrix], k: usize) -> Result<ClusterAssignment> {
    let n = field.len();
    if k == 0 || k > n {
        return param(format!("cluster count {k} must lie in [1, {n}]"));
    }
    let points: Vec<[f64; 6]> = field.iter().map(|d| d.upper()).collect();
    let merges = ward_linkage(&points);
    let labels = cut_tree(n, &merges, k)?;
    let representatives = cluster_means(field, &labels, k);
    Ok(ClusterAssignment {
        labels,
        k,
        representatives,
    })
}

/// Re-solves FMO with one tensor per cluster. With a warm field the iteration
/// starts from the per-cluster means of that field.
pub fn clustered_fmo(
    problem: &FmoProblem,
    assignment: &ClusterAssignment,
    warm_field: Option<&[KelvinMatrix]>,
) -> Result<(FmoSolution, Vec<KelvinMatrix>)> {
    if assignment.labels.len() != problem.mesh.n_elements() {
        return param("assignment does not match the mesh");
    }
    if assignment.counts().iter().any(|&c| c == 0) {
        return param("assignment has an empty cluster");
    }
    let warm = match warm_field {
        Some(f) => {
            if f.len() != assignment.labels.len() {
                return param("warm field does not match the mesh");
            }
            let means = cluster_means(f, &assignment.labels, assignment.k);
            Some(
                means
                    .iter()
                    .map(|d| project_to_class(d, problem.material_class))
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    let sol = solve_grouped(problem, &assignment.labels, warm.as_deref())?;
    let mut reps = vec![KelvinMatrix::zeros(); assignment.k];
    for (e, &l) in assignment.labels.iter().enumerate() {
        reps[l] = sol.field[e];
    }
    Ok((sol, reps))
}

/// Centroid stress `D_e B_c u_e` of every element.
pub fn element_stresses(
    field: &[KelvinMatrix],
    displacement: &[f64],
    mesh: &QuadMesh,
) -> Vec<StressState> {
    let b = centroid_b(mesh.elem_size);
    (0..mesh.n_elements())
        .map(|e| StressState(field[e].0 * (b * mesh.gather(displacement, e))))
        .collect()
}

/// Picks each cluster's element with the largest von Mises stress.
pub fn select_cluster_strains(
    solution: &FmoSolution,
    mesh: &QuadMesh,
    assignment: &ClusterAssignment,
    representatives: &[KelvinMatrix],
) -> Result<ClusterStrainLoads> {
    if representatives.len() != assignment.k {
        return param("one representative per cluster is required");
    }
    let stresses = element_stresses(&solution.field, &solution.displacement, mesh);
    let mut best: Vec<Option<(usize, f64)>> = vec![None; assignment.k];
    for (e, s) in stresses.iter().enumerate() {
        let l = assignment.labels[e];
        let vm = s.von_mises();
        if best[l].map_or(true, |(_, v)| vm > v) {
            best[l] = Some((e, vm));
        }
    }
    let mut entries = Vec::with_capacity(assignment.k);
    for (c, b) in best.into_iter().enumerate() {
        let (e, vm) = b.ok_or_else(|| Error::Parameter(format!("cluster {c} is empty")))?;
        let inv = representatives[c]
            .inverse()
            .map_err(|_| Error::Solver(format!("representative of cluster {c} is singular")))?;
        let stress = stresses[e];
        entries.push(ClusterStrain {
            cluster: c,
            element: e,
            stress,
            strain: StrainState(inv.0 * stress.0),
            von_mises: vm,
        });
    }
    Ok(ClusterStrainLoads { entries })
}
