//! Density clustering over point clouds. A uniform grid with eps-sized cells
//! backs the neighbor queries, so full scans stay tractable.

use std::collections::HashMap;
use std::collections::VecDeque;

use crate::kitti::PointCloud;

/// Marker for points that belong to no cluster.
pub const NOISE: i32 = -1;

/// Standard DBSCAN. A core point has at least `min_samples` neighbors within
/// `eps` (inclusive, counting itself); clusters are connected components of
/// core points plus their border points. Cluster ids are assigned in
/// first-touch scan order starting at 0; noise points get [`NOISE`].
pub fn cluster_dbscan(cloud: &PointCloud, eps: f64, min_samples: usize) -> Vec<i32> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_samples >= 1, "min_samples must be >= 1");
    let n = cloud.len();
    let mut labels = vec![NOISE; n];
    if n == 0 {
        return labels;
    }

    let grid = Grid::build(&cloud.points, eps);
    let eps2 = eps * eps;
    let mut visited = vec![false; n];
    let mut next_cluster = 0i32;
    let mut queue = VecDeque::new();

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let neighbors = grid.neighbors(&cloud.points, i, eps2);
        if neighbors.len() < min_samples {
            continue; // stays noise unless claimed as a border point later
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = cluster;
        queue.clear();
        queue.extend(neighbors);
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster; // border or core of this cluster
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = grid.neighbors(&cloud.points, j, eps2);
            if nb.len() >= min_samples {
                queue.extend(nb);
            }
        }
    }
    labels
}

struct Grid {
    cells: HashMap<[i64; 3], Vec<usize>>,
    inv_eps: f64,
}

impl Grid {
    fn build(points: &[[f64; 3]], eps: f64) -> Grid {
        let inv_eps = 1.0 / eps;
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, inv_eps)).or_default().push(i);
        }
        Grid { cells, inv_eps }
    }

    fn key(p: &[f64; 3], inv_eps: f64) -> [i64; 3] {
        [
            (p[0] * inv_eps).floor() as i64,
            (p[1] * inv_eps).floor() as i64,
            (p[2] * inv_eps).floor() as i64,
        ]
    }

    /// Indices within sqrt(eps2) of point `i` (including `i` itself).
    fn neighbors(&self, points: &[[f64; 3]], i: usize, eps2: f64) -> Vec<usize> {
        let p = points[i];
        let base = Self::key(&p, self.inv_eps);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if let Some(cell) = self.cells.get(&key) {
                        for &j in cell {
                            let q = points[j];
                            let d2 = (p[0] - q[0]).powi(2)
                                + (p[1] - q[1]).powi(2)
                                + (p[2] - q[2]).powi(2);
                            if d2 <= eps2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force O(N^2) reference: core flags, union-find over core pairs,
    /// components ordered by their minimal core index, borders assigned to
    /// the earliest component in reach.
    pub(crate) fn dbscan_reference(points: &[[f64; 3]], eps: f64, min_samples: usize) -> Vec<i32> {
        let n = points.len();
        let d2 = |a: usize, b: usize| -> f64 {
            (points[a][0] - points[b][0]).powi(2)
                + (points[a][1] - points[b][1]).powi(2)
                + (points[a][2] - points[b][2]).powi(2)
        };
        let eps2 = eps * eps;
        let neighbor_counts: Vec<usize> = (0..n)
            .map(|i| (0..n).filter(|&j| d2(i, j) <= eps2).count())
            .collect();
        let core: Vec<bool> = neighbor_counts.iter().map(|&c| c >= min_samples).collect();

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let root = find(parent, parent[i]);
                parent[i] = root;
            }
            parent[i]
        }
        for i in 0..n {
            for j in i + 1..n {
                if core[i] && core[j] && d2(i, j) <= eps2 {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        // Component order = ascending minimal core index.
        let mut component_id: HashMap<usize, i32> = HashMap::new();
        let mut labels = vec![NOISE; n];
        let mut next = 0;
        for i in 0..n {
            if core[i] {
                let root = find(&mut parent, i);
                let id = *component_id.entry(root).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                });
                labels[i] = id;
            }
        }
        // Borders: earliest-created component with a core within eps.
        for i in 0..n {
            if core[i] {
                continue;
            }
            let mut best: Option<i32> = None;
            for j in 0..n {
                if core[j] && d2(i, j) <= eps2 {
                    let id = labels[j];
                    best = Some(best.map_or(id, |b: i32| b.min(id)));
                }
            }
            if let Some(id) = best {
                labels[i] = id;
            }
        }
        labels
    }

    #[test]
    fn coincident_points_form_one_cluster() {
        let cloud = PointCloud::new(vec![[1.0, 1.0, 1.0]; 10]);
        let labels = cluster_dbscan(&cloud, 0.5, 5);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn two_distant_blobs_get_distinct_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points = Vec::new();
        for _ in 0..10 {
            points.push([
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            ]);
        }
        for _ in 0..10 {
            points.push([
                10.0 + rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            ]);
        }
        let cloud = PointCloud::new(points);
        let labels = cluster_dbscan(&cloud, 0.5, 5);
        assert!(labels[..10].iter().all(|&l| l == 0), "{labels:?}");
        assert!(labels[10..].iter().all(|&l| l == 1), "{labels:?}");
    }

    #[test]
    fn isolated_points_are_noise() {
        let cloud = PointCloud::new(vec![
            [0.0, 0.0, 0.0],
            [5.0, 0.0, 0.0],
            [0.0, 5.0, 0.0],
            [0.0, 0.0, 5.0],
        ]);
        let labels = cluster_dbscan(&cloud, 0.5, 5);
        assert!(labels.iter().all(|&l| l == NOISE));
    }

    #[test]
    fn min_samples_one_clusters_everything() {
        let cloud = PointCloud::new(vec![[0.0; 3], [10.0, 0.0, 0.0]]);
        let labels = cluster_dbscan(&cloud, 0.5, 1);
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn agrees_with_brute_force_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..30 {
            let n = rng.gen_range(5..=200);
            // A few gaussian blobs plus uniform noise keeps density realistic
            // for eps = 0.5.
            let blobs = rng.gen_range(1..=4);
            let centers: Vec<[f64; 3]> = (0..blobs)
                .map(|_| {
                    [
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect();
            let points: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.8) {
                        let c = centers[rng.gen_range(0..blobs)];
                        [
                            c[0] + rng.gen_range(-0.4..0.4),
                            c[1] + rng.gen_range(-0.4..0.4),
                            c[2] + rng.gen_range(-0.4..0.4),
                        ]
                    } else {
                        [
                            rng.gen_range(-6.0..6.0),
                            rng.gen_range(-6.0..6.0),
                            rng.gen_range(-2.0..2.0),
                        ]
                    }
                })
                .collect();
            let cloud = PointCloud::new(points);
            let got = cluster_dbscan(&cloud, 0.5, 5);
            let expected = dbscan_reference(&cloud.points, 0.5, 5);
            assert_eq!(got, expected, "case {case}");
        }
    }
}
