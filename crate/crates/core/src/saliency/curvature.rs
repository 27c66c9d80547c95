//! Multi-scale center-surround mean-curvature saliency.

use std::collections::HashMap;

use crate::mesh::{KdTree, Mesh};
use crate::{par, Error, Result, Vec3};

/// Absolute mean curvature per vertex from the cotangent Laplacian with
/// mixed Voronoi areas. Edges shared by more than two triangles are skipped;
/// the second value counts them.
pub fn mean_curvature(mesh: &Mesh) -> (Vec<f64>, usize) {
    let n = mesh.vertex_count();
    let mut edge_use: HashMap<(u32, u32), u32> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let non_manifold = edge_use.values().filter(|&&c| c > 2).count();
    let mut lap = vec![Vec3::zeros(); n];
    let mut area = vec![0.0; n];
    let v = mesh.vertices();
    for t in mesh.triangles() {
        let p = t.map(|i| v[i as usize]);
        let a2 = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        if a2 == 0.0 {
            continue;
        }
        let cots: [f64; 3] = std::array::from_fn(|k| {
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            e1.dot(&e2) / e1.cross(&e2).norm()
        });
        let obtuse = (0..3).find(|&k| cots[k] < 0.0);
        for k in 0..3 {
            let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
            area[t[k] as usize] += match obtuse {
                None => ((p[k1] - p[k]).norm_squared() * cots[k2] + (p[k2] - p[k]).norm_squared() * cots[k1]) / 8.0,
                Some(o) if o == k => a2 / 4.0,
                Some(_) => a2 / 8.0,
            };
            // angle at vertex k is opposite edge (k+1, k+2)
            let (i, j) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            if edge_use[&(i.min(j), i.max(j))] > 2 {
                continue;
            }
            let cot = cots[k];
            let d = v[j as usize] - v[i as usize];
            lap[i as usize] += cot * d;
            lap[j as usize] -= cot * d;
        }
    }
    let h = (0..n)
        .map(|i| {
            if area[i] > 0.0 {
                lap[i].norm() / (4.0 * area[i])
            } else {
                0.0
            }
        })
        .collect();
    (h, non_manifold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureParams {
    /// Gaussian scales, meters; empty means the default set.
    pub scales: Vec<f64>,
    /// Per-scale maps are divided by `max(max, guard * mean curvature)`, so
    /// that tessellation noise on a constant-curvature surface stays small.
    pub guard: f64,
    /// Lower bound on the range used by the final min-max normalization.
    pub range_floor: f64,
}

impl Default for CurvatureParams {
    fn default() -> Self {
        Self {
            scales: Vec::new(),
            guard: 1.0,
            range_floor: 1.0,
        }
    }
}

/// `k * eps` for k in 2..=6, with `eps = eps_rel * diagonal`.
pub fn default_scales(mesh: &Mesh, eps_rel: f64) -> Vec<f64> {
    let eps = eps_rel * mesh.bounding_box_diagonal();
    (2..=6).map(|k| k as f64 * eps).collect()
}

fn gaussian_average(tree: &KdTree, values: &[f64], sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    par::map_slice(tree.points(), |p| {
        let mut ids = Vec::new();
        tree.radius_visit(p, 2.0 * sigma, |j, d2| ids.push((j, d2)));
        ids.sort_unstable_by_key(|e| e.0);
        let (mut num, mut den) = (0.0, 0.0);
        for (j, d2) in ids {
            let w = (-d2 * inv).exp();
            num += w * values[j as usize];
            den += w;
        }
        num / den
    })
}

/// Center-surround curvature saliency, normalized to at most 1.
pub fn baseline_curvature_saliency(mesh: &Mesh, params: &CurvatureParams) -> Result<Vec<f64>> {
    let scales = if params.scales.is_empty() {
        default_scales(mesh, 0.003)
    } else {
        params.scales.clone()
    };
    if scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("curvature scales must be positive"));
    }
    let (h, non_manifold) = mean_curvature(mesh);
    if non_manifold > 0 {
        log::warn!("{non_manifold} non-manifold edges skipped in curvature");
    }
    let mean_h = h.iter().sum::<f64>() / h.len() as f64;
    let tree = KdTree::new(mesh.vertices().to_vec());
    let adj = mesh.vertex_adjacency();
    let mut total = vec![0.0; mesh.vertex_count()];
    for &sigma in &scales {
        let fine = gaussian_average(&tree, &h, sigma);
        let coarse = gaussian_average(&tree, &h, 2.0 * sigma);
        let mut map: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).collect();
        let max = map.iter().copied().fold(0.0, f64::max);
        let scale = max.max(params.guard * mean_h);
        if scale > 0.0 {
            map.iter_mut().for_each(|x| *x /= scale);
        }
        let factor = suppression_factor(&map, &adj);
        for (t, m) in total.iter_mut().zip(&map) {
            *t += factor * m;
        }
    }
    let lo = total.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = total.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = (hi - lo).max(params.range_floor);
    Ok(total.iter().map(|t| (t - lo) / range).collect())
}

/// `(M - mean of the other local maxima)^2` where M is the global maximum.
fn suppression_factor(map: &[f64], adj: &[Vec<u32>]) -> f64 {
    let Some((gmax_id, &gmax)) = map.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0.0;
    };
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, &x) in map.iter().enumerate() {
        if i == gmax_id || adj[i].is_empty() {
            continue;
        }
        if adj[i].iter().all(|&j| map[j as usize] <= x) {
            sum += x;
            count += 1;
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    (gmax - mean).powi(2)
}
