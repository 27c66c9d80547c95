//! Fast point feature histograms over a vertex subset.

use std::f64::consts::PI;

use crate::mesh::{KdTree, Mesh};
use crate::{par, Error, Result, Vec3};

pub const BINS_PER_FEATURE: usize = 11;
pub const FPFH_BINS: usize = 3 * BINS_PER_FEATURE;

pub type Histogram = [f64; FPFH_BINS];

#[derive(Debug, Clone, PartialEq)]
pub struct FpfhSet {
    /// One normalized histogram per domain vertex, in domain order.
    pub descriptors: Vec<Histogram>,
    /// Domain vertices that had no usable neighbor and got the uniform
    /// histogram.
    pub isolated: Vec<bool>,
}

/// The (f1, f2, f3) pair features of a point pair, with f1 an angle in
/// [-pi, pi] and f2, f3 cosines. `None` when the Darboux frame degenerates.
pub fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<[f64; 3]> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let a1 = n1.dot(&dp) / dist;
    let a2 = n2.dot(&dp) / dist;
    let (u, n_t, f3) = if a1.abs().clamp(0.0, 1.0).acos() > a2.abs().clamp(0.0, 1.0).acos() {
        dp = -dp;
        (*n2, *n1, -a2)
    } else {
        (*n1, *n2, a1)
    };
    let v = dp.cross(&u);
    let vn = v.norm();
    if vn == 0.0 {
        return None;
    }
    let v = v / vn;
    let w = u.cross(&v);
    let f2 = v.dot(&n_t);
    let f1 = w.dot(&n_t).atan2(u.dot(&n_t));
    Some([f1, f2, f3])
}

fn bin(x: f64, lo: f64, hi: f64) -> usize {
    let b = ((x - lo) / (hi - lo) * BINS_PER_FEATURE as f64).floor();
    (b.max(0.0) as usize).min(BINS_PER_FEATURE - 1)
}

fn spfh(center: usize, neighbors: &[u32], pos: &[Vec3], nrm: &[Vec3]) -> Histogram {
    let mut h = [0.0; FPFH_BINS];
    let mut counts = 0usize;
    for &j in neighbors {
        let j = j as usize;
        if let Some([f1, f2, f3]) = pair_features(&pos[center], &nrm[center], &pos[j], &nrm[j]) {
            h[bin(f1, -PI, PI)] += 1.0;
            h[BINS_PER_FEATURE + bin(f2, -1.0, 1.0)] += 1.0;
            h[2 * BINS_PER_FEATURE + bin(f3, -1.0, 1.0)] += 1.0;
            counts += 1;
        }
    }
    if counts > 0 {
        let inv = 1.0 / counts as f64;
        h.iter_mut().for_each(|x| *x *= inv);
    }
    h
}

/// FPFH of every vertex in `domain`, with neighbors taken from the domain
/// within radius `r`. Normals are flipped to face `eye` when given.
pub fn compute_fpfh(mesh: &Mesh, domain: &[u32], r: f64, eye: Option<&Vec3>) -> Result<FpfhSet> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("FPFH radius must be positive"));
    }
    if let Some(&bad) = domain.iter().find(|&&i| i as usize >= mesh.vertex_count()) {
        return Err(Error::invalid(format!("domain vertex {bad} out of range")));
    }
    let pos: Vec<Vec3> = domain.iter().map(|&i| mesh.vertices()[i as usize]).collect();
    let nrm: Vec<Vec3> = domain
        .iter()
        .zip(&pos)
        .map(|(&i, p)| {
            let n = mesh.normals()[i as usize];
            match eye {
                Some(e) if n.dot(&(e - p)) < 0.0 => -n,
                _ => n,
            }
        })
        .collect();
    let tree = KdTree::new(pos.clone());
    let neighbors: Vec<Vec<u32>> = par::map_range(pos.len(), |i| {
        let mut ids = Vec::new();
        tree.radius_visit(&pos[i], r, |j, d2| {
            if d2 > 0.0 {
                ids.push(j);
            }
        });
        ids.sort_unstable();
        ids
    });
    let spfhs: Vec<Histogram> = par::map_range(pos.len(), |i| spfh(i, &neighbors[i], &pos, &nrm));
    let out: Vec<(Histogram, bool)> = par::map_range(pos.len(), |i| {
        let nb = &neighbors[i];
        if nb.is_empty() {
            return ([1.0 / FPFH_BINS as f64; FPFH_BINS], true);
        }
        let mut h = spfhs[i];
        let k = nb.len() as f64;
        for &j in nb {
            let w = 1.0 / (k * (pos[i] - pos[j as usize]).norm());
            for (a, b) in h.iter_mut().zip(&spfhs[j as usize]) {
                *a += w * b;
            }
        }
        let s: f64 = h.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return ([1.0 / FPFH_BINS as f64; FPFH_BINS], true);
        }
        h.iter_mut().for_each(|x| *x /= s);
        (h, false)
    });
    let (descriptors, isolated) = out.into_iter().unzip();
    Ok(FpfhSet {
        descriptors,
        isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn plane_descriptors_are_identical() {
        let m = shapes::plane_grid(20, 20, 0.01, 0.0);
        let domain: Vec<u32> = (0..m.vertex_count() as u32).collect();
        let f = compute_fpfh(&m, &domain, 0.025, None).unwrap();
        let first = f.descriptors[0];
        for d in &f.descriptors {
            for (a, b) in d.iter().zip(&first) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // all three features are zero on a plane
        assert_eq!(first[5], 1.0 / 3.0);
        assert_eq!(first[11 + 5], 1.0 / 3.0);
        assert_eq!(first[22 + 5], 1.0 / 3.0);
    }

    #[test]
    fn isolated_vertex_gets_uniform() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let f = compute_fpfh(&m, &[0, 1, 2], 0.1, None).unwrap();
        assert!(f.isolated.iter().all(|&x| x));
        assert!(f.descriptors[0].iter().all(|&x| x == 1.0 / 33.0));
    }

    #[test]
    fn descriptors_sum_to_one() {
        let m = shapes::icosphere(Vec3::zeros(), 0.5, 3);
        let domain: Vec<u32> = (0..m.vertex_count() as u32).collect();
        let f = compute_fpfh(&m, &domain, 0.1, Some(&Vec3::new(0.0, 0.0, -3.0))).unwrap();
        for d in &f.descriptors {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn pair_features_are_rigid_invariant() {
        let p1 = Vec3::new(0.1, 0.2, 0.3);
        let n1 = Vec3::new(0.2, 0.9, 0.1).normalize();
        let p2 = Vec3::new(0.15, 0.18, 0.33);
        let n2 = Vec3::new(-0.1, 0.8, 0.4).normalize();
        let f = pair_features(&p1, &n1, &p2, &n2).unwrap();
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let t = Vec3::new(5.0, -2.0, 1.0);
        let g = pair_features(&(rot * p1 + t), &(rot * n1), &(rot * p2 + t), &(rot * n2)).unwrap();
        for k in 0..3 {
            assert!((f[k] - g[k]).abs() < 1e-12);
        }
        assert!(f[0].abs() <= PI && f[1].abs() <= 1.0 && f[2].abs() <= 1.0);
    }

    #[test]
    fn bad_radius() {
        let m = shapes::unit_cube();
        assert!(compute_fpfh(&m, &[0], 0.0, None).is_err());
        assert!(compute_fpfh(&m, &[99], 0.1, None).is_err());
    }
}
