//! View-dependent mesh saliency: local descriptor uniqueness weighted by
//! distance from the center of the visible region. Also hosts a multi-scale
//! curvature baseline.

mod curvature;
mod fpfh;

pub use curvature::{baseline_curvature_saliency, default_scales, mean_curvature, CurvatureParams};
pub use fpfh::{compute_fpfh, pair_features, FpfhSet, Histogram, BINS_PER_FEATURE, FPFH_BINS};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::Mesh;
use crate::visibility::{visible_points, ViewPose, VisibilityParams, VisibleSet};
use crate::{par, Error, Result, Vec3};

/// Bhattacharyya distance of two normalized histograms, clamped to
/// `-ln(eps_b)` for (near) disjoint support.
pub fn dissimilarity(a: &Histogram, b: &Histogram, eps_b: f64) -> f64 {
    let bc: f64 = a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum();
    (-(bc.max(eps_b)).ln()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessParams {
    pub eps_b: f64,
    /// Above this many visible vertices the inner sum runs over a seeded
    /// random subsample of this size.
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for UniquenessParams {
    fn default() -> Self {
        Self {
            eps_b: 1e-12,
            exact_limit: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniqueness {
    /// One value per input position.
    pub values: Vec<f64>,
    pub subsampled: bool,
}

/// Uniqueness of every point against all others (or a fixed subsample of
/// them): `1 - exp(-mean_j Dis(i, j) / (1 + |p_i - p_j|))`.
pub fn uniqueness(positions: &[Vec3], descriptors: &[Histogram], params: &UniquenessParams) -> Result<Uniqueness> {
    if positions.len() != descriptors.len() {
        return Err(Error::LengthMismatch(positions.len(), descriptors.len()));
    }
    if positions.is_empty() {
        return Err(Error::Empty("visible set"));
    }
    if params.exact_limit == 0 {
        return Err(Error::invalid("uniqueness exact limit must be positive"));
    }
    let n = positions.len();
    let roots: Vec<Histogram> = descriptors.iter().map(|h| h.map(f64::sqrt)).collect();
    let subsampled = n > params.exact_limit;
    let others: Vec<usize> = if subsampled {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut ids = sample(&mut rng, n, params.exact_limit).into_vec();
        ids.sort_unstable();
        ids
    } else {
        (0..n).collect()
    };
    let cap = -params.eps_b.ln();
    let inv = 1.0 / others.len() as f64;
    let values = par::map_range(n, |i| {
        let ri = &roots[i];
        let pi = positions[i];
        let mut acc = 0.0;
        for &j in &others {
            if j == i {
                continue;
            }
            let bc: f64 = ri.iter().zip(&roots[j]).map(|(x, y)| x * y).sum();
            let dis = (-(bc.max(params.eps_b)).ln()).clamp(0.0, cap);
            acc += dis / (1.0 + (pi - positions[j]).norm());
        }
        1.0 - (-acc * inv).exp()
    });
    Ok(Uniqueness { values, subsampled })
}

/// Form of the distance term in the center-bias weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasForm {
    /// `exp(-d / (2 sigma^2))`.
    #[default]
    Linear,
    /// `exp(-d^2 / (2 sigma^2))`.
    Squared,
}

/// Center-bias weight of each point relative to `center`.
pub fn bias_weight(positions: &[Vec3], center: &Vec3, sigma_c: f64, form: BiasForm) -> Result<Vec<f64>> {
    if !(sigma_c > 0.0) {
        return Err(Error::invalid("sigma_c must be positive"));
    }
    let denom = 2.0 * sigma_c * sigma_c;
    Ok(positions
        .iter()
        .map(|p| {
            let d = (p - center).norm();
            let e = match form {
                BiasForm::Linear => d,
                BiasForm::Squared => d * d,
            };
            (-e / denom).exp()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyParams {
    /// FPFH radius as a fraction of the bounding-box diagonal.
    pub fpfh_radius_rel: f64,
    pub sigma_c: f64,
    pub bias: BiasForm,
    pub uniqueness: UniquenessParams,
    pub visibility: VisibilityParams,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self {
            fpfh_radius_rel: 0.02,
            sigma_c: 0.2,
            bias: BiasForm::Linear,
            uniqueness: UniquenessParams::default(),
            visibility: VisibilityParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub pose_id: String,
    /// Per mesh vertex; zero off the visible set.
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub visible: VisibleSet,
    /// Nothing was visible from the pose.
    pub empty: bool,
    pub subsampled: bool,
    pub isolated: usize,
}

/// Saliency of every vertex for one pose.
pub fn saliency_map(mesh: &Mesh, pose: &ViewPose, params: &SaliencyParams) -> Result<SaliencyMap> {
    let visible = visible_points(mesh, pose, &params.visibility)?;
    saliency_for_visible(mesh, pose, visible, params)
}

/// Same as [`saliency_map`] with a precomputed visible set.
pub fn saliency_for_visible(
    mesh: &Mesh,
    pose: &ViewPose,
    visible: VisibleSet,
    params: &SaliencyParams,
) -> Result<SaliencyMap> {
    let n = mesh.vertex_count();
    let pose_id = pose.hash_id();
    let Some(center) = visible.center else {
        log::warn!("pose {pose_id}: nothing visible, saliency is all zero");
        return Ok(SaliencyMap {
            pose_id,
            s: vec![0.0; n],
            u: vec![0.0; n],
            c: vec![0.0; n],
            visible,
            empty: true,
            subsampled: false,
            isolated: 0,
        });
    };
    let r = params.fpfh_radius_rel * mesh.bounding_box_diagonal();
    let fpfh = compute_fpfh(mesh, &visible.ids, r, Some(&pose.position))?;
    let positions: Vec<Vec3> = visible.ids.iter().map(|&i| mesh.vertices()[i as usize]).collect();
    let uq = uniqueness(&positions, &fpfh.descriptors, &params.uniqueness)?;
    if uq.subsampled {
        log::info!(
            "pose {pose_id}: {} visible vertices, uniqueness subsampled to {}",
            positions.len(),
            params.uniqueness.exact_limit
        );
    }
    let cw = bias_weight(&positions, &center, params.sigma_c, params.bias)?;
    let (mut s, mut u, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (k, &id) in visible.ids.iter().enumerate() {
        let i = id as usize;
        u[i] = uq.values[k];
        c[i] = cw[k];
        s[i] = u[i] * c[i];
    }
    Ok(SaliencyMap {
        pose_id,
        s,
        u,
        c,
        isolated: fpfh.isolated.iter().filter(|&&x| x).count(),
        visible,
        empty: false,
        subsampled: uq.subsampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::euler_from_direction;
    use crate::mesh::{shapes, Placement};
    use proptest::prelude::*;

    fn hist(pairs: &[(usize, f64)]) -> Histogram {
        let mut h = [0.0; FPFH_BINS];
        for &(i, v) in pairs {
            h[i] = v;
        }
        h
    }

    #[test]
    fn dissimilarity_examples() {
        let a = hist(&[(0, 0.5), (1, 0.5)]);
        let b = hist(&[(0, 1.0)]);
        assert_eq!(dissimilarity(&a, &a, 1e-12), 0.0);
        assert!((dissimilarity(&a, &b, 1e-12) - 0.5f64.sqrt().ln().abs()).abs() < 1e-12);
        assert!((dissimilarity(&a, &b, 1e-12) - 0.3466).abs() < 1e-4);
        let c = hist(&[(5, 1.0)]);
        let max = dissimilarity(&a, &c, 1e-12);
        assert!((max + 1e-12f64.ln()).abs() < 1e-12);
        assert!((max - 27.63).abs() < 0.01);
    }

    fn brute_uniqueness(pos: &[Vec3], d: &[Histogram]) -> Vec<f64> {
        let n = pos.len();
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    s += dissimilarity(&d[i], &d[j], 1e-12) / (1.0 + (pos[i] - pos[j]).norm());
                }
                1.0 - (-s / n as f64).exp()
            })
            .collect()
    }

    #[test]
    fn uniqueness_trivial_cases() {
        let h = hist(&[(3, 1.0)]);
        let pos = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let u = uniqueness(&pos, &[h; 3], &Default::default()).unwrap();
        assert!(u.values.iter().all(|&x| x == 0.0));
        let u = uniqueness(&pos[..1], &[h], &Default::default()).unwrap();
        assert_eq!(u.values, vec![0.0]);
        assert!(uniqueness(&[], &[], &Default::default()).is_err());
    }

    #[test]
    fn distinct_point_is_most_unique() {
        let mut pos = Vec::new();
        let mut d = Vec::new();
        for i in 0..50 {
            pos.push(Vec3::new(i as f64 * 0.01, 0.0, 0.0));
            d.push(if i == 17 { hist(&[(2, 0.7), (20, 0.3)]) } else { hist(&[(5, 0.5), (16, 0.5)]) });
        }
        let u = uniqueness(&pos, &d, &Default::default()).unwrap();
        let oracle = brute_uniqueness(&pos, &d);
        for (a, b) in u.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        let best = (0..50).max_by(|&a, &b| u.values[a].total_cmp(&u.values[b])).unwrap();
        assert_eq!(best, 17);
    }

    #[test]
    fn subsampling_is_seeded() {
        let pos: Vec<Vec3> = (0..300).map(|i| Vec3::new((i as f64).sin(), (i as f64 * 0.3).cos(), 0.0)).collect();
        let d: Vec<Histogram> = (0..300).map(|i| hist(&[(i % 33, 0.5), ((i * 7) % 33, 0.5)])).collect();
        let p = UniquenessParams {
            exact_limit: 100,
            ..Default::default()
        };
        let a = uniqueness(&pos, &d, &p).unwrap();
        let b = uniqueness(&pos, &d, &p).unwrap();
        assert!(a.subsampled);
        assert_eq!(a, b);
        let exact = uniqueness(&pos, &d, &Default::default()).unwrap();
        assert!(!exact.subsampled);
        let err: f64 = a.values.iter().zip(&exact.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / 300.0;
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn bias_examples() {
        let c = Vec3::new(0.0, 1.5, 0.0);
        let w = bias_weight(&[c, c + Vec3::new(0.2, 0.0, 0.0)], &c, 0.2, BiasForm::Linear).unwrap();
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-2.5f64).exp()).abs() < 1e-12);
        assert!((w[1] - 0.0821).abs() < 1e-4);
        let sq = bias_weight(&[c + Vec3::new(0.2, 0.0, 0.0)], &c, 0.2, BiasForm::Squared).unwrap();
        assert!((sq[0] - (-0.5f64).exp()).abs() < 1e-12);
        let ray: Vec<Vec3> = (0..20).map(|k| c + Vec3::new(0.3, 0.1, -0.2) * k as f64).collect();
        let w = bias_weight(&ray, &c, 0.2, BiasForm::Linear).unwrap();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        assert!(bias_weight(&ray, &c, 0.0, BiasForm::Linear).is_err());
    }

    fn look_at(eye: Vec3, target: Vec3) -> ViewPose {
        ViewPose::new(eye, euler_from_direction(&(target - eye)))
    }

    #[test]
    fn plane_has_zero_saliency() {
        let m = shapes::plane_grid(40, 40, 0.01, 0.0);
        let pose = look_at(Vec3::new(0.2, 0.5, 0.2), Vec3::new(0.2, 0.0, 0.21));
        let s = saliency_map(&m, &pose, &Default::default()).unwrap();
        assert!(!s.empty);
        // borders change the neighborhood statistics; the interior is flat
        let interior: Vec<usize> = (0..m.vertex_count())
            .filter(|&i| {
                let v = m.vertices()[i];
                v.x > 0.06 && v.x < 0.34 && v.z > 0.06 && v.z < 0.34
            })
            .collect();
        let f = compute_fpfh(&m, &s.visible.ids, 0.02 * m.bounding_box_diagonal(), None).unwrap();
        let pos = s.visible.ids.iter().position(|&i| i as usize == interior[0]).unwrap();
        let pos2 = s.visible.ids.iter().position(|&i| i as usize == interior[interior.len() - 1]).unwrap();
        assert!(dissimilarity(&f.descriptors[pos], &f.descriptors[pos2], 1e-12) < 1e-12);
        for i in 0..m.vertex_count() {
            assert!(s.s[i] >= 0.0 && s.s[i] < 1.0);
        }
    }

    #[test]
    fn uniform_descriptors_give_zero_saliency() {
        let m = shapes::plane_grid(20, 20, 0.01, 0.0);
        let pose = look_at(Vec3::new(0.1, 0.5, 0.1), Vec3::new(0.1, 0.0, 0.11));
        let vs = visible_points(&m, &pose, &Default::default()).unwrap();
        let params = SaliencyParams {
            fpfh_radius_rel: 1e-6,
            ..Default::default()
        };
        // every vertex isolated: identical uniform descriptors
        let s = saliency_for_visible(&m, &pose, vs, &params).unwrap();
        assert_eq!(s.isolated, s.visible.len());
        assert!(s.s.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn facing_away_is_empty() {
        let m = shapes::icosphere(Vec3::new(0.0, 1.5, 0.0), 0.3, 2);
        let pose = look_at(Vec3::new(0.0, 1.5, -1.5), Vec3::new(0.0, 1.5, -3.0));
        let s = saliency_map(&m, &pose, &Default::default()).unwrap();
        assert!(s.empty);
        assert!(s.s.iter().all(|&x| x == 0.0));
    }

    fn spiked() -> (Mesh, u32) {
        let sphere = shapes::icosphere(Vec3::new(0.0, 1.5, 0.0), 0.3, 5);
        let apex = shapes::vertex_toward(&sphere, &Vec3::new(0.0, 1.5, 0.0), &Vec3::new(0.1, 0.05, -1.0));
        (shapes::with_spike(&sphere, apex, 0.04), apex)
    }

    #[test]
    fn spike_wins_and_gating_holds() {
        let (m, apex) = spiked();
        let pose = look_at(Vec3::new(0.0, 1.6, -1.5), Vec3::new(0.0, 1.5, 0.0));
        let s = saliency_map(&m, &pose, &Default::default()).unwrap();
        let best = (0..m.vertex_count()).max_by(|&a, &b| s.s[a].total_cmp(&s.s[b])).unwrap() as u32;
        assert!(m.ring_neighborhood(apex, 2).contains(&best), "best {best} apex {apex}");
        for i in 0..m.vertex_count() {
            if !s.visible.mask[i] {
                assert_eq!(s.s[i], 0.0);
            } else {
                assert!((s.s[i] - s.u[i] * s.c[i]).abs() <= 1e-12);
            }
            assert!((0.0..1.0).contains(&s.s[i]));
        }
    }

    #[test]
    fn deterministic_and_rigid_invariant() {
        let (m, _) = spiked();
        let pose = look_at(Vec3::new(0.2, 1.6, -1.4), Vec3::new(0.0, 1.5, 0.0));
        let a = saliency_map(&m, &pose, &Default::default()).unwrap();
        let b = saliency_map(&m, &pose, &Default::default()).unwrap();
        assert_eq!(a, b);
        let place = Placement {
            scale: 1.0,
            yaw_deg: 0.0,
            translation: Vec3::new(0.7, 0.0, -0.4),
        };
        let m2 = m.transformed(&place);
        let pose2 = ViewPose::new(pose.position + place.translation, pose.orientation);
        let c = saliency_map(&m2, &pose2, &Default::default()).unwrap();
        assert_eq!(a.visible.ids, c.visible.ids);
        for i in 0..m.vertex_count() {
            assert!((a.s[i] - c.s[i]).abs() < 1e-6);
            assert!((a.u[i] - c.u[i]).abs() < 1e-6);
            assert!((a.c[i] - c.c[i]).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn dissimilarity_properties(
            a in proptest::collection::vec(0.0f64..1.0, FPFH_BINS),
            b in proptest::collection::vec(0.0f64..1.0, FPFH_BINS),
        ) {
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum::<f64>().max(1e-9);
                let mut h = [0.0; FPFH_BINS];
                for (x, y) in h.iter_mut().zip(v) { *x = y / s; }
                h
            };
            let (ha, hb) = (norm(&a), norm(&b));
            let ab = dissimilarity(&ha, &hb, 1e-12);
            prop_assert_eq!(ab, dissimilarity(&hb, &ha, 1e-12));
            prop_assert!(ab >= 0.0 && ab <= -(1e-12f64).ln());
            prop_assert!(dissimilarity(&ha, &ha, 1e-12) < 1e-12);
        }

        #[test]
        fn uniqueness_matches_double_loop(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..33, 0usize..33), 1..60),
        ) {
            let pos: Vec<Vec3> = raw.iter().map(|r| Vec3::new(r.0, r.1, 0.0)).collect();
            let d: Vec<Histogram> = raw.iter().map(|r| hist(&[(r.2, 0.5), (r.3, 0.5)])).map(|mut h| {
                let s: f64 = h.iter().sum();
                h.iter_mut().for_each(|x| *x /= s);
                h
            }).collect();
            let u = uniqueness(&pos, &d, &Default::default()).unwrap();
            for (a, b) in u.values.iter().zip(brute_uniqueness(&pos, &d)) {
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!((0.0..1.0).contains(a));
            }
        }
    }
}
