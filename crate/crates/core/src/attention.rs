//! Fixation density maps, map similarity, and per-view ground truth.

use std::collections::BTreeMap;

use crate::fixation::FixationPoint;
use crate::gaze::{euler_from_direction, head_orientation};
use crate::mesh::{KdTree, Mesh};
use crate::visibility::{ViewPose, VisibleSet};
use crate::{par, Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    /// Subject id, or `"pooled"`.
    pub subject: String,
    pub mesh_id: String,
    pub pose_id: Option<String>,
}

/// Per-vertex nonnegative field aligned with the mesh vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationDensityMap {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    /// Set when no fixation contributed anything.
    pub empty: bool,
}

impl FixationDensityMap {
    pub fn from_values(values: Vec<f64>, provenance: Provenance) -> Self {
        let empty = !values.iter().any(|&v| v > 0.0);
        Self {
            values,
            provenance,
            empty,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatParams {
    /// Gaussian standard deviation, meters.
    pub sigma: f64,
    /// Contributions farther than this many sigmas are dropped; `None`
    /// evaluates every fixation at every vertex.
    pub cutoff_sigmas: Option<f64>,
}

impl Default for SplatParams {
    fn default() -> Self {
        Self {
            sigma: 0.035,
            cutoff_sigmas: Some(4.0),
        }
    }
}

/// Sum of weighted Gaussians centered at the fixations, evaluated at every
/// vertex with 3D Euclidean distance. Each vertex sums its contributions in
/// fixation order, so the output does not depend on thread scheduling.
pub fn splat_fdm(mesh: &Mesh, fixations: &[FixationPoint], params: &SplatParams) -> Result<FixationDensityMap> {
    if !(params.sigma > 0.0) || !params.sigma.is_finite() {
        return Err(Error::invalid("splat sigma must be positive"));
    }
    if let Some(c) = params.cutoff_sigmas {
        if !(c > 0.0) {
            return Err(Error::invalid("splat cutoff must be positive"));
        }
    }
    if fixations.is_empty() {
        log::warn!("no fixations to splat; map is all zero");
        return Ok(FixationDensityMap::from_values(
            vec![0.0; mesh.vertex_count()],
            Provenance::default(),
        ));
    }
    let inv = 1.0 / (2.0 * params.sigma * params.sigma);
    let gauss = |v: &Vec3, f: &FixationPoint| f.weight as f64 * (-(v - f.position).norm_squared() * inv).exp();
    let values = match params.cutoff_sigmas {
        Some(c) => {
            let tree = KdTree::new(fixations.iter().map(|f| f.position).collect());
            let r = c * params.sigma;
            par::map_slice(mesh.vertices(), |v| {
                tree.radius_query(v, r)
                    .iter()
                    .map(|&i| gauss(v, &fixations[i as usize]))
                    .sum()
            })
        }
        None => par::map_slice(mesh.vertices(), |v| fixations.iter().map(|f| gauss(v, f)).sum()),
    };
    Ok(FixationDensityMap::from_values(values, Provenance::default()))
}

/// Pearson correlation of two maps on `domain` (all vertices when `None`).
pub fn plcc(a: &[f64], b: &[f64], domain: Option<&[u32]>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let (xa, xb) = restrict(a, b, domain)?;
    let n = xa.len() as f64;
    let ma = xa.iter().sum::<f64>() / n;
    let mb = xb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in xa.iter().zip(&xb) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(Error::ZeroVariance("first map"));
    }
    if sbb == 0.0 {
        return Err(Error::ZeroVariance("second map"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Values of both maps on the domain; errors on an empty domain or an id
/// out of range.
pub(crate) fn restrict(a: &[f64], b: &[f64], domain: Option<&[u32]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let out = match domain {
        None => (a.to_vec(), b.to_vec()),
        Some(ids) => {
            if let Some(&bad) = ids.iter().find(|&&i| i as usize >= a.len()) {
                return Err(Error::invalid(format!("domain vertex {bad} out of range")));
            }
            (
                ids.iter().map(|&i| a[i as usize]).collect(),
                ids.iter().map(|&i| b[i as usize]).collect(),
            )
        }
    };
    if out.0.is_empty() {
        return Err(Error::Empty("domain"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketParams {
    /// Grid cell edge for head positions, meters.
    pub position: f64,
    /// Bin width for yaw and pitch of the viewing direction, degrees.
    pub angle_deg: f64,
}

impl Default for BucketParams {
    fn default() -> Self {
        Self {
            position: 0.25,
            angle_deg: 30.0,
        }
    }
}

/// Equivalence class of head poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PoseKey {
    pub cell: [i64; 3],
    pub yaw: i64,
    pub pitch: i64,
}

impl PoseKey {
    pub fn of(position: &Vec3, orientation: &Vec3, params: &BucketParams) -> Self {
        let q = |x: f64, step: f64| (x / step).floor() as i64;
        let d = head_orientation(orientation);
        let yaw = d.x.atan2(d.z).to_degrees();
        let pitch = d.y.clamp(-1.0, 1.0).asin().to_degrees();
        Self {
            cell: [
                q(position.x, params.position),
                q(position.y, params.position),
                q(position.z, params.position),
            ],
            yaw: q(yaw, params.angle_deg),
            pitch: q(pitch, params.angle_deg),
        }
    }

    /// File-name friendly identifier.
    pub fn id(&self) -> String {
        format!(
            "w{}_{}_{}_{}_{}",
            self.cell[0], self.cell[1], self.cell[2], self.yaw, self.pitch
        )
    }
}

/// Fixations of one subject on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFixations {
    pub subject: String,
    pub fixations: Vec<FixationPoint>,
}

/// All fixations whose head pose falls in one bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseBucket {
    pub key: PoseKey,
    /// Mean head position and mean viewing direction of the members.
    pub pose: ViewPose,
    /// (subject index, fixation index) pairs, in input order.
    pub members: Vec<(usize, usize)>,
}

impl PoseBucket {
    pub fn visitors(&self) -> usize {
        let mut s: Vec<usize> = self.members.iter().map(|m| m.0).collect();
        s.dedup();
        s.len()
    }
}

/// Groups every fixation by the bucket of its head pose. Buckets come out in
/// key order.
pub fn bucket_poses(subjects: &[SubjectFixations], params: &BucketParams) -> Vec<PoseBucket> {
    let mut groups: BTreeMap<PoseKey, Vec<(usize, usize)>> = BTreeMap::new();
    for (si, s) in subjects.iter().enumerate() {
        for (fi, f) in s.fixations.iter().enumerate() {
            let key = PoseKey::of(&f.head_position, &f.head_orientation, params);
            groups.entry(key).or_default().push((si, fi));
        }
    }
    groups
        .into_iter()
        .map(|(key, members)| {
            let n = members.len() as f64;
            let mut p = Vec3::zeros();
            let mut d = Vec3::zeros();
            for &(si, fi) in &members {
                let f = &subjects[si].fixations[fi];
                p += f.head_position;
                d += head_orientation(&f.head_orientation);
            }
            let orientation = if d.norm() > 1e-12 {
                euler_from_direction(&d)
            } else {
                subjects[members[0].0].fixations[members[0].1].head_orientation
            };
            PoseBucket {
                key,
                pose: ViewPose::new(p / n, orientation),
                members,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewGroundTruth {
    pub pose_id: String,
    pub map: FixationDensityMap,
    /// Distinct subjects that contributed.
    pub visitors: usize,
}

/// Ground-truth map for bucket `key`: the splat of the matching fixations,
/// zeroed outside the visible set.
pub fn build_ground_truth(
    mesh: &Mesh,
    subjects: &[SubjectFixations],
    key: &PoseKey,
    vs: &VisibleSet,
    bucket: &BucketParams,
    splat: &SplatParams,
) -> Result<ViewGroundTruth> {
    if vs.mask.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch(vs.mask.len(), mesh.vertex_count()));
    }
    let mut selected = Vec::new();
    let mut visitors = 0;
    for s in subjects {
        let before = selected.len();
        selected.extend(
            s.fixations
                .iter()
                .filter(|f| PoseKey::of(&f.head_position, &f.head_orientation, bucket) == *key)
                .copied(),
        );
        if selected.len() > before {
            visitors += 1;
        }
    }
    if selected.is_empty() {
        return Err(Error::NoFixationsForPose(key.id()));
    }
    let mut values = splat_fdm(mesh, &selected, splat)?.values;
    for (v, &visible) in values.iter_mut().zip(&vs.mask) {
        if !visible {
            *v = 0.0;
        }
    }
    let map = FixationDensityMap::from_values(
        values,
        Provenance {
            subject: "pooled".into(),
            mesh_id: String::new(),
            pose_id: Some(key.id()),
        },
    );
    if map.empty {
        log::warn!("ground truth for {} is zero on the visible set", key.id());
    }
    Ok(ViewGroundTruth {
        pose_id: key.id(),
        map,
        visitors,
    })
}

/// Blue to red colors over min-max normalized values (constant input maps
/// to blue).
pub fn colormap(values: &[f64]) -> Vec<[u8; 3]> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            jet(t)
        })
        .collect()
}

fn jet(t: f64) -> [u8; 3] {
    let c = |x: f64| ((1.5 - (4.0 * t - x).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(3.0), c(2.0), c(1.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use proptest::prelude::*;

    fn fix(p: Vec3, weight: usize) -> FixationPoint {
        FixationPoint {
            position: p,
            head_position: Vec3::new(0.0, 1.6, -1.5),
            head_orientation: Vec3::zeros(),
            duration: 0.2,
            weight,
            center_sample: 0,
            t_start: 0.0,
        }
    }

    fn grid() -> Mesh {
        shapes::plane_grid(30, 30, 0.01, 0.0)
    }

    #[test]
    fn fixation_on_vertex_peaks_there() {
        let m = grid();
        let v = m.vertices()[200];
        let map = splat_fdm(&m, &[fix(v, 1)], &SplatParams::default()).unwrap();
        assert_eq!(map.values[200], 1.0);
        assert!(map.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(!map.empty);
    }

    #[test]
    fn one_sigma_value() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(0.035, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let map = splat_fdm(&m, &[fix(Vec3::zeros(), 1)], &SplatParams::default()).unwrap();
        assert!((map.values[1] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((map.values[1] - 0.6065).abs() < 1e-4);
        assert_eq!(map.values[2], 0.0);
    }

    #[test]
    fn duplicate_fixation_doubles() {
        let m = grid();
        let f = fix(m.vertices()[77], 1);
        let one = splat_fdm(&m, &[f], &SplatParams::default()).unwrap();
        let two = splat_fdm(&m, &[f, f], &SplatParams::default()).unwrap();
        for (a, b) in one.values.iter().zip(&two.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn empty_input_is_flagged_zero_map() {
        let m = grid();
        let map = splat_fdm(&m, &[], &SplatParams::default()).unwrap();
        assert!(map.empty);
        assert!(map.values.iter().all(|&v| v == 0.0));
        let bad = SplatParams {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(splat_fdm(&m, &[], &bad).is_err());
    }

    #[test]
    fn truncation_error_is_bounded() {
        let m = grid();
        let fs: Vec<_> = (0..40)
            .map(|i| fix(m.vertices()[(i * 37) % m.vertex_count()], 1 + i % 3))
            .collect();
        let total: f64 = fs.iter().map(|f| f.weight as f64).sum();
        let cut = splat_fdm(&m, &fs, &SplatParams::default()).unwrap();
        let full = splat_fdm(
            &m,
            &fs,
            &SplatParams {
                cutoff_sigmas: None,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in cut.values.iter().zip(&full.values) {
            assert!(b - a >= -1e-12);
            assert!(b - a <= (-8.0f64).exp() * total);
        }
    }

    #[test]
    fn plcc_examples() {
        let a = vec![0.1, 0.5, 0.2, 0.9, 0.0];
        assert!((plcc(&a, &a, None).unwrap() - 1.0).abs() < 1e-12);
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x + 0.2).collect();
        assert!((plcc(&a, &b, None).unwrap() - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| 0.9 - x).collect();
        assert!((plcc(&a, &c, None).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(plcc(&a, &[1.0; 5], None), Err(Error::ZeroVariance(_))));
        assert!(plcc(&a, &a, Some(&[0, 1])).is_ok());
        assert!(plcc(&a, &a, Some(&[0, 9])).is_err());
        assert!(plcc(&a, &a, Some(&[])).is_err());
    }

    #[test]
    fn plcc_on_domain_ignores_other_vertices() {
        let a = vec![1.0, 2.0, 3.0, 100.0];
        let b = vec![2.0, 4.0, 6.0, -50.0];
        assert!((plcc(&a, &b, Some(&[0, 1, 2])).unwrap() - 1.0).abs() < 1e-12);
        assert!(plcc(&a, &b, None).unwrap() < 0.0);
    }

    #[test]
    fn pose_keys() {
        let p = BucketParams::default();
        let a = PoseKey::of(&Vec3::new(0.1, 1.6, -1.4), &Vec3::zeros(), &p);
        let b = PoseKey::of(&Vec3::new(0.2, 1.7, -1.3), &Vec3::new(0.0, 10.0, 0.0), &p);
        let c = PoseKey::of(&Vec3::new(0.3, 1.6, -1.4), &Vec3::zeros(), &p);
        let d = PoseKey::of(&Vec3::new(0.1, 1.6, -1.4), &Vec3::new(0.0, 40.0, 0.0), &p);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a.id(), "w0_6_-6_0_0");
    }

    fn subjects_at(m: &Mesh, n: usize) -> Vec<SubjectFixations> {
        (0..n)
            .map(|s| SubjectFixations {
                subject: format!("s{s}"),
                fixations: vec![fix(m.vertices()[100 + 50 * s], 1 + s)],
            })
            .collect()
    }

    #[test]
    fn ground_truth_single_subject() {
        let m = grid();
        let subs = subjects_at(&m, 1);
        let key = bucket_poses(&subs, &BucketParams::default())[0].key;
        let vs = VisibleSet::from_mask(&m, vec![true; m.vertex_count()]);
        let gt = build_ground_truth(&m, &subs, &key, &vs, &Default::default(), &Default::default()).unwrap();
        assert_eq!(gt.visitors, 1);
        assert!(gt.map.values[100] > 0.9);
        assert_eq!(gt.pose_id, key.id());
    }

    #[test]
    fn ground_truth_invisible_fixation_is_zero() {
        let m = grid();
        let subs = subjects_at(&m, 1);
        let key = bucket_poses(&subs, &BucketParams::default())[0].key;
        let vs = VisibleSet::from_mask(&m, vec![false; m.vertex_count()]);
        let gt = build_ground_truth(&m, &subs, &key, &vs, &Default::default(), &Default::default()).unwrap();
        assert_eq!(gt.visitors, 1);
        assert!(gt.map.empty);
        assert!(gt.map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ground_truth_three_subjects_is_sum_of_resplats() {
        let m = grid();
        let subs = subjects_at(&m, 3);
        let buckets = bucket_poses(&subs, &BucketParams::default());
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].visitors(), 3);
        let mask: Vec<bool> = (0..m.vertex_count()).map(|i| i % 5 != 0).collect();
        let vs = VisibleSet::from_mask(&m, mask.clone());
        let gt = build_ground_truth(&m, &subs, &buckets[0].key, &vs, &Default::default(), &Default::default()).unwrap();
        assert_eq!(gt.visitors, 3);
        let sigma = 0.035f64;
        for (i, v) in m.vertices().iter().enumerate() {
            let expect: f64 = if mask[i] {
                subs.iter()
                    .flat_map(|s| &s.fixations)
                    .map(|f| {
                        let d2 = (v - f.position).norm_squared();
                        if d2 <= (4.0 * sigma).powi(2) {
                            f.weight as f64 * (-d2 / (2.0 * sigma * sigma)).exp()
                        } else {
                            0.0
                        }
                    })
                    .sum()
            } else {
                0.0
            };
            assert!((gt.map.values[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_truth_unknown_bucket_errors() {
        let m = grid();
        let subs = subjects_at(&m, 1);
        let key = PoseKey {
            cell: [9, 9, 9],
            yaw: 0,
            pitch: 0,
        };
        let vs = VisibleSet::from_mask(&m, vec![true; m.vertex_count()]);
        assert!(matches!(
            build_ground_truth(&m, &subs, &key, &vs, &Default::default(), &Default::default()),
            Err(Error::NoFixationsForPose(_))
        ));
    }

    #[test]
    fn bucket_pose_is_member_mean() {
        let m = grid();
        let mut a = fix(m.vertices()[0], 1);
        let mut b = a;
        a.head_position = Vec3::new(0.01, 1.6, -1.4);
        b.head_position = Vec3::new(0.03, 1.6, -1.4);
        a.head_orientation = Vec3::new(0.0, 5.0, 0.0);
        b.head_orientation = Vec3::new(0.0, -5.0, 0.0);
        let subs = vec![SubjectFixations {
            subject: "a".into(),
            fixations: vec![a, b],
        }];
        let buckets = bucket_poses(&subs, &BucketParams::default());
        assert_eq!(buckets.len(), 2);
        let subs = vec![SubjectFixations {
            subject: "a".into(),
            fixations: vec![a, { let mut c = b; c.head_orientation.y = 15.0; c }],
        }];
        let buckets = bucket_poses(&subs, &BucketParams::default());
        assert_eq!(buckets.len(), 1);
        assert!((buckets[0].pose.position - Vec3::new(0.02, 1.6, -1.4)).norm() < 1e-12);
        assert!((buckets[0].pose.orientation.y - 10.0).abs() < 1e-9);
    }

    #[test]
    fn colormap_ends() {
        let c = colormap(&[0.0, 0.5, 1.0]);
        assert!(c[0][2] > 100 && c[0][0] == 0);
        assert!(c[2][0] > 100 && c[2][2] == 0);
        assert_eq!(colormap(&[2.0, 2.0])[0], colormap(&[0.0])[0]);
    }

    proptest! {
        #[test]
        fn splat_is_additive_and_permutation_invariant(
            idx in proptest::collection::vec(0usize..900, 2..12),
            split in 1usize..11,
        ) {
            let m = grid();
            let fs: Vec<_> = idx.iter().enumerate()
                .map(|(k, &i)| fix(m.vertices()[i] + Vec3::new(0.0, 0.003 * k as f64, 0.0), 1 + k % 2))
                .collect();
            let split = split.min(fs.len() - 1);
            let p = SplatParams::default();
            let all = splat_fdm(&m, &fs, &p).unwrap();
            let a = splat_fdm(&m, &fs[..split], &p).unwrap();
            let b = splat_fdm(&m, &fs[split..], &p).unwrap();
            let mut rev = fs.clone();
            rev.reverse();
            let r = splat_fdm(&m, &rev, &p).unwrap();
            for i in 0..m.vertex_count() {
                prop_assert!((all.values[i] - a.values[i] - b.values[i]).abs() < 1e-12);
                prop_assert!((all.values[i] - r.values[i]).abs() < 1e-12);
                prop_assert!(all.values[i] >= 0.0);
            }
        }

        #[test]
        fn plcc_symmetric_and_affine_invariant(
            a in proptest::collection::vec(0.0f64..1.0, 5..40),
            seed in proptest::collection::vec(0.0f64..1.0, 40),
            s in 0.1f64..10.0,
            o in -5.0f64..5.0,
        ) {
            let b: Vec<f64> = a.iter().zip(&seed).map(|(x, y)| x + y).collect();
            let (Ok(ab), Ok(ba)) = (plcc(&a, &b, None), plcc(&b, &a, None)) else { return Ok(()); };
            prop_assert!((ab - ba).abs() < 1e-12);
            let a2: Vec<f64> = a.iter().map(|x| s * x + o).collect();
            prop_assert!((plcc(&a2, &b, None).unwrap() - ab).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
