//! Sight-line reconstruction from head pose and eye offsets.
//!
//! Head orientation is the forward axis `(0, 0, 1)` rotated by
//! `R_z * R_x * R_y` built from the recorded Euler angles (degrees,
//! left-handed, Y up). The standard sight-line meets the headset screen at
//! `B = P + d_screen * forward`; the eye offset `S` moves that point inside
//! the screen plane to `Y`, and the actual sight-line runs from `P` through
//! `Y` into the scene.

use nalgebra::{Matrix3, Vector2};

use crate::mesh::{intersect_exhaustive, Mesh, MeshIndex, RayHit};
use crate::{par, Error, Result, Vec3};

/// One timestamped head-pose + eye-offset record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    pub position: Vec3,
    /// Euler angles `(x, y, z)` in degrees.
    pub orientation: Vec3,
    /// Eye offset on the screen plane, meters.
    pub eye_offset: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeParams {
    /// Head-to-screen distance in meters.
    pub d_screen: f64,
    /// Largest accepted `|S|`.
    pub max_eye_offset: f64,
}

impl Default for GazeParams {
    fn default() -> Self {
        Self {
            d_screen: 0.05,
            max_eye_offset: 0.15,
        }
    }
}

/// `R_z(z) * R_x(x) * R_y(y)` for angles in degrees.
pub fn rotation_matrix(orientation_deg: &Vec3) -> Matrix3<f64> {
    let (sx, cx) = orientation_deg.x.to_radians().sin_cos();
    let (sy, cy) = orientation_deg.y.to_radians().sin_cos();
    let (sz, cz) = orientation_deg.z.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    rz * rx * ry
}

/// Unit forward vector of the head for Euler angles in degrees.
pub fn head_orientation(orientation_deg: &Vec3) -> Vec3 {
    (rotation_matrix(orientation_deg) * Vec3::z()).normalize()
}

/// Euler angles (degrees, zero roll) whose forward vector is `dir`.
pub fn euler_from_direction(dir: &Vec3) -> Vec3 {
    let d = dir.normalize();
    let y = d.x.clamp(-1.0, 1.0).asin();
    let x = (-d.y).atan2(d.z);
    Vec3::new(x.to_degrees(), y.to_degrees(), 0.0)
}

/// Intersection of the standard sight-line with the screen.
pub fn screen_point(position: &Vec3, forward: &Vec3, d_screen: f64) -> Result<Vec3> {
    if !(d_screen > 0.0) {
        return Err(Error::invalid("screen distance must be positive"));
    }
    Ok(position + forward * d_screen)
}

/// The in-screen axes that `s_x` and `s_y` move along.
///
/// With `alpha` the angle to +Y and `beta` the azimuth of the XoZ projection
/// measured from +X, `s_x` moves along `(sin b, 0, -cos b)` and `s_y` along
/// `(cos a cos b, -sin a, cos a sin b)`. Both are unit and orthogonal to
/// the forward vector.
pub fn screen_axes(forward: &Vec3) -> Result<(Vec3, Vec3)> {
    let f = forward.normalize();
    let horizontal = (f.x * f.x + f.z * f.z).sqrt();
    if horizontal < 1e-9 {
        return Err(Error::DegenerateAzimuth);
    }
    let alpha = f.y.clamp(-1.0, 1.0).acos();
    let beta = f.z.atan2(f.x);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Ok((Vec3::new(sb, 0.0, -cb), Vec3::new(ca * cb, -sa, ca * sb)))
}

/// Screen point of the actual sight-line.
pub fn gaze_point(screen: &Vec3, forward: &Vec3, eye_offset: &Vector2<f64>) -> Result<Vec3> {
    let (ax, ay) = screen_axes(forward)?;
    Ok(screen + ax * eye_offset.x + ay * eye_offset.y)
}

/// Eye offset that makes the actual sight-line pass through `target`.
/// Fails when the target is not in front of the screen.
pub fn eye_offset_for_target(
    position: &Vec3,
    forward: &Vec3,
    d_screen: f64,
    target: &Vec3,
) -> Result<Vector2<f64>> {
    let b = screen_point(position, forward, d_screen)?;
    let (ax, ay) = screen_axes(forward)?;
    let to_target = target - position;
    let along = to_target.dot(forward);
    if along <= 1e-12 {
        return Err(Error::invalid("target is behind the screen plane"));
    }
    let y = position + to_target * (d_screen / along);
    let rel = y - b;
    Ok(Vector2::new(rel.dot(&ax), rel.dot(&ay)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SightLine {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

/// Line from the head through the gaze point on the screen.
pub fn actual_sightline(position: &Vec3, gaze: &Vec3) -> Result<SightLine> {
    let d = gaze - position;
    let len = d.norm();
    if !(len > 1e-9) {
        return Err(Error::CoincidentPoints);
    }
    Ok(SightLine {
        origin: *position,
        direction: d / len,
    })
}

/// Full forward model for one sample.
pub fn sample_sightline(sample: &PoseSample, params: &GazeParams) -> Result<SightLine> {
    let forward = head_orientation(&sample.orientation);
    let b = screen_point(&sample.position, &forward, params.d_screen)?;
    let y = gaze_point(&b, &forward, &sample.eye_offset)?;
    actual_sightline(&sample.position, &y)
}

/// Where a sight-line lands on the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionRecord {
    pub point: Vec3,
    pub triangle: u32,
    pub bary: [f64; 3],
    /// Head-to-point distance in meters.
    pub distance: f64,
    /// Index of the originating sample in its recording.
    pub sample: usize,
}

fn record_from_hit(ray: &SightLine, hit: RayHit, sample: usize) -> IntersectionRecord {
    let point = ray.origin + ray.direction * hit.t;
    IntersectionRecord {
        point,
        triangle: hit.triangle,
        bary: hit.bary,
        distance: (point - ray.origin).norm(),
        sample,
    }
}

/// Nearest hit along the positive ray direction, through the BVH.
pub fn intersect_ray_mesh(ray: &SightLine, index: &MeshIndex, sample: usize) -> Option<IntersectionRecord> {
    index
        .bvh
        .intersect(&ray.origin, &ray.direction)
        .map(|h| record_from_hit(ray, h, sample))
}

/// Same contract as [`intersect_ray_mesh`] but tests every triangle.
pub fn intersect_ray_mesh_exhaustive(ray: &SightLine, mesh: &Mesh, sample: usize) -> Option<IntersectionRecord> {
    intersect_exhaustive(mesh, &ray.origin, &ray.direction).map(|h| record_from_hit(ray, h, sample))
}

/// Checks time ordering and the eye-offset bound.
pub fn validate_recording(samples: &[PoseSample], params: &GazeParams) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty("recording"));
    }
    for (k, s) in samples.iter().enumerate() {
        if k > 0 && !(s.t > samples[k - 1].t) {
            return Err(Error::NonMonotonicTime(k));
        }
        if !s.orientation.iter().all(|a| a.is_finite()) || !s.position.iter().all(|a| a.is_finite()) {
            return Err(Error::invalid(format!("non-finite pose at sample {k}")));
        }
        if s.eye_offset.norm() > params.max_eye_offset {
            return Err(Error::invalid(format!(
                "eye offset {:.4} m at sample {k} exceeds {} m",
                s.eye_offset.norm(),
                params.max_eye_offset
            )));
        }
    }
    Ok(())
}

/// Intersections for a whole recording; `None` marks a miss (including
/// samples whose sight-line is undefined, e.g. looking straight up).
pub fn trace_recording(
    samples: &[PoseSample],
    index: &MeshIndex,
    params: &GazeParams,
) -> Result<Vec<Option<IntersectionRecord>>> {
    validate_recording(samples, params)?;
    Ok(par::map_range(samples.len(), |k| {
        sample_sightline(&samples[k], params)
            .ok()
            .and_then(|ray| intersect_ray_mesh(&ray, index, k))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use proptest::prelude::*;

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    // Independent composition: rotate the forward axis step by step using
    // the single-axis formulas rather than matrix products.
    fn rotate_stepwise(o: &Vec3) -> Vec3 {
        let v = Vec3::z();
        let (s, c) = o.y.to_radians().sin_cos();
        let v = Vec3::new(c * v.x + s * v.z, v.y, -s * v.x + c * v.z);
        let (s, c) = o.x.to_radians().sin_cos();
        let v = Vec3::new(v.x, c * v.y - s * v.z, s * v.y + c * v.z);
        let (s, c) = o.z.to_radians().sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    #[test]
    fn orientation_examples() {
        assert!(close(&head_orientation(&Vec3::zeros()), &Vec3::z(), 1e-15));
        assert!(close(&head_orientation(&Vec3::new(0.0, 90.0, 0.0)), &Vec3::x(), 1e-12));
        assert!(close(&head_orientation(&Vec3::new(90.0, 0.0, 0.0)), &-Vec3::y(), 1e-12));
        for o in [Vec3::new(0.0, 90.0, 0.0), Vec3::new(90.0, 0.0, 0.0), Vec3::new(10.0, -35.0, 20.0)] {
            assert!(close(&head_orientation(&o), &rotate_stepwise(&o), 1e-12));
        }
    }

    #[test]
    fn screen_point_examples() {
        let b = screen_point(&Vec3::zeros(), &Vec3::z(), 0.05).unwrap();
        assert!(close(&b, &Vec3::new(0.0, 0.0, 0.05), 1e-15));
        assert!(screen_point(&Vec3::zeros(), &Vec3::z(), 0.0).is_err());
        let b = screen_point(&Vec3::new(1.0, 1.6, 0.0), &-Vec3::x(), 0.05).unwrap();
        assert!(close(&b, &Vec3::new(0.95, 1.6, 0.0), 1e-15));
    }

    #[test]
    fn gaze_point_examples() {
        let b = Vec3::new(0.0, 1.5, 0.05);
        let y = gaze_point(&b, &Vec3::z(), &Vector2::new(0.01, 0.02)).unwrap();
        assert!(close(&y, &Vec3::new(0.01, 1.48, 0.05), 1e-15));
        let dir = Vec3::new(0.3, -0.2, 0.9).normalize();
        assert_eq!(gaze_point(&b, &dir, &Vector2::zeros()).unwrap(), b);
        assert!(matches!(
            gaze_point(&b, &Vec3::y(), &Vector2::new(0.01, 0.0)),
            Err(Error::DegenerateAzimuth)
        ));
    }

    #[test]
    fn actual_sightline_examples() {
        let l = actual_sightline(&Vec3::zeros(), &Vec3::z()).unwrap();
        assert_eq!(l.direction, Vec3::z());
        let l = actual_sightline(&Vec3::zeros(), &Vec3::new(3.0, 0.0, 4.0)).unwrap();
        assert!(close(&l.direction, &Vec3::new(0.6, 0.0, 0.8), 1e-15));
        assert!(actual_sightline(&Vec3::x(), &Vec3::x()).is_err());
    }

    #[test]
    fn doubling_screen_distance_keeps_direction_at_zero_offset() {
        let s = PoseSample {
            t: 0.0,
            position: Vec3::new(0.2, 1.6, -1.4),
            orientation: Vec3::new(5.0, -10.0, 0.0),
            eye_offset: Vector2::zeros(),
        };
        let a = sample_sightline(&s, &GazeParams { d_screen: 0.05, ..Default::default() }).unwrap();
        let b = sample_sightline(&s, &GazeParams { d_screen: 0.10, ..Default::default() }).unwrap();
        assert!(close(&a.direction, &b.direction, 1e-12));
    }

    #[test]
    fn euler_round_trip() {
        for d in [Vec3::new(0.3, -0.2, 0.9), Vec3::new(-1.0, 0.5, -0.2), Vec3::new(0.0, -0.1, -1.0)] {
            let o = euler_from_direction(&d);
            assert!(close(&head_orientation(&o), &d.normalize(), 1e-12));
        }
    }

    #[test]
    fn sphere_hit_from_minus_z() {
        let m = shapes::icosphere(Vec3::zeros(), 1.0, 4);
        let idx = MeshIndex::new(&m);
        let ray = SightLine {
            origin: Vec3::new(0.0, 0.0, -2.0),
            direction: Vec3::z(),
        };
        let rec = intersect_ray_mesh(&ray, &idx, 7).unwrap();
        assert!(close(&rec.point, &Vec3::new(0.0, 0.0, -1.0), 2e-3));
        assert!((rec.distance - 1.0).abs() < 2e-3);
        assert!((rec.distance - (rec.point - ray.origin).norm()).abs() < 1e-9);
        assert_eq!(rec.sample, 7);
        let away = SightLine { direction: -Vec3::z(), ..ray };
        assert!(intersect_ray_mesh(&away, &idx, 0).is_none());
    }

    #[test]
    fn inverse_offset_reaches_target() {
        let p = Vec3::new(0.4, 1.6, -1.3);
        let fwd = (Vec3::new(0.0, 1.5, 0.0) - p).normalize();
        let target = Vec3::new(0.05, 1.62, -0.2);
        let s = eye_offset_for_target(&p, &fwd, 0.05, &target).unwrap();
        let b = screen_point(&p, &fwd, 0.05).unwrap();
        let y = gaze_point(&b, &fwd, &s).unwrap();
        let line = actual_sightline(&p, &y).unwrap();
        let expected = (target - p).normalize();
        assert!(close(&line.direction, &expected, 1e-12));
    }

    #[test]
    fn recording_validation() {
        let s = |t: f64| PoseSample {
            t,
            position: Vec3::zeros(),
            orientation: Vec3::zeros(),
            eye_offset: Vector2::zeros(),
        };
        let p = GazeParams::default();
        assert!(matches!(validate_recording(&[], &p), Err(Error::Empty(_))));
        assert!(matches!(
            validate_recording(&[s(0.0), s(0.1), s(0.1)], &p),
            Err(Error::NonMonotonicTime(2))
        ));
        let mut far = s(0.2);
        far.eye_offset = Vector2::new(0.2, 0.0);
        assert!(validate_recording(&[s(0.0), far], &p).is_err());
    }

    proptest! {
        #[test]
        fn orientation_is_unit(x in -180.0f64..180.0, y in -180.0f64..180.0, z in -180.0f64..180.0) {
            let o = head_orientation(&Vec3::new(x, y, z));
            prop_assert!((o.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gaze_point_is_lipschitz_in_offset(
            x in -80.0f64..80.0, y in -180.0f64..180.0,
            s in proptest::array::uniform2(-0.1f64..0.1), d in proptest::array::uniform2(-0.05f64..0.05)
        ) {
            let f = head_orientation(&Vec3::new(x, y, 0.0));
            let b = Vec3::new(0.0, 1.6, 0.0);
            let s = Vector2::new(s[0], s[1]);
            let d = Vector2::new(d[0], d[1]);
            let a = gaze_point(&b, &f, &s).unwrap();
            let c = gaze_point(&b, &f, &(s + d)).unwrap();
            prop_assert!((c - a).norm() <= d.norm() * 2f64.sqrt() + 1e-12);
        }
    }
}
