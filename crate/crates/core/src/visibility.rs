//! Visible vertex set of a mesh for one 6DoF pose.
//!
//! All triangles are rasterized into a depth buffer with a perspective
//! camera looking along the head orientation. A vertex is visible when it
//! projects inside the frustum, is not behind the buffered depth at its
//! pixel (up to a tolerance), and its normal faces the eye.

use sha2::{Digest, Sha256};

use crate::gaze::rotation_matrix;
use crate::mesh::Mesh;
use crate::{par, Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub width: u32,
    pub height: u32,
    /// Near plane distance, meters.
    pub near: f64,
}

impl Default for Camera {
    /// Headset-like camera: 110 degree field of view, 1080 x 1200 raster.
    fn default() -> Self {
        Self {
            hfov_deg: 110.0,
            vfov_deg: 110.0,
            width: 1080,
            height: 1200,
            near: 0.05,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < 180.0;
        if !fov_ok(self.hfov_deg) || !fov_ok(self.vfov_deg) {
            return Err(Error::invalid("field of view must lie in (0, 180) degrees"));
        }
        if self.width < 64 || self.height < 64 {
            return Err(Error::invalid("raster must be at least 64 x 64"));
        }
        if !(self.near > 0.0) {
            return Err(Error::invalid("near plane must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewPose {
    pub position: Vec3,
    /// Euler degrees.
    pub orientation: Vec3,
    pub camera: Camera,
}

impl ViewPose {
    pub fn new(position: Vec3, orientation: Vec3) -> Self {
        Self {
            position,
            orientation,
            camera: Camera::default(),
        }
    }

    /// Short stable identifier derived from the pose and camera.
    pub fn hash_id(&self) -> String {
        let c = &self.camera;
        let text = format!(
            "{:.6},{:.6},{:.6};{:.6},{:.6},{:.6};{},{},{},{},{}",
            self.position.x,
            self.position.y,
            self.position.z,
            self.orientation.x,
            self.orientation.y,
            self.orientation.z,
            c.hfov_deg,
            c.vfov_deg,
            c.width,
            c.height,
            c.near
        );
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..6])
    }

    /// Unit (right, up, forward) axes of the view.
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let r = rotation_matrix(&self.orientation);
        (
            (r * Vec3::x()).normalize(),
            (r * Vec3::y()).normalize(),
            (r * Vec3::z()).normalize(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityParams {
    /// Depth slack as a fraction of the mesh bounding-box diagonal.
    pub depth_tolerance_rel: f64,
    /// Extra slack in pixels of surface footprint, scaled by the surface
    /// slope (capped), for vertices whose pixel center samples a
    /// neighboring, slightly closer part of the same surface.
    pub slope_bias_pixels: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            depth_tolerance_rel: 1e-3,
            slope_bias_pixels: 1.0,
        }
    }
}

const MAX_SLOPE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VisibleSet {
    /// Visible vertex ids, ascending.
    pub ids: Vec<u32>,
    /// One flag per mesh vertex.
    pub mask: Vec<bool>,
    /// Mean position of the visible vertices; `None` when the set is empty.
    pub center: Option<Vec3>,
}

impl VisibleSet {
    pub fn from_mask(mesh: &Mesh, mask: Vec<bool>) -> Self {
        let ids: Vec<u32> = (0..mask.len() as u32).filter(|&i| mask[i as usize]).collect();
        let center = visible_center_of(mesh.vertices(), &ids).ok();
        Self { ids, mask, center }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }
}

/// Mean of the member positions.
pub fn visible_center(vs: &VisibleSet, mesh: &Mesh) -> Result<Vec3> {
    visible_center_of(mesh.vertices(), &vs.ids)
}

fn visible_center_of(vertices: &[Vec3], ids: &[u32]) -> Result<Vec3> {
    if ids.is_empty() {
        return Err(Error::Empty("visible set"));
    }
    let sum: Vec3 = ids.iter().map(|&i| vertices[i as usize]).sum();
    Ok(sum / ids.len() as f64)
}

/// View-space projection shared by the rasterizer and the vertex test.
#[derive(Debug, Clone, Copy)]
struct Projector {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    tan_x: f64,
    tan_y: f64,
    width: f64,
    height: f64,
    near: f64,
}

impl Projector {
    fn new(pose: &ViewPose) -> Self {
        let (right, up, forward) = pose.frame();
        let c = &pose.camera;
        Self {
            eye: pose.position,
            right,
            up,
            forward,
            tan_x: (c.hfov_deg.to_radians() / 2.0).tan(),
            tan_y: (c.vfov_deg.to_radians() / 2.0).tan(),
            width: c.width as f64,
            height: c.height as f64,
            near: c.near,
        }
    }

    fn view_of(&self, p: &Vec3) -> Vec3 {
        let d = p - self.eye;
        Vec3::new(d.dot(&self.right), d.dot(&self.up), d.dot(&self.forward))
    }

    /// Screen position (pixels, y down) of a view-space point with z > 0.
    fn screen_of(&self, v: &Vec3) -> (f64, f64) {
        let nx = v.x / (v.z * self.tan_x);
        let ny = v.y / (v.z * self.tan_y);
        ((nx + 1.0) * 0.5 * self.width, (1.0 - ny) * 0.5 * self.height)
    }

    /// Linear size of one pixel at view depth `z`.
    fn footprint(&self, z: f64) -> f64 {
        z * (2.0 * self.tan_x / self.width).max(2.0 * self.tan_y / self.height)
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenTri {
    // (x, y, 1/z)
    p: [(f64, f64, f64); 3],
    ymin: f64,
    ymax: f64,
}

/// Clips a view-space triangle against `z >= near` and returns screen
/// triangles (0, 1 or 2).
fn project_triangle(proj: &Projector, tri: [Vec3; 3]) -> Vec<ScreenTri> {
    let inside: Vec<bool> = tri.iter().map(|v| v.z >= proj.near).collect();
    let poly: Vec<Vec3> = if inside.iter().all(|&b| b) {
        tri.to_vec()
    } else if !inside.iter().any(|&b| b) {
        return Vec::new();
    } else {
        let mut out = Vec::with_capacity(4);
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let (ia, ib) = (inside[k], inside[(k + 1) % 3]);
            if ia {
                out.push(a);
            }
            if ia != ib {
                let s = (proj.near - a.z) / (b.z - a.z);
                let mut c = a + (b - a) * s;
                c.z = proj.near;
                out.push(c);
            }
        }
        out
    };
    let pts: Vec<(f64, f64, f64)> = poly
        .iter()
        .map(|v| {
            let (x, y) = proj.screen_of(v);
            (x, y, 1.0 / v.z)
        })
        .collect();
    (1..pts.len() - 1)
        .filter_map(|k| {
            let p = [pts[0], pts[k], pts[k + 1]];
            let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
            if area == 0.0 || !area.is_finite() {
                return None;
            }
            let ymin = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
            let ymax = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
            if ymax < 0.0 || ymin > proj.height {
                return None;
            }
            Some(ScreenTri { p, ymin, ymax })
        })
        .collect()
}

const BAND_ROWS: usize = 16;

/// Min view depth per pixel (row-major, y down); `f64::INFINITY` where
/// nothing was drawn. Band-parallel; min-merge makes the result independent
/// of triangle order.
pub fn depth_buffer(mesh: &Mesh, pose: &ViewPose) -> Result<Vec<f64>> {
    pose.camera.validate()?;
    let proj = Projector::new(pose);
    let w = pose.camera.width as usize;
    let h = pose.camera.height as usize;
    let view: Vec<Vec3> = par::map_slice(mesh.vertices(), |v| proj.view_of(v));
    let tris: Vec<ScreenTri> = par::map_slice(mesh.triangles(), |t| {
        project_triangle(&proj, t.map(|i| view[i as usize]))
    })
    .into_iter()
    .flatten()
    .collect();

    let bands = h.div_ceil(BAND_ROWS);
    let mut binned: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, t) in tris.iter().enumerate() {
        let lo = (t.ymin.max(0.0) as usize / BAND_ROWS).min(bands - 1);
        let hi = ((t.ymax.min(h as f64 - 1.0)).max(0.0) as usize / BAND_ROWS).min(bands - 1);
        for b in &mut binned[lo..=hi] {
            b.push(i as u32);
        }
    }

    let mut depth = vec![f64::INFINITY; w * h];
    par::for_each_chunk_mut(&mut depth, BAND_ROWS * w, |band, rows| {
        let y0 = band * BAND_ROWS;
        let nrows = rows.len() / w;
        for &ti in &binned[band] {
            raster_into(&tris[ti as usize], rows, w, y0, nrows);
        }
    });
    Ok(depth)
}

fn raster_into(t: &ScreenTri, rows: &mut [f64], w: usize, y0: usize, nrows: usize) {
    let [a, b, c] = t.p;
    let area = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let xmin = a.0.min(b.0).min(c.0).floor().max(0.0) as usize;
    let xmax = (a.0.max(b.0).max(c.0).ceil() as isize).min(w as isize - 1);
    if xmax < 0 {
        return;
    }
    let ylo = (t.ymin.floor().max(y0 as f64) as usize).max(y0);
    let yhi = (t.ymax.ceil() as isize).min((y0 + nrows) as isize - 1);
    if yhi < ylo as isize {
        return;
    }
    let edge = |p: (f64, f64, f64), q: (f64, f64, f64), x: f64, y: f64| (q.0 - p.0) * (y - p.1) - (q.1 - p.1) * (x - p.0);
    for y in ylo..=yhi as usize {
        let py = y as f64 + 0.5;
        let row = &mut rows[(y - y0) * w..(y - y0 + 1) * w];
        for (x, cell) in row.iter_mut().enumerate().take(xmax as usize + 1).skip(xmin) {
            let px = x as f64 + 0.5;
            let w0 = edge(b, c, px, py);
            let w1 = edge(c, a, px, py);
            let w2 = edge(a, b, px, py);
            let inside = if area > 0.0 {
                w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0
            } else {
                w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0
            };
            if !inside {
                continue;
            }
            let inv_z = (w0 * a.2 + w1 * b.2 + w2 * c.2) / area;
            let z = 1.0 / inv_z;
            if z < *cell {
                *cell = z;
            }
        }
    }
}

/// Visible vertex set for `pose`. An empty result is valid.
pub fn visible_points(mesh: &Mesh, pose: &ViewPose, params: &VisibilityParams) -> Result<VisibleSet> {
    let depth = depth_buffer(mesh, pose)?;
    let proj = Projector::new(pose);
    let w = pose.camera.width as usize;
    let base_tol = params.depth_tolerance_rel * mesh.bounding_box_diagonal();
    let normals = mesh.normals();
    let mask = par::map_range(mesh.vertex_count(), |i| {
        let p = &mesh.vertices()[i];
        let to_eye = pose.position - p;
        let facing = normals[i].dot(&to_eye);
        if !(facing > 0.0) {
            return false;
        }
        let v = proj.view_of(p);
        if !(v.z > proj.near) {
            return false;
        }
        let (sx, sy) = proj.screen_of(&v);
        if !(sx >= 0.0 && sx < proj.width && sy >= 0.0 && sy < proj.height) {
            return false;
        }
        let buffered = depth[sy as usize * w + sx as usize];
        let cos = facing / to_eye.norm();
        let slope = ((1.0 - cos * cos).max(0.0).sqrt() / cos).min(MAX_SLOPE);
        let tol = base_tol + params.slope_bias_pixels * proj.footprint(v.z) * slope;
        v.z <= buffered + tol
    });
    Ok(VisibleSet::from_mask(mesh, mask))
}

/// Frustum membership alone (positive depth, inside the field of view).
pub fn in_frustum(pose: &ViewPose, p: &Vec3) -> bool {
    let proj = Projector::new(pose);
    let v = proj.view_of(p);
    if !(v.z > proj.near) {
        return false;
    }
    let (sx, sy) = proj.screen_of(&v);
    sx >= 0.0 && sx < proj.width && sy >= 0.0 && sy < proj.height
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::euler_from_direction;
    use crate::mesh::{shapes, Bvh};

    fn look_at(eye: Vec3, target: Vec3) -> ViewPose {
        ViewPose::new(eye, euler_from_direction(&(target - eye)))
    }

    #[test]
    fn front_triangle_filling_view() {
        let m = Mesh::new(
            vec![Vec3::new(-0.5, -0.5, 1.0), Vec3::new(0.5, -0.5, 1.0), Vec3::new(0.0, 0.5, 1.0)],
            vec![[0, 2, 1]],
        )
        .unwrap();
        // normal must face the eye at the origin
        assert!(m.normals()[0].z < 0.0);
        let vs = visible_points(&m, &ViewPose::new(Vec3::zeros(), Vec3::zeros()), &Default::default()).unwrap();
        assert_eq!(vs.ids, vec![0, 1, 2]);
        let c = vs.center.unwrap();
        assert!((c - Vec3::new(0.0, -0.5 / 3.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn vertex_behind_camera_is_excluded() {
        let m = Mesh::new(
            vec![Vec3::new(-0.5, -0.5, 1.0), Vec3::new(0.5, -0.5, 1.0), Vec3::new(0.0, 0.5, -1.0)],
            vec![[0, 2, 1]],
        )
        .unwrap();
        let pose = ViewPose::new(Vec3::zeros(), Vec3::zeros());
        let vs = visible_points(&m, &pose, &Default::default()).unwrap();
        assert!(!vs.mask[2]);
        assert!(!in_frustum(&pose, &m.vertices()[2]));
    }

    #[test]
    fn facing_away_gives_empty_set() {
        let m = shapes::icosphere(Vec3::new(0.0, 1.5, 0.0), 0.3, 2);
        let pose = look_at(Vec3::new(0.0, 1.5, -1.5), Vec3::new(0.0, 1.5, -3.0));
        let vs = visible_points(&m, &pose, &Default::default()).unwrap();
        assert!(vs.is_empty());
        assert!(vs.center.is_none());
        assert!(visible_center(&vs, &m).is_err());
    }

    #[test]
    fn center_examples() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 5.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let vs = VisibleSet::from_mask(&m, vec![true, true, false]);
        assert_eq!(visible_center(&vs, &m).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        let vs = VisibleSet::from_mask(&m, vec![false, false, true]);
        assert_eq!(visible_center(&vs, &m).unwrap(), Vec3::new(0.0, 5.0, 0.0));
    }

    #[test]
    fn center_matches_direct_sum() {
        let m = shapes::icosphere(Vec3::zeros(), 1.0, 3);
        let mask: Vec<bool> = (0..m.vertex_count()).map(|i| i % 6 == 1).collect();
        let vs = VisibleSet::from_mask(&m, mask);
        let mut sum = Vec3::zeros();
        let mut n = 0.0;
        for &i in &vs.ids {
            sum += m.vertices()[i as usize];
            n += 1.0;
        }
        assert!((vs.center.unwrap() - sum / n).norm() < 1e-12);
    }

    fn raycast_visible(m: &Mesh, bvh: &Bvh, pose: &ViewPose, tol: f64) -> Vec<bool> {
        (0..m.vertex_count())
            .map(|i| {
                let p = m.vertices()[i];
                if !(m.normals()[i].dot(&(pose.position - p)) > 0.0) || !in_frustum(pose, &p) {
                    return false;
                }
                let d = p - pose.position;
                let dist = d.norm();
                match bvh.intersect(&pose.position, &(d / dist)) {
                    Some(hit) => hit.t >= dist - tol,
                    None => true,
                }
            })
            .collect()
    }

    #[test]
    fn sphere_agrees_with_raycast() {
        let m = shapes::icosphere(Vec3::new(0.0, 1.5, 0.0), 0.3, 4);
        let bvh = Bvh::new(&m);
        let pose = look_at(Vec3::new(0.0, 1.5, -2.0), Vec3::new(0.0, 1.5, 0.0));
        let vs = visible_points(&m, &pose, &Default::default()).unwrap();
        let oracle = raycast_visible(&m, &bvh, &pose, 1e-3 * m.bounding_box_diagonal());
        let agree = vs.mask.iter().zip(&oracle).filter(|(a, b)| a == b).count();
        assert!(agree as f64 / m.vertex_count() as f64 >= 0.99, "{agree}");
        for &i in &vs.ids {
            let p = m.vertices()[i as usize];
            assert!(m.normals()[i as usize].dot(&(pose.position - p)) > 0.0);
        }
    }

    #[test]
    fn resolution_stability() {
        let m = shapes::icosphere(Vec3::new(0.0, 1.5, 0.0), 0.3, 4);
        let mut pose = look_at(Vec3::new(0.3, 1.6, -1.4), Vec3::new(0.0, 1.5, 0.0));
        pose.camera.width = 540;
        pose.camera.height = 600;
        let a = visible_points(&m, &pose, &Default::default()).unwrap().len() as f64;
        pose.camera.width = 1080;
        pose.camera.height = 1200;
        let b = visible_points(&m, &pose, &Default::default()).unwrap().len() as f64;
        assert!((a - b).abs() / b < 0.02, "{a} vs {b}");
    }

    #[test]
    fn pose_hash_is_stable_and_distinct() {
        let a = ViewPose::new(Vec3::new(0.0, 1.6, -1.5), Vec3::zeros());
        let b = ViewPose::new(Vec3::new(0.0, 1.6, -1.4), Vec3::zeros());
        assert_eq!(a.hash_id(), a.hash_id());
        assert_ne!(a.hash_id(), b.hash_id());
        assert_eq!(a.hash_id().len(), 12);
    }

    #[test]
    fn camera_validation() {
        let c = Camera {
            width: 32,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = Camera {
            hfov_deg: 180.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
