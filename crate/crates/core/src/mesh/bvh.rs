//! Bounding-volume hierarchy over triangles for nearest-hit ray queries.

use super::Mesh;
use crate::Vec3;

const LEAF_SIZE: usize = 4;
// Slack for the slab test so rounding never culls a box the exact ray enters.
const GAMMA3: f64 = 3.0 * f64::EPSILON / (1.0 - 3.0 * f64::EPSILON);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub triangle: u32,
    /// Ray parameter; equals the hit distance for a unit direction.
    pub t: f64,
    /// Weights of the triangle's three corners, in index order.
    pub bary: [f64; 3],
}

impl RayHit {
    fn better_than(&self, other: &Option<RayHit>) -> bool {
        match other {
            None => true,
            Some(o) => self.t < o.t || (self.t == o.t && self.triangle < o.triangle),
        }
    }
}

/// Per-ray constants of the watertight test (shear and axis permutation).
#[derive(Debug, Clone, Copy)]
pub struct RayPre {
    origin: Vec3,
    k: [usize; 3],
    shear: [f64; 3],
    inv_dir: Vec3,
}

impl RayPre {
    pub fn new(origin: &Vec3, dir: &Vec3) -> Self {
        let kz = dir.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            origin: *origin,
            k: [kx, ky, kz],
            shear: [dir[kx] / dir[kz], dir[ky] / dir[kz], 1.0 / dir[kz]],
            inv_dir: dir.map(|d| 1.0 / d),
        }
    }
}

/// Watertight ray/triangle test, independent of winding. Returns hits with
/// `t > 0` only.
pub fn intersect_triangle(ray: &RayPre, tri: &[Vec3; 3], id: u32) -> Option<RayHit> {
    let [kx, ky, kz] = ray.k;
    let [sx, sy, sz] = ray.shear;
    let a = tri[0] - ray.origin;
    let b = tri[1] - ray.origin;
    let c = tri[2] - ray.origin;
    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];
    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let az = sz * a[kz];
    let bz = sz * b[kz];
    let cz = sz * c[kz];
    let t_scaled = u * az + v * bz + w * cz;
    if (det > 0.0 && t_scaled <= 0.0) || (det < 0.0 && t_scaled >= 0.0) {
        return None;
    }
    let inv = 1.0 / det;
    let t = t_scaled * inv;
    if !t.is_finite() {
        return None;
    }
    Some(RayHit {
        triangle: id,
        t,
        bary: [u * inv, v * inv, w * inv],
    })
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first slot in `order`; interior: index of the right child.
    start: u32,
    /// Zero for interior nodes (left child is the next node).
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn new(mesh: &Mesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangle_count())
            .map(|t| mesh.triangle_positions(t))
            .collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let (lo, hi) = super::bounding_box(mesh.vertices());
        let pad = 1e-9 * (hi - lo).norm().max(1e-12);
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build(&tris, &centroids, &mut order, 0, &mut nodes, pad);
        Self { nodes, order, tris }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Nearest hit along `dir` (need not be unit length); ties on `t` go to
    /// the lower triangle id.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        let ray = RayPre::new(origin, dir);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let limit = best.map_or(f64::INFINITY, |b| b.t);
            match slab(&ray, &node.lo, &node.hi) {
                Some(t_enter) if t_enter <= limit => {}
                _ => continue,
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &id in &self.order[s..s + node.count as usize] {
                    if let Some(hit) = intersect_triangle(&ray, &self.tris[id as usize], id) {
                        if hit.better_than(&best) {
                            best = Some(hit);
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(ni + 1);
            }
        }
        best
    }
}

/// Exhaustive nearest hit over every triangle, for checking the hierarchy.
pub fn intersect_exhaustive(mesh: &Mesh, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
    let ray = RayPre::new(origin, dir);
    let mut best = None;
    for t in 0..mesh.triangle_count() {
        if let Some(hit) = intersect_triangle(&ray, &mesh.triangle_positions(t), t as u32) {
            if hit.better_than(&best) {
                best = Some(hit);
            }
        }
    }
    best
}

fn slab(ray: &RayPre, lo: &Vec3, hi: &Vec3) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let mut near = (lo[a] - ray.origin[a]) * ray.inv_dir[a];
        let mut far = (hi[a] - ray.origin[a]) * ray.inv_dir[a];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        far *= 1.0 + 2.0 * GAMMA3;
        // NaN (0 * inf) leaves the interval unchanged on that axis.
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t0 <= t1).then_some(t0)
}

fn build(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [u32],
    offset: usize,
    nodes: &mut Vec<Node>,
    pad: f64,
) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut clo = lo;
    let mut chi = hi;
    for &i in order.iter() {
        for p in &tris[i as usize] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        clo = clo.inf(&centroids[i as usize]);
        chi = chi.sup(&centroids[i as usize]);
    }
    let me = nodes.len();
    nodes.push(Node {
        lo: lo.add_scalar(-pad),
        hi: hi.add_scalar(pad),
        start: offset as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return;
    }
    let axis = (chi - clo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(tris, centroids, left, offset, nodes, pad);
    let right_index = nodes.len() as u32;
    build(tris, centroids, right, offset + mid, nodes, pad);
    nodes[me].start = right_index;
    nodes[me].count = 0;
}
