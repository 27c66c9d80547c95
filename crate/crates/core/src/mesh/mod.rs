//! Indexed triangle meshes and the spatial structures built over them.

mod bvh;
mod io;
mod kdtree;
pub mod shapes;

use nalgebra::{Similarity3, Translation3, UnitQuaternion};

pub use bvh::{intersect_exhaustive, intersect_triangle, Bvh, RayHit, RayPre};
pub use io::{load_mesh, parse_obj, parse_ply, write_obj, write_ply, MeshFormat};
pub use kdtree::KdTree;

use crate::{Error, Result, Vec3};

/// Indexed triangle mesh with derived per-vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    flagged: Vec<bool>,
}

impl Mesh {
    /// Validates indices and computes normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::NoVertices);
        }
        if triangles.is_empty() {
            return Err(Error::NoTriangles);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        triangle: t,
                        index: i as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("non-finite vertex coordinate"));
        }
        let (normals, flagged) = compute_vertex_normals(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            normals,
            flagged,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Unit normals; flagged vertices carry a zero vector.
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// True for vertices without any non-degenerate incident triangle.
    pub fn normal_flags(&self) -> &[bool] {
        &self.flagged
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_positions(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        bounding_box(&self.vertices)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bounding_box_diagonal(&self.vertices)
    }

    /// Applies a uniform-scale rigid placement and recomputes normals.
    pub fn transformed(&self, placement: &Placement) -> Mesh {
        let sim = placement.similarity();
        let vertices = self
            .vertices
            .iter()
            .map(|v| sim.transform_point(&(*v).into()).coords)
            .collect();
        Mesh::new(vertices, self.triangles.clone()).expect("placement keeps a valid mesh valid")
    }

    /// One-ring vertex adjacency, sorted and deduplicated.
    pub fn vertex_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                if a != b {
                    adj[a as usize].push(b);
                    adj[b as usize].push(a);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Vertices reachable from `seed` in at most `rings` edge hops, sorted.
    pub fn ring_neighborhood(&self, seed: u32, rings: usize) -> Vec<u32> {
        ring_neighborhood(&self.vertex_adjacency(), seed, rings)
    }
}

pub(crate) fn ring_neighborhood(adj: &[Vec<u32>], seed: u32, rings: usize) -> Vec<u32> {
    let mut seen = vec![false; adj.len()];
    seen[seed as usize] = true;
    let mut frontier = vec![seed];
    let mut out = vec![seed];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &v in &frontier {
            for &n in &adj[v as usize] {
                if !seen[n as usize] {
                    seen[n as usize] = true;
                    next.push(n);
                    out.push(n);
                }
            }
        }
        frontier = next;
    }
    out.sort_unstable();
    out
}

/// Load-time placement: uniform scale, yaw about +Y, then translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub scale: f64,
    pub yaw_deg: f64,
    pub translation: Vec3,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            scale: 1.0,
            yaw_deg: 0.0,
            translation: Vec3::zeros(),
        }
    }
}

impl Placement {
    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    fn similarity(&self) -> Similarity3<f64> {
        Similarity3::from_parts(
            Translation3::from(self.translation),
            UnitQuaternion::from_axis_angle(&Vec3::y_axis(), self.yaw_deg.to_radians()),
            self.scale,
        )
    }
}

/// Area-weighted vertex normals. Zero-area triangles contribute nothing;
/// vertices left with a zero sum get a zero normal and a `true` flag.
pub fn compute_vertex_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> (Vec<Vec3>, Vec<bool>) {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| vertices[i as usize]);
        // |cross| is twice the area, so the raw cross product is the area weight.
        let n = (b - a).cross(&(c - a));
        if n.norm_squared() == 0.0 {
            continue;
        }
        for &i in tri {
            acc[i as usize] += n;
        }
    }
    let mut flagged = vec![false; vertices.len()];
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                flagged[i] = true;
                Vec3::zeros()
            }
        })
        .collect();
    (normals, flagged)
}

pub fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Length of the axis-aligned bounding-box diagonal; 0 for an empty slice.
pub fn bounding_box_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (lo, hi) = bounding_box(points);
    (hi - lo).norm()
}

/// Immutable acceleration structures over one mesh.
#[derive(Debug, Clone)]
pub struct MeshIndex {
    pub kd: KdTree,
    pub bvh: Bvh,
}

impl MeshIndex {
    pub fn new(mesh: &Mesh) -> Self {
        Self {
            kd: KdTree::new(mesh.vertices().to_vec()),
            bvh: Bvh::new(mesh),
        }
    }

    /// Vertex ids within `r` of `center`, ascending.
    pub fn radius_query(&self, center: &Vec3, r: f64) -> Vec<u32> {
        self.kd.radius_query(center, r)
    }
}
