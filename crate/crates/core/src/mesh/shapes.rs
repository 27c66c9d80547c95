//! Procedural meshes used by the synthetic harness, tests and benchmarks.

use std::collections::HashMap;

use super::Mesh;
use crate::Vec3;

/// Subdivided icosahedron projected onto a sphere, outward winding.
/// Vertex count is `10 * 4^subdivisions + 2`.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| center + v * radius).collect();
    Mesh::new(verts, faces).expect("icosphere is valid")
}

/// Torus around the Y axis. `major` is the ring radius, `minor` the tube radius.
pub fn torus(center: Vec3, major: f64, minor: f64, ring_segments: u32, tube_segments: u32) -> Mesh {
    let (nu, nv) = (ring_segments, tube_segments);
    let mut verts = Vec::with_capacity((nu * nv) as usize);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = std::f64::consts::TAU * j as f64 / nv as f64;
            let ring = major + minor * v.cos();
            verts.push(center + Vec3::new(ring * u.cos(), minor * v.sin(), ring * u.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity((2 * nu * nv) as usize);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    Mesh::new(verts, faces).expect("torus is valid")
}

/// Axis-aligned unit cube with a corner at the origin, outward winding.
pub fn unit_cube() -> Mesh {
    let verts = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // z = 0
        [4, 5, 6],
        [5, 7, 6], // z = 1
        [0, 1, 4],
        [1, 5, 4], // y = 0
        [2, 6, 3],
        [3, 6, 7], // y = 1
        [0, 4, 2],
        [2, 4, 6], // x = 0
        [1, 3, 5],
        [3, 7, 5], // x = 1
    ];
    Mesh::new(verts, faces).expect("cube is valid")
}

/// `nx` by `nz` vertex grid in the plane `y = height`, normals along +Y.
pub fn plane_grid(nx: u32, nz: u32, spacing: f64, height: f64) -> Mesh {
    let x0 = -(nx as f64 - 1.0) * spacing / 2.0;
    let z0 = -(nz as f64 - 1.0) * spacing / 2.0;
    let mut verts = Vec::with_capacity((nx * nz) as usize);
    for k in 0..nz {
        for i in 0..nx {
            verts.push(Vec3::new(x0 + i as f64 * spacing, height, z0 + k as f64 * spacing));
        }
    }
    let mut faces = Vec::new();
    for k in 0..nz - 1 {
        for i in 0..nx - 1 {
            let a = k * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
    }
    Mesh::new(verts, faces).expect("grid is valid")
}

/// Moves one vertex outward along its normal by `height`.
pub fn with_spike(mesh: &Mesh, vertex: u32, height: f64) -> Mesh {
    let mut verts = mesh.vertices().to_vec();
    verts[vertex as usize] += mesh.normals()[vertex as usize] * height;
    Mesh::new(verts, mesh.triangles().to_vec()).expect("spike keeps topology")
}

/// Disjoint union of two meshes; `b`'s indices are shifted past `a`'s vertices.
pub fn merge(a: &Mesh, b: &Mesh) -> Mesh {
    let shift = a.vertex_count() as u32;
    let mut verts = a.vertices().to_vec();
    verts.extend_from_slice(b.vertices());
    let mut faces = a.triangles().to_vec();
    faces.extend(b.triangles().iter().map(|t| t.map(|i| i + shift)));
    Mesh::new(verts, faces).expect("union of valid meshes is valid")
}

/// Vertex whose direction from `center` best matches `dir`.
pub fn vertex_toward(mesh: &Mesh, center: &Vec3, dir: &Vec3) -> u32 {
    let d = dir.normalize();
    let mut best = (f64::NEG_INFINITY, 0u32);
    for (i, v) in mesh.vertices().iter().enumerate() {
        let s = (v - center).normalize().dot(&d);
        if s > best.0 {
            best = (s, i as u32);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = icosphere(Vec3::zeros(), 1.0, s);
            assert_eq!(m.vertex_count() as u32, 10 * 4u32.pow(s) + 2);
            assert_eq!(m.triangle_count() as u32, 20 * 4u32.pow(s));
        }
    }

    #[test]
    fn torus_normals_point_out_of_tube() {
        let m = torus(Vec3::zeros(), 1.0, 0.3, 32, 16);
        for (v, n) in m.vertices().iter().zip(m.normals()) {
            let ring = Vec3::new(v.x, 0.0, v.z).normalize();
            let tube_center = ring * 1.0;
            assert!(n.dot(&(v - tube_center)) > 0.0);
        }
    }

    #[test]
    fn cube_and_grid_normals() {
        let c = unit_cube();
        let mid = Vec3::repeat(0.5);
        for (v, n) in c.vertices().iter().zip(c.normals()) {
            assert!(n.dot(&(v - mid)) > 0.0);
        }
        let g = plane_grid(5, 4, 0.1, 1.0);
        assert!(g.normals().iter().all(|n| (n - Vec3::y()).norm() < 1e-12));
    }
}
