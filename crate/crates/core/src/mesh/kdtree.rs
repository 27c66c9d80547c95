use crate::Vec3;

/// Balanced k-d tree over a point set, stored implicitly: the median of
/// every `order[lo..hi]` range is the node, split on `axes[mid]`.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build(&points, &mut order, &mut axes);
        Self { points, order, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Ids with `|p - center|^2 <= r^2`, ascending.
    pub fn radius_query(&self, center: &Vec3, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.radius_visit(center, r, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Calls `f(id, squared_distance)` for each point within `r`, in tree order.
    pub fn radius_visit<F: FnMut(u32, f64)>(&self, center: &Vec3, r: f64, mut f: F) {
        if r < 0.0 || self.points.is_empty() {
            return;
        }
        let r2 = r * r;
        self.radius_rec(0, self.order.len(), center, r2, &mut f);
    }

    fn radius_rec<F: FnMut(u32, f64)>(&self, lo: usize, hi: usize, c: &Vec3, r2: f64, f: &mut F) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let id = self.order[mid];
        let p = &self.points[id as usize];
        let d2 = (p - c).norm_squared();
        if d2 <= r2 {
            f(id, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = c[axis] - p[axis];
        // Far-side points are at least |diff| away along the axis.
        let plane2 = diff * diff;
        if diff <= 0.0 || plane2 <= r2 {
            self.radius_rec(lo, mid, c, r2, f);
        }
        if diff >= 0.0 || plane2 <= r2 {
            self.radius_rec(mid + 1, hi, c, r2, f);
        }
    }

    /// Closest point id and its distance; ties go to the lower id.
    pub fn nearest(&self, c: &Vec3) -> Option<(u32, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_rec(0, self.order.len(), c, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, lo: usize, hi: usize, c: &Vec3, best: &mut (u32, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let id = self.order[mid];
        let p = &self.points[id as usize];
        let d2 = (p - c).norm_squared();
        if d2 < best.1 || (d2 == best.1 && id < best.0) {
            *best = (id, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = c[axis] - p[axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(near.0, near.1, c, best);
        if diff * diff <= best.1 {
            self.nearest_rec(far.0, far.1, c, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], axes: &mut [u8]) {
    if order.len() <= 1 {
        if let Some(slot) = axes.first_mut() {
            *slot = 0;
        }
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(points, left, left_axes);
    build(points, &mut rest[1..], &mut rest_axes[1..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn brute(points: &[Vec3], c: &Vec3, r: f64) -> Vec<u32> {
        (0..points.len() as u32)
            .filter(|&i| (points[i as usize] - c).norm_squared() <= r * r)
            .collect()
    }

    #[test]
    fn zero_radius_returns_the_vertex() {
        let pts = cloud(50, 1);
        let tree = KdTree::new(pts.clone());
        assert_eq!(tree.radius_query(&pts[17], 0.0), vec![17]);
    }

    #[test]
    fn large_radius_returns_everything() {
        let pts = cloud(64, 2);
        let tree = KdTree::new(pts.clone());
        let diag = crate::mesh::bounding_box_diagonal(&pts);
        assert_eq!(tree.radius_query(&Vec3::repeat(0.5), diag).len(), 64);
    }

    #[test]
    fn matches_brute_force_on_random_cloud() {
        let pts = cloud(200, 3);
        let tree = KdTree::new(pts.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = Vec3::new(rng.random(), rng.random(), rng.random());
            assert_eq!(tree.radius_query(&c, 0.1), brute(&pts, &c, 0.1));
        }
    }

    #[test]
    fn matches_brute_force_on_10k_with_duplicates() {
        let mut pts = cloud(10_000, 5);
        // exact duplicates and a planar slab stress the tie handling
        for i in 0..500 {
            pts[i + 500] = pts[i];
            pts[i + 2000].z = 0.5;
        }
        let tree = KdTree::new(pts.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let c = Vec3::new(rng.random(), rng.random(), rng.random());
            let r = rng.random_range(0.0..0.2);
            assert_eq!(tree.radius_query(&c, r), brute(&pts, &c, r));
            let (id, d) = tree.nearest(&c).unwrap();
            let best = (0..pts.len())
                .map(|i| ((pts[i] - c).norm_squared(), i as u32))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap();
            assert_eq!(id, best.1);
            assert_eq!(d, best.0.sqrt());
        }
    }
}
