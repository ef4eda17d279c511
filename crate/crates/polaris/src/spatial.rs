//! Small planar search structures: a static k-d tree for radius queries
//! and a union-find used for connected-component grouping.

use nalgebra::Vector2;

/// Static 2-d tree over a fixed point set. Indices returned by queries
/// refer to the point order given at construction.
pub struct KdTree2 {
    points: Vec<Vector2<f64>>,
    /// Point indices arranged in tree order (median splits).
    order: Vec<usize>,
}

impl KdTree2 {
    pub fn build(points: Vec<Vector2<f64>>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        if !order.is_empty() {
            build_recursive(&points, &mut order, 0);
        }
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points within `radius` of `center` (inclusive).
    pub fn within_radius(&self, center: Vector2<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.order.is_empty() {
            self.query(0, self.order.len(), 0, center, radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn query(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        center: Vector2<f64>,
        radius: f64,
        out: &mut Vec<usize>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        if (p - center).norm() <= radius {
            out.push(idx);
        }
        let delta = center[axis] - p[axis];
        let next = (axis + 1) % 2;
        if delta - radius <= 0.0 {
            self.query(lo, mid, next, center, radius, out);
        }
        if delta + radius >= 0.0 {
            self.query(mid + 1, hi, next, center, radius, out);
        }
    }
}

fn build_recursive(points: &[Vector2<f64>], order: &mut [usize], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    let right = &mut rest[1..];
    let next = (axis + 1) % 2;
    build_recursive(points, left, next);
    build_recursive(points, right, next);
}

/// Disjoint-set forest with path compression and union by size.
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    /// Groups element indices by component root; groups and members are in
    /// ascending index order.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_radius(points: &[Vector2<f64>], c: Vector2<f64>, r: f64) -> Vec<usize> {
        (0..points.len()).filter(|&i| (points[i] - c).norm() <= r).collect()
    }

    #[test]
    fn radius_query_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Vector2<f64>> = (0..300)
            .map(|_| Vector2::new(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0))
            .collect();
        let tree = KdTree2::build(points.clone());
        for _ in 0..50 {
            let c = Vector2::new(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0);
            let r = rng.random::<f64>() * 3.0;
            assert_eq!(tree.within_radius(c, r), brute_radius(&points, c, r));
        }
    }

    #[test]
    fn empty_and_single() {
        let tree = KdTree2::build(vec![]);
        assert!(tree.within_radius(Vector2::zeros(), 1.0).is_empty());
        let tree = KdTree2::build(vec![Vector2::new(1.0, 1.0)]);
        assert_eq!(tree.within_radius(Vector2::new(1.0, 1.2), 0.5), vec![0]);
    }

    #[test]
    fn union_find_components() {
        let mut uf = UnionFind::new(5);
        uf.union(0, 3);
        uf.union(3, 4);
        let comps = uf.components();
        assert_eq!(comps, vec![vec![0, 3, 4], vec![1], vec![2]]);
    }
}
