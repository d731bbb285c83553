//! Exact k-nearest-neighbor search over joint embeddings.
//!
//! Nodes are stored in a flat arena. Each node owns a contiguous range of
//! the permuted point index, a centroid, and the radius of the smallest
//! centroid-centered ball containing its points. Internal nodes split on the
//! dimension of largest spread at the median.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::catalog::EmbeddingMap;

pub const DEFAULT_LEAF_SIZE: usize = 40;

#[derive(Debug, Clone)]
struct Node {
    center: Vec<f64>,
    radius: f64,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct BallTree {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

/// The k nearest indexed points, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub ids: Vec<String>,
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Euclidean distance accumulated in f64 in index order.
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = f64::from(x) - f64::from(y);
        acc += d * d;
    }
    acc.sqrt()
}

fn distance_to_center(p: &[f32], c: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in p.iter().zip(c) {
        let d = f64::from(x) - y;
        acc += d * d;
    }
    acc.sqrt()
}

impl BallTree {
    pub fn build(vectors: &EmbeddingMap, leaf_size: usize) -> Result<Self, GeoError> {
        let mut it = vectors.iter();
        let (_, first) = it.next().ok_or(GeoError::EmptyInput)?;
        let dim = first.dim();
        let mut ids = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for (id, v) in vectors {
            if v.dim() != dim {
                return Err(GeoError::DimMismatch { expected: dim, found: v.dim() });
            }
            ids.push(id.clone());
            data.extend_from_slice(v.values());
        }
        let n = ids.len();
        let mut tree = BallTree { ids, dim, data, order: (0..n).collect(), nodes: Vec::new(), leaf_size: leaf_size.max(1) };
        tree.build_node(0, n);
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    fn point(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let dim = self.dim;
        let count = (end - start) as f64;
        let mut center = vec![0.0f64; dim];
        for &i in &self.order[start..end] {
            for (c, &x) in center.iter_mut().zip(self.point(i)) {
                *c += f64::from(x);
            }
        }
        center.iter_mut().for_each(|c| *c /= count);
        let radius = self.order[start..end].iter().map(|&i| distance_to_center(self.point(i), &center)).fold(0.0, f64::max);

        let idx = self.nodes.len();
        self.nodes.push(Node { center, radius, start, end, children: None });
        if end - start <= self.leaf_size {
            return idx;
        }

        // dimension of largest spread
        let mut best_dim = 0;
        let mut best_spread = f32::NEG_INFINITY;
        for d in 0..dim {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.data[i * dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // all points coincide; keep as a leaf
            return idx;
        }
        let mid = start + (end - start) / 2;
        let data = &self.data;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| data[a * dim + best_dim].total_cmp(&data[b * dim + best_dim]).then(a.cmp(&b)));
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[idx].children = Some((left, right));
        idx
    }

    /// Ids of each leaf, in arena order.
    pub fn leaves(&self) -> Vec<Vec<&str>> {
        self.nodes
            .iter()
            .filter(|n| n.children.is_none())
            .map(|n| self.order[n.start..n.end].iter().map(|&i| self.ids[i].as_str()).collect())
            .collect()
    }

    /// Check the containment invariant of every node (test support).
    pub fn check_invariants(&self) -> bool {
        self.nodes.iter().all(|n| {
            let tol = 1e-9 * (1.0 + n.radius);
            let contained = self.order[n.start..n.end].iter().all(|&i| distance_to_center(self.point(i), &n.center) <= n.radius + tol);
            let leaf_ok = n.children.is_some() || n.end - n.start <= self.leaf_size || n.radius == 0.0;
            contained && leaf_ok
        })
    }

    /// Exact k nearest neighbors; ties go to the lexicographically smaller id.
    pub fn query(&self, q: &[f32], k: usize) -> Result<NeighborSet, GeoError> {
        if q.len() != self.dim {
            return Err(GeoError::DimMismatch { expected: self.dim, found: q.len() });
        }
        if k > self.len() {
            return Err(GeoError::KTooLarge { k, n: self.len() });
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, q, k, &mut best);
        }
        Ok(NeighborSet { ids: best.iter().map(|&(_, i)| self.ids[i].clone()).collect(), distances: best.iter().map(|&(d, _)| d).collect() })
    }

    fn rank(&self, a: &(f64, usize), b: &(f64, usize)) -> Ordering {
        a.0.total_cmp(&b.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
    }

    fn search(&self, node: usize, q: &[f32], k: usize, best: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node];
        let lower = (distance_to_center(q, &n.center) - n.radius).max(0.0);
        if best.len() == k {
            let worst = best[k - 1].0;
            // slack absorbs rounding in the triangle inequality; equality must still be visited for ties
            if lower > worst + 1e-9 * (1.0 + worst) {
                return;
            }
        }
        match n.children {
            None => {
                for &i in &self.order[n.start..n.end] {
                    let cand = (euclidean(q, self.point(i)), i);
                    if best.len() == k && self.rank(&cand, &best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best.partition_point(|b| self.rank(b, &cand) == Ordering::Less);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Some((l, r)) => {
                let dl = distance_to_center(q, &self.nodes[l].center);
                let dr = distance_to_center(q, &self.nodes[r].center);
                let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
                self.search(first, q, k, best);
                self.search(second, q, k, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::EmbeddingVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(n: usize, dim: usize, seed: u64) -> EmbeddingMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                (format!("p{i:04}"), EmbeddingVector::new(v).unwrap())
            })
            .collect()
    }

    /// Exhaustive scan with the same tie rule.
    fn brute_force(map: &EmbeddingMap, q: &[f32], k: usize) -> NeighborSet {
        let mut all: Vec<(f64, &String)> = map
            .iter()
            .map(|(id, v)| {
                let d: f64 = v.values().iter().zip(q).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
                (d.sqrt(), id)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
        all.truncate(k);
        NeighborSet { ids: all.iter().map(|x| x.1.clone()).collect(), distances: all.iter().map(|x| x.0).collect() }
    }

    #[test]
    fn single_vector_tree() {
        let map = random_map(1, 8, 1);
        let tree = BallTree::build(&map, DEFAULT_LEAF_SIZE).unwrap();
        assert_eq!(tree.leaves().len(), 1);
        let q = map[0].values().to_vec();
        let res = tree.query(&q, 1).unwrap();
        assert_eq!(res.ids, vec!["p0000"]);
        assert_eq!(res.distances, vec![0.0]);
    }

    #[test]
    fn leaves_cover_every_id_once() {
        let map = random_map(500, 1536, 2);
        let tree = BallTree::build(&map, 16).unwrap();
        let mut leaf_ids: Vec<&str> = tree.leaves().into_iter().flatten().collect();
        leaf_ids.sort_unstable();
        let mut input: Vec<&str> = map.keys().map(String::as_str).collect();
        input.sort_unstable();
        assert_eq!(leaf_ids, input);
        assert!(tree.check_invariants());
    }

    #[test]
    fn matches_exhaustive_scan() {
        let map = random_map(500, 64, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t40 = BallTree::build(&map, DEFAULT_LEAF_SIZE).unwrap();
        let t1 = BallTree::build(&map, 1).unwrap();
        for _ in 0..50 {
            let q: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            for k in [1, 3, 5] {
                let expect = brute_force(&map, &q, k);
                assert_eq!(t40.query(&q, k).unwrap(), expect);
                assert_eq!(t1.query(&q, k).unwrap(), expect);
            }
        }
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let mut map = EmbeddingMap::new();
        map.insert("b".into(), EmbeddingVector::new(vec![1.0, 0.0]).unwrap());
        map.insert("a".into(), EmbeddingVector::new(vec![-1.0, 0.0]).unwrap());
        map.insert("c".into(), EmbeddingVector::new(vec![5.0, 0.0]).unwrap());
        let tree = BallTree::build(&map, 1).unwrap();
        let res = tree.query(&[0.0, 0.0], 2).unwrap();
        assert_eq!(res.ids, vec!["a", "b"]);
        assert_eq!(res.distances, vec![1.0, 1.0]);
    }

    #[test]
    fn duplicate_points_stay_in_one_leaf() {
        let map: EmbeddingMap = (0..10).map(|i| (format!("d{i}"), EmbeddingVector::new(vec![0.5, 0.5]).unwrap())).collect();
        let tree = BallTree::build(&map, 2).unwrap();
        assert!(tree.check_invariants());
        let res = tree.query(&[0.5, 0.5], 3).unwrap();
        assert_eq!(res.ids, vec!["d0", "d1", "d2"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(BallTree::build(&EmbeddingMap::new(), 4), Err(GeoError::EmptyInput)));
        let mut map = random_map(3, 4, 5);
        let tree = BallTree::build(&map, 4).unwrap();
        assert!(matches!(tree.query(&[0.0; 4], 4), Err(GeoError::KTooLarge { .. })));
        assert!(matches!(tree.query(&[0.0; 3], 1), Err(GeoError::DimMismatch { .. })));
        map.insert("odd".into(), EmbeddingVector::zeros(5));
        assert!(matches!(BallTree::build(&map, 4), Err(GeoError::DimMismatch { .. })));
    }
}
