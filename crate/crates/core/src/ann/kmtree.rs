//! Hierarchical k-means tree over a fixed point set.
//!
//! Each node is split into at most `k` clusters by seeded k-means++ and
//! Lloyd refinement; recursion stops below `leaf_threshold` points or when
//! clustering cannot separate the node's points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{squared_distance, Scalar};

pub const DEFAULT_BRANCHING: usize = 4;
const MAX_SWEEPS: usize = 20;
const MOVE_TOLERANCE: f64 = 1e-6;

/// How far a query may wander from the greedy descent path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryBudget {
    /// Follow the nearest centroid down to one leaf.
    Greedy,
    /// Best-first over centroid distance, stopping after `max_leaves` leaves.
    Backtrack { max_leaves: usize },
    /// Branch and bound until the true nearest point is certain.
    Exact,
}

impl Default for QueryBudget {
    fn default() -> Self {
        QueryBudget::Backtrack { max_leaves: 4 }
    }
}

/// Work counters for a single query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub leaves_visited: usize,
    pub points_scanned: usize,
    pub centroids_compared: usize,
}

impl std::ops::AddAssign for QueryStats {
    fn add_assign(&mut self, o: Self) {
        self.leaves_visited += o.leaves_visited;
        self.points_scanned += o.points_scanned;
        self.centroids_compared += o.centroids_compared;
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NodeKind {
    Internal(Vec<usize>),
    Leaf(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
struct Node<T> {
    centroid: Vec<T>,
    /// Upper bound on the distance from the centroid to any point below.
    radius: T,
    size: usize,
    kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmTree<T> {
    nodes: Vec<Node<T>>,
    dim: usize,
    branching: usize,
    leaf_threshold: usize,
    len: usize,
}

/// Builds a tree over the rows of `points` (flat, row length `dim`).
pub fn build_tree<T: Scalar>(points: &[T], dim: usize, k: usize, leaf_threshold: usize, seed: u64) -> Result<KmTree<T>> {
    if dim == 0 || points.len() % dim != 0 {
        // a zero-dimensional projection still indexes points; treat every
        // row as the empty vector
        if !(dim == 0 && points.is_empty()) {
            return Err(Error::shape(format!("{} values do not form rows of length {dim}", points.len())));
        }
    }
    if k < 2 {
        return Err(Error::domain(format!("branching factor {k} must be at least 2")));
    }
    let n = if dim == 0 { 0 } else { points.len() / dim };
    build_tree_n(points, dim, n, k, leaf_threshold, seed)
}

/// As [`build_tree`] with an explicit point count, which is needed when
/// `dim == 0` (all points project onto the empty vector).
pub fn build_tree_n<T: Scalar>(
    points: &[T],
    dim: usize,
    n: usize,
    k: usize,
    leaf_threshold: usize,
    seed: u64,
) -> Result<KmTree<T>> {
    if n == 0 {
        return Err(Error::domain("cannot build a tree over zero points"));
    }
    if points.len() != n * dim {
        return Err(Error::shape(format!("{} values for {n} points of dimension {dim}", points.len())));
    }
    let mut builder = Builder {
        points,
        dim,
        k,
        leaf_threshold: leaf_threshold.max(1),
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    builder.build((0..n).collect());
    Ok(KmTree { nodes: builder.nodes, dim, branching: k, leaf_threshold: leaf_threshold.max(1), len: n })
}

struct Builder<'a, T> {
    points: &'a [T],
    dim: usize,
    k: usize,
    leaf_threshold: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn row(&self, i: usize) -> &'a [T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn mean_of(&self, members: &[usize]) -> Vec<T> {
        let mut c = vec![T::zero(); self.dim];
        for &i in members {
            for (a, v) in c.iter_mut().zip(self.row(i)) {
                *a += *v;
            }
        }
        let inv = T::one() / T::of_usize(members.len().max(1));
        c.iter_mut().for_each(|a| *a *= inv);
        c
    }

    /// Pushes the subtree for `members` and returns its node id.
    fn build(&mut self, members: Vec<usize>) -> usize {
        let centroid = self.mean_of(&members);
        let far = members
            .iter()
            .map(|&i| squared_distance(&centroid, self.row(i)))
            .fold(T::zero(), T::max)
            .sqrt();
        let radius = far * T::of(1.0 + 1e-9) + T::of(1e-12);
        let id = self.nodes.len();
        let size = members.len();
        self.nodes.push(Node { centroid, radius, size, kind: NodeKind::Leaf(Vec::new()) });

        if members.len() < self.leaf_threshold || members.len() < 2 {
            self.nodes[id].kind = NodeKind::Leaf(members);
            return id;
        }
        let clusters = self.kmeans(&members);
        if clusters.len() < 2 {
            self.nodes[id].kind = NodeKind::Leaf(members);
            return id;
        }
        let children: Vec<usize> = clusters.into_iter().map(|c| self.build(c)).collect();
        self.nodes[id].kind = NodeKind::Internal(children);
        id
    }

    fn seed_centers(&mut self, members: &[usize]) -> Vec<Vec<T>> {
        let first = members[self.rng.gen_range(0..members.len())];
        let mut centers = vec![self.row(first).to_vec()];
        let mut d2: Vec<f64> = members.iter().map(|&i| squared_distance(&centers[0], self.row(i)).as_f64()).collect();
        while centers.len() < self.k {
            let total: f64 = d2.iter().sum();
            if !(total > 0.0) {
                break;
            }
            let mut target = self.rng.gen::<f64>() * total;
            let mut pick = members.len() - 1;
            for (j, w) in d2.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = j;
                    break;
                }
                target -= *w;
            }
            // guard against landing on a zero-weight tail after rounding
            while d2[pick] <= 0.0 {
                pick -= 1;
            }
            let c = self.row(members[pick]).to_vec();
            for (j, &i) in members.iter().enumerate() {
                let d = squared_distance(&c, self.row(i)).as_f64();
                if d < d2[j] {
                    d2[j] = d;
                }
            }
            centers.push(c);
        }
        centers
    }

    fn nearest_center(&self, centers: &[Vec<T>], p: &[T]) -> usize {
        let mut best = 0;
        let mut best_d = squared_distance(&centers[0], p);
        for (c, center) in centers.iter().enumerate().skip(1) {
            let d = squared_distance(center, p);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        best
    }

    /// Non-empty clusters of `members`, in center order.
    fn kmeans(&mut self, members: &[usize]) -> Vec<Vec<usize>> {
        let mut centers = self.seed_centers(members);
        if centers.len() < 2 {
            return vec![members.to_vec()];
        }
        let mut assign = vec![0usize; members.len()];
        for _ in 0..MAX_SWEEPS {
            for (a, &i) in assign.iter_mut().zip(members) {
                *a = self.nearest_center(&centers, self.row(i));
            }
            let mut sums = vec![vec![T::zero(); self.dim]; centers.len()];
            let mut counts = vec![0usize; centers.len()];
            for (&a, &i) in assign.iter().zip(members) {
                counts[a] += 1;
                for (s, v) in sums[a].iter_mut().zip(self.row(i)) {
                    *s += *v;
                }
            }
            let mut shift = 0.0f64;
            for c in 0..centers.len() {
                if counts[c] == 0 {
                    continue;
                }
                let inv = T::one() / T::of_usize(counts[c]);
                let next: Vec<T> = sums[c].iter().map(|s| *s * inv).collect();
                shift = shift.max(squared_distance(&next, &centers[c]).as_f64().sqrt());
                centers[c] = next;
            }
            if shift < MOVE_TOLERANCE {
                break;
            }
        }
        for (a, &i) in assign.iter_mut().zip(members) {
            *a = self.nearest_center(&centers, self.row(i));
        }
        let mut clusters = vec![Vec::new(); centers.len()];
        for (&a, &i) in assign.iter().zip(members) {
            clusters[a].push(i);
        }
        clusters.retain(|c| !c.is_empty());
        clusters
    }
}

/// Heap entry ordered so that `BinaryHeap` pops the smallest key first,
/// ties going to the lower node id.
struct Pending<T> {
    key: T,
    node: usize,
}

impl<T: Scalar> PartialEq for Pending<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Pending<T> {}
impl<T: Scalar> PartialOrd for Pending<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for Pending<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.partial_cmp(&self.key).unwrap_or(Ordering::Equal).then(o.node.cmp(&self.node))
    }
}

struct Best<T> {
    index: usize,
    dist: T,
}

impl<T: Scalar> Best<T> {
    fn offer(&mut self, index: usize, dist: T) {
        if dist < self.dist || (dist == self.dist && index < self.index) {
            self.index = index;
            self.dist = dist;
        }
    }
}

impl<T: Scalar> KmTree<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn leaf_threshold(&self) -> usize {
        self.leaf_threshold
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go<T>(t: &KmTree<T>, id: usize) -> usize {
            match &t.nodes[id].kind {
                NodeKind::Leaf(_) => 1,
                NodeKind::Internal(ch) => 1 + ch.iter().map(|c| go(t, *c)).max().unwrap_or(0),
            }
        }
        go(self, 0)
    }

    /// Point indices per leaf, in depth-first order.
    pub fn leaves(&self) -> Vec<&[usize]> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match &self.nodes[id].kind {
                NodeKind::Leaf(p) => out.push(p.as_slice()),
                NodeKind::Internal(ch) => stack.extend(ch.iter().rev()),
            }
        }
        out
    }

    /// Child count of the root (0 when the root is a leaf).
    pub fn root_children(&self) -> usize {
        match &self.nodes[0].kind {
            NodeKind::Leaf(_) => 0,
            NodeKind::Internal(ch) => ch.len(),
        }
    }

    /// Node sizes as nested JSON (centroids elided).
    pub fn structure_json(&self) -> Value {
        fn go<T>(t: &KmTree<T>, id: usize) -> Value {
            match &t.nodes[id].kind {
                NodeKind::Leaf(p) => json!({ "size": p.len() }),
                NodeKind::Internal(ch) => json!({
                    "size": t.nodes[id].size,
                    "children": ch.iter().map(|c| go(t, *c)).collect::<Vec<_>>(),
                }),
            }
        }
        go(self, 0)
    }

    fn scan_leaf(&self, points: &[T], members: &[usize], q: &[T], best: &mut Best<T>, stats: &mut QueryStats) {
        stats.leaves_visited += 1;
        stats.points_scanned += members.len();
        for &i in members {
            best.offer(i, squared_distance(q, &points[i * self.dim..(i + 1) * self.dim]));
        }
    }

    /// Index of the (approximate, per `budget`) nearest indexed point to `q`.
    /// `points` must be the buffer the tree was built over.
    pub fn query(&self, points: &[T], q: &[T], budget: QueryBudget, stats: &mut QueryStats) -> Result<usize> {
        if self.len == 0 {
            return Err(Error::domain("query on an empty tree"));
        }
        if q.len() != self.dim {
            return Err(Error::shape(format!("query has dimension {}, tree expects {}", q.len(), self.dim)));
        }
        let mut best = Best { index: usize::MAX, dist: T::infinity() };
        match budget {
            QueryBudget::Greedy => {
                let mut id = 0;
                loop {
                    match &self.nodes[id].kind {
                        NodeKind::Leaf(m) => {
                            self.scan_leaf(points, m, q, &mut best, stats);
                            break;
                        }
                        NodeKind::Internal(ch) => {
                            stats.centroids_compared += ch.len();
                            let mut pick = ch[0];
                            let mut pick_d = squared_distance(q, &self.nodes[pick].centroid);
                            for &c in &ch[1..] {
                                let d = squared_distance(q, &self.nodes[c].centroid);
                                if d < pick_d {
                                    pick = c;
                                    pick_d = d;
                                }
                            }
                            id = pick;
                        }
                    }
                }
            }
            QueryBudget::Backtrack { max_leaves } => {
                let max_leaves = max_leaves.max(1);
                let mut heap = BinaryHeap::new();
                heap.push(Pending { key: T::zero(), node: 0 });
                let mut leaves = 0;
                while let Some(Pending { node, .. }) = heap.pop() {
                    match &self.nodes[node].kind {
                        NodeKind::Leaf(m) => {
                            self.scan_leaf(points, m, q, &mut best, stats);
                            leaves += 1;
                            if leaves >= max_leaves {
                                break;
                            }
                        }
                        NodeKind::Internal(ch) => {
                            stats.centroids_compared += ch.len();
                            for &c in ch {
                                heap.push(Pending { key: squared_distance(q, &self.nodes[c].centroid), node: c });
                            }
                        }
                    }
                }
            }
            QueryBudget::Exact => {
                let lower = |id: usize, stats: &mut QueryStats| -> T {
                    stats.centroids_compared += 1;
                    let n = &self.nodes[id];
                    (squared_distance(q, &n.centroid).sqrt() - n.radius).max(T::zero())
                };
                let slack = T::of(1.0 + 1e-9);
                let mut heap = BinaryHeap::new();
                let root_lb = lower(0, stats);
                heap.push(Pending { key: root_lb, node: 0 });
                while let Some(Pending { key, node }) = heap.pop() {
                    if best.dist.is_finite() && key > best.dist.sqrt() * slack + T::of(1e-12) {
                        break;
                    }
                    match &self.nodes[node].kind {
                        NodeKind::Leaf(m) => self.scan_leaf(points, m, q, &mut best, stats),
                        NodeKind::Internal(ch) => {
                            for &c in ch {
                                let lb = lower(c, stats);
                                heap.push(Pending { key: lb, node: c });
                            }
                        }
                    }
                }
            }
        }
        Ok(best.index)
    }
}
