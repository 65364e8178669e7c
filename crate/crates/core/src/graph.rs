//! Weighted-graph plumbing shared by the mesh, approximation and modulus code:
//! CSR adjacency, Dijkstra with reusable scratch, truncated and multi-source
//! variants, BFS hop distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Undirected weighted graph in CSR form. Edges are stored once per direction.
#[derive(Debug, Clone)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Csr {
    /// Builds from an undirected edge list; duplicate (a, b) pairs keep the
    /// first weight seen.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Csr {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut deduped: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            debug_assert!(a < n && b < n && a != b);
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                deduped.push((key.0, key.1, w));
            }
        }
        let mut degree = vec![0usize; n];
        for &(a, b, _) in &deduped {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let total = offsets[n];
        let mut targets = vec![0usize; total];
        let mut weights = vec![0f64; total];
        let mut cursor = offsets.clone();
        for &(a, b, w) in &deduped {
            targets[cursor[a]] = b;
            weights[cursor[a]] = w;
            cursor[a] += 1;
            targets[cursor[b]] = a;
            weights[cursor[b]] = w;
            cursor[b] += 1;
        }
        Csr {
            offsets,
            targets,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.offsets[v];
        let hi = self.offsets[v + 1];
        self.targets[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want smallest dist first
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable Dijkstra state; `stamp` makes clearing O(touched) instead of O(n).
pub struct DijkstraScratch {
    dist: Vec<f64>,
    pred: Vec<usize>,
    stamp: Vec<u64>,
    epoch: u64,
    heap: BinaryHeap<HeapItem>,
    touched: Vec<usize>,
}

pub const NO_PRED: usize = usize::MAX;

impl DijkstraScratch {
    pub fn new(n: usize) -> Self {
        DijkstraScratch {
            dist: vec![f64::INFINITY; n],
            pred: vec![NO_PRED; n],
            stamp: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
            touched: Vec::new(),
        }
    }

    fn begin(&mut self) {
        self.epoch += 1;
        self.heap.clear();
        self.touched.clear();
    }

    fn relax(&mut self, node: usize, d: f64, from: usize) -> bool {
        if self.stamp[node] != self.epoch {
            self.stamp[node] = self.epoch;
            self.dist[node] = f64::INFINITY;
            self.pred[node] = NO_PRED;
            self.touched.push(node);
        }
        if d < self.dist[node] {
            self.dist[node] = d;
            self.pred[node] = from;
            true
        } else {
            false
        }
    }

    /// Distance of `node` in the last completed run, infinity if unreached.
    pub fn dist(&self, node: usize) -> f64 {
        if self.stamp[node] == self.epoch {
            self.dist[node]
        } else {
            f64::INFINITY
        }
    }

    /// Nodes settled or touched in the last run.
    pub fn touched(&self) -> &[usize] {
        &self.touched
    }

    /// Number of nodes this scratch was sized for.
    pub fn node_count(&self) -> usize {
        self.dist.len()
    }

    /// Walks predecessors back to a source. Call only for reached nodes.
    pub fn path_to(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while self.pred[cur] != NO_PRED {
            cur = self.pred[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Multi-source Dijkstra. `cutoff`: stop expanding past this distance
    /// (pass infinity for a full run). `allowed`: restrict to a node subset
    /// (pass None for the whole graph). `targets`: settle early once all of
    /// them are settled (pass empty for a full run). Returns the number of
    /// settled targets.
    pub fn run(
        &mut self,
        g: &Csr,
        sources: &[(usize, f64)],
        cutoff: f64,
        allowed: Option<&[bool]>,
        targets: &[usize],
    ) -> usize {
        self.begin();
        let mut target_mark = vec![];
        if !targets.is_empty() {
            target_mark = vec![false; g.len()];
            for &t in targets {
                target_mark[t] = true;
            }
        }
        let mut remaining = targets.len();
        let mut settled_targets = 0;
        for &(s, d0) in sources {
            if let Some(mask) = allowed {
                if !mask[s] {
                    continue;
                }
            }
            if self.relax(s, d0, NO_PRED) {
                self.heap.push(HeapItem { dist: d0, node: s });
            }
        }
        while let Some(HeapItem { dist, node }) = self.heap.pop() {
            if self.stamp[node] != self.epoch || dist > self.dist[node] {
                continue;
            }
            if !target_mark.is_empty() && target_mark[node] {
                target_mark[node] = false;
                remaining -= 1;
                settled_targets += 1;
                if remaining == 0 {
                    return settled_targets;
                }
            }
            if dist > cutoff {
                continue;
            }
            for (next, w) in g.neighbors(node) {
                if let Some(mask) = allowed {
                    if !mask[next] {
                        continue;
                    }
                }
                let nd = dist + w;
                if nd <= cutoff && self.relax(next, nd, node) {
                    self.heap.push(HeapItem {
                        dist: nd,
                        node: next,
                    });
                }
            }
        }
        settled_targets
    }

    /// Convenience single-source full run; returns a dense distance vector.
    pub fn distances_from(&mut self, g: &Csr, source: usize) -> Vec<f64> {
        self.run(g, &[(source, 0.0)], f64::INFINITY, None, &[]);
        (0..g.len()).map(|v| self.dist(v)).collect()
    }
}

/// Unweighted hop distances (BFS) from `source`, truncated at `max_hops`.
/// Returns (node, hops) pairs in settle order, including the source at 0.
pub fn bfs_hops(adj: &[Vec<usize>], source: usize, max_hops: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(source, 0usize)];
    let mut seen = std::collections::HashMap::new();
    seen.insert(source, 0usize);
    let mut frontier = vec![source];
    let mut depth = 0;
    while !frontier.is_empty() && depth < max_hops {
        depth += 1;
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in &adj[v] {
                if !seen.contains_key(&u) {
                    seen.insert(u, depth);
                    out.push((u, depth));
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    out
}

/// BFS shortest hop path between two nodes, or None if disconnected.
pub fn bfs_path(adj: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    if from == to {
        return Some(vec![from]);
    }
    let mut pred = std::collections::HashMap::new();
    pred.insert(from, from);
    let mut frontier = vec![from];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in &adj[v] {
                if !pred.contains_key(&u) {
                    pred.insert(u, v);
                    if u == to {
                        let mut path = vec![to];
                        let mut cur = to;
                        while cur != from {
                            cur = pred[&cur];
                            path.push(cur);
                        }
                        path.reverse();
                        return Some(path);
                    }
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    None
}
