//! Exact HDBSCAN over a dense distance matrix: core distances, mutual
//! reachability, Prim MST, single-linkage tree, condensed tree and
//! excess-of-mass selection. Quadratic memory; meant for title-sized inputs.

use std::collections::VecDeque;

const MIN_DIST: f64 = 1e-12;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&points[i], &points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Distance to the `k`-th nearest point, counting the point itself.
pub fn core_distances(dist: &[Vec<f64>], k: usize) -> Vec<f64> {
    dist.iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(f64::total_cmp);
            r[k.clamp(1, r.len()) - 1]
        })
        .collect()
}

pub fn mutual_reachability(points: &[Vec<f64>], min_samples: usize) -> Vec<Vec<f64>> {
    let mut d = distance_matrix(points);
    let core = core_distances(&d, min_samples);
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = v.max(core[i]).max(core[j]);
            }
        }
    }
    d
}

/// Prim's algorithm on a dense matrix. Ties pick the lowest vertex index.
fn prim_mst(w: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let n = w.len();
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if !in_tree[j] && w[cur][j] < key[j] {
                key[j] = w[cur][j];
                from[j] = cur;
            }
        }
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || key[j] < key[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, key[next]));
        cur = next;
    }
    edges
}

#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    dist: f64,
}

/// Single-linkage merges; node `n + i` is created by merge `i`.
fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> (Vec<Merge>, Vec<usize>) {
    edges.sort_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then(a.0.min(a.1).cmp(&b.0.min(b.1)))
            .then(a.0.max(a.1).cmp(&b.0.max(b.1)))
    });
    let total = 2 * n - 1;
    let mut parent: Vec<usize> = (0..total).collect();
    let mut size = vec![1usize; total];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n - 1);
    for (a, b, d) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let node = n + merges.len();
        merges.push(Merge { left: ra, right: rb, dist: d });
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
    }
    (merges, size)
}

#[derive(Debug, Clone, Copy)]
struct CondensedEdge {
    parent: usize,
    /// Point index when `< n`, otherwise a cluster id.
    child: usize,
    lambda: f64,
    size: usize,
}

fn subtree_points(n: usize, merges: &[Merge], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

/// Cluster ids start at `n` (the root) and grow breadth-first.
fn condense(n: usize, merges: &[Merge], size: &[usize], min_size: usize) -> (Vec<CondensedEdge>, usize) {
    let root = 2 * n - 2;
    let mut label = vec![0usize; 2 * n - 1];
    label[root] = n;
    let mut next = n + 1;
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        if x < n {
            continue;
        }
        let m = merges[x - n];
        let lambda = 1.0 / m.dist.max(MIN_DIST);
        let l = label[x];
        let (ls, rs) = (size[m.left], size[m.right]);
        let fall_out = |edges: &mut Vec<CondensedEdge>, side: usize| {
            for p in subtree_points(n, merges, side) {
                edges.push(CondensedEdge { parent: l, child: p, lambda, size: 1 });
            }
        };
        match (ls >= min_size, rs >= min_size) {
            (true, true) => {
                for (side, s) in [(m.left, ls), (m.right, rs)] {
                    label[side] = next;
                    edges.push(CondensedEdge { parent: l, child: next, lambda, size: s });
                    next += 1;
                    queue.push_back(side);
                }
            }
            (false, false) => {
                fall_out(&mut edges, m.left);
                fall_out(&mut edges, m.right);
            }
            (true, false) => {
                fall_out(&mut edges, m.right);
                label[m.left] = l;
                queue.push_back(m.left);
            }
            (false, true) => {
                fall_out(&mut edges, m.left);
                label[m.right] = l;
                queue.push_back(m.right);
            }
        }
    }
    (edges, next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sorted point indices; noise points are in no node.
    pub members: Vec<usize>,
    /// Excess-of-mass stability of the condensed cluster.
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Preorder; node 0 is the root.
    pub nodes: Vec<ClusterNode>,
    /// Leaf node per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Fewer points than the minimum cluster size; everything is one root.
    pub degenerate: bool,
}

impl Clustering {
    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|i| self.is_leaf(*i)).collect()
    }

    fn single_root(n: usize, degenerate: bool) -> Self {
        Self {
            nodes: vec![ClusterNode {
                parent: None,
                children: vec![],
                members: (0..n).collect(),
                persistence: 0.0,
            }],
            labels: vec![Some(0); n],
            degenerate,
        }
    }
}

/// HDBSCAN with `min_samples = min_cluster_size`. The returned tree holds the
/// selected clusters as leaves plus all their condensed-tree ancestors. When
/// the condensed tree never splits, the root becomes the single leaf.
pub fn cluster_topics(features: &[Vec<f64>], min_cluster_size: usize) -> Clustering {
    let n = features.len();
    let m = min_cluster_size.max(2);
    if n == 0 {
        return Clustering { nodes: vec![], labels: vec![], degenerate: true };
    }
    if n < m {
        log::warn!("{n} points < min cluster size {m}; single topic");
        return Clustering::single_root(n, true);
    }
    let mrd = mutual_reachability(features, m);
    let (merges, size) = single_linkage(n, prim_mst(&mrd));
    let (edges, end) = condense(n, &merges, &size, m);

    let root = n;
    let nc = end - n;
    let idx = |c: usize| c - n;
    let mut birth = vec![0.0f64; nc];
    let mut parent = vec![None; nc];
    let mut children = vec![Vec::new(); nc];
    let mut fell_from = vec![root; n];
    for e in &edges {
        if e.child >= n {
            birth[idx(e.child)] = e.lambda;
            parent[idx(e.child)] = Some(e.parent);
            children[idx(e.parent)].push(e.child);
        } else {
            fell_from[e.child] = e.parent;
        }
    }
    if nc == 1 {
        return Clustering::single_root(n, false);
    }
    let mut stability = vec![0.0f64; nc];
    for e in &edges {
        stability[idx(e.parent)] += (e.lambda - birth[idx(e.parent)]) * e.size as f64;
    }
    let persistence = stability.clone();

    let mut selected = vec![false; nc];
    for c in (root + 1..end).rev() {
        let child_sum: f64 = children[idx(c)].iter().map(|k| stability[idx(*k)]).sum();
        if !children[idx(c)].is_empty() && child_sum > stability[idx(c)] {
            stability[idx(c)] = child_sum;
        } else {
            selected[idx(c)] = true;
            let mut stack = children[idx(c)].clone();
            while let Some(k) = stack.pop() {
                selected[idx(k)] = false;
                stack.extend(children[idx(k)].iter().copied());
            }
        }
    }

    let point_cluster: Vec<Option<usize>> = fell_from
        .iter()
        .map(|&from| {
            let mut c = from;
            while c != root {
                if selected[idx(c)] {
                    return Some(c);
                }
                c = parent[idx(c)].expect("non-root cluster has a parent");
            }
            None
        })
        .collect();

    // keep selected clusters and their ancestors
    let mut keep = vec![false; nc];
    keep[0] = true;
    for c in root + 1..end {
        if selected[idx(c)] {
            let mut x = Some(c);
            while let Some(k) = x {
                keep[idx(k)] = true;
                x = parent[idx(k)];
            }
        }
    }
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        order.push(c);
        let mut kids: Vec<usize> = children[idx(c)]
            .iter()
            .copied()
            .filter(|k| keep[idx(*k)] && !selected[idx(c)])
            .collect();
        kids.sort_unstable();
        stack.extend(kids.into_iter().rev());
    }
    let mut node_of = vec![usize::MAX; nc];
    for (i, c) in order.iter().enumerate() {
        node_of[idx(*c)] = i;
    }
    let mut nodes: Vec<ClusterNode> = order
        .iter()
        .map(|&c| ClusterNode {
            parent: parent[idx(c)].map(|p| node_of[idx(p)]),
            children: vec![],
            members: vec![],
            persistence: persistence[idx(c)],
        })
        .collect();
    for i in 1..nodes.len() {
        let p = nodes[i].parent.expect("non-root");
        nodes[p].children.push(i);
    }
    let labels: Vec<Option<usize>> = point_cluster.iter().map(|c| c.map(|c| node_of[idx(c)])).collect();
    for (p, l) in labels.iter().enumerate() {
        let mut x = *l;
        while let Some(k) = x {
            nodes[k].members.push(p);
            x = nodes[k].parent;
        }
    }
    Clustering { nodes, labels, degenerate: false }
}
