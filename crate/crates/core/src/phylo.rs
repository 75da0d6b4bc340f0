//! Stream phylogeny: Neighbor Joining over `1 - correlation`, Newick text,
//! and a k-gram estimate of the tree edit distance with moves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};

/// Default subtree depth for profiles.
pub const DEFAULT_K: usize = 2;

/// Dense symmetric matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::MatrixShape {
                rows: values.len() / n.max(1),
                labels: n,
            });
        }
        for i in 0..n {
            for j in 0..n {
                if (values[i * n + j] - values[j * n + i]).abs() > 1e-12 {
                    return Err(Error::AsymmetricMatrix(i, j));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }
}

/// `d(i, j) = 1 - A(i, j)`, with a zero diagonal.
pub fn distance_from_correlation(a: &CorrelationMatrix) -> Result<DistanceMatrix> {
    let n = a.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 {
                return Err(Error::AsymmetricMatrix(i, j));
            }
            let v = a.get(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::CorrelationOutOfRange(v));
            }
            if i != j {
                values[i * n + j] = 1.0 - v;
            }
        }
    }
    DistanceMatrix::new(a.labels().to_vec(), values)
}

/// Unrooted tree whose leaves are labelled and whose edges carry lengths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhyloTree {
    labels: Vec<Option<String>>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl PhyloTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_leaf(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(Some(label.into()));
        self.adj.push(Vec::new());
        self.labels.len() - 1
    }

    pub fn add_internal(&mut self) -> usize {
        self.labels.push(None);
        self.adj.push(Vec::new());
        self.labels.len() - 1
    }

    pub fn connect(&mut self, a: usize, b: usize, length: f64) {
        self.adj[a].push((b, length));
        self.adj[b].push((a, length));
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels[node].as_deref()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adj[node]
    }

    /// Each edge once, as `(a, b, length)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (a, list) in self.adj.iter().enumerate() {
            for &(b, len) in list {
                if a < b {
                    out.push((a, b, len));
                }
            }
        }
        out
    }

    /// Leaf labels in node order.
    pub fn leaves(&self) -> Vec<&str> {
        self.labels.iter().filter_map(|l| l.as_deref()).collect()
    }

    pub fn leaf_node(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.as_deref() == Some(label))
            .ok_or_else(|| Error::UnknownLeaf(label.to_owned()))
    }

    /// Connected, acyclic, labels unique, lengths non-negative.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if n == 0 {
            return Ok(());
        }
        if self.edges().len() != n - 1 {
            return Err(Error::Newick(format!("{} nodes need {} edges", n, n - 1)));
        }
        if self.distances_from(0).iter().any(|d| d.is_none()) {
            return Err(Error::Newick("tree is disconnected".into()));
        }
        if self.edges().iter().any(|&(_, _, l)| l.is_nan() || l < 0.0) {
            return Err(Error::Newick("negative edge length".into()));
        }
        let leaves = self.leaves();
        let unique: BTreeSet<&str> = leaves.iter().copied().collect();
        if unique.len() != leaves.len() {
            return Err(Error::Newick("duplicate leaf label".into()));
        }
        Ok(())
    }

    fn distances_from(&self, start: usize) -> Vec<Option<f64>> {
        let mut dist = vec![None; self.node_count()];
        dist[start] = Some(0.0);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let dv = dist[v].unwrap();
            for &(w, len) in &self.adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + len);
                    stack.push(w);
                }
            }
        }
        dist
    }

    /// Sum of edge lengths on the path between two leaves.
    pub fn path_length(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (self.leaf_node(a)?, self.leaf_node(b)?);
        Ok(self.distances_from(a)[b].unwrap_or(f64::INFINITY))
    }

    /// Longest leaf-to-leaf path.
    pub fn diameter(&self) -> f64 {
        let leaves: Vec<usize> = (0..self.node_count()).filter(|&v| self.labels[v].is_some()).collect();
        let mut best: f64 = 0.0;
        for &a in &leaves {
            let dist = self.distances_from(a);
            for &b in &leaves {
                if let Some(d) = dist[b] {
                    best = best.max(d);
                }
            }
        }
        best
    }

    /// Nontrivial leaf bipartitions, each given by the side without the
    /// smallest leaf label. Equal sets mean equal unrooted topologies.
    pub fn splits(&self) -> BTreeSet<BTreeSet<String>> {
        let all: BTreeSet<String> = self.leaves().into_iter().map(str::to_owned).collect();
        let Some(anchor) = all.iter().next().cloned() else {
            return BTreeSet::new();
        };
        let mut out = BTreeSet::new();
        for (a, b, _) in self.edges() {
            let side = self.leaves_beyond(b, a);
            if side.len() < 2 || all.len() - side.len() < 2 {
                continue;
            }
            let side = if side.contains(&anchor) {
                all.difference(&side).cloned().collect()
            } else {
                side
            };
            out.insert(side);
        }
        out
    }

    fn leaves_beyond(&self, start: usize, from: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(start, from)];
        while let Some((v, parent)) = stack.pop() {
            if let Some(l) = &self.labels[v] {
                out.insert(l.clone());
            }
            for &(w, _) in &self.adj[v] {
                if w != parent {
                    stack.push((w, v));
                }
            }
        }
        out
    }

    /// Newick text rooted at the first internal node (or the first node).
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        if self.node_count() > 0 {
            let root = (0..self.node_count())
                .find(|&v| self.labels[v].is_none())
                .unwrap_or(0);
            self.write_newick(root, usize::MAX, &mut out);
        }
        out.push(';');
        out
    }

    fn write_newick(&self, v: usize, parent: usize, out: &mut String) {
        let children: Vec<(usize, f64)> =
            self.adj[v].iter().copied().filter(|&(w, _)| w != parent).collect();
        if !children.is_empty() {
            out.push('(');
            for (i, &(w, len)) in children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write_newick(w, v, out);
                let _ = write!(out, ":{len}");
            }
            out.push(')');
        }
        if let Some(label) = &self.labels[v] {
            out.push_str(&quote_label(label));
        }
    }

    /// Parses Newick text. Unlabelled internal nodes become internal tree
    /// nodes; a binary unlabelled root is dissolved into one edge.
    pub fn from_newick(text: &str) -> Result<Self> {
        let mut parser = NewickParser {
            chars: text.trim().chars().collect(),
            pos: 0,
            tree: PhyloTree::new(),
        };
        let root = parser.subtree()?;
        parser.skip_ws();
        if parser.peek() != Some(';') {
            return Err(Error::Newick(format!("expected ';' at {}", parser.pos)));
        }
        parser.pos += 1;
        parser.skip_ws();
        if parser.pos != parser.chars.len() {
            return Err(Error::Newick("trailing text after ';'".into()));
        }
        let mut tree = parser.tree;
        if tree.labels[root].is_none() && tree.adj[root].len() == 2 {
            let (a, la) = tree.adj[root][0];
            let (b, lb) = tree.adj[root][1];
            tree.adj[a].retain(|&(w, _)| w != root);
            tree.adj[b].retain(|&(w, _)| w != root);
            tree.connect(a, b, la + lb);
            tree.remove_isolated(root);
        }
        tree.validate()?;
        Ok(tree)
    }

    fn remove_isolated(&mut self, node: usize) {
        self.labels.remove(node);
        self.adj.remove(node);
        for list in &mut self.adj {
            for (w, _) in list.iter_mut() {
                if *w > node {
                    *w -= 1;
                }
            }
        }
    }
}

fn quote_label(label: &str) -> String {
    if label
        .chars()
        .any(|c| c.is_whitespace() || "()[]',:;".contains(c))
    {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_owned()
    }
}

struct NewickParser {
    chars: Vec<char>,
    pos: usize,
    tree: PhyloTree,
}

impl NewickParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn subtree(&mut self) -> Result<usize> {
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                let child = self.subtree()?;
                let len = self.length()?;
                children.push((child, len));
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(Error::Newick(format!("expected ',' or ')' at {}", self.pos))),
                }
            }
        }
        let label = self.label()?;
        let node = match (label, children.is_empty()) {
            (Some(l), true) => self.tree.add_leaf(l),
            (None, true) => return Err(Error::Newick(format!("unlabelled leaf at {}", self.pos))),
            // a labelled node with one child is a leaf written as the root
            (Some(l), false) if children.len() == 1 => self.tree.add_leaf(l),
            (Some(l), false) => {
                // labelled internal node: keep the structure, drop the label
                log::debug!("ignoring internal label {l:?}");
                self.tree.add_internal()
            }
            (None, false) => self.tree.add_internal(),
        };
        for (child, len) in children {
            self.tree.connect(node, child, len);
        }
        Ok(node)
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(Error::Newick("unterminated quoted label".into())),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(Some(out));
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
        }
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !"()[]',:;".contains(c))
        {
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.chars[start..self.pos].iter().collect()))
    }

    fn length(&mut self) -> Result<f64> {
        self.skip_ws();
        if self.peek() != Some(':') {
            return Ok(0.0);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || "+-.eE".contains(c))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse()
            .map_err(|_| Error::Newick(format!("bad branch length {text:?}")))
    }
}

/// Neighbor Joining with the Q-criterion. Negative branch lengths are
/// clamped to zero and the deficit moves to the sibling branch.
pub fn neighbor_joining(d: &DistanceMatrix) -> Result<PhyloTree> {
    let n = d.len();
    let mut tree = PhyloTree::new();
    let mut active: Vec<usize> = d.labels().iter().map(|l| tree.add_leaf(l.clone())).collect();
    match n {
        0 => return Err(Error::InvalidConfig("neighbor joining needs at least one taxon".into())),
        1 => return Ok(tree),
        2 => {
            tree.connect(0, 1, d.get(0, 1).max(0.0));
            return Ok(tree);
        }
        _ => {}
    }
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect();

    while active.len() > 3 {
        let r = active.len();
        let sums: Vec<f64> = dist.iter().map(|row| row.iter().sum()).collect();
        let (mut bi, mut bj, mut best) = (0, 1, f64::INFINITY);
        for i in 0..r {
            for j in (i + 1)..r {
                let q = (r as f64 - 2.0) * dist[i][j] - sums[i] - sums[j];
                if q < best - 1e-12 {
                    (bi, bj, best) = (i, j, q);
                }
            }
        }
        let dij = dist[bi][bj];
        let mut li = dij / 2.0 + (sums[bi] - sums[bj]) / (2.0 * (r as f64 - 2.0));
        let mut lj = dij - li;
        if li < 0.0 {
            li = 0.0;
            lj = dij;
        } else if lj < 0.0 {
            lj = 0.0;
            li = dij;
        }
        let u = tree.add_internal();
        tree.connect(u, active[bi], li.max(0.0));
        tree.connect(u, active[bj], lj.max(0.0));

        let new_row: Vec<f64> = (0..r)
            .filter(|&k| k != bi && k != bj)
            .map(|k| ((dist[bi][k] + dist[bj][k] - dij) / 2.0).max(0.0))
            .collect();
        // drop rows/columns bj then bi (bj > bi), append u
        for row in &mut dist {
            row.remove(bj);
            row.remove(bi);
        }
        dist.remove(bj);
        dist.remove(bi);
        active.remove(bj);
        active.remove(bi);
        for (row, &v) in dist.iter_mut().zip(&new_row) {
            row.push(v);
        }
        let mut last = new_row;
        last.push(0.0);
        dist.push(last);
        active.push(u);
    }

    let center = tree.add_internal();
    let (a, b, c) = (dist[0][1], dist[0][2], dist[1][2]);
    let mut lens = [(a + b - c) / 2.0, (a + c - b) / 2.0, (b + c - a) / 2.0];
    // clamp: a negative branch moves its deficit to the others equally
    for i in 0..3 {
        if lens[i] < 0.0 {
            let deficit = -lens[i];
            lens[i] = 0.0;
            for (j, l) in lens.iter_mut().enumerate() {
                if j != i {
                    *l = (*l - deficit / 2.0).max(0.0);
                }
            }
        }
    }
    for (k, len) in lens.into_iter().enumerate() {
        tree.connect(center, active[k], len);
    }
    Ok(tree)
}

/// Normalised leaf distance: path length over the tree diameter.
pub fn leaf_distance(tree: &PhyloTree, a: &str, b: &str) -> Result<f64> {
    let path = tree.path_length(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let diameter = tree.diameter();
    if diameter <= 0.0 {
        return Ok(0.0);
    }
    Ok((path / diameter).clamp(0.0, 1.0))
}

/// Nodes minimising the largest component left after their removal.
fn centroids(tree: &PhyloTree) -> Vec<usize> {
    let n = tree.node_count();
    if n == 0 {
        return Vec::new();
    }
    // iterative post-order from node 0
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0];
    parent[0] = 0;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(w, _) in tree.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    let mut size = vec![1usize; n];
    for &v in order.iter().rev() {
        if v != 0 {
            size[parent[v]] += size[v];
        }
    }
    let worst: Vec<usize> = (0..n)
        .map(|v| {
            tree.neighbors(v)
                .iter()
                .filter(|&&(c, _)| c != 0 && parent[c] == v)
                .map(|&(c, _)| size[c])
                .fold(n - size[v], usize::max)
        })
        .collect();
    let best = *worst.iter().min().unwrap();
    (0..n).filter(|&v| worst[v] == best).collect()
}

fn signature(tree: &PhyloTree, v: usize, parent: usize, depth: Option<usize>) -> String {
    let label = tree.label(v).unwrap_or("*");
    if depth == Some(0) {
        return label.to_owned();
    }
    let mut children: Vec<String> = tree
        .neighbors(v)
        .iter()
        .filter(|&&(w, _)| w != parent)
        .map(|&(w, _)| signature(tree, w, v, depth.map(|d| d - 1)))
        .collect();
    if children.is_empty() {
        return label.to_owned();
    }
    children.sort();
    format!("{label}({})", children.join(","))
}

/// Root of the canonical orientation: the centroid, or of two centroids the
/// one giving the smaller full signature.
fn canonical_root(tree: &PhyloTree) -> Option<usize> {
    centroids(tree)
        .into_iter()
        .map(|c| (signature(tree, c, usize::MAX, None), c))
        .min()
        .map(|(_, c)| c)
}

/// Multiset of depth-`k` subtree signatures over all nodes, with the tree
/// rooted canonically. Edge lengths are ignored.
pub fn kgram_profile(tree: &PhyloTree, k: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let Some(root) = canonical_root(tree) else {
        return out;
    };
    let mut stack = vec![(root, usize::MAX)];
    while let Some((v, parent)) = stack.pop() {
        *out.entry(signature(tree, v, parent, Some(k))).or_insert(0) += 1;
        for &(w, _) in tree.neighbors(v) {
            if w != parent {
                stack.push((w, v));
            }
        }
    }
    out
}

/// L1 distance between two profiles.
pub fn profile_l1(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> usize {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|key| {
            let (x, y) = (a.get(key).copied().unwrap_or(0), b.get(key).copied().unwrap_or(0));
            x.abs_diff(y)
        })
        .sum()
}

/// Estimated move distance: half the profile L1 distance, rounded up.
pub fn tree_move_distance(a: &PhyloTree, b: &PhyloTree, k: usize) -> usize {
    profile_l1(&kgram_profile(a, k), &kgram_profile(b, k)).div_ceil(2)
}
