//! Connected components of closed reservoirs, cluster witnesses, and the
//! static and dynamic detection rules.
//!
//! A large component in a reservoir is the witness of a dense cluster in the
//! window: the sampled edges of a `γ`-cluster `S` behave like `G(|S|, k/m)`,
//! which has a giant component once `k/m > 1/(γ|S|)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimedEdge;
use crate::windows::ClosedReservoir;

/// Members listed in a cluster's high-degree summary.
pub const HIGH_DEGREE_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Density `γ` of the clusters being looked for.
    pub gamma: f64,
    /// Acceptance threshold on the largest component size.
    pub alpha: usize,
    /// Components smaller than this are never stored.
    pub min_store: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            gamma: 0.8,
            alpha: 10,
            min_store: 10,
        }
    }
}

impl ClusterParams {
    /// `α = max(min_store, ⌈ln n⌉)` for a population of `n` nodes.
    pub fn for_population(n: usize) -> Self {
        let d = Self::default();
        let log_n = (n.max(1) as f64).ln().ceil() as usize;
        Self {
            alpha: d.min_store.max(log_n),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma = {} outside (0, 1]", self.gamma)));
        }
        if self.alpha < 2 {
            return Err(Error::InvalidConfig("alpha must be >= 2".into()));
        }
        if self.min_store < 2 {
            return Err(Error::InvalidConfig("min_store must be >= 2".into()));
        }
        Ok(())
    }

    /// `m / (γ·k)`: the smallest cluster a reservoir of `k` out of `m`
    /// edges is expected to witness.
    pub fn minimum_detectable(&self, m: u64, k: usize) -> f64 {
        m as f64 / (self.gamma * k as f64)
    }
}

/// One connected component with the degree of each member inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Sorted by tag.
    pub members: Vec<(String, u32)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Highest-degree member; ties go to the smallest tag.
    pub fn name(&self) -> &str {
        let mut best = &self.members[0];
        for m in &self.members[1..] {
            if m.1 > best.1 {
                best = m;
            }
        }
        &best.0
    }

    pub fn edge_count(&self) -> u64 {
        self.members.iter().map(|&(_, d)| u64::from(d)).sum::<u64>() / 2
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new() -> Self {
        Self {
            parent: Vec::new(),
            size: Vec::new(),
        }
    }

    fn push(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Partitions the nodes touched by `edges` into maximal connected
/// components. Parallel edges count toward degree; a loop counts twice.
/// Components come largest first, ties by smallest member tag.
pub fn connected_components<'a, I>(edges: I) -> Vec<Component>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut ids: HashMap<&'a str, usize> = HashMap::new();
    let mut tags: Vec<&'a str> = Vec::new();
    let mut degree: Vec<u32> = Vec::new();
    let mut sets = DisjointSets::new();

    let mut id_of = |tag: &'a str, sets: &mut DisjointSets| -> usize {
        *ids.entry(tag).or_insert_with(|| {
            tags.push(tag);
            degree.push(0);
            sets.push()
        })
    };

    let mut pairs = Vec::new();
    for (u, v) in edges {
        let a = id_of(u, &mut sets);
        let b = id_of(v, &mut sets);
        pairs.push((a, b));
    }
    for &(a, b) in &pairs {
        degree[a] += 1;
        degree[b] += 1;
        sets.union(a, b);
    }

    let mut groups: HashMap<usize, Vec<(String, u32)>> = HashMap::new();
    for (id, tag) in tags.iter().enumerate() {
        let root = sets.find(id);
        groups
            .entry(root)
            .or_default()
            .push(((*tag).to_owned(), degree[id]));
    }
    let mut components: Vec<Component> = groups
        .into_values()
        .map(|mut members| {
            members.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            Component { members }
        })
        .collect();
    components.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.members[0].0.cmp(&b.members[0].0))
    });
    components
}

pub fn components_of(edges: &[TimedEdge]) -> Vec<Component> {
    connected_components(edges.iter().map(|e| (e.src.as_str(), e.dst.as_str())))
}

pub fn largest_component_size(edges: &[TimedEdge]) -> usize {
    components_of(edges).first().map_or(0, Component::len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

/// Accepts iff the reservoir's largest component has at least `α` nodes.
pub fn detect_static(reservoir: &ClosedReservoir, params: &ClusterParams) -> Decision {
    if largest_component_size(&reservoir.edges) >= params.alpha {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Accepts iff some window accepts: the eventual presence of a cluster.
pub fn detect_dynamic<'a, I>(reservoirs: I, params: &ClusterParams) -> Decision
where
    I: IntoIterator<Item = &'a ClosedReservoir>,
{
    if reservoirs
        .into_iter()
        .any(|r| detect_static(r, params).is_accept())
    {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// A stored cluster witness: a large component of one stream's window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub stream: String,
    pub window: u64,
    /// Close time `t_i` of the window.
    pub timestamp: f64,
    pub name: String,
    /// `(node, degree)` sorted by tag.
    pub members: Vec<(String, u32)>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.members
            .binary_search_by(|(t, _)| t.as_str().cmp(tag))
            .is_ok()
    }

    pub fn degree_of(&self, tag: &str) -> Option<u32> {
        self.members
            .binary_search_by(|(t, _)| t.as_str().cmp(tag))
            .ok()
            .map(|i| self.members[i].1)
    }

    pub fn edge_count(&self) -> u64 {
        self.members.iter().map(|&(_, d)| u64::from(d)).sum::<u64>() / 2
    }

    /// Members by decreasing degree, ties by tag.
    pub fn by_degree(&self) -> Vec<(&str, u32)> {
        let mut v: Vec<(&str, u32)> = self.members.iter().map(|(t, d)| (t.as_str(), *d)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn high_degree_nodes(&self) -> Vec<String> {
        self.by_degree()
            .into_iter()
            .take(HIGH_DEGREE_COUNT)
            .map(|(t, _)| t.to_owned())
            .collect()
    }
}

/// One [`Cluster`] per component of at least `min_store` nodes; possibly none.
pub fn extract_large(
    reservoir: &ClosedReservoir,
    params: &ClusterParams,
    stream: &str,
) -> Vec<Cluster> {
    components_of(&reservoir.edges)
        .into_iter()
        .take_while(|c| c.len() >= params.min_store)
        .map(|c| Cluster {
            stream: stream.to_owned(),
            window: reservoir.index,
            timestamp: reservoir.end,
            name: c.name().to_owned(),
            members: c.members,
        })
        .collect()
}
