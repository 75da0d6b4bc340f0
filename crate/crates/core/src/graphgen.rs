//! Static and dynamic random graphs under the Configuration Model.
//!
//! A [`StubGraph`] is a uniform perfect matching of half-edges drawn from a
//! degree distribution. [`Dynamics`] evolves it one tick at a time by
//! removing `q` uniformly chosen edges and rematching the `2q` freed stubs,
//! either uniformly or concentrated on a planted node set. Every rematch
//! conserves each node's degree.

use std::collections::{HashMap, VecDeque};
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::ingest::TimedEdge;
use crate::seed::mix_seed;

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionKind {
    Zipfian,
    Explicit,
}

/// Degree law over `n` nodes. Zipfian laws are truncated at `⌊√n⌋` and
/// normalized exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    kind: DistributionKind,
    n: usize,
    normalization: Option<f64>,
    probs: Vec<(u32, f64)>,
}

impl DegreeDistribution {
    /// `Prob[d = j] = c / j²` for `1 ≤ j ≤ ⌊√n⌋`.
    pub fn zipfian(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("n must be positive".into()));
        }
        let d_max = ((n as f64).sqrt().floor() as u32).max(1);
        let total: f64 = (1..=d_max).map(|j| 1.0 / f64::from(j).powi(2)).sum();
        let c = 1.0 / total;
        let probs = (1..=d_max)
            .map(|j| (j, c / f64::from(j).powi(2)))
            .collect();
        Ok(Self {
            kind: DistributionKind::Zipfian,
            n,
            normalization: Some(c),
            probs,
        })
    }

    pub fn explicit(n: usize, probs: Vec<(u32, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("n must be positive".into()));
        }
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no degrees given".into()));
        }
        for &(degree, p) in &probs {
            if degree == 0 {
                return Err(Error::InvalidDistribution("degrees must be >= 1".into()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} for degree {degree} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = probs.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self {
            kind: DistributionKind::Explicit,
            n,
            normalization: None,
            probs,
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The constant `c` of a zipfian law.
    pub fn normalization(&self) -> Option<f64> {
        self.normalization
    }

    pub fn probs(&self) -> &[(u32, f64)] {
        &self.probs
    }

    pub fn d_max(&self) -> u32 {
        self.probs
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(d, _)| d)
            .max()
            .unwrap_or(0)
    }

    pub fn prob(&self, degree: u32) -> f64 {
        self.probs
            .iter()
            .filter(|&&(d, _)| d == degree)
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|&(d, p)| f64::from(d) * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probs.iter().map(|&(d, p)| f64::from(d).powi(2) * p).sum()
    }
}

/// `E[D²] − 2·E[D] > 0`: the Configuration Model has a giant component.
pub fn giant_component_criterion(dist: &DegreeDistribution) -> bool {
    dist.second_moment() - 2.0 * dist.mean() > 0.0
}

/// Draws `n` i.i.d. degrees; an odd total is repaired by adding one stub to a
/// uniformly chosen node.
pub fn sample_degrees(dist: &DegreeDistribution, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = WeightedIndex::new(dist.probs.iter().map(|&(_, p)| p))
        .expect("validated distribution has positive mass");
    let mut degrees: Vec<u32> = (0..dist.n)
        .map(|_| dist.probs[weights.sample(&mut rng)].0)
        .collect();
    let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
    if total % 2 == 1 {
        let node = rng.gen_range(0..degrees.len());
        degrees[node] += 1;
    }
    degrees
}

/// A multigraph realized by matching stubs. Nodes are dense indices with
/// string tags; edges are unordered pairs and may be loops or repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct StubGraph {
    tags: Vec<String>,
    degrees: Vec<u32>,
    edges: Vec<(u32, u32)>,
}

impl StubGraph {
    pub fn node_count(&self) -> usize {
        self.tags.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn tag(&self, node: u32) -> &str {
        &self.tags[node as usize]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Degrees recounted from the edge multiset, loops counting twice.
    pub fn realized_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.tags.len()];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Number of edges (with multiplicity) with both ends in the marked set.
    pub fn internal_edge_count(&self, marked: &[bool]) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| marked[u as usize] && marked[v as usize])
            .count()
    }

    /// Node indices by decreasing degree, ties by index.
    pub fn nodes_by_degree(&self) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.tags.len() as u32).collect();
        order.sort_by(|&a, &b| {
            self.degrees[b as usize]
                .cmp(&self.degrees[a as usize])
                .then(a.cmp(&b))
        });
        order
    }

    pub fn timed_edges(&self, timestamp: f64) -> impl Iterator<Item = TimedEdge> + '_ {
        self.edges
            .iter()
            .map(move |&(u, v)| TimedEdge::new(timestamp, self.tag(u), self.tag(v)))
    }
}

/// Builds a configuration-model graph with tags `n0, n1, …`.
pub fn configuration_graph(degrees: &[u32], seed: u64) -> Result<StubGraph> {
    configuration_graph_tagged(degrees, "n", seed)
}

pub fn configuration_graph_tagged(degrees: &[u32], prefix: &str, seed: u64) -> Result<StubGraph> {
    let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
    if total % 2 == 1 {
        return Err(Error::OddStubCount(total));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<u32> = degrees
        .iter()
        .enumerate()
        .flat_map(|(node, &d)| std::iter::repeat_n(node as u32, d as usize))
        .collect();
    stubs.shuffle(&mut rng);
    let edges = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    Ok(StubGraph {
        tags: (0..degrees.len()).map(|i| format!("{prefix}{i}")).collect(),
        degrees: degrees.to_vec(),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsMode {
    Uniform,
    Concentrated,
    Step,
}

impl FromStr for DynamicsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "concentrated" => Ok(Self::Concentrated),
            "step" => Ok(Self::Step),
            other => Err(Error::InvalidConfig(format!("unknown dynamics mode {other:?}"))),
        }
    }
}

/// The planted node set `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlantedSet {
    None,
    Tags(Vec<String>),
    /// The nodes ranked `skip..skip + count` by decreasing degree.
    TopDegree { skip: usize, count: usize },
}

impl PlantedSet {
    pub fn resolve(&self, graph: &StubGraph) -> Result<Vec<u32>> {
        match self {
            PlantedSet::None => Ok(Vec::new()),
            PlantedSet::Tags(tags) => {
                let index: HashMap<&str, u32> = graph
                    .tags
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.as_str(), i as u32))
                    .collect();
                tags.iter()
                    .map(|t| {
                        index.get(t.as_str()).copied().ok_or_else(|| {
                            Error::InvalidConfig(format!("planted tag {t:?} not in graph"))
                        })
                    })
                    .collect()
            }
            PlantedSet::TopDegree { skip, count } => {
                let order = graph.nodes_by_degree();
                if skip + count > order.len() {
                    return Err(Error::InvalidConfig(format!(
                        "planted ranks {skip}..{} exceed {} nodes",
                        skip + count,
                        order.len()
                    )));
                }
                Ok(order[*skip..skip + count].to_vec())
            }
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            PlantedSet::None => true,
            PlantedSet::Tags(t) => t.is_empty(),
            PlantedSet::TopDegree { count, .. } => *count == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub mode: DynamicsMode,
    pub planted: PlantedSet,
    /// Edges removed and rematched per tick.
    pub q: usize,
    /// Probability that a freed stub of `S` is rematched inside `S`.
    pub p_in: f64,
    pub step_start: u64,
    pub step_length: u64,
    /// Simulated time per tick.
    pub tick_interval: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            mode: DynamicsMode::Uniform,
            planted: PlantedSet::None,
            q: 2,
            p_in: 0.8,
            step_start: 0,
            step_length: 0,
            tick_interval: 1.0,
        }
    }
}

impl DynamicsConfig {
    pub fn uniform(q: usize) -> Self {
        Self {
            q,
            ..Self::default()
        }
    }

    pub fn concentrated(planted: PlantedSet, q: usize) -> Self {
        Self {
            mode: DynamicsMode::Concentrated,
            planted,
            q,
            ..Self::default()
        }
    }

    pub fn step(planted: PlantedSet, q: usize, step_start: u64, step_length: u64) -> Self {
        Self {
            mode: DynamicsMode::Step,
            planted,
            q,
            step_start,
            step_length,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidConfig(format!("q = {} must be >= 2", self.q)));
        }
        if !(0.0..=1.0).contains(&self.p_in) {
            return Err(Error::InvalidConfig(format!("p_in = {} outside [0, 1]", self.p_in)));
        }
        if self.mode != DynamicsMode::Uniform && self.planted.is_empty() {
            return Err(Error::InvalidConfig(
                "planted set must be non-empty for concentrated or step dynamics".into(),
            ));
        }
        if self.mode == DynamicsMode::Step && self.step_length == 0 {
            return Err(Error::InvalidConfig("step_length must be positive".into()));
        }
        if !(self.tick_interval > 0.0 && self.tick_interval.is_finite()) {
            return Err(Error::InvalidConfig("tick_interval must be positive".into()));
        }
        Ok(())
    }

    pub fn is_concentrated_at(&self, tick: u64) -> bool {
        match self.mode {
            DynamicsMode::Uniform => false,
            DynamicsMode::Concentrated => true,
            DynamicsMode::Step => {
                tick >= self.step_start && tick < self.step_start.saturating_add(self.step_length)
            }
        }
    }

    /// Reads `mode`, `q`, `p_in`, `step_start`, `step_length`,
    /// `tick_interval` and one of `planted` (comma-separated tags) or
    /// `planted_top` (+ optional `planted_skip`).
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let planted = if let Some(tags) = kv.raw("planted") {
            PlantedSet::Tags(
                tags.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_owned)
                    .collect(),
            )
        } else if let Some(count) = kv.get::<usize>("planted_top")? {
            PlantedSet::TopDegree {
                skip: kv.get_or("planted_skip", 0)?,
                count,
            }
        } else {
            PlantedSet::None
        };
        let cfg = Self {
            mode: kv.get_or("mode", d.mode)?,
            planted,
            q: kv.get_or("q", d.q)?,
            p_in: kv.get_or("p_in", d.p_in)?,
            step_start: kv.get_or("step_start", d.step_start)?,
            step_length: kv.get_or("step_length", d.step_length)?,
            tick_interval: kv.get_or("tick_interval", d.tick_interval)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Repetition settings for probabilistic checks: the estimate must land
/// within `epsilon` in at least a `1 − delta` fraction of `trials`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
}

impl ValidationConfig {
    pub fn new(epsilon: f64, delta: f64, trials: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon = {epsilon} outside (0, 1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta = {delta} outside (0, 1)")));
        }
        if trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        Ok(Self {
            epsilon,
            delta,
            trials,
        })
    }

    /// Minimum number of successful trials for the check to pass.
    pub fn required_successes(&self) -> usize {
        ((1.0 - self.delta) * self.trials as f64 - 1e-9).ceil() as usize
    }
}

/// Mutable evolution state: the resolved planted set and the RNG.
#[derive(Debug, Clone)]
pub struct Dynamics {
    cfg: DynamicsConfig,
    planted: Vec<bool>,
    rng: ChaCha8Rng,
}

impl Dynamics {
    pub fn new(cfg: DynamicsConfig, graph: &StubGraph, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.q > graph.edge_count() {
            return Err(Error::NotEnoughEdges {
                requested: cfg.q,
                available: graph.edge_count(),
            });
        }
        let mut planted = vec![false; graph.node_count()];
        for node in cfg.planted.resolve(graph)? {
            planted[node as usize] = true;
        }
        Ok(Self {
            cfg,
            planted,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn planted_mask(&self) -> &[bool] {
        &self.planted
    }

    /// One tick: remove `q` uniform edges, rematch the freed stubs, and
    /// return the new edges stamped `tick · tick_interval`.
    pub fn advance(&mut self, graph: &mut StubGraph, tick: u64) -> Result<Vec<TimedEdge>> {
        let q = self.cfg.q;
        if q > graph.edges.len() {
            return Err(Error::NotEnoughEdges {
                requested: q,
                available: graph.edges.len(),
            });
        }
        let mut victims = index::sample(&mut self.rng, graph.edges.len(), q).into_vec();
        victims.sort_unstable_by(|a, b| b.cmp(a));
        let mut freed = Vec::with_capacity(2 * q);
        for i in victims {
            let (u, v) = graph.edges.swap_remove(i);
            freed.push(u);
            freed.push(v);
        }

        let new_edges = if self.cfg.is_concentrated_at(tick) {
            self.match_concentrated(freed)
        } else {
            freed.shuffle(&mut self.rng);
            freed.chunks_exact(2).map(|p| (p[0], p[1])).collect()
        };

        let timestamp = tick as f64 * self.cfg.tick_interval;
        let emitted = new_edges
            .iter()
            .map(|&(u, v)| TimedEdge::new(timestamp, graph.tag(u), graph.tag(v)))
            .collect();
        graph.edges.extend(new_edges);
        Ok(emitted)
    }

    // Each S-stub pairs with another free S-stub with probability p_in and
    // otherwise with a free outside stub. When one side runs out the other
    // side is used, which also settles an odd S leftover across the
    // partition. Outside stubs left over pair uniformly among themselves.
    fn match_concentrated(&mut self, freed: Vec<u32>) -> Vec<(u32, u32)> {
        let (mut inside, mut outside): (Vec<u32>, Vec<u32>) =
            freed.into_iter().partition(|&s| self.planted[s as usize]);
        inside.shuffle(&mut self.rng);
        outside.shuffle(&mut self.rng);

        let mut pairs = Vec::with_capacity((inside.len() + outside.len()) / 2);
        while let Some(a) = inside.pop() {
            let want_inside = self.rng.gen_bool(self.cfg.p_in);
            let b = if (want_inside && !inside.is_empty()) || outside.is_empty() {
                inside.pop()
            } else {
                outside.pop()
            }
            .expect("freed stub count is even");
            pairs.push((a, b));
        }
        pairs.extend(outside.chunks_exact(2).map(|p| (p[0], p[1])));
        pairs
    }
}

/// One-shot tick with a fresh RNG derived from `seed` and `tick`.
pub fn advance(
    graph: &mut StubGraph,
    cfg: &DynamicsConfig,
    tick: u64,
    seed: u64,
) -> Result<Vec<TimedEdge>> {
    Dynamics::new(cfg.clone(), graph, mix_seed(seed, tick))?.advance(graph, tick)
}

/// Lazily emits the initial graph at `t = 0` followed by `ticks` rounds of
/// dynamics.
#[derive(Debug, Clone)]
pub struct DynamicStream {
    graph: StubGraph,
    dynamics: Dynamics,
    pending: VecDeque<TimedEdge>,
    next_tick: u64,
    ticks: u64,
}

impl DynamicStream {
    pub fn new(
        cfg: DynamicsConfig,
        dist: &DegreeDistribution,
        ticks: u64,
        prefix: &str,
        seed: u64,
    ) -> Result<Self> {
        let degrees = sample_degrees(dist, mix_seed(seed, 1));
        let graph = configuration_graph_tagged(&degrees, prefix, mix_seed(seed, 2))?;
        Self::from_graph(graph, cfg, ticks, mix_seed(seed, 3))
    }

    pub fn from_graph(graph: StubGraph, cfg: DynamicsConfig, ticks: u64, seed: u64) -> Result<Self> {
        let dynamics = Dynamics::new(cfg, &graph, seed)?;
        let pending = graph.timed_edges(0.0).collect();
        Ok(Self {
            graph,
            dynamics,
            pending,
            next_tick: 1,
            ticks,
        })
    }

    pub fn graph(&self) -> &StubGraph {
        &self.graph
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }
}

impl Iterator for DynamicStream {
    type Item = TimedEdge;

    fn next(&mut self) -> Option<TimedEdge> {
        while self.pending.is_empty() {
            if self.next_tick > self.ticks {
                return None;
            }
            let tick = self.next_tick;
            self.next_tick += 1;
            let batch = self
                .dynamics
                .advance(&mut self.graph, tick)
                .expect("edge count is invariant under rematching");
            self.pending.extend(batch);
        }
        self.pending.pop_front()
    }
}

/// The whole stream as a vector; deterministic in `seed`.
pub fn stream_from_dynamics(
    cfg: &DynamicsConfig,
    dist: &DegreeDistribution,
    ticks: u64,
    seed: u64,
) -> Result<Vec<TimedEdge>> {
    Ok(DynamicStream::new(cfg.clone(), dist, ticks, "n", seed)?.collect())
}

/// Everything the `generate` command needs, read from a key=value file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub ticks: u64,
    pub seed: u64,
    pub tag_prefix: String,
    pub dynamics: DynamicsConfig,
}

impl GeneratorConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        Ok(Self {
            n: kv.get_or("n", 10_000)?,
            ticks: kv.get_or("ticks", 100)?,
            seed: kv.get_or("seed", 0)?,
            tag_prefix: kv.raw("tag_prefix").unwrap_or("n").to_owned(),
            dynamics: DynamicsConfig::from_key_values(kv)?,
        })
    }

    pub fn stream(&self) -> Result<DynamicStream> {
        let dist = DegreeDistribution::zipfian(self.n)?;
        DynamicStream::new(
            self.dynamics.clone(),
            &dist,
            self.ticks,
            &self.tag_prefix,
            self.seed,
        )
    }
}
