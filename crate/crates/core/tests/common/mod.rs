//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

use edgecorr::clusters::largest_component_size;
use edgecorr::graphgen::{
    configuration_graph_tagged, sample_degrees, DegreeDistribution, Dynamics, DynamicsConfig,
    StubGraph,
};
use edgecorr::seed::mix_seed;
use edgecorr::windows::{ClosedReservoir, WindowConfig, WindowedStream};

/// Population of the synthetic graphs.
pub const N: usize = 10_000;
/// Edges rematched per tick; with one tick per time unit a window of 100
/// ticks sees about `2·10⁴` edges.
pub const Q: usize = 200;

/// Windows measured in ticks: `τ = 100`, `λ = 50`, `k = 400`.
pub fn tick_windows() -> WindowConfig {
    WindowConfig::new(100.0, 50.0, 400).unwrap()
}

/// A zipfian configuration graph whose tags start with `prefix`.
pub fn graph(seed: u64, prefix: &str) -> StubGraph {
    let dist = DegreeDistribution::zipfian(N).unwrap();
    let degrees = sample_degrees(&dist, mix_seed(seed, 1));
    configuration_graph_tagged(&degrees, prefix, mix_seed(seed, 2)).unwrap()
}

/// Evolves `graph` for ticks `1..=ticks` and returns every window of the
/// resulting edge stream that closed by the last tick.
pub fn windows_of(
    graph: &mut StubGraph,
    cfg: DynamicsConfig,
    ticks: u64,
    wcfg: &WindowConfig,
    seed: u64,
) -> Vec<ClosedReservoir> {
    observed_windows(graph, cfg, 0, ticks, wcfg, seed)
}

/// Like [`windows_of`], but the first `unobserved` ticks evolve the graph
/// without emitting edges; observed tick `j` is stamped `j`.
pub fn observed_windows(
    graph: &mut StubGraph,
    cfg: DynamicsConfig,
    unobserved: u64,
    ticks: u64,
    wcfg: &WindowConfig,
    seed: u64,
) -> Vec<ClosedReservoir> {
    let mut dynamics = Dynamics::new(cfg, graph, mix_seed(seed, 3)).unwrap();
    for tick in 1..=unobserved {
        dynamics.advance(graph, tick).unwrap();
    }
    let mut stream = WindowedStream::new(*wcfg, mix_seed(seed, 4)).unwrap();
    let mut closed = Vec::new();
    for j in 1..=ticks {
        for mut edge in dynamics.advance(graph, unobserved + j).unwrap() {
            edge.timestamp = j as f64;
            stream.offer(&edge);
        }
        closed.extend(stream.close_before(j as f64 + 0.5));
    }
    closed
}

pub fn largest(r: &ClosedReservoir) -> usize {
    largest_component_size(&r.edges)
}

use edgecorr::phylo::PhyloTree;
use rand::Rng;

/// A random unrooted binary tree on `leaves` labelled `t0, t1, …`, built by
/// inserting each leaf on a uniformly chosen edge. Lengths are drawn from
/// `lengths` when given, else 1.
pub fn random_tree<R: Rng>(rng: &mut R, leaves: usize, lengths: Option<(f64, f64)>) -> PhyloTree {
    assert!(leaves >= 1);
    // node 0..leaves are leaves; internal nodes follow
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut next = leaves;
    match leaves {
        1 => {}
        2 => edges.push((0, 1)),
        _ => {
            let hub = next;
            next += 1;
            edges.extend([(hub, 0), (hub, 1), (hub, 2)]);
            for leaf in 3..leaves {
                let i = rng.gen_range(0..edges.len());
                let (a, b) = edges.swap_remove(i);
                let mid = next;
                next += 1;
                edges.extend([(a, mid), (mid, b), (mid, leaf)]);
            }
        }
    }
    let mut tree = PhyloTree::new();
    for i in 0..leaves {
        tree.add_leaf(format!("t{i}"));
    }
    for _ in leaves..next {
        tree.add_internal();
    }
    for (a, b) in edges {
        let len = lengths.map_or(1.0, |(lo, hi)| rng.gen_range(lo..hi));
        tree.connect(a, b, len);
    }
    tree
}

/// Leaf-to-leaf path lengths of `tree` as a distance matrix.
pub fn path_matrix(tree: &PhyloTree) -> edgecorr::phylo::DistanceMatrix {
    let names: Vec<String> = tree.leaves().into_iter().map(str::to_owned).collect();
    let n = names.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = tree.path_length(&names[i], &names[j]).unwrap();
        }
    }
    edgecorr::phylo::DistanceMatrix::new(names, values).unwrap()
}

use edgecorr::graphgen::{DynamicStream, PlantedSet};

/// Minutes per tick in the desk replay: 100 ticks, about `2·10⁴` edges, per
/// hour.
pub const DESK_TICK: f64 = 0.6;
/// Ticks in a day that stay strictly before minute 1440.
pub const DESK_TICKS: u64 = 2399;

/// Four day-long synthetic streams. `cnn` and `fox` evolve the same graph
/// independently with overlapping planted sets; `bbc` and `rt` have their
/// own node universes. Each concentrates for part of the day.
pub fn desk_streams(seed: u64) -> Vec<(String, DynamicStream)> {
    let step = |skip: usize, start: u64, len: u64| {
        let mut cfg = DynamicsConfig::step(PlantedSet::TopDegree { skip, count: 100 }, Q, start, len);
        cfg.tick_interval = DESK_TICK;
        cfg
    };
    let shared = graph(mix_seed(seed, 10), "n");
    let mut out = vec![
        (
            "cnn".to_owned(),
            DynamicStream::from_graph(shared.clone(), step(0, 300, 1200), DESK_TICKS, mix_seed(seed, 11)).unwrap(),
        ),
        (
            "fox".to_owned(),
            DynamicStream::from_graph(shared, step(50, 600, 1200), DESK_TICKS, mix_seed(seed, 12)).unwrap(),
        ),
    ];
    for (i, (name, start)) in [("bbc", 900u64), ("rt", 1200)].into_iter().enumerate() {
        let g = graph(mix_seed(seed, 20 + i as u64), &format!("{name}."));
        out.push((
            name.to_owned(),
            DynamicStream::from_graph(g, step(0, start, 900), DESK_TICKS, mix_seed(seed, 30 + i as u64)).unwrap(),
        ));
    }
    out
}
