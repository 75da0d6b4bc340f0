mod common;

use common::*;
use edgecorr::graphgen::{
    configuration_graph, giant_component_criterion, sample_degrees, stream_from_dynamics,
    DegreeDistribution, Dynamics, DynamicsConfig, PlantedSet, StubGraph,
};
use proptest::prelude::*;

fn planted_mask(g: &StubGraph, set: &PlantedSet) -> Vec<bool> {
    let mut mask = vec![false; g.node_count()];
    for v in set.resolve(g).unwrap() {
        mask[v as usize] = true;
    }
    mask
}

#[test]
fn zipfian_histogram_matches_inverse_square_law() {
    let dist = DegreeDistribution::zipfian(10_000).unwrap();
    let c = dist.normalization().unwrap();
    let mut counts = [0u64; 11];
    let mut draws = 0u64;
    let mut seed = 0;
    // 10⁶ draws: at 10⁵ the ±5% band is only ~1.2σ wide for j = 10
    while draws < 1_000_000 {
        for d in sample_degrees(&dist, seed) {
            if (d as usize) < counts.len() {
                counts[d as usize] += 1;
            }
            draws += 1;
        }
        seed += 1;
    }
    for j in 1..=10u64 {
        // the parity repair may move one node per sample by one degree
        let expected = c / (j * j) as f64;
        let observed = counts[j as usize] as f64 / draws as f64;
        let err = (observed - expected).abs() / expected;
        assert!(err <= 0.05, "degree {j}: observed {observed:.5}, expected {expected:.5}");
    }
}

#[test]
fn zipfian_population_has_a_giant_component() {
    assert!(giant_component_criterion(&DegreeDistribution::zipfian(10_000).unwrap()));
}

#[test]
fn explicit_odd_sum_is_repaired_once() {
    let dist = DegreeDistribution::explicit(3, vec![(3, 1.0)]).unwrap();
    let mut d = sample_degrees(&dist, 11);
    d.sort_unstable();
    assert_eq!(d, vec![3, 3, 4]);
}

#[test]
fn stream_length_is_initial_edges_plus_q_per_tick() {
    let dist = DegreeDistribution::zipfian(2_000).unwrap();
    let cfg = DynamicsConfig::uniform(50);
    let initial = stream_from_dynamics(&cfg, &dist, 0, 3).unwrap();
    let total: u32 = sample_degrees(&dist, edgecorr::seed::mix_seed(3, 1)).iter().sum();
    assert_eq!(initial.len() as u32, total / 2);
    assert!(initial.iter().all(|e| e.timestamp == 0.0));
    let run = stream_from_dynamics(&cfg, &dist, 20, 3).unwrap();
    assert_eq!(run.len(), initial.len() + 20 * 50);
    assert_eq!(run, stream_from_dynamics(&cfg, &dist, 20, 3).unwrap());
}

#[test]
fn small_planted_set_becomes_dense_at_a_fixed_tick() {
    // ten top-degree nodes carry ~930 stubs, so E(S) ≥ 0.8·|S|² = 80 is reachable
    let mut g = graph(0xE5, "n");
    let set = PlantedSet::TopDegree { skip: 0, count: 10 };
    let mask = planted_mask(&g, &set);
    let mut dynamics = Dynamics::new(DynamicsConfig::step(set, Q, 1, 1000), &g, 7).unwrap();
    let mut crossed = None;
    for tick in 1..=100 {
        dynamics.advance(&mut g, tick).unwrap();
        if crossed.is_none() && g.internal_edge_count(&mask) >= 80 {
            crossed = Some(tick);
        }
    }
    assert_eq!(crossed, Some(17));
}

#[test]
fn internal_edges_are_bounded_by_half_the_planted_stubs() {
    let mut g = graph(0xE5, "n");
    let set = PlantedSet::TopDegree { skip: 0, count: 100 };
    let mask = planted_mask(&g, &set);
    let stubs: u32 = (0..g.node_count()).filter(|&v| mask[v]).map(|v| g.degrees()[v]).sum();
    let before = g.internal_edge_count(&mask);
    let mut dynamics = Dynamics::new(DynamicsConfig::step(set, Q, 1, 50), &g, 7).unwrap();
    for tick in 1..=50 {
        dynamics.advance(&mut g, tick).unwrap();
    }
    let after = g.internal_edge_count(&mask);
    assert_eq!((before, after), (578, 1561));
    assert!(after as u32 <= stubs / 2);
    assert!((after as f64) < 0.8 * 100.0 * 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dynamics_conserve_degrees(
        seed in any::<u64>(),
        q in 2usize..40,
        p_in in 0.0f64..=1.0,
        planted in 1usize..30,
        mode in 0u8..3,
    ) {
        let dist = DegreeDistribution::zipfian(400).unwrap();
        let degrees = sample_degrees(&dist, seed);
        let mut g = configuration_graph(&degrees, seed ^ 1).unwrap();
        let set = PlantedSet::TopDegree { skip: 0, count: planted };
        let mut cfg = match mode {
            0 => DynamicsConfig::uniform(q),
            1 => DynamicsConfig::concentrated(set, q),
            _ => DynamicsConfig::step(set, q, 3, 5),
        };
        cfg.p_in = p_in;
        let mut dynamics = Dynamics::new(cfg, &g, seed ^ 2).unwrap();
        for tick in 1..=10 {
            let emitted = dynamics.advance(&mut g, tick).unwrap();
            prop_assert_eq!(emitted.len(), q);
            prop_assert_eq!(g.realized_degrees(), degrees.clone());
            prop_assert_eq!(g.degrees().iter().sum::<u32>() as usize, 2 * g.edge_count());
        }
    }
}
