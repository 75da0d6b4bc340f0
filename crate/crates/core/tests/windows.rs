use edgecorr::windows::{windows_for, WindowConfig, WindowReservoir, WindowedStream};
use edgecorr::TimedEdge;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn edges(count: usize, span: f64) -> Vec<TimedEdge> {
    (0..count)
        .map(|i| TimedEdge::new(span * i as f64 / count as f64, format!("a{i}"), format!("b{i}")))
        .collect()
}

#[test]
fn retention_is_uniform_under_chi_square() {
    // k = 10 of m = 200 across 2000 replays; each edge expects 100 retentions
    let cfg = WindowConfig::new(60.0, 30.0, 10).unwrap();
    let offered = edges(200, 60.0);
    let mut counts = vec![0u64; offered.len()];
    for run in 0..2000 {
        let mut r = WindowReservoir::new(1, &cfg, run);
        for e in &offered {
            r.offer(e).unwrap();
        }
        for kept in r.close().unwrap().edges {
            counts[kept.src[1..].parse::<usize>().unwrap()] += 1;
        }
    }
    let expected = 2000.0 * 10.0 / 200.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(199.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2:.1} ≥ {critical:.1}");
}

#[test]
fn experiment_windows_overlap_by_half() {
    let cfg = WindowConfig::default();
    assert_eq!((cfg.tau, cfg.lambda, cfg.k), (60.0, 30.0, 400));
    assert_eq!(cfg.overlap(), 0.5);
    assert_eq!(cfg.concurrent_windows(), 2);
}

#[test]
fn a_full_reservoir_holds_exactly_k() {
    let cfg = WindowConfig::default();
    let mut r = WindowReservoir::new(1, &cfg, 5);
    for e in edges(20_000, 60.0) {
        r.offer(&e).unwrap();
    }
    let closed = r.close().unwrap();
    assert_eq!((closed.edges.len(), closed.seen), (400, 20_000));
    assert_eq!(closed.inclusion_probability(), 0.02);
}

proptest! {
    #[test]
    fn membership_agrees_with_interval_bounds(
        tau in 1u32..200,
        ratio in 2u32..5,
        t in 0.0f64..5_000.0,
    ) {
        let tau = f64::from(tau);
        let lambda = tau / f64::from(ratio);
        let cfg = WindowConfig::new(tau, lambda, 4).unwrap();
        let hits = windows_for(t, &cfg);
        for i in hits.clone() {
            prop_assert!(cfg.contains(i, t));
        }
        // neighbours just outside the range must not contain t
        if *hits.start() > 1 {
            prop_assert!(!cfg.contains(hits.start() - 1, t));
        }
        prop_assert!(!cfg.contains(hits.end() + 1, t));
    }

    #[test]
    fn capacity_and_accounting_hold(
        k in 1usize..30,
        times in prop::collection::vec(0.0f64..300.0, 0..400),
    ) {
        let mut sorted = times;
        sorted.sort_by(f64::total_cmp);
        let cfg = WindowConfig::new(60.0, 30.0, k).unwrap();
        let mut stream = WindowedStream::new(cfg, 9).unwrap();
        let mut expected_seen = std::collections::BTreeMap::<u64, u64>::new();
        let mut closed = Vec::new();
        for (i, &t) in sorted.iter().enumerate() {
            closed.extend(stream.close_before(t));
            stream.offer(&TimedEdge::new(t, format!("x{i}"), "y"));
            for w in windows_for(t, &cfg) {
                *expected_seen.entry(w).or_default() += 1;
            }
        }
        closed.extend(stream.close_up_to(stream.highest_index()));
        for (expect, r) in closed.iter().enumerate() {
            prop_assert_eq!(r.index, expect as u64 + 1);
            prop_assert!(r.edges.len() <= k);
            let seen = expected_seen.get(&r.index).copied().unwrap_or(0);
            prop_assert_eq!(r.seen, seen);
            prop_assert_eq!(r.edges.len() as u64, seen.min(k as u64));
            prop_assert!(r.edges.iter().all(|e| cfg.contains(r.index, e.timestamp)));
        }
    }
}
