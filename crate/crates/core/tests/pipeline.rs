use std::fs;
use std::io::Cursor;

use edgecorr::clusters::ClusterParams;
use edgecorr::ingest::{run_pipeline, EdgeSource, LineSource, Pipeline, PipelineConfig, SourceFormat, StreamSource};
use edgecorr::store::Store;
use edgecorr::windows::WindowConfig;
use proptest::prelude::*;

/// Authors `lo..hi` each tweet both hashtags once, inside the first half hour.
fn tweets(lo: usize, hi: usize, tags: [&str; 2]) -> String {
    (lo..hi)
        .map(|i| format!("{}\t@a{i:02}\t{},{}\t\n", 1 + i, tags[0], tags[1]))
        .collect()
}

#[test]
fn tweet_files_replay_into_a_persistent_store() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), tweets(0, 15, ["x", "y"])).unwrap();
    fs::write(dir.path().join("b.tsv"), tweets(7, 22, ["x", "z"]) + "garbage line\n").unwrap();
    let data = dir.path().join("data");
    let cfg = PipelineConfig {
        streams: ["a", "b"]
            .iter()
            .map(|name| StreamSource {
                name: name.to_string(),
                path: dir.path().join(format!("{name}.tsv")),
                format: SourceFormat::Tweets,
            })
            .collect(),
        data_dir: Some(data.clone()),
        ..PipelineConfig::default()
    };
    let (report, _) = run_pipeline(&cfg).unwrap();
    // a: 15 authors + #x + #y; b: 15 authors + #x + #z; shared: @a07..@a14 and #x
    let series = &report.series[0];
    assert_eq!(series.points.len(), 1);
    assert_eq!((series.points[0].intersection, series.points[0].union), (9, 25));
    assert_eq!(report.accounting[1].skipped, 1);
    assert_eq!(report.stored.clusters, 2);

    let store = Store::open(&data).unwrap();
    assert_eq!(store.correlation_history("a", "b"), vec![(9.0 / 25.0, 60.0)]);
    assert_eq!(store.stats(), report.stored);
    let names: Vec<String> = store.all_clusters().iter().map(|c| c.name.clone()).collect();
    assert_eq!(names, vec!["#x", "#x"]);

    let out = dir.path().join("report");
    report.write_files(&out).unwrap();
    for file in ["summary.txt", "windows.csv", "spectrum.csv", "correlations.csv", "accounting.csv"] {
        assert!(out.join(file).is_file(), "{file}");
    }
}

fn edge_lines() -> impl Strategy<Value = Vec<String>> {
    let line = prop_oneof![
        8 => (0u32..400, 0u8..12, 0u8..12).prop_map(|(t, a, b)| format!("{t}\tn{a}\tn{b}")),
        1 => Just("not an edge".to_owned()),
        1 => Just("5\tonly-two".to_owned()),
    ];
    prop::collection::vec(line, 0..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_read_line_is_accounted_for(a in edge_lines(), b in edge_lines()) {
        let mut sources: Vec<Box<dyn EdgeSource>> = [&a, &b]
            .iter()
            .map(|lines| {
                let text = lines.join("\n");
                Box::new(LineSource::new(Cursor::new(text.into_bytes()), SourceFormat::Edges))
                    as Box<dyn EdgeSource>
            })
            .collect();
        let params = ClusterParams { gamma: 0.8, alpha: 3, min_store: 3 };
        let mut pipeline = Pipeline::new(
            vec!["a".into(), "b".into()],
            WindowConfig::new(60.0, 30.0, 8).unwrap(),
            params,
            Store::in_memory(),
            1,
        )
        .unwrap();
        pipeline.replay(&mut sources).unwrap();
        let (report, store) = pipeline.finish(&[]).unwrap();
        for (acc, lines) in report.accounting.iter().zip([&a, &b]) {
            prop_assert_eq!(acc.read, acc.routed + acc.skipped + acc.stale);
            prop_assert_eq!(acc.read, lines.len() as u64);
        }
        let points: Vec<usize> = report.series.iter().map(|s| s.points.len()).collect();
        prop_assert_eq!(points, vec![report.windows.len()]);
        for c in store.all_clusters() {
            prop_assert!(c.len() >= 3);
        }
        for w in report.windows.windows(2) {
            prop_assert_eq!(w[1].index, w[0].index + 1);
        }
    }
}
