//! Append-only persistence of stored clusters and correlation histories.
//!
//! Four tables, each one JSON object per line in its own file under the data
//! directory:
//!
//! | file                 | key          | record fields                                          |
//! |----------------------|--------------|--------------------------------------------------------|
//! | `streams.jsonl`      | `stream`     | `cluster`, `window`, `t`                               |
//! | `clusters.jsonl`     | `cluster`    | `stream`, `window`, `t`, `high_degree`, `nodes`        |
//! | `nodes.jsonl`        | `node`       | `stream`, `cluster`, `window`, `t`                     |
//! | `correlations.jsonl` | `a`, `b`     | `rho`, `t`, `inter`, `union` (`a < b`)                 |
//!
//! `nodes` is a list of `[tag, degree]` pairs. A cluster is written to the
//! cluster table, then the node table, then the stream table; the stream
//! line commits it. On open, cluster and node lines without a committed
//! stream line are ignored and a torn final line is truncated away.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clusters::Cluster;
use crate::correlation::{CorrelationMatrix, Ratio};
use crate::error::{Error, Result};

pub const STREAMS_FILE: &str = "streams.jsonl";
pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const CORRELATIONS_FILE: &str = "correlations.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub stream: String,
    pub cluster: String,
    pub window: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub cluster: String,
    pub stream: String,
    pub window: u64,
    pub t: f64,
    pub high_degree: Vec<String>,
    pub nodes: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: String,
    pub stream: String,
    pub cluster: String,
    pub window: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub a: String,
    pub b: String,
    pub rho: f64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union: Option<u64>,
}

/// How a tag resolves, checked in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    Stream,
    Cluster,
    Node,
}

type ClusterKey = (String, u64, String);

fn key_of(c: &Cluster) -> ClusterKey {
    (c.stream.clone(), c.window, c.name.clone())
}

#[derive(Debug)]
struct TableFiles {
    dir: PathBuf,
    streams: File,
    clusters: File,
    nodes: File,
    correlations: File,
}

fn append_line<T: Serialize>(file: &mut File, record: &T) -> Result<()> {
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    Ok(())
}

/// Reads complete JSON lines; a torn final line is cut off the file.
fn read_table<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = fs::read(path)?;
    let complete = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(pos) => pos + 1,
        None => 0,
    };
    if complete < bytes.len() {
        log::warn!("{}: dropping torn final record", path.display());
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::CorruptRecord {
            path: path.to_owned(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Totals over everything stored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub clusters: u64,
    pub node_entries: u64,
    pub cluster_edges: u64,
}

impl StoreStats {
    /// Stored nodes plus the edges their degrees account for.
    pub fn stored_units(&self) -> u64 {
        self.node_entries + self.cluster_edges
    }
}

/// In-memory index over the four tables, optionally backed by files.
#[derive(Debug, Default)]
pub struct Store {
    clusters: Vec<Cluster>,
    by_key: HashMap<ClusterKey, usize>,
    by_stream: BTreeMap<String, Vec<usize>>,
    by_name: HashMap<String, Vec<usize>>,
    by_node: HashMap<String, Vec<usize>>,
    correlations: BTreeMap<(String, String), Vec<CorrelationRecord>>,
    stats: StoreStats,
    files: Option<TableFiles>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) the tables under `dir` and rebuilds the
    /// index from them.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut store = Self::default();

        let streams: Vec<StreamRecord> = read_table(&dir.join(STREAMS_FILE))?;
        let committed: HashSet<ClusterKey> = streams
            .iter()
            .map(|r| (r.stream.clone(), r.window, r.cluster.clone()))
            .collect();
        let clusters: Vec<ClusterRecord> = read_table(&dir.join(CLUSTERS_FILE))?;
        let mut loaded: HashMap<ClusterKey, Cluster> = HashMap::new();
        for r in clusters {
            let key = (r.stream.clone(), r.window, r.cluster.clone());
            if committed.contains(&key) {
                loaded.entry(key).or_insert(Cluster {
                    stream: r.stream,
                    window: r.window,
                    timestamp: r.t,
                    name: r.cluster,
                    members: r.nodes,
                });
            }
        }
        // the node table is implied by the cluster table once committed;
        // read it only to validate it
        let nodes: Vec<NodeRecord> = read_table(&dir.join(NODES_FILE))?;
        for n in &nodes {
            let key = (n.stream.clone(), n.window, n.cluster.clone());
            if committed.contains(&key) && !loaded.get(&key).is_some_and(|c| c.contains(&n.node)) {
                return Err(Error::CorruptRecord {
                    path: dir.join(NODES_FILE),
                    reason: format!("node {:?} not in cluster {:?}", n.node, n.cluster),
                });
            }
        }
        for r in &streams {
            let key = (r.stream.clone(), r.window, r.cluster.clone());
            match loaded.remove(&key) {
                Some(c) => store.index_cluster(c),
                None if store.by_key.contains_key(&key) => {}
                None => {
                    return Err(Error::CorruptRecord {
                        path: dir.join(STREAMS_FILE),
                        reason: format!("cluster {:?} of {:?} has no cluster record", r.cluster, r.stream),
                    })
                }
            }
        }
        for r in read_table::<CorrelationRecord>(&dir.join(CORRELATIONS_FILE))? {
            store
                .correlations
                .entry((r.a.clone(), r.b.clone()))
                .or_default()
                .push(r);
        }

        let open = |name: &str| -> Result<File> {
            Ok(OpenOptions::new().create(true).append(true).open(dir.join(name))?)
        };
        store.files = Some(TableFiles {
            dir: dir.to_owned(),
            streams: open(STREAMS_FILE)?,
            clusters: open(CLUSTERS_FILE)?,
            nodes: open(NODES_FILE)?,
            correlations: open(CORRELATIONS_FILE)?,
        });
        Ok(store)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.files.as_ref().map(|f| f.dir.as_path())
    }

    pub fn stats(&self) -> StoreStats {
        self.stats
    }

    fn index_cluster(&mut self, c: Cluster) {
        let idx = self.clusters.len();
        self.by_key.insert(key_of(&c), idx);
        self.by_stream.entry(c.stream.clone()).or_default().push(idx);
        self.by_name.entry(c.name.clone()).or_default().push(idx);
        for (node, _) in &c.members {
            self.by_node.entry(node.clone()).or_default().push(idx);
        }
        self.stats.clusters += 1;
        self.stats.node_entries += c.members.len() as u64;
        self.stats.cluster_edges += c.edge_count();
        self.clusters.push(c);
    }

    /// Records a cluster in all three cluster tables. Returns `false` when
    /// the same `(stream, window, name)` is already stored.
    pub fn put_cluster(&mut self, c: &Cluster) -> Result<bool> {
        if self.by_key.contains_key(&key_of(c)) {
            return Ok(false);
        }
        if c.members.is_empty() || !c.contains(&c.name) {
            return Err(Error::InvalidConfig(format!(
                "cluster {:?} must contain its name among its members",
                c.name
            )));
        }
        if c.members.iter().any(|&(_, d)| d == 0) {
            return Err(Error::InvalidConfig(format!("cluster {:?} has a zero degree", c.name)));
        }
        if !c.members.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::InvalidConfig(format!(
                "cluster {:?} members must be sorted and distinct",
                c.name
            )));
        }
        if let Some(&last) = self.by_stream.get(&c.stream).and_then(|v| v.last()) {
            let last_t = self.clusters[last].timestamp;
            if c.timestamp < last_t {
                return Err(Error::OutOfOrder {
                    stream: c.stream.clone(),
                    timestamp: c.timestamp,
                    last: last_t,
                });
            }
        }

        if let Some(files) = self.files.as_mut() {
            append_line(
                &mut files.clusters,
                &ClusterRecord {
                    cluster: c.name.clone(),
                    stream: c.stream.clone(),
                    window: c.window,
                    t: c.timestamp,
                    high_degree: c.high_degree_nodes(),
                    nodes: c.members.clone(),
                },
            )?;
            files.clusters.flush()?;
            for (node, _) in &c.members {
                append_line(
                    &mut files.nodes,
                    &NodeRecord {
                        node: node.clone(),
                        stream: c.stream.clone(),
                        cluster: c.name.clone(),
                        window: c.window,
                        t: c.timestamp,
                    },
                )?;
            }
            files.nodes.flush()?;
            append_line(
                &mut files.streams,
                &StreamRecord {
                    stream: c.stream.clone(),
                    cluster: c.name.clone(),
                    window: c.window,
                    t: c.timestamp,
                },
            )?;
            files.streams.flush()?;
        }
        self.index_cluster(c.clone());
        Ok(true)
    }

    pub fn append_correlation(&mut self, a: &str, b: &str, rho: Ratio, t: f64) -> Result<()> {
        self.append_correlation_value(a, b, rho.value(), Some(rho), t)
    }

    /// Appends `ρ` for the unordered pair `{a, b}`.
    pub fn append_correlation_value(
        &mut self,
        a: &str,
        b: &str,
        rho: f64,
        exact: Option<Ratio>,
        t: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::CorrelationOutOfRange(rho));
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let key = (a.to_owned(), b.to_owned());
        if let Some(last) = self.correlations.get(&key).and_then(|v| v.last()) {
            if t < last.t {
                return Err(Error::OutOfOrder {
                    stream: format!("{a}|{b}"),
                    timestamp: t,
                    last: last.t,
                });
            }
        }
        let record = CorrelationRecord {
            a: key.0.clone(),
            b: key.1.clone(),
            rho,
            t,
            inter: exact.map(|r| r.num),
            union: exact.map(|r| r.den),
        };
        if let Some(files) = self.files.as_mut() {
            append_line(&mut files.correlations, &record)?;
            files.correlations.flush()?;
        }
        self.correlations.entry(key).or_default().push(record);
        Ok(())
    }

    /// `(ρ, t)` history of a pair, in either order.
    pub fn correlation_history(&self, a: &str, b: &str) -> Vec<(f64, f64)> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.correlations
            .get(&(a.to_owned(), b.to_owned()))
            .map(|v| v.iter().map(|r| (r.rho, r.t)).collect())
            .unwrap_or_default()
    }

    pub fn correlation_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.correlations.keys().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Latest stored `ρ` at or before `t` for a pair.
    pub fn correlation_at(&self, a: &str, b: &str, t: f64) -> Option<f64> {
        self.correlation_history(a, b)
            .into_iter()
            .take_while(|&(_, ts)| ts <= t)
            .last()
            .map(|(rho, _)| rho)
    }

    /// Matrix of the latest stored correlations at or before `t` over every
    /// stream with a correlation history; missing pairs read as 0.
    pub fn correlation_matrix(&self, t: f64) -> CorrelationMatrix {
        let labels: Vec<String> = self
            .correlations
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let rho = self.correlation_at(&labels[i], &labels[j], t).unwrap_or(0.0);
                values[i * n + j] = rho;
                values[j * n + i] = rho;
            }
        }
        CorrelationMatrix::new(labels, values).expect("square by construction")
    }

    /// Streams that have at least one correlation or cluster entry.
    pub fn streams(&self) -> Vec<String> {
        let mut set: std::collections::BTreeSet<String> = self.by_stream.keys().cloned().collect();
        for (a, b) in self.correlations.keys() {
            set.insert(a.clone());
            set.insert(b.clone());
        }
        set.into_iter().collect()
    }

    pub fn kind_of(&self, tag: &str) -> Option<TagKind> {
        if self.by_stream.contains_key(tag) {
            Some(TagKind::Stream)
        } else if self.by_name.contains_key(tag) {
            Some(TagKind::Cluster)
        } else if self.by_node.contains_key(tag) {
            Some(TagKind::Node)
        } else {
            None
        }
    }

    /// Every cluster the tag resolves to with timestamp `≤ t`, most recent
    /// first (ties by stream, then name).
    pub fn clusters_for(&self, tag: &str, t: f64) -> Vec<&Cluster> {
        let indices = match self.kind_of(tag) {
            Some(TagKind::Stream) => &self.by_stream[tag],
            Some(TagKind::Cluster) => &self.by_name[tag],
            Some(TagKind::Node) => &self.by_node[tag],
            None => return Vec::new(),
        };
        let mut out: Vec<&Cluster> = indices
            .iter()
            .map(|&i| &self.clusters[i])
            .filter(|c| c.timestamp <= t)
            .collect();
        out.sort_by(|a, b| {
            b.timestamp
                .total_cmp(&a.timestamp)
                .then_with(|| a.stream.cmp(&b.stream))
                .then_with(|| a.name.cmp(&b.name))
        });
        out
    }

    /// Clusters of the `limit` most recent windows the tag resolves to.
    pub fn recent_clusters(&self, tag: &str, t: f64, limit: usize) -> Vec<Cluster> {
        let mut windows = 0;
        let mut last_t = None;
        let mut out = Vec::new();
        for c in self.clusters_for(tag, t) {
            if last_t != Some(c.timestamp) {
                windows += 1;
                if windows > limit {
                    break;
                }
                last_t = Some(c.timestamp);
            }
            out.push(c.clone());
        }
        out
    }

    pub fn cluster(&self, stream: &str, window: u64, name: &str) -> Option<&Cluster> {
        self.by_key
            .get(&(stream.to_owned(), window, name.to_owned()))
            .map(|&i| &self.clusters[i])
    }

    /// Clusters of `stream` grouped by window, most recent window first,
    /// restricted to `timestamp ≤ t`.
    pub fn stream_windows(&self, stream: &str, t: f64) -> Vec<Vec<&Cluster>> {
        let mut groups: Vec<Vec<&Cluster>> = Vec::new();
        let Some(indices) = self.by_stream.get(stream) else {
            return groups;
        };
        for &i in indices.iter().rev() {
            let c = &self.clusters[i];
            if c.timestamp > t {
                continue;
            }
            match groups.last_mut() {
                Some(g) if g[0].window == c.window => g.push(c),
                _ => groups.push(vec![c]),
            }
        }
        for g in &mut groups {
            g.sort_by(|a, b| a.name.cmp(&b.name));
        }
        groups
    }

    pub fn stream_record(&self, stream: &str) -> Vec<StreamRecord> {
        self.by_stream
            .get(stream)
            .into_iter()
            .flatten()
            .map(|&i| {
                let c = &self.clusters[i];
                StreamRecord {
                    stream: c.stream.clone(),
                    cluster: c.name.clone(),
                    window: c.window,
                    t: c.timestamp,
                }
            })
            .collect()
    }

    pub fn cluster_record(&self, name: &str) -> Vec<ClusterRecord> {
        self.by_name
            .get(name)
            .into_iter()
            .flatten()
            .map(|&i| {
                let c = &self.clusters[i];
                ClusterRecord {
                    cluster: c.name.clone(),
                    stream: c.stream.clone(),
                    window: c.window,
                    t: c.timestamp,
                    high_degree: c.high_degree_nodes(),
                    nodes: c.members.clone(),
                }
            })
            .collect()
    }

    pub fn node_record(&self, node: &str) -> Vec<NodeRecord> {
        self.by_node
            .get(node)
            .into_iter()
            .flatten()
            .map(|&i| {
                let c = &self.clusters[i];
                NodeRecord {
                    node: node.to_owned(),
                    stream: c.stream.clone(),
                    cluster: c.name.clone(),
                    window: c.window,
                    t: c.timestamp,
                }
            })
            .collect()
    }

    pub fn all_clusters(&self) -> &[Cluster] {
        &self.clusters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(stream: &str, window: u64, t: f64, prefix: &str, n: usize) -> Cluster {
        // a star on n nodes named by its hub
        let hub = format!("{prefix}hub");
        let mut members: Vec<(String, u32)> = (1..n).map(|i| (format!("{prefix}{i:02}"), 1)).collect();
        members.push((hub.clone(), (n - 1) as u32));
        members.sort();
        Cluster {
            stream: stream.into(),
            window,
            timestamp: t,
            name: hub,
            members,
        }
    }

    #[test]
    fn one_cluster_fills_three_tables() {
        let mut s = Store::in_memory();
        assert!(s.put_cluster(&cluster("cnn", 1, 60.0, "x", 12)).unwrap());
        assert_eq!(s.stream_record("cnn").len(), 1);
        assert_eq!(s.cluster_record("xhub").len(), 1);
        let node_entries: usize = s
            .all_clusters()
            .iter()
            .flat_map(|c| &c.members)
            .map(|(n, _)| s.node_record(n).len())
            .sum();
        assert_eq!(node_entries, 12);
        assert_eq!(s.cluster_record("xhub")[0].high_degree[0], "xhub");
    }

    #[test]
    fn put_is_idempotent() {
        let mut s = Store::in_memory();
        let c = cluster("cnn", 1, 60.0, "x", 12);
        assert!(s.put_cluster(&c).unwrap());
        let before = s.stats();
        assert!(!s.put_cluster(&c).unwrap());
        assert_eq!(s.stats(), before);
    }

    #[test]
    fn rejects_invalid_clusters() {
        let mut s = Store::in_memory();
        let mut c = cluster("cnn", 1, 60.0, "x", 12);
        c.name = "ghost".into();
        assert!(s.put_cluster(&c).is_err());
        let mut c = cluster("cnn", 1, 60.0, "x", 12);
        c.members[0].1 = 0;
        assert!(s.put_cluster(&c).is_err());
        s.put_cluster(&cluster("cnn", 3, 120.0, "x", 12)).unwrap();
        assert!(matches!(
            s.put_cluster(&cluster("cnn", 2, 90.0, "y", 12)),
            Err(Error::OutOfOrder { .. })
        ));
    }

    #[test]
    fn resolution_order_and_recency() {
        let mut s = Store::in_memory();
        s.put_cluster(&cluster("cnn", 1, 60.0, "a", 10)).unwrap();
        s.put_cluster(&cluster("cnn", 2, 90.0, "b", 10)).unwrap();
        s.put_cluster(&cluster("cnn", 3, 120.0, "c", 10)).unwrap();
        s.put_cluster(&cluster("cnn", 3, 120.0, "d", 11)).unwrap();

        assert!(s.recent_clusters("nobody", 1e9, 5).is_empty());
        assert_eq!(s.kind_of("cnn"), Some(TagKind::Stream));
        assert_eq!(s.kind_of("bhub"), Some(TagKind::Cluster));
        assert_eq!(s.kind_of("b03"), Some(TagKind::Node));
        assert_eq!(s.kind_of("zzz"), None);

        let latest = s.recent_clusters("cnn", 1e9, 1);
        let names: Vec<&str> = latest.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["chub", "dhub"]);

        let at_100 = s.recent_clusters("cnn", 100.0, 1);
        assert_eq!(at_100.len(), 1);
        assert_eq!(at_100[0].name, "bhub");

        let node = s.recent_clusters("a02", 1e9, 5);
        assert_eq!(node.len(), 1);
        assert_eq!(node[0].name, "ahub");

        let groups = s.stream_windows("cnn", 1e9);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].len(), 2);
        assert_eq!(groups[2][0].window, 1);
    }

    #[test]
    fn correlation_round_trip_and_canonical_pair() {
        let mut s = Store::in_memory();
        s.append_correlation("b", "a", Ratio::new(1, 4), 60.0).unwrap();
        s.append_correlation("a", "b", Ratio::new(1, 3), 90.0).unwrap();
        assert_eq!(s.correlation_history("a", "b"), vec![(0.25, 60.0), (1.0 / 3.0, 90.0)]);
        assert_eq!(s.correlation_history("b", "a").len(), 2);
        assert_eq!(s.correlation_pairs().count(), 1);
        assert_eq!(s.correlation_at("a", "b", 75.0), Some(0.25));
        let m = s.correlation_matrix(75.0);
        assert_eq!(m.labels(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(m.get(0, 1), 0.25);
        assert_eq!(m.get(1, 1), 1.0);
        assert!(matches!(
            s.append_correlation_value("a", "b", 1.5, None, 100.0),
            Err(Error::CorrelationOutOfRange(_))
        ));
    }

    #[test]
    fn a_day_of_half_hour_points() {
        let mut s = Store::in_memory();
        for i in 0..48 {
            s.append_correlation("a", "b", Ratio::new(0, 0), 30.0 * f64::from(i + 1)).unwrap();
        }
        assert_eq!(s.correlation_history("a", "b").len(), 48);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let c1 = cluster("cnn", 1, 60.0, "a", 10);
        let c2 = cluster("fox", 1, 60.0, "b", 13);
        {
            let mut s = Store::open(dir.path()).unwrap();
            s.put_cluster(&c1).unwrap();
            s.put_cluster(&c2).unwrap();
            s.append_correlation("cnn", "fox", Ratio::new(0, 23), 60.0).unwrap();
        }
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.all_clusters(), &[c1.clone(), c2]);
        assert_eq!(s.recent_clusters("cnn", 60.0, 1)[0].members, c1.members);
        assert_eq!(s.correlation_history("fox", "cnn"), vec![(0.0, 60.0)]);
        assert_eq!(s.data_dir(), Some(dir.path()));
    }

    #[test]
    fn uncommitted_and_torn_records_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let c1 = cluster("cnn", 1, 60.0, "a", 10);
        {
            let mut s = Store::open(dir.path()).unwrap();
            s.put_cluster(&c1).unwrap();
        }
        // a cluster written without its committing stream line, then a
        // half-written stream line
        let orphan = cluster("cnn", 2, 90.0, "b", 10);
        let rec = ClusterRecord {
            cluster: orphan.name.clone(),
            stream: orphan.stream.clone(),
            window: 2,
            t: 90.0,
            high_degree: orphan.high_degree_nodes(),
            nodes: orphan.members.clone(),
        };
        let mut f = OpenOptions::new().append(true).open(dir.path().join(CLUSTERS_FILE)).unwrap();
        writeln!(f, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
        let mut f = OpenOptions::new().append(true).open(dir.path().join(STREAMS_FILE)).unwrap();
        write!(f, "{{\"stream\":\"cnn\",\"clus").unwrap();
        drop(f);

        let mut s = Store::open(dir.path()).unwrap();
        assert_eq!(s.all_clusters().len(), 1);
        assert!(s.put_cluster(&orphan).unwrap());
        drop(s);
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.all_clusters().len(), 2);
    }

    #[test]
    fn referential_integrity() {
        let mut s = Store::in_memory();
        s.put_cluster(&cluster("cnn", 1, 60.0, "a", 10)).unwrap();
        s.put_cluster(&cluster("fox", 1, 60.0, "a", 12)).unwrap();
        for c in s.all_clusters() {
            for (node, _) in &c.members {
                for r in s.node_record(node) {
                    let target = s.cluster(&r.stream, r.window, &r.cluster).unwrap();
                    assert!(target.contains(node));
                }
            }
        }
        for r in s.stream_record("fox") {
            assert!(s.cluster(&r.stream, r.window, &r.cluster).is_some());
        }
    }
}
