use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{parse_edge_line, parse_tweet_line, LineError, TimedEdge};
use crate::clusters::{components_of, extract_large, ClusterParams, Decision};
use crate::config::KeyValues;
use crate::correlation::{rho_averaged, CorrelationMatrix, CorrelationTracker, Ratio};
use crate::error::{Error, Result};
use crate::seed::mix_seed;
use crate::store::{Store, StoreStats};
use crate::windows::{ClosedReservoir, Routing, WindowConfig, WindowedStream};

/// Component sizes kept per reservoir in the report.
pub const SPECTRUM_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceFormat {
    #[default]
    Edges,
    Tweets,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edges" | "edge" => Ok(Self::Edges),
            "tweets" | "tweet" => Ok(Self::Tweets),
            other => Err(Error::InvalidConfig(format!("unknown source format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSource {
    pub name: String,
    pub path: PathBuf,
    pub format: SourceFormat,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub streams: Vec<StreamSource>,
    pub windows: WindowConfig,
    pub clusters: ClusterParams,
    /// `None` keeps the store in memory.
    pub data_dir: Option<PathBuf>,
    /// Times at which to report the correlation matrix; the last window
    /// close time when empty.
    pub report_times: Vec<f64>,
    pub seed: u64,
}

impl PipelineConfig {
    /// Reads `stream.<name> = <path>`, `format.<name> = edges|tweets`,
    /// `tau`, `lambda`, `k`, `gamma`, `alpha`, `min_store`, `seed`,
    /// `data_dir` and `report_times` (comma-separated). Relative paths are
    /// taken from `base`.
    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<Self> {
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut streams = Vec::new();
        for (name, path) in kv.with_prefix("stream.") {
            let format = match kv.raw(&format!("format.{name}")) {
                Some(f) => f.parse()?,
                None => SourceFormat::default(),
            };
            streams.push(StreamSource {
                name: name.to_owned(),
                path: resolve(path),
                format,
            });
        }
        let defaults = Self::default();
        let report_times = match kv.raw("report_times") {
            None => Vec::new(),
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad report time {s:?}")))
                })
                .collect::<Result<_>>()?,
        };
        let cfg = Self {
            streams,
            windows: WindowConfig::new(
                kv.get_or("tau", defaults.windows.tau)?,
                kv.get_or("lambda", defaults.windows.lambda)?,
                kv.get_or("k", defaults.windows.k)?,
            )?,
            clusters: ClusterParams {
                gamma: kv.get_or("gamma", defaults.clusters.gamma)?,
                alpha: kv.get_or("alpha", defaults.clusters.alpha)?,
                min_store: kv.get_or("min_store", defaults.clusters.min_store)?,
            },
            data_dir: kv.raw("data_dir").map(resolve),
            report_times,
            seed: kv.get_or("seed", 0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        Self::from_key_values(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        self.windows.validate()?;
        self.clusters.validate()?;
        let names: BTreeSet<&str> = self.streams.iter().map(|s| s.name.as_str()).collect();
        if names.len() != self.streams.len() {
            return Err(Error::InvalidConfig("stream names must be unique".into()));
        }
        Ok(())
    }
}

/// Per-stream edge accounting: `read = routed + skipped + stale`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StreamAccounting {
    pub read: u64,
    pub routed: u64,
    pub skipped: u64,
    pub stale: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStreamStats {
    pub stream: String,
    /// Edges offered to the window.
    pub seen: u64,
    pub sampled: usize,
    /// Largest component sizes of the sample, descending.
    pub spectrum: Vec<usize>,
    pub decision: Decision,
    pub stored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedWindowReport {
    pub index: u64,
    pub close_time: f64,
    pub streams: Vec<WindowStreamStats>,
}

/// One point of a pair's correlation series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub rho: f64,
    pub intersection: u64,
    pub union: u64,
    /// Average of this point and its two neighbours; absent at the ends.
    pub averaged: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSeries {
    pub a: String,
    pub b: String,
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub streams: Vec<String>,
    pub accounting: Vec<StreamAccounting>,
    pub windows: Vec<ClosedWindowReport>,
    pub series: Vec<PairSeries>,
    pub matrices: Vec<(f64, CorrelationMatrix)>,
    pub stored: StoreStats,
}

impl PipelineReport {
    /// Routed edges per stored unit (node or edge of a stored cluster).
    pub fn compression(&self) -> Option<f64> {
        let routed: u64 = self.accounting.iter().map(|a| a.routed).sum();
        let units = self.stored.stored_units();
        (units > 0).then(|| routed as f64 / units as f64)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "streams: {}", self.streams.join(", "));
        for (name, a) in self.streams.iter().zip(&self.accounting) {
            let _ = writeln!(
                out,
                "  {name}: read {} routed {} skipped {} stale {}",
                a.read, a.routed, a.skipped, a.stale
            );
        }
        let _ = writeln!(out, "windows closed: {}", self.windows.len());
        let _ = writeln!(
            out,
            "stored: {} clusters, {} node entries, {} cluster edges",
            self.stored.clusters, self.stored.node_entries, self.stored.cluster_edges
        );
        match self.compression() {
            Some(c) => {
                let _ = writeln!(out, "compression: {c:.1}x");
            }
            None => {
                let _ = writeln!(out, "compression: n/a (nothing stored)");
            }
        }
        let _ = writeln!(out, "\nwindow\tclose\tstream\tedges\tsampled\tlargest\tstored");
        for w in &self.windows {
            for s in &w.streams {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    w.index,
                    w.close_time,
                    s.stream,
                    s.seen,
                    s.sampled,
                    s.spectrum.first().copied().unwrap_or(0),
                    s.stored
                );
            }
        }
        for series in &self.series {
            let last = series.points.last();
            let _ = writeln!(
                out,
                "\nrho({}, {}): {} points, final {}",
                series.a,
                series.b,
                series.points.len(),
                last.map_or(0.0, |p| p.rho)
            );
        }
        for (t, m) in &self.matrices {
            let _ = writeln!(out, "\ncorrelation matrix at t={t}");
            out.push_str(&m.to_text());
        }
        out
    }

    /// Writes `summary.txt`, `windows.csv`, `spectrum.csv`,
    /// `correlations.csv` and `accounting.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.txt"), self.to_text())?;
        let csv_err = |e: csv::Error| Error::Io(io::Error::other(e));

        let mut w = csv::Writer::from_path(dir.join("windows.csv")).map_err(csv_err)?;
        w.write_record(["window", "close_time", "stream", "edges", "sampled", "largest", "decision", "stored"])
            .map_err(csv_err)?;
        for win in &self.windows {
            for s in &win.streams {
                w.write_record([
                    win.index.to_string(),
                    win.close_time.to_string(),
                    s.stream.clone(),
                    s.seen.to_string(),
                    s.sampled.to_string(),
                    s.spectrum.first().copied().unwrap_or(0).to_string(),
                    format!("{:?}", s.decision).to_lowercase(),
                    s.stored.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("spectrum.csv")).map_err(csv_err)?;
        w.write_record(["window", "stream", "rank", "size"]).map_err(csv_err)?;
        for win in &self.windows {
            for s in &win.streams {
                for (rank, size) in s.spectrum.iter().enumerate() {
                    w.write_record([
                        win.index.to_string(),
                        s.stream.clone(),
                        (rank + 1).to_string(),
                        size.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("correlations.csv")).map_err(csv_err)?;
        w.write_record(["a", "b", "t", "rho", "intersection", "union", "rho_averaged"])
            .map_err(csv_err)?;
        for s in &self.series {
            for p in &s.points {
                w.write_record([
                    s.a.clone(),
                    s.b.clone(),
                    p.t.to_string(),
                    p.rho.to_string(),
                    p.intersection.to_string(),
                    p.union.to_string(),
                    p.averaged.map(|v| v.to_string()).unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("accounting.csv")).map_err(csv_err)?;
        w.write_record(["stream", "read", "routed", "skipped", "stale"]).map_err(csv_err)?;
        for (name, a) in self.streams.iter().zip(&self.accounting) {
            w.write_record([
                name.clone(),
                a.read.to_string(),
                a.routed.to_string(),
                a.skipped.to_string(),
                a.stale.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One item pulled from a source: an edge, or a line that failed to parse.
pub type SourceItem = std::result::Result<TimedEdge, LineError>;

/// A pull-based edge source.
pub trait EdgeSource {
    fn next_item(&mut self) -> io::Result<Option<SourceItem>>;
}

/// Adapts any edge iterator.
pub struct IterSource<I>(pub I);

impl<I: Iterator<Item = TimedEdge>> EdgeSource for IterSource<I> {
    fn next_item(&mut self) -> io::Result<Option<SourceItem>> {
        Ok(self.0.next().map(Ok))
    }
}

/// Reads edge or tweet lines from any buffered reader.
pub struct LineSource<R> {
    reader: R,
    format: SourceFormat,
    pending: std::collections::VecDeque<TimedEdge>,
    line: String,
}

impl<R: BufRead> LineSource<R> {
    pub fn new(reader: R, format: SourceFormat) -> Self {
        Self {
            reader,
            format,
            pending: Default::default(),
            line: String::new(),
        }
    }
}

impl LineSource<BufReader<File>> {
    pub fn open(path: &Path, format: SourceFormat) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Source {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self::new(BufReader::new(file), format))
    }
}

impl<R: BufRead> EdgeSource for LineSource<R> {
    fn next_item(&mut self) -> io::Result<Option<SourceItem>> {
        loop {
            if let Some(edge) = self.pending.pop_front() {
                return Ok(Some(Ok(edge)));
            }
            self.line.clear();
            if self.reader.read_line(&mut self.line)? == 0 {
                return Ok(None);
            }
            if self.line.trim().is_empty() {
                continue;
            }
            match self.format {
                SourceFormat::Edges => return Ok(Some(parse_edge_line(&self.line))),
                SourceFormat::Tweets => match parse_tweet_line(&self.line) {
                    Ok(edges) => self.pending.extend(edges),
                    Err(e) => return Ok(Some(Err(e))),
                },
            }
        }
    }
}

struct StreamState {
    name: String,
    windows: WindowedStream,
    accounting: StreamAccounting,
}

/// Shared-clock driver: routes edges, closes windows in index order across
/// all streams, stores clusters and advances the correlation states.
pub struct Pipeline {
    streams: Vec<StreamState>,
    clusters: ClusterParams,
    tracker: CorrelationTracker,
    store: Store,
    clock: f64,
    closed_through: u64,
    reports: Vec<ClosedWindowReport>,
}

impl Pipeline {
    pub fn new(
        names: Vec<String>,
        windows: WindowConfig,
        clusters: ClusterParams,
        store: Store,
        seed: u64,
    ) -> Result<Self> {
        clusters.validate()?;
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::InvalidConfig("stream names must be unique".into()));
        }
        let streams = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                Ok(StreamState {
                    name: name.clone(),
                    windows: WindowedStream::new(windows, mix_seed(seed, i as u64 + 1))?,
                    accounting: StreamAccounting::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            streams,
            clusters,
            tracker: CorrelationTracker::new(names),
            store,
            clock: f64::NEG_INFINITY,
            closed_through: 0,
            reports: Vec::new(),
        })
    }

    pub fn stream_index(&self, name: &str) -> Option<usize> {
        self.streams.iter().position(|s| s.name == name)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn tracker(&self) -> &CorrelationTracker {
        &self.tracker
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn windows_closed(&self) -> u64 {
        self.closed_through
    }

    /// Counts a line of stream `stream` that produced no edge.
    pub fn skip(&mut self, stream: usize) {
        let a = &mut self.streams[stream].accounting;
        a.read += 1;
        a.skipped += 1;
    }

    /// Routes one edge of stream `stream`, first closing every window that
    /// ended before its timestamp.
    pub fn push(&mut self, stream: usize, edge: &TimedEdge) -> Result<Routing> {
        if edge.timestamp > self.clock {
            self.clock = edge.timestamp;
            let last = self.streams[stream].windows.config().last_closed_before(self.clock);
            self.close_through(last)?;
        }
        let state = &mut self.streams[stream];
        let routing = state.windows.offer(edge);
        state.accounting.read += 1;
        match routing {
            Routing::Routed(_) => state.accounting.routed += 1,
            Routing::Stale => state.accounting.stale += 1,
        }
        Ok(routing)
    }

    fn close_through(&mut self, index: u64) -> Result<()> {
        while self.closed_through < index {
            let i = self.closed_through + 1;
            let mut closed: Vec<ClosedReservoir> = Vec::with_capacity(self.streams.len());
            for s in &mut self.streams {
                let mut batch = s.windows.close_up_to(i);
                debug_assert_eq!(batch.len(), 1);
                closed.push(batch.pop().expect("one window per step"));
            }
            let close_time = closed[0].end;
            let mut new_nodes = Vec::with_capacity(closed.len());
            let mut stats = Vec::with_capacity(closed.len());
            for (s, reservoir) in self.streams.iter().zip(&closed) {
                let found = extract_large(reservoir, &self.clusters, &s.name);
                let mut nodes = Vec::new();
                for c in &found {
                    self.store.put_cluster(c)?;
                    nodes.extend(c.members.iter().map(|(tag, _)| tag.clone()));
                }
                let spectrum: Vec<usize> = components_of(&reservoir.edges)
                    .iter()
                    .take(SPECTRUM_LEN)
                    .map(|c| c.len())
                    .collect();
                let decision = if spectrum.first().copied().unwrap_or(0) >= self.clusters.alpha {
                    Decision::Accept
                } else {
                    Decision::Reject
                };
                stats.push(WindowStreamStats {
                    stream: s.name.clone(),
                    seen: reservoir.seen,
                    sampled: reservoir.edges.len(),
                    spectrum,
                    decision,
                    stored: found.len(),
                });
                new_nodes.push(nodes);
            }
            self.tracker.step(close_time, &new_nodes);
            for state in self.tracker.states() {
                let (a, b) = state.pair();
                self.store.append_correlation(a, b, state.rho(), close_time)?;
            }
            log::debug!("closed window {i} at t={close_time}");
            self.reports.push(ClosedWindowReport {
                index: i,
                close_time,
                streams: stats,
            });
            self.closed_through = i;
        }
        Ok(())
    }

    /// Pulls every source to exhaustion in timestamp order; ties go to the
    /// lower source index and each source keeps its own order.
    pub fn replay(&mut self, sources: &mut [Box<dyn EdgeSource + '_>]) -> Result<()> {
        assert_eq!(sources.len(), self.streams.len());
        let mut heads: Vec<Option<SourceItem>> = Vec::with_capacity(sources.len());
        for s in sources.iter_mut() {
            heads.push(s.next_item()?);
        }
        loop {
            let mut pick: Option<(usize, f64)> = None;
            for (i, head) in heads.iter().enumerate() {
                match head {
                    None => {}
                    // unparseable lines are counted as soon as they surface
                    Some(Err(_)) => {
                        pick = Some((i, f64::NEG_INFINITY));
                        break;
                    }
                    Some(Ok(e)) if pick.is_none_or(|(_, t)| e.timestamp < t) => {
                        pick = Some((i, e.timestamp));
                    }
                    Some(Ok(_)) => {}
                }
            }
            let Some((i, _)) = pick else {
                return Ok(());
            };
            match heads[i].take().expect("picked head exists") {
                Ok(edge) => {
                    self.push(i, &edge)?;
                }
                Err(e) => {
                    log::warn!("{}: skipped line: {e}", self.streams[i].name);
                    self.skip(i);
                }
            }
            heads[i] = sources[i].next_item()?;
        }
    }

    /// Closes every window up to the highest one holding data and builds the
    /// report.
    pub fn finish(mut self, report_times: &[f64]) -> Result<(PipelineReport, Store)> {
        let last = self
            .streams
            .iter()
            .map(|s| s.windows.highest_index())
            .max()
            .unwrap_or(0);
        self.close_through(last)?;

        let series = self
            .tracker
            .states()
            .iter()
            .map(|state| {
                let (a, b) = state.pair();
                let history = state.history();
                let values: Vec<f64> = history.iter().map(|(_, r)| r.value()).collect();
                let averaged = rho_averaged(&values);
                let points = history
                    .iter()
                    .enumerate()
                    .map(|(j, &(t, r)): (usize, &(f64, Ratio))| SeriesPoint {
                        t,
                        rho: r.value(),
                        intersection: r.num,
                        union: r.den,
                        averaged: j.checked_sub(1).and_then(|k| averaged.get(k).copied()),
                    })
                    .collect();
                PairSeries {
                    a: a.to_owned(),
                    b: b.to_owned(),
                    points,
                }
            })
            .collect();

        let mut times = report_times.to_vec();
        if times.is_empty() {
            if let Some(r) = self.reports.last() {
                times.push(r.close_time);
            }
        }
        let matrices = times.into_iter().map(|t| (t, self.tracker.matrix(t))).collect();

        let report = PipelineReport {
            streams: self.streams.iter().map(|s| s.name.clone()).collect(),
            accounting: self.streams.iter().map(|s| s.accounting).collect(),
            windows: self.reports,
            series,
            matrices,
            stored: self.store.stats(),
        };
        Ok((report, self.store))
    }
}

/// Opens every source, then the store, then replays. An unreadable source
/// aborts before anything is written.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PipelineReport, Store)> {
    cfg.validate()?;
    let mut sources: Vec<Box<dyn EdgeSource>> = Vec::with_capacity(cfg.streams.len());
    for s in &cfg.streams {
        sources.push(Box::new(LineSource::open(&s.path, s.format)?));
    }
    let store = match &cfg.data_dir {
        Some(dir) => Store::open(dir)?,
        None => Store::in_memory(),
    };
    let names = cfg.streams.iter().map(|s| s.name.clone()).collect();
    let mut pipeline = Pipeline::new(names, cfg.windows, cfg.clusters, store, cfg.seed)?;
    pipeline.replay(&mut sources)?;
    pipeline.finish(&cfg.report_times)
}
