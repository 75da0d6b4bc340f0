//! Search by correlation over stored clusters.
//!
//! Each query tag resolves to its most recent components at or before the
//! query time `t`: for a stream, every cluster of its latest stored window;
//! for a cluster name or a node, the latest matching clusters of each stream.
//! A single tag answers with the high-degree nodes of its components. Several
//! tags are compared pairwise:
//!
//! * when one component contains the other tag (or both resolve to the same
//!   cluster), the high-degree nodes of that component are output;
//! * when two different components intersect, every node of the
//!   intersection scores `coefficient(t_i, t_j, t, dist)`, summed over all
//!   intersections it belongs to.
//!
//! With no hits, the search widens first to the latest components of the
//! streams nearest in the phylogeny tree, then to older windows one at a
//! time up to a horizon.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::clusters::Cluster;
use crate::error::{Error, Result};
use crate::phylo::{leaf_distance, PhyloTree};
use crate::store::Store;

pub const DEFAULT_LIMIT: usize = 5;
pub const DEFAULT_HORIZON: usize = 10;

/// `(1 - Δ/t) · (t_i/t) · (1 - dist)` with `Δ = t_i - t_j`, clamped at 0.
/// The arguments may come in either order; the later time is `t_i`.
pub fn coefficient(t_i: f64, t_j: f64, t: f64, dist: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidTime(t));
    }
    let (late, early) = if t_i >= t_j { (t_i, t_j) } else { (t_j, t_i) };
    let value = (1.0 - (late - early) / t) * (late / t) * (1.0 - dist.clamp(0.0, 1.0));
    Ok(value.max(0.0))
}

/// A stored cluster backing a score.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize)]
pub struct Witness {
    pub cluster: String,
    pub stream: String,
    pub window: u64,
    pub timestamp: f64,
}

impl Witness {
    fn of(c: &Cluster) -> Self {
        Self {
            cluster: c.name.clone(),
            stream: c.stream.clone(),
            window: c.window,
            timestamp: c.timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub tag: String,
    pub score: f64,
    /// Highest degree of the tag across its witnessing clusters.
    pub degree: u32,
    pub explanation: Vec<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Found,
    NoMatch,
    UnknownTags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    pub hits: Vec<SearchHit>,
    /// Query tags the store does not know.
    pub unknown: Vec<String>,
}

impl SearchOutcome {
    /// Ranked table followed by one `hit` line per result.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:<24} {:>10}  clusters", "rank", "tag", "score");
        for (i, h) in self.hits.iter().enumerate() {
            let names: Vec<&str> = h.explanation.iter().map(|w| w.cluster.as_str()).collect();
            let _ = writeln!(out, "{:>4}  {:<24} {:>10.6}  {}", i + 1, h.tag, h.score, names.join(","));
        }
        for (i, h) in self.hits.iter().enumerate() {
            let witnesses: Vec<String> = h
                .explanation
                .iter()
                .map(|w| format!("{}@{}:{}", w.cluster, w.stream, w.timestamp))
                .collect();
            let _ = writeln!(out, "hit\t{}\t{}\t{}\t{}", i + 1, h.tag, h.score, witnesses.join(","));
        }
        let status = match self.status {
            SearchStatus::Found => "found",
            SearchStatus::NoMatch => "no_match",
            SearchStatus::UnknownTags => "unknown_tags",
        };
        let _ = writeln!(out, "status\t{status}\t{}", self.unknown.join(","));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub limit: usize,
    /// How many older windows the fallback may step back.
    pub horizon: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            limit: DEFAULT_LIMIT,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Components of a tag by age: entry `d` holds, for each stream, the
/// clusters of the `d`-th most recent window the tag appears in.
fn components_by_age<'s>(store: &'s Store, tag: &str, t: f64) -> Vec<Vec<&'s Cluster>> {
    use crate::store::TagKind;
    match store.kind_of(tag) {
        None => Vec::new(),
        Some(TagKind::Stream) => store.stream_windows(tag, t),
        Some(_) => {
            let mut per_stream: BTreeMap<&str, Vec<Vec<&Cluster>>> = BTreeMap::new();
            for c in store.clusters_for(tag, t) {
                let groups = per_stream.entry(c.stream.as_str()).or_default();
                match groups.last_mut() {
                    Some(g) if g[0].window == c.window => g.push(c),
                    _ => groups.push(vec![c]),
                }
            }
            let depth = per_stream.values().map(Vec::len).max().unwrap_or(0);
            (0..depth)
                .map(|d| {
                    per_stream
                        .values()
                        .filter_map(|groups| groups.get(d))
                        .flatten()
                        .copied()
                        .collect()
                })
                .collect()
        }
    }
}

struct Scorer<'a> {
    tree: Option<&'a PhyloTree>,
    t: f64,
    excluded: BTreeSet<&'a str>,
    hits: BTreeMap<String, SearchHit>,
}

impl<'a> Scorer<'a> {
    fn stream_distance(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 0.0;
        }
        self.tree
            .and_then(|tree| leaf_distance(tree, a, b).ok())
            .unwrap_or(0.0)
    }

    fn credit(&mut self, tag: &str, score: f64, degree: u32, witnesses: &[&Cluster]) {
        if score <= 0.0 || self.excluded.contains(tag) {
            return;
        }
        let hit = self.hits.entry(tag.to_owned()).or_insert_with(|| SearchHit {
            tag: tag.to_owned(),
            score: 0.0,
            degree: 0,
            explanation: Vec::new(),
        });
        hit.score += score;
        hit.degree = hit.degree.max(degree);
        for c in witnesses {
            let w = Witness::of(c);
            if !hit.explanation.contains(&w) {
                hit.explanation.push(w);
            }
        }
    }

    fn high_degree(&mut self, c: &Cluster) -> Result<()> {
        let score = coefficient(c.timestamp, c.timestamp, self.t, 0.0)?;
        for node in c.high_degree_nodes() {
            let degree = c.degree_of(&node).unwrap_or(0);
            self.credit(&node, score, degree, &[c]);
        }
        Ok(())
    }

    fn intersect(&mut self, a: &Cluster, b: &Cluster) -> Result<()> {
        let dist = self.stream_distance(&a.stream, &b.stream);
        let score = coefficient(a.timestamp, b.timestamp, self.t, dist)?;
        // both member lists are sorted by tag
        let (mut i, mut j) = (0, 0);
        while i < a.members.len() && j < b.members.len() {
            let (x, dx) = &a.members[i];
            let (y, dy) = &b.members[j];
            match x.cmp(y) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    self.credit(x, score, (*dx).max(*dy), &[a, b]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(())
    }

    /// Applies the containment and intersection rules to a component pair
    /// drawn for two different query tags.
    fn pair(&mut self, x: &str, cx: &Cluster, y: &str, cy: &Cluster) -> Result<()> {
        let same = cx.stream == cy.stream && cx.window == cy.window && cx.name == cy.name;
        if same {
            return self.high_degree(cx);
        }
        if cx.contains(y) {
            self.high_degree(cx)?;
        }
        if cy.contains(x) {
            self.high_degree(cy)?;
        }
        self.intersect(cx, cy)
    }

    fn pairwise(&mut self, tags: &[&str], comps: &[Vec<&Cluster>]) -> Result<()> {
        let mut seen: BTreeSet<(usize, usize, *const Cluster, *const Cluster)> = BTreeSet::new();
        for i in 0..tags.len() {
            for j in (i + 1)..tags.len() {
                for &cx in &comps[i] {
                    for &cy in &comps[j] {
                        if seen.insert((i, j, cx as *const _, cy as *const _)) {
                            self.pair(tags[i], cx, tags[j], cy)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self, limit: usize) -> Vec<SearchHit> {
        let mut hits: Vec<SearchHit> = self.hits.into_values().collect();
        for h in &mut hits {
            h.explanation.sort_by(|a, b| {
                b.timestamp
                    .total_cmp(&a.timestamp)
                    .then_with(|| a.stream.cmp(&b.stream))
                    .then_with(|| a.cluster.cmp(&b.cluster))
            });
        }
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.degree.cmp(&a.degree))
                .then_with(|| a.tag.cmp(&b.tag))
        });
        hits.truncate(limit);
        hits
    }
}

/// Ranks tags correlated with `tags` at time `t`.
pub fn search(
    store: &Store,
    tree: Option<&PhyloTree>,
    tags: &[&str],
    t: f64,
    params: &SearchParams,
) -> Result<SearchOutcome> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidTime(t));
    }
    let mut distinct: Vec<&str> = Vec::new();
    for &tag in tags {
        if !distinct.contains(&tag) {
            distinct.push(tag);
        }
    }
    let unknown: Vec<String> = distinct
        .iter()
        .filter(|tag| store.kind_of(tag).is_none())
        .map(|s| (*s).to_owned())
        .collect();
    let known: Vec<&str> = distinct
        .iter()
        .copied()
        .filter(|tag| store.kind_of(tag).is_some())
        .collect();
    if known.is_empty() {
        return Ok(SearchOutcome {
            status: SearchStatus::UnknownTags,
            hits: Vec::new(),
            unknown,
        });
    }

    let by_age: Vec<Vec<Vec<&Cluster>>> = known.iter().map(|tag| components_by_age(store, tag, t)).collect();
    let latest: Vec<Vec<&Cluster>> = by_age.iter().map(|g| g.first().cloned().unwrap_or_default()).collect();
    let new_scorer = || Scorer {
        tree,
        t,
        excluded: known.iter().copied().collect(),
        hits: BTreeMap::new(),
    };

    let mut scorer = new_scorer();
    if known.len() == 1 {
        for c in &latest[0] {
            scorer.high_degree(c)?;
        }
    } else {
        scorer.pairwise(&known, &latest)?;

        if scorer.hits.is_empty() {
            scorer = new_scorer();
            phylogeny_fallback(&mut scorer, store, &latest, t)?;
        }
        let oldest = by_age.iter().map(Vec::len).max().unwrap_or(0).saturating_sub(1);
        for depth in 1..=params.horizon.min(oldest) {
            if !scorer.hits.is_empty() {
                break;
            }
            let widened: Vec<Vec<&Cluster>> = by_age
                .iter()
                .map(|g| g.iter().take(depth + 1).flatten().copied().collect())
                .collect();
            scorer = new_scorer();
            scorer.pairwise(&known, &widened)?;
        }
    }

    let hits = scorer.finish(params.limit);
    Ok(SearchOutcome {
        status: if hits.is_empty() {
            SearchStatus::NoMatch
        } else {
            SearchStatus::Found
        },
        hits,
        unknown,
    })
}

/// Intersects the tags' components with the latest components of the other
/// streams, nearest stream first, stopping at the first stream with hits.
fn phylogeny_fallback(
    scorer: &mut Scorer<'_>,
    store: &Store,
    latest: &[Vec<&Cluster>],
    t: f64,
) -> Result<()> {
    let Some(tree) = scorer.tree else {
        return Ok(());
    };
    let home: BTreeSet<&str> = latest.iter().flatten().map(|c| c.stream.as_str()).collect();
    if home.is_empty() {
        return Ok(());
    }
    let mut candidates: Vec<(f64, &str)> = tree
        .leaves()
        .into_iter()
        .filter(|s| !home.contains(s))
        .filter_map(|s| {
            home.iter()
                .filter_map(|h| leaf_distance(tree, h, s).ok())
                .min_by(f64::total_cmp)
                .map(|d| (d, s))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    for (_, stream) in candidates {
        let Some(group) = store.stream_windows(stream, t).into_iter().next() else {
            continue;
        };
        for other in &group {
            for comps in latest {
                for c in comps {
                    scorer.intersect(c, other)?;
                }
            }
        }
        if !scorer.hits.is_empty() {
            break;
        }
    }
    Ok(())
}

/// The same query evaluated at several times.
pub fn time_ranked_answers(
    store: &Store,
    tree: Option<&PhyloTree>,
    tag: &str,
    times: &[f64],
    params: &SearchParams,
) -> Result<Vec<(f64, SearchOutcome)>> {
    times
        .iter()
        .map(|&t| Ok((t, search(store, tree, &[tag], t, params)?)))
        .collect()
}
