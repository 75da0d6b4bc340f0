//! Content correlation between streams.
//!
//! `ρ(t)` is the Jaccard similarity of the cumulative cluster-node sets of two
//! streams. It is maintained online as an exact integer pair `(I, U)` and
//! only turned into a float when reported.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `num / den` with `0/0` read as `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        debug_assert!(num <= den || den == 0);
        Self { num, den }
    }

    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Exact rational equality (cross multiplication).
    pub fn same_value(self, other: Ratio) -> bool {
        match (self.den, other.den) {
            (0, 0) => true,
            (0, _) => other.num == 0,
            (_, 0) => self.num == 0,
            _ => u128::from(self.num) * u128::from(other.den)
                == u128::from(other.num) * u128::from(self.den),
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub fn jaccard_ratio<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> Ratio {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(*x)).count() as u64;
    let union = (a.len() + b.len()) as u64 - inter;
    Ratio::new(inter, union)
}

/// `|A ∩ B| / |A ∪ B|`, and 0 when both are empty.
pub fn jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    jaccard_ratio(a, b).value()
}

/// Growth of the cumulative sets during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RhoDelta {
    pub first: u64,
    pub second: u64,
    pub intersection: u64,
    /// Net growth of the union; a node entering both sets counts once.
    pub union: u64,
}

/// The additive form of the update,
/// `ρ + (U·δ′ − I·ΔU) / (U·(U + ΔU))`, which equals `(I + δ′)/(U + ΔU)`.
pub fn incremental_rho(prev: Ratio, delta: RhoDelta) -> f64 {
    let (i, u) = (prev.num as f64, prev.den as f64);
    let (dp, du) = (delta.intersection as f64, delta.union as f64);
    if prev.den == 0 {
        return Ratio::new(delta.intersection, delta.union).value();
    }
    prev.value() + (u * dp - i * du) / (u * (u + du))
}

/// Online correlation of one stream pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationState {
    pair: (String, String),
    first: HashSet<String>,
    second: HashSet<String>,
    intersection: u64,
    union: u64,
    history: Vec<(f64, Ratio)>,
}

impl CorrelationState {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        Self {
            pair: (first.into(), second.into()),
            first: HashSet::new(),
            second: HashSet::new(),
            intersection: 0,
            union: 0,
            history: Vec::new(),
        }
    }

    pub fn pair(&self) -> (&str, &str) {
        (&self.pair.0, &self.pair.1)
    }

    pub fn rho(&self) -> Ratio {
        Ratio::new(self.intersection, self.union)
    }

    pub fn first_set(&self) -> &HashSet<String> {
        &self.first
    }

    pub fn second_set(&self) -> &HashSet<String> {
        &self.second
    }

    pub fn history(&self) -> &[(f64, Ratio)] {
        &self.history
    }

    /// `ρ` at the latest step not after `t`, 0 before the first step.
    pub fn rho_at(&self, t: f64) -> Ratio {
        let idx = self.history.partition_point(|&(ts, _)| ts <= t);
        if idx == 0 {
            Ratio::default()
        } else {
            self.history[idx - 1].1
        }
    }

    /// One step at time `t`: fold the nodes of each stream's newly closed
    /// clusters into the cumulative sets and update `(I, U)` from the
    /// growth alone.
    pub fn step<'a, A, B>(&mut self, t: f64, new_first: A, new_second: B) -> RhoDelta
    where
        A: IntoIterator<Item = &'a str>,
        B: IntoIterator<Item = &'a str>,
    {
        let added_first: Vec<&str> = new_first
            .into_iter()
            .filter(|x| self.first.insert((*x).to_owned()))
            .collect();
        let added_second: Vec<&str> = new_second
            .into_iter()
            .filter(|x| self.second.insert((*x).to_owned()))
            .collect();

        let added_first_set: HashSet<&str> = added_first.iter().copied().collect();
        let added_second_set: HashSet<&str> = added_second.iter().copied().collect();

        let mut delta = RhoDelta {
            first: added_first.len() as u64,
            second: added_second.len() as u64,
            ..RhoDelta::default()
        };
        for &x in &added_first {
            if self.second.contains(x) {
                delta.intersection += 1;
            }
            // new to the union iff it was in neither old set
            let in_old_second = self.second.contains(x) && !added_second_set.contains(x);
            if !in_old_second {
                delta.union += 1;
            }
        }
        for &y in &added_second {
            if added_first_set.contains(y) {
                continue;
            }
            if self.first.contains(y) {
                delta.intersection += 1;
            } else {
                delta.union += 1;
            }
        }

        self.intersection += delta.intersection;
        self.union += delta.union;
        self.history.push((t, self.rho()));
        delta
    }
}

/// Centered three-point average of the interior points.
pub fn rho_averaged(series: &[f64]) -> Vec<f64> {
    series
        .windows(3)
        .map(|w| (w[0] + w[1] + w[2]) / 3.0)
        .collect()
}

/// Online form of [`rho_averaged`]: the average centered on point `j` is
/// emitted when point `j + 1` arrives.
#[derive(Debug, Clone, Default)]
pub struct LaggedAverage {
    last: [f64; 3],
    seen: usize,
}

impl LaggedAverage {
    pub fn push(&mut self, value: f64) -> Option<f64> {
        self.last = [self.last[1], self.last[2], value];
        self.seen += 1;
        (self.seen >= 3).then(|| self.last.iter().sum::<f64>() / 3.0)
    }
}

/// Symmetric matrix of stream correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::MatrixShape {
                rows: if n == 0 { 0 } else { values.len() / n.max(1) },
                labels: n,
            });
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .fold(0.0, f64::max)
    }

    /// Tab-separated text: a header row of tags (first cell empty), then one
    /// row per tag.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for label in &self.labels {
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
        let n = self.len();
        for i in 0..n {
            out.push_str(&self.labels[i]);
            for j in 0..n {
                let _ = write!(out, "\t{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty matrix".into()))?;
        let labels: Vec<String> = header
            .split('\t')
            .skip(1)
            .map(|s| s.trim().to_owned())
            .collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != n + 1 || cells[0].trim() != labels.get(rows).map_or("", String::as_str) {
                return Err(Error::InvalidConfig(format!("malformed matrix row {}", rows + 1)));
            }
            for cell in &cells[1..] {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad matrix value {cell:?}"))
                })?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::MatrixShape { rows, labels: n });
        }
        Self::new(labels, values)
    }
}

/// Assembles `A_t` from pairwise states: `A[i][j] = ρ_ij(t)`, `A[i][i] = 1`.
pub fn correlation_matrix(
    streams: &[String],
    states: &[CorrelationState],
    t: f64,
) -> Result<CorrelationMatrix> {
    let mut by_pair: BTreeMap<(&str, &str), &CorrelationState> = BTreeMap::new();
    for s in states {
        let (a, b) = s.pair();
        by_pair.insert((a, b), s);
        by_pair.insert((b, a), s);
    }
    let n = streams.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let state = by_pair
                .get(&(streams[i].as_str(), streams[j].as_str()))
                .ok_or_else(|| Error::MissingPair(streams[i].clone(), streams[j].clone()))?;
            let rho = state.rho_at(t).value();
            values[i * n + j] = rho;
            values[j * n + i] = rho;
        }
    }
    CorrelationMatrix::new(streams.to_vec(), values)
}

/// Owns every pairwise state for a fixed stream list and advances them
/// together at each window close.
#[derive(Debug, Clone)]
pub struct CorrelationTracker {
    streams: Vec<String>,
    states: Vec<CorrelationState>,
}

impl CorrelationTracker {
    pub fn new(streams: Vec<String>) -> Self {
        let mut states = Vec::new();
        for i in 0..streams.len() {
            for j in (i + 1)..streams.len() {
                states.push(CorrelationState::new(streams[i].clone(), streams[j].clone()));
            }
        }
        Self { streams, states }
    }

    pub fn streams(&self) -> &[String] {
        &self.streams
    }

    pub fn states(&self) -> &[CorrelationState] {
        &self.states
    }

    pub fn state(&self, a: &str, b: &str) -> Option<&CorrelationState> {
        self.states.iter().find(|s| {
            let (x, y) = s.pair();
            (x == a && y == b) || (x == b && y == a)
        })
    }

    /// `new_nodes[i]` holds the nodes of stream `i`'s clusters closed at `t`.
    pub fn step(&mut self, t: f64, new_nodes: &[Vec<String>]) {
        assert_eq!(new_nodes.len(), self.streams.len());
        let index: BTreeMap<&str, usize> = self
            .streams
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        for state in &mut self.states {
            let (a, b) = (index[state.pair.0.as_str()], index[state.pair.1.as_str()]);
            state.step(
                t,
                new_nodes[a].iter().map(String::as_str),
                new_nodes[b].iter().map(String::as_str),
            );
        }
    }

    pub fn matrix(&self, t: f64) -> CorrelationMatrix {
        correlation_matrix(&self.streams, &self.states, t)
            .expect("tracker holds every pair")
    }
}
