//! Sliding time windows and their fixed-size uniform edge reservoirs.
//!
//! Window `i ≥ 1` covers the closed interval `[t_i − τ, t_i]` with
//! `t_i = τ + λ·(i − 1)`. Each window owns an independent reservoir started
//! when its first edge arrives, so at most `⌈τ/λ⌉ + 1` are open at once.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimedEdge;
use crate::seed::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub tau: f64,
    pub lambda: f64,
    pub k: usize,
}

impl Default for WindowConfig {
    /// One-hour windows every thirty minutes, 400-edge reservoirs.
    fn default() -> Self {
        Self {
            tau: 60.0,
            lambda: 30.0,
            k: 400,
        }
    }
}

impl WindowConfig {
    pub fn new(tau: f64, lambda: f64, k: usize) -> Result<Self> {
        let cfg = Self { tau, lambda, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < self.tau && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < lambda < tau, got tau = {}, lambda = {}",
                self.tau, self.lambda
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("reservoir capacity k must be >= 1".into()));
        }
        Ok(())
    }

    /// `t_i`, the close time of window `i`.
    pub fn end(&self, index: u64) -> f64 {
        debug_assert!(index >= 1);
        self.tau + self.lambda * (index - 1) as f64
    }

    pub fn start(&self, index: u64) -> f64 {
        self.lambda * (index - 1) as f64
    }

    pub fn contains(&self, index: u64, timestamp: f64) -> bool {
        index >= 1 && self.start(index) <= timestamp && timestamp <= self.end(index)
    }

    /// Number of windows open at a generic instant.
    pub fn concurrent_windows(&self) -> u64 {
        (self.tau / self.lambda).ceil() as u64
    }

    /// Fraction of a window shared with its successor.
    pub fn overlap(&self) -> f64 {
        1.0 - self.lambda / self.tau
    }

    /// Largest window index whose close time is strictly before `clock`.
    pub fn last_closed_before(&self, clock: f64) -> u64 {
        if clock <= self.tau {
            return 0;
        }
        let mut i = ((clock - self.tau) / self.lambda).floor() as u64 + 1;
        while i > 0 && self.end(i) >= clock {
            i -= 1;
        }
        while self.end(i + 1) < clock {
            i += 1;
        }
        i
    }
}

/// All windows whose closed interval contains `timestamp`.
pub fn windows_for(timestamp: f64, cfg: &WindowConfig) -> RangeInclusive<u64> {
    let mut last = (timestamp / cfg.lambda).floor().max(0.0) as u64 + 1;
    while last > 1 && !cfg.contains(last, timestamp) {
        last -= 1;
    }
    while cfg.contains(last + 1, timestamp) {
        last += 1;
    }
    let mut first = (((timestamp - cfg.tau) / cfg.lambda).ceil().max(0.0) as u64 + 1).min(last);
    while first > 1 && cfg.contains(first - 1, timestamp) {
        first -= 1;
    }
    while first < last && !cfg.contains(first, timestamp) {
        first += 1;
    }
    first..=last
}

/// Uniform sample of at most `k` edges among the `m` offered to one window.
#[derive(Debug, Clone)]
pub struct WindowReservoir {
    index: u64,
    start: f64,
    end: f64,
    k: usize,
    samples: Vec<TimedEdge>,
    seen: u64,
    rng: ChaCha8Rng,
    closed: bool,
}

impl WindowReservoir {
    pub fn new(index: u64, cfg: &WindowConfig, seed: u64) -> Self {
        Self {
            index,
            start: cfg.start(index),
            end: cfg.end(index),
            k: cfg.k,
            samples: Vec::with_capacity(cfg.k.min(1024)),
            seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            closed: false,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn samples(&self) -> &[TimedEdge] {
        &self.samples
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Algorithm R: the first `k` edges fill the reservoir, the `m`-th edge
    /// after that replaces a uniform resident with probability `k/m`.
    pub fn offer(&mut self, edge: &TimedEdge) -> Result<()> {
        if self.closed {
            return Err(Error::WindowClosed(self.index));
        }
        if !(self.start <= edge.timestamp && edge.timestamp <= self.end) {
            return Err(Error::OutsideWindow {
                index: self.index,
                start: self.start,
                end: self.end,
                timestamp: edge.timestamp,
            });
        }
        self.seen += 1;
        if self.samples.len() < self.k {
            self.samples.push(edge.clone());
        } else {
            let slot = self.rng.gen_range(0..self.seen);
            if slot < self.k as u64 {
                self.samples[slot as usize] = edge.clone();
            }
        }
        Ok(())
    }

    pub fn close(&mut self) -> Result<ClosedReservoir> {
        if self.closed {
            return Err(Error::WindowClosed(self.index));
        }
        self.closed = true;
        Ok(ClosedReservoir {
            index: self.index,
            start: self.start,
            end: self.end,
            k: self.k,
            edges: std::mem::take(&mut self.samples),
            seen: self.seen,
        })
    }
}

/// The immutable result of closing a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedReservoir {
    pub index: u64,
    pub start: f64,
    pub end: f64,
    pub k: usize,
    pub edges: Vec<TimedEdge>,
    /// `m`, the number of edges offered to the window.
    pub seen: u64,
}

impl ClosedReservoir {
    pub fn empty(index: u64, cfg: &WindowConfig) -> Self {
        Self {
            index,
            start: cfg.start(index),
            end: cfg.end(index),
            k: cfg.k,
            edges: Vec::new(),
            seen: 0,
        }
    }

    /// `k / max(k, m)`: the probability each offered edge survived.
    pub fn inclusion_probability(&self) -> f64 {
        if self.seen == 0 {
            return 0.0;
        }
        self.k as f64 / (self.k as u64).max(self.seen) as f64
    }
}

/// Where an offered edge went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    Routed(usize),
    /// Every window containing the edge has already closed.
    Stale,
}

/// Routes one stream's edges to its open window reservoirs.
#[derive(Debug, Clone)]
pub struct WindowedStream {
    cfg: WindowConfig,
    seed: u64,
    open: BTreeMap<u64, WindowReservoir>,
    closed_through: u64,
    highest_index: u64,
}

impl WindowedStream {
    pub fn new(cfg: WindowConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            seed,
            open: BTreeMap::new(),
            closed_through: 0,
            highest_index: 0,
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    pub fn open_windows(&self) -> usize {
        self.open.len()
    }

    pub fn closed_through(&self) -> u64 {
        self.closed_through
    }

    /// Highest window index that has received an edge.
    pub fn highest_index(&self) -> u64 {
        self.highest_index
    }

    pub fn offer(&mut self, edge: &TimedEdge) -> Routing {
        let mut routed = 0;
        for index in windows_for(edge.timestamp, &self.cfg) {
            if index <= self.closed_through {
                continue;
            }
            let (cfg, seed) = (&self.cfg, self.seed);
            let reservoir = self
                .open
                .entry(index)
                .or_insert_with(|| WindowReservoir::new(index, cfg, mix_seed(seed, index)));
            reservoir
                .offer(edge)
                .expect("windows_for only yields windows containing the edge");
            self.highest_index = self.highest_index.max(index);
            routed += 1;
        }
        if routed == 0 {
            Routing::Stale
        } else {
            Routing::Routed(routed)
        }
    }

    /// Closes every window up to and including `index`, in order. Windows
    /// that never saw an edge close empty.
    pub fn close_up_to(&mut self, index: u64) -> Vec<ClosedReservoir> {
        let mut out = Vec::new();
        while self.closed_through < index {
            let i = self.closed_through + 1;
            let closed = match self.open.remove(&i) {
                Some(mut r) => r.close().expect("open reservoirs are not closed"),
                None => ClosedReservoir::empty(i, &self.cfg),
            };
            out.push(closed);
            self.closed_through = i;
        }
        out
    }

    /// Closes the windows whose close time precedes `clock`.
    pub fn close_before(&mut self, clock: f64) -> Vec<ClosedReservoir> {
        let last = self.cfg.last_closed_before(clock);
        self.close_up_to(last)
    }
}
