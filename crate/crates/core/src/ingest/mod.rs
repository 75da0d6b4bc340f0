//! Edge streams: the timed edge record, the two line formats that carry it,
//! and the pipeline that drives windows, clusters, correlations and storage.
//!
//! Edge lines are `<timestamp>\t<src>\t<dst>`. Tweet lines are
//! `<timestamp>\t<author>\t<hashtags>\t<mentions>[\t<urls>]`, where hashtags
//! and mentions are comma-separated (either list may be empty). A tweet by
//! `@y` carrying `#x` and `@z` becomes the edges `(@y, #x)` and `(@y, @z)`.
//! URLs are accepted and ignored.

mod pipeline;

pub use pipeline::{
    run_pipeline, ClosedWindowReport, EdgeSource, IterSource, LineSource, PairSeries, Pipeline,
    PipelineConfig, PipelineReport, SeriesPoint, SourceFormat, SourceItem, StreamAccounting,
    StreamSource, WindowStreamStats, SPECTRUM_LEN,
};

use std::fmt;

use serde::{Deserialize, Serialize};

/// One stream event. The edge is treated as undirected; self-loops and
/// repeated edges are legal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEdge {
    pub timestamp: f64,
    pub src: String,
    pub dst: String,
}

impl TimedEdge {
    pub fn new(timestamp: f64, src: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            timestamp,
            src: src.into(),
            dst: dst.into(),
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

impl fmt::Display for TimedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.timestamp, self.src, self.dst)
    }
}

/// Why a line produced no edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineError {
    FieldCount(usize),
    Timestamp(String),
    EmptyTag,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineError::FieldCount(n) => write!(f, "unexpected field count {n}"),
            LineError::Timestamp(s) => write!(f, "bad timestamp {s:?}"),
            LineError::EmptyTag => f.write_str("empty tag"),
        }
    }
}

fn parse_timestamp(field: &str) -> Result<f64, LineError> {
    let field = field.trim();
    match field.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(LineError::Timestamp(field.to_owned())),
    }
}

/// Parses `<timestamp>\t<src>\t<dst>`.
pub fn parse_edge_line(line: &str) -> Result<TimedEdge, LineError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(LineError::FieldCount(fields.len()));
    }
    let timestamp = parse_timestamp(fields[0])?;
    let (src, dst) = (fields[1].trim(), fields[2].trim());
    if src.is_empty() || dst.is_empty() {
        return Err(LineError::EmptyTag);
    }
    Ok(TimedEdge::new(timestamp, src, dst))
}

fn with_sigil(tag: &str, sigil: char) -> String {
    if tag.starts_with(sigil) {
        tag.to_owned()
    } else {
        format!("{sigil}{tag}")
    }
}

fn tag_list(field: Option<&str>, sigil: char) -> impl Iterator<Item = String> + '_ {
    field
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty() && *t != "#" && *t != "@")
        .map(move |t| with_sigil(t, sigil))
}

/// Parses one tweet line into its author-to-tag edges.
pub fn parse_tweet_line(line: &str) -> Result<Vec<TimedEdge>, LineError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split('\t').collect();
    if !(2..=5).contains(&fields.len()) {
        return Err(LineError::FieldCount(fields.len()));
    }
    let timestamp = parse_timestamp(fields[0])?;
    let author = fields[1].trim();
    if author.is_empty() || author == "@" {
        return Err(LineError::EmptyTag);
    }
    let author = with_sigil(author, '@');

    let edges = tag_list(fields.get(2).copied(), '#')
        .chain(tag_list(fields.get(3).copied(), '@'))
        .map(|tag| TimedEdge::new(timestamp, author.clone(), tag))
        .collect();
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tweet_with_hashtag_and_mention() {
        let edges = parse_tweet_line("5\t@a\t#x\t@b").unwrap();
        assert_eq!(
            edges,
            vec![TimedEdge::new(5.0, "@a", "#x"), TimedEdge::new(5.0, "@a", "@b")]
        );
    }

    #[test]
    fn tweet_without_tags_is_empty() {
        assert!(parse_tweet_line("5\t@a\t\t").unwrap().is_empty());
        assert!(parse_tweet_line("5\t@a").unwrap().is_empty());
    }

    #[test]
    fn tweet_with_two_hashtags() {
        let edges = parse_tweet_line("1.5\ta\tx,#y\t").unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(edges[0].src, "@a");
        assert_eq!(edges[0].dst, "#x");
        assert_eq!(edges[1].dst, "#y");
    }

    #[test]
    fn tweet_urls_are_ignored() {
        let edges = parse_tweet_line("1\t@a\t#x\t\thttps://example.org").unwrap();
        assert_eq!(edges, vec![TimedEdge::new(1.0, "@a", "#x")]);
    }

    #[test]
    fn malformed_tweets() {
        assert!(parse_tweet_line("garbage").is_err());
        assert!(parse_tweet_line("-1\t@a\t#x\t").is_err());
        assert_eq!(parse_tweet_line("1\t \t#x"), Err(LineError::EmptyTag));
    }

    #[test]
    fn edge_line_basic() {
        assert_eq!(
            parse_edge_line("10\t@a\t#x").unwrap(),
            TimedEdge::new(10.0, "@a", "#x")
        );
    }

    #[test]
    fn edge_line_self_loop() {
        let e = parse_edge_line("0\tu\tu").unwrap();
        assert!(e.is_self_loop());
    }

    #[test]
    fn edge_line_rejects() {
        assert_eq!(parse_edge_line("abc"), Err(LineError::FieldCount(1)));
        assert!(matches!(
            parse_edge_line("-3\ta\tb"),
            Err(LineError::Timestamp(_))
        ));
        assert!(matches!(
            parse_edge_line("NaN\ta\tb"),
            Err(LineError::Timestamp(_))
        ));
        assert_eq!(parse_edge_line("1\ta\tb\tc"), Err(LineError::FieldCount(4)));
    }

    #[test]
    fn display_round_trips() {
        let e = TimedEdge::new(12.25, "@a", "#b");
        assert_eq!(parse_edge_line(&e.to_string()).unwrap(), e);
    }
}
