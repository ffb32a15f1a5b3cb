//! Adoption logs, follower edges, geo labels, and the train/test topic split.
//!
//! All three input formats are tab-separated text, one record per line,
//! UTF-8, no header:
//!
//! * adoption log: `<topic_id>\t<user_id>\t<unix_seconds>`
//! * follower edges: `<follower_id>\t<followee_id>`
//! * geo labels: `<user_id>\t<label>`

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::SeedDerive;

/// One (topic, user, timestamp) record; the atomic input unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdoptionEvent {
    pub topic_id: String,
    pub user_id: String,
    /// Integer seconds since epoch, non-negative.
    pub timestamp: i64,
}

/// The time-ordered sequence of adoption events for one topic.
///
/// A user tweeting a topic several times contributes several events;
/// deduplication to first adoptions happens only at evaluation time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdoptionSequence {
    pub topic_id: String,
    pub events: Vec<AdoptionEvent>,
}

impl AdoptionSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct adopters in order of their first adoption.
    pub fn first_adopters(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for ev in &self.events {
            if seen.insert(ev.user_id.as_str()) {
                out.push(ev.user_id.as_str());
            }
        }
        out
    }
}

/// How parsers react to malformed lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Any malformed line aborts with a parse error.
    Strict,
    /// Malformed lines are counted and skipped.
    Lenient,
}

/// Counters reported by the parsers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    /// Records successfully parsed.
    pub parsed: usize,
    /// Malformed lines skipped (lenient mode only).
    pub skipped: usize,
    /// Self-loop edges dropped (follower network only).
    pub self_loops: usize,
    /// Duplicate records collapsed (edges) or overwritten (geo labels).
    pub duplicates: usize,
}

fn parse_event(line: &str) -> std::result::Result<AdoptionEvent, String> {
    let mut parts = line.split('\t');
    let topic = parts.next().unwrap_or("");
    let user = parts.next().ok_or("expected 3 tab-separated fields")?;
    let ts = parts.next().ok_or("expected 3 tab-separated fields")?;
    if parts.next().is_some() {
        return Err("expected 3 tab-separated fields".into());
    }
    if topic.is_empty() || user.is_empty() {
        return Err("empty topic_id or user_id".into());
    }
    let timestamp: i64 = ts
        .parse()
        .map_err(|_| format!("non-integer timestamp {ts:?}"))?;
    if timestamp < 0 {
        return Err(format!("negative timestamp {timestamp}"));
    }
    Ok(AdoptionEvent {
        topic_id: topic.to_string(),
        user_id: user.to_string(),
        timestamp,
    })
}

/// Streaming reader over an adoption log.
///
/// Yields events in file order. In lenient mode malformed lines are skipped
/// and counted; query [`AdoptionLogReader::skipped`] after consumption.
pub struct AdoptionLogReader {
    lines: std::io::Lines<BufReader<File>>,
    path: std::path::PathBuf,
    mode: ParseMode,
    line_no: usize,
    skipped: usize,
}

impl AdoptionLogReader {
    pub fn open(path: impl AsRef<Path>, mode: ParseMode) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(AdoptionLogReader {
            lines: BufReader::new(file).lines(),
            path,
            mode,
            line_no: 0,
            skipped: 0,
        })
    }

    /// Malformed lines skipped so far (lenient mode).
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl Iterator for AdoptionLogReader {
    type Item = Result<AdoptionEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.is_empty() {
                continue;
            }
            match parse_event(&line) {
                Ok(ev) => return Some(Ok(ev)),
                Err(msg) => match self.mode {
                    ParseMode::Strict => {
                        return Some(Err(Error::parse(&self.path, self.line_no, msg)))
                    }
                    ParseMode::Lenient => {
                        self.skipped += 1;
                        continue;
                    }
                },
            }
        }
    }
}

/// Parse a whole adoption log into memory.
///
/// Returns the events in file order plus the skipped-line count (always 0 in
/// strict mode, where the first malformed line aborts).
pub fn parse_adoption_log(
    path: impl AsRef<Path>,
    mode: ParseMode,
) -> Result<(Vec<AdoptionEvent>, usize)> {
    let mut reader = AdoptionLogReader::open(path, mode)?;
    let mut events = Vec::new();
    for ev in &mut reader {
        events.push(ev?);
    }
    Ok((events, reader.skipped()))
}

/// Group events into per-topic sequences, stably sorted by timestamp.
///
/// Ties keep input order; sequences come back sorted by topic id.
pub fn group_into_sequences(
    events: impl IntoIterator<Item = AdoptionEvent>,
) -> Vec<AdoptionSequence> {
    let mut by_topic: BTreeMap<String, Vec<AdoptionEvent>> = BTreeMap::new();
    for ev in events {
        by_topic.entry(ev.topic_id.clone()).or_default().push(ev);
    }
    by_topic
        .into_iter()
        .map(|(topic_id, mut events)| {
            events.sort_by_key(|e| e.timestamp); // stable: ties keep input order
            AdoptionSequence { topic_id, events }
        })
        .collect()
}

/// Write sequences back out in the adoption-log format.
pub fn write_adoption_log(sequences: &[AdoptionSequence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for seq in sequences {
        for ev in &seq.events {
            writeln!(w, "{}\t{}\t{}", ev.topic_id, ev.user_id, ev.timestamp)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Disjoint train/test partition of the topic set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSplit {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
}

impl TopicSplit {
    pub fn is_train(&self, topic: &str) -> bool {
        self.train.contains(topic)
    }

    pub fn is_test(&self, topic: &str) -> bool {
        self.test.contains(topic)
    }

    /// Persist as `<topic>\t{train|test}` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for t in &self.train {
            writeln!(w, "{t}\ttrain").map_err(|e| Error::io(path, e))?;
        }
        for t in &self.test {
            writeln!(w, "{t}\ttest").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w, "#seed\t{}", self.seed).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut split = TopicSplit {
            train: BTreeSet::new(),
            test: BTreeSet::new(),
            seed: 0,
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (topic, kind) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected 2 tab-separated fields"))?;
            match (topic, kind) {
                ("#seed", s) => {
                    split.seed = s
                        .parse()
                        .map_err(|_| Error::parse(path, i + 1, "bad seed"))?;
                }
                (t, "train") => {
                    split.train.insert(t.to_string());
                }
                (t, "test") => {
                    split.test.insert(t.to_string());
                }
                (_, other) => {
                    return Err(Error::parse(path, i + 1, format!("unknown kind {other:?}")));
                }
            }
        }
        Ok(split)
    }
}

/// Partition topics into train/test sets, deterministically for a fixed seed.
///
/// The train side gets `round(n * train_fraction)` topics, clamped so both
/// sides stay non-empty.
pub fn split_topics(
    topics: &BTreeSet<String>,
    train_fraction: f64,
    seed: u64,
) -> Result<TopicSplit> {
    if topics.len() < 2 {
        return Err(Error::TooFewTopics(topics.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut ordered: Vec<&String> = topics.iter().collect();
    let mut rng = SeedDerive::new(seed).text("topic-split").rng();
    ordered.shuffle(&mut rng);
    let n = ordered.len();
    let train_count = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let train: BTreeSet<String> = ordered[..train_count]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let test: BTreeSet<String> = ordered[train_count..]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(TopicSplit { train, test, seed })
}

/// Directed follower -> followee graph with both adjacency directions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowerNetwork {
    following: BTreeMap<String, BTreeSet<String>>,
    followers: BTreeMap<String, BTreeSet<String>>,
    edge_count: usize,
}

impl FollowerNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a follower -> followee edge. Self-loops are rejected and
    /// duplicates collapsed; returns what happened for the caller's counters.
    pub fn add_edge(&mut self, follower: &str, followee: &str) -> EdgeInsert {
        if follower == followee {
            return EdgeInsert::SelfLoop;
        }
        let fresh = self
            .following
            .entry(follower.to_string())
            .or_default()
            .insert(followee.to_string());
        if !fresh {
            return EdgeInsert::Duplicate;
        }
        self.followers
            .entry(followee.to_string())
            .or_default()
            .insert(follower.to_string());
        self.edge_count += 1;
        EdgeInsert::Added
    }

    /// Users that `user` follows.
    pub fn followees(&self, user: &str) -> Option<&BTreeSet<String>> {
        self.following.get(user)
    }

    /// Users that follow `user`.
    pub fn followers(&self, user: &str) -> Option<&BTreeSet<String>> {
        self.followers.get(user)
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count == 0
    }

    /// Every user on either side of an edge, ascending, deduplicated.
    pub fn users(&self) -> impl Iterator<Item = &str> {
        let mut all: BTreeSet<&str> = self.following.keys().map(|s| s.as_str()).collect();
        all.extend(self.followers.keys().map(|s| s.as_str()));
        all.into_iter()
    }

    /// Persist as `<follower>\t<followee>` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (follower, followees) in &self.following {
            for followee in followees {
                writeln!(w, "{follower}\t{followee}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Outcome of a single [`FollowerNetwork::add_edge`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeInsert {
    Added,
    Duplicate,
    SelfLoop,
}

/// Parse a follower-edge file.
pub fn parse_follower_network(
    path: impl AsRef<Path>,
    mode: ParseMode,
) -> Result<(FollowerNetwork, ParseStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut network = FollowerNetwork::new();
    let mut stats = ParseStats::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parsed = match line.split_once('\t') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains('\t') => Some((a, b)),
            _ => None,
        };
        match parsed {
            Some((follower, followee)) => match network.add_edge(follower, followee) {
                EdgeInsert::Added => stats.parsed += 1,
                EdgeInsert::Duplicate => stats.duplicates += 1,
                EdgeInsert::SelfLoop => stats.self_loops += 1,
            },
            None => match mode {
                ParseMode::Strict => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        "expected 2 non-empty tab-separated fields",
                    ));
                }
                ParseMode::Lenient => stats.skipped += 1,
            },
        }
    }
    Ok((network, stats))
}

/// user_id -> class label (time-zone string).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeoLabels {
    labels: BTreeMap<String, String>,
}

impl GeoLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, user: &str) -> Option<&str> {
        self.labels.get(user).map(|s| s.as_str())
    }

    /// Insert a label; returns true if the user already had one (overwritten).
    pub fn insert(&mut self, user: &str, label: &str) -> bool {
        self.labels
            .insert(user.to_string(), label.to_string())
            .is_some()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels.iter().map(|(u, l)| (u.as_str(), l.as_str()))
    }

    /// Distinct class labels.
    pub fn classes(&self) -> BTreeSet<&str> {
        self.labels.values().map(|s| s.as_str()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (user, label) in &self.labels {
            writeln!(w, "{user}\t{label}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Parse a geo-label file. On duplicate users the last occurrence wins;
/// the overwrite count is reported in `stats.duplicates`.
pub fn parse_geo_labels(
    path: impl AsRef<Path>,
    mode: ParseMode,
) -> Result<(GeoLabels, ParseStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = GeoLabels::new();
    let mut stats = ParseStats::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parsed = match line.split_once('\t') {
            Some((u, l)) if !u.is_empty() && !l.is_empty() && !l.contains('\t') => Some((u, l)),
            _ => None,
        };
        match parsed {
            Some((user, label)) => {
                if labels.insert(user, label) {
                    stats.duplicates += 1;
                } else {
                    stats.parsed += 1;
                }
            }
            None => match mode {
                ParseMode::Strict => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        "expected 2 non-empty tab-separated fields",
                    ));
                }
                ParseMode::Lenient => stats.skipped += 1,
            },
        }
    }
    Ok((labels, stats))
}
