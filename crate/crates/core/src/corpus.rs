//! Per-topic temporal graphs and the random-walk corpus sampled from them.
//!
//! Each adoption sequence becomes a directed graph whose edges point
//! time-forward within a window of `tau` seconds and never connect two
//! tweets by the same user. One uniform random walk of up to `gamma` nodes
//! starts from every graph node; the user ids along the walks, one walk per
//! line, form the training corpus.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::AdoptionSequence;
use crate::rng::SeedDerive;

/// Parameters for graph construction and path sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusConfig {
    /// Maximum timestamp gap for an edge, in seconds.
    pub tau_seconds: i64,
    /// Maximum walk length in nodes.
    pub gamma: usize,
    pub rng_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            tau_seconds: 3600,
            gamma: 10,
            rng_seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_seconds <= 0 {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau_seconds
            )));
        }
        if self.gamma < 2 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be at least 2, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Directed graph over the tweets of one adoption sequence.
///
/// Node `i` is the i-th event of the sequence. An edge i -> j exists iff
/// j comes after i in sequence order, t(j) - t(i) <= tau, and the two
/// events have different users. Successor lists are sorted by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGraph {
    pub topic_id: String,
    users: Vec<String>,
    timestamps: Vec<i64>,
    successors: Vec<Vec<u32>>,
}

impl TemporalGraph {
    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(|s| s.len()).sum()
    }

    pub fn user(&self, node: usize) -> &str {
        &self.users[node]
    }

    pub fn timestamp(&self, node: usize) -> i64 {
        self.timestamps[node]
    }

    pub fn successors(&self, node: usize) -> &[u32] {
        &self.successors[node]
    }

    /// All edges as (from, to) pairs, for oracle comparison.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, succ) in self.successors.iter().enumerate() {
            for &j in succ {
                out.push((i as u32, j));
            }
        }
        out
    }

    /// One uniform random walk of up to `gamma` nodes starting at `start`.
    /// Stops early at a node with no successors. Returns node indices.
    pub fn sample_walk(&self, start: usize, gamma: usize, rng: &mut impl Rng) -> Vec<u32> {
        let mut walk = Vec::with_capacity(gamma);
        let mut node = start as u32;
        walk.push(node);
        while walk.len() < gamma {
            let succ = &self.successors[node as usize];
            if succ.is_empty() {
                break;
            }
            node = succ[rng.gen_range(0..succ.len())];
            walk.push(node);
        }
        walk
    }
}

/// Build the temporal graph of one sequence.
///
/// The sequence must already be sorted by timestamp (see
/// [`crate::ingest::group_into_sequences`]); successors of node `i` are the
/// later positions inside its tau window, minus same-user events.
pub fn build_temporal_graph(seq: &AdoptionSequence, cfg: &CorpusConfig) -> TemporalGraph {
    let n = seq.events.len();
    let timestamps: Vec<i64> = seq.events.iter().map(|e| e.timestamp).collect();
    let mut successors = vec![Vec::new(); n];
    for i in 0..n {
        // Sorted timestamps make the tau window a contiguous index range.
        let hi = timestamps.partition_point(|&t| t <= timestamps[i] + cfg.tau_seconds);
        for j in (i + 1)..hi {
            if seq.events[j].user_id != seq.events[i].user_id {
                successors[i].push(j as u32);
            }
        }
    }
    TemporalGraph {
        topic_id: seq.topic_id.clone(),
        users: seq.events.iter().map(|e| e.user_id.clone()).collect(),
        timestamps,
        successors,
    }
}

/// The training corpus: one user-id sentence per sampled walk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<String>>,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    /// Total tokens across walks.
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(|w| w.len()).sum()
    }

    /// Write one walk per line, space-separated user ids.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for walk in &self.walks {
            writeln!(w, "{}", walk.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut walks = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            walks.push(line.split(' ').map(str::to_string).collect());
        }
        Ok(WalkCorpus { walks })
    }
}

/// Sample one walk per node of `graph`, in node order.
///
/// Each node draws from its own RNG stream keyed by (seed, topic, node), so
/// results do not depend on scheduling or on other topics.
pub fn sample_paths(graph: &TemporalGraph, cfg: &CorpusConfig) -> WalkCorpus {
    let walks = (0..graph.node_count())
        .map(|start| {
            let mut rng = SeedDerive::new(cfg.rng_seed)
                .text("walk")
                .text(&graph.topic_id)
                .index(start as u64)
                .rng();
            graph
                .sample_walk(start, cfg.gamma, &mut rng)
                .into_iter()
                .map(|node| graph.user(node as usize).to_string())
                .collect()
        })
        .collect();
    WalkCorpus { walks }
}

/// Build every topic's graph, sample its walks, and concatenate the results
/// in topic order. Topics are processed in parallel; the per-node RNG
/// streams keep the output identical regardless of thread count.
pub fn generate_corpus(sequences: &[AdoptionSequence], cfg: &CorpusConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let per_topic: Vec<WalkCorpus> = sequences
        .par_iter()
        .map(|seq| sample_paths(&build_temporal_graph(seq, cfg), cfg))
        .collect();
    let mut walks = Vec::new();
    for mut corpus in per_topic {
        walks.append(&mut corpus.walks);
    }
    Ok(WalkCorpus { walks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AdoptionEvent;
    use proptest::prelude::*;

    fn seq(topic: &str, events: &[(&str, i64)]) -> AdoptionSequence {
        AdoptionSequence {
            topic_id: topic.into(),
            events: events
                .iter()
                .map(|&(u, ts)| AdoptionEvent {
                    topic_id: topic.into(),
                    user_id: u.into(),
                    timestamp: ts,
                })
                .collect(),
        }
    }

    fn cfg(tau: i64, gamma: usize) -> CorpusConfig {
        CorpusConfig {
            tau_seconds: tau,
            gamma,
            rng_seed: 42,
        }
    }

    /// Brute-force edge set straight from the invariant.
    fn edges_by_enumeration(s: &AdoptionSequence, tau: i64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..s.events.len() {
            for j in 0..s.events.len() {
                let (a, b) = (&s.events[i], &s.events[j]);
                if j > i && b.timestamp - a.timestamp <= tau && a.user_id != b.user_id {
                    out.push((i as u32, j as u32));
                }
            }
        }
        out
    }

    #[test]
    fn window_cuts_late_edge() {
        let s = seq("t", &[("u1", 0), ("u2", 1800), ("u3", 7200)]);
        let g = build_temporal_graph(&s, &cfg(3600, 10));
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn single_event_graph() {
        let s = seq("t", &[("u1", 5)]);
        let g = build_temporal_graph(&s, &cfg(3600, 10));
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn same_user_pair_gets_no_edge() {
        let s = seq("t", &[("u1", 0), ("u1", 60)]);
        let g = build_temporal_graph(&s, &cfg(3600, 10));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn empty_sequence_empty_graph() {
        let s = seq("t", &[]);
        let g = build_temporal_graph(&s, &cfg(3600, 10));
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn simultaneous_events_are_ordered_by_position() {
        let s = seq("t", &[("u1", 100), ("u2", 100)]);
        let g = build_temporal_graph(&s, &cfg(3600, 10));
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn dead_end_walk_is_just_the_node() {
        let s = seq("t", &[("u1", 0), ("u2", 10)]);
        let g = build_temporal_graph(&s, &cfg(100, 10));
        let mut rng = SeedDerive::new(1).rng();
        assert_eq!(g.sample_walk(1, 10, &mut rng), vec![1]);
    }

    #[test]
    fn chain_walk_stops_at_gamma() {
        // 12 users 10s apart with tau=10: each node's only successor is the
        // next one, so the walk from node 0 is forced and exactly gamma long.
        let events: Vec<(String, i64)> = (0..12).map(|i| (format!("u{i}"), i * 10)).collect();
        let refs: Vec<(&str, i64)> = events.iter().map(|(u, t)| (u.as_str(), *t)).collect();
        let s = seq("t", &refs);
        let g = build_temporal_graph(&s, &cfg(10, 10));
        for i in 0..11 {
            assert_eq!(g.successors(i), &[i as u32 + 1]);
        }
        let mut rng = SeedDerive::new(1).rng();
        let walk = g.sample_walk(0, 10, &mut rng);
        assert_eq!(walk.len(), 10);
        assert_eq!(walk, (0..10).collect::<Vec<u32>>());
    }

    #[test]
    fn branching_walks_choose_uniformly() {
        // u2 tweets twice after u1; both are successors of node 0 but not of
        // each other, so every walk from 0 is two nodes and the second pick
        // should split evenly.
        let s = seq("t", &[("u1", 0), ("u2", 1), ("u2", 2)]);
        let g = build_temporal_graph(&s, &cfg(10, 10));
        assert_eq!(g.successors(0), &[1, 2]);
        assert_eq!(g.edge_count(), 2);
        let mut rng = SeedDerive::new(9).rng();
        let mut through_first = 0usize;
        let total = 10_000;
        for _ in 0..total {
            let walk = g.sample_walk(0, 10, &mut rng);
            assert_eq!(walk.len(), 2);
            if walk[1] == 1 {
                through_first += 1;
            }
        }
        let fraction = through_first as f64 / total as f64;
        assert!((0.48..=0.52).contains(&fraction), "fraction {fraction}");
    }

    #[test]
    fn corpus_concatenates_in_topic_order() {
        let sequences = vec![
            seq("a", &[("u1", 0), ("u2", 5)]),
            seq("b", &[("u3", 0), ("u4", 5), ("u5", 6)]),
        ];
        let corpus = generate_corpus(&sequences, &cfg(10, 10)).unwrap();
        assert_eq!(corpus.len(), 5);
        assert_eq!(corpus.walks[0][0], "u1");
        assert_eq!(corpus.walks[2][0], "u3");
    }

    #[test]
    fn empty_input_empty_corpus() {
        let corpus = generate_corpus(&[], &cfg(3600, 10)).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let sequences: Vec<AdoptionSequence> = (0..5)
            .map(|t| {
                let events: Vec<(String, i64)> =
                    (0..20).map(|i| (format!("u{}", i % 7), i * 3)).collect();
                let refs: Vec<(&str, i64)> = events.iter().map(|(u, t)| (u.as_str(), *t)).collect();
                seq(&format!("topic{t}"), &refs)
            })
            .collect();
        let c = cfg(30, 10);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("c1.txt");
        let p2 = dir.path().join("c2.txt");
        generate_corpus(&sequences, &c).unwrap().save(&p1).unwrap();
        generate_corpus(&sequences, &c).unwrap().save(&p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert!(!b1.is_empty());
        assert_eq!(b1, b2);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0, 10).validate().is_err());
        assert!(cfg(3600, 1).validate().is_err());
        assert!(cfg(3600, 2).validate().is_ok());
    }

    #[test]
    fn corpus_file_round_trip() {
        let corpus = WalkCorpus {
            walks: vec![vec!["u1".into(), "u2".into()], vec!["u3".into()]],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        corpus.save(&path).unwrap();
        assert_eq!(WalkCorpus::load(&path).unwrap(), corpus);
    }

    fn sequence_strategy() -> impl Strategy<Value = AdoptionSequence> {
        proptest::collection::vec(("[a-e]", 0i64..200), 0..30).prop_map(|pairs| {
            let mut events: Vec<AdoptionEvent> = pairs
                .into_iter()
                .map(|(u, ts)| AdoptionEvent {
                    topic_id: "t".into(),
                    user_id: u,
                    timestamp: ts,
                })
                .collect();
            events.sort_by_key(|e| e.timestamp);
            AdoptionSequence {
                topic_id: "t".into(),
                events,
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn graph_matches_pair_enumeration(s in sequence_strategy(), tau in 1i64..100) {
            let g = build_temporal_graph(&s, &cfg(tau, 10));
            prop_assert_eq!(g.edges(), edges_by_enumeration(&s, tau));
        }

        #[test]
        fn walks_are_time_forward_within_tau(s in sequence_strategy(), tau in 1i64..100, seed: u64) {
            let c = CorpusConfig { tau_seconds: tau, gamma: 10, rng_seed: seed };
            let g = build_temporal_graph(&s, &c);
            for start in 0..g.node_count() {
                let mut rng = SeedDerive::new(seed).index(start as u64).rng();
                let walk = g.sample_walk(start, c.gamma, &mut rng);
                prop_assert!(walk.len() <= c.gamma);
                for w in walk.windows(2) {
                    let gap = g.timestamp(w[1] as usize) - g.timestamp(w[0] as usize);
                    prop_assert!((0..=tau).contains(&gap));
                    // every step must be a real edge
                    prop_assert!(g.successors(w[0] as usize).contains(&w[1]));
                }
            }
        }

        #[test]
        fn one_walk_per_tweet(seqs in proptest::collection::vec(sequence_strategy(), 0..6)) {
            let seqs: Vec<AdoptionSequence> = seqs
                .into_iter()
                .enumerate()
                .map(|(i, mut s)| {
                    s.topic_id = format!("t{i}");
                    for e in &mut s.events {
                        e.topic_id = s.topic_id.clone();
                    }
                    s
                })
                .collect();
            let total: usize = seqs.iter().map(|s| s.len()).sum();
            let corpus = generate_corpus(&seqs, &cfg(50, 10)).unwrap();
            prop_assert_eq!(corpus.len(), total);
        }
    }
}
