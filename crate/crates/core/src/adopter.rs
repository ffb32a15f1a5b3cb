//! Future-adopter prediction from the first n adopters of a held-out topic.
//!
//! The embedding scorers rank candidates by distance to the seed set S:
//! a candidate pool is gathered by querying each seed's nearest neighbors
//! (fan-out m) and merging, then scored by minimum observed distance or by
//! exact mean distance to S. Frequency Rank and Exposure Rank are the
//! non-embedding baselines, and Precision@k the shared metric.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::embed::NeighborIndex;
use crate::error::{Error, Result};
use crate::ingest::{AdoptionSequence, FollowerNetwork};
use crate::rng::SeedDerive;

/// How embedding candidates are scored against the seed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    /// Minimum distance to any seed.
    Min,
    /// Mean distance over all seeds.
    Average,
}

impl std::fmt::Display for Scorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scorer::Min => "min",
            Scorer::Average => "avg",
        })
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Scorer::Min),
            "avg" | "average" => Ok(Scorer::Average),
            other => Err(Error::InvalidConfig(format!(
                "unknown scorer {other:?} (expected min or avg)"
            ))),
        }
    }
}

/// One ranking task: the first n distinct adopters of a topic plus the
/// result count and per-seed fan-out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionQuery {
    pub topic_id: String,
    /// Deduplicated first adopters, in adoption order.
    pub seeds: Vec<String>,
    /// Results to return.
    pub k: usize,
    /// Neighbors fetched per seed before merging.
    pub fanout: usize,
}

/// The conventional fan-out when none is given.
pub fn default_fanout(k: usize) -> usize {
    10 * k
}

impl PredictionQuery {
    pub fn n(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed set must be non-empty".into()));
        }
        if self.k < 1 || self.fanout < 1 {
            return Err(Error::InvalidConfig(
                "k and fanout must be at least 1".into(),
            ));
        }
        let distinct: BTreeSet<&String> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seed set contains duplicates".into()));
        }
        Ok(())
    }
}

/// Build the query for a test sequence along with its ground truth: seeds
/// are the first `n` distinct adopters, the truth is every later distinct
/// adopter. `None` when the sequence has no adopters beyond position n.
pub fn query_and_truth(
    seq: &AdoptionSequence,
    n: usize,
    k: usize,
    fanout: usize,
) -> Option<(PredictionQuery, BTreeSet<String>)> {
    let adopters = seq.first_adopters();
    if n == 0 || n >= adopters.len() {
        return None;
    }
    let query = PredictionQuery {
        topic_id: seq.topic_id.clone(),
        seeds: adopters[..n].iter().map(|s| s.to_string()).collect(),
        k,
        fanout,
    };
    let truth = adopters[n..].iter().map(|s| s.to_string()).collect();
    Some((query, truth))
}

/// A scored candidate ranking; never contains seed users.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub topic_id: String,
    /// (user, score) ascending by score, ties by user id.
    pub entries: Vec<(String, f64)>,
    pub ground_truth: BTreeSet<String>,
}

impl RankedPrediction {
    pub fn with_ground_truth(mut self, truth: BTreeSet<String>) -> Self {
        self.ground_truth = truth;
        self
    }
}

/// Embedded vectors of the seeds, in seed order; seeds the training
/// vocabulary never saw are dropped.
fn embedded_seeds<'a>(query: &PredictionQuery, index: &'a NeighborIndex) -> Result<Vec<&'a [f64]>> {
    let emb = index.embeddings();
    let vectors: Vec<&[f64]> = query.seeds.iter().filter_map(|s| emb.get(s)).collect();
    if vectors.is_empty() {
        return Err(Error::NoEmbeddedSeeds {
            topic: query.topic_id.clone(),
        });
    }
    Ok(vectors)
}

/// Merge step shared by both scorers: query each embedded seed's `fanout`
/// nearest neighbors (seed users excluded) and keep, per candidate, the
/// minimum distance observed across those lists.
pub fn candidate_pool(
    query: &PredictionQuery,
    index: &NeighborIndex,
) -> Result<BTreeMap<String, f64>> {
    query.validate()?;
    let seeds = embedded_seeds(query, index)?;
    let exclude: BTreeSet<String> = query.seeds.iter().cloned().collect();
    let mut pool: BTreeMap<String, f64> = BTreeMap::new();
    for seed_vector in seeds {
        for (user, distance) in index.knn(seed_vector, query.fanout, &exclude)? {
            pool.entry(user)
                .and_modify(|d| *d = d.min(distance))
                .or_insert(distance);
        }
    }
    Ok(pool)
}

fn top_k(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Rank candidates by minimum distance to the seed set, as observed in the
/// merged per-seed neighbor lists.
pub fn min_score_rank(query: &PredictionQuery, index: &NeighborIndex) -> Result<RankedPrediction> {
    let pool = candidate_pool(query, index)?;
    Ok(RankedPrediction {
        topic_id: query.topic_id.clone(),
        entries: top_k(pool.into_iter().collect(), query.k),
        ground_truth: BTreeSet::new(),
    })
}

/// Rank the pooled candidates by exact mean distance to every embedded
/// seed. The pool still comes from per-seed fan-out, so a candidate outside
/// every seed's neighbor list cannot appear.
pub fn average_score_rank(
    query: &PredictionQuery,
    index: &NeighborIndex,
) -> Result<RankedPrediction> {
    let pool = candidate_pool(query, index)?;
    let seeds = embedded_seeds(query, index)?;
    let emb = index.embeddings();
    let scored: Vec<(String, f64)> = pool
        .into_keys()
        .map(|user| {
            let v = emb.get(&user).expect("pool members come from the index");
            let mean = seeds
                .iter()
                .map(|s| {
                    s.iter()
                        .zip(v)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / seeds.len() as f64;
            (user, mean)
        })
        .collect();
    Ok(RankedPrediction {
        topic_id: query.topic_id.clone(),
        entries: top_k(scored, query.k),
        ground_truth: BTreeSet::new(),
    })
}

/// Dispatch on the configured scorer.
pub fn score_rank(
    query: &PredictionQuery,
    scorer: Scorer,
    index: &NeighborIndex,
) -> Result<RankedPrediction> {
    match scorer {
        Scorer::Min => min_score_rank(query, index),
        Scorer::Average => average_score_rank(query, index),
    }
}

/// Topic-independent baseline: users ordered by how many distinct training
/// topics they adopted.
#[derive(Debug, Clone)]
pub struct FrequencyBaseline {
    counts: HashMap<String, usize>,
    /// (user, count) by count descending, user id ascending.
    ordered: Vec<(String, usize)>,
}

impl FrequencyBaseline {
    pub fn new(train: &[AdoptionSequence]) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for seq in train {
            for user in seq.first_adopters() {
                *counts.entry(user.to_string()).or_insert(0) += 1;
            }
        }
        let mut ordered: Vec<(String, usize)> =
            counts.iter().map(|(u, &c)| (u.clone(), c)).collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        FrequencyBaseline { counts, ordered }
    }

    /// Distinct training topics adopted by `user`.
    pub fn count(&self, user: &str) -> usize {
        self.counts.get(user).copied().unwrap_or(0)
    }

    /// The fixed ranking with `exclude`d users (the topic's seeds) removed.
    pub fn top_k(&self, k: usize, exclude: &BTreeSet<String>) -> Vec<String> {
        self.ordered
            .iter()
            .filter(|(u, _)| !exclude.contains(u))
            .take(k)
            .map(|(u, _)| u.clone())
            .collect()
    }
}

/// Network baseline: candidates scored by how many seeds they follow,
/// descending; zero-exposure users never appear; ties by user id.
pub fn exposure_rank(
    query: &PredictionQuery,
    network: &FollowerNetwork,
    k: usize,
) -> Vec<(String, usize)> {
    let seeds: BTreeSet<&str> = query.seeds.iter().map(|s| s.as_str()).collect();
    let mut exposures: BTreeMap<&str, usize> = BTreeMap::new();
    for seed in &seeds {
        if let Some(followers) = network.followers(seed) {
            for follower in followers {
                if !seeds.contains(follower.as_str()) {
                    *exposures.entry(follower).or_insert(0) += 1;
                }
            }
        }
    }
    let mut scored: Vec<(String, usize)> = exposures
        .into_iter()
        .map(|(u, c)| (u.to_string(), c))
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Fraction of the top-k that are true future adopters. The denominator is
/// always k, even when fewer than k candidates were returned.
pub fn precision_of_list(ranking: &[String], truth: &BTreeSet<String>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let hits = ranking
        .iter()
        .take(k)
        .filter(|u| truth.contains(*u))
        .count();
    Ok(hits as f64 / k as f64)
}

pub fn precision_at_k(prediction: &RankedPrediction, k: usize) -> Result<f64> {
    let users: Vec<String> = prediction.entries.iter().map(|(u, _)| u.clone()).collect();
    precision_of_list(&users, &prediction.ground_truth, k)
}

/// Settings for the held-out evaluation sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdopterEvalConfig {
    /// Seed-set sizes to evaluate.
    pub n_values: Vec<usize>,
    pub k: usize,
    pub scorer: Scorer,
    /// Per-seed fan-out; `None` means 10 * k.
    pub fanout: Option<usize>,
    /// Topics need at least this many distinct adopters to qualify.
    pub min_adopters: usize,
    /// Evaluate at most this many qualifying topics; `None` means all.
    pub sample_size: Option<usize>,
    pub rng_seed: u64,
}

/// One table row: Precision@k for one method on one topic.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub topic_id: String,
    pub n: usize,
    pub method: String,
    pub precision: f64,
}

/// Everything the evaluation emits: the per-topic table, per-method means,
/// bookkeeping counts, and histogram bins for the embedding scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdopterEvaluation {
    pub rows: Vec<EvalRow>,
    /// (method, n, mean precision).
    pub means: Vec<(String, usize, f64)>,
    pub evaluated_topics: usize,
    /// (topic, n) combinations dropped because n covered every adopter.
    pub skipped_short: usize,
    /// Topics where no seed had an embedding (scored 0, flagged here).
    pub seedless_topics: usize,
    /// Ground-truth adopters with no embedding, summed over evaluations;
    /// these cap the achievable precision.
    pub unrankable_adopters: usize,
    /// (bin_start, count) over the embedding scorer's per-topic values,
    /// bin width 0.1, the last bin closed at 1.0.
    pub histogram: Vec<(f64, usize)>,
}

impl AdopterEvaluation {
    /// Tab-separated table plus a `#`-prefixed summary block.
    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut out = || -> std::io::Result<()> {
            writeln!(w, "topic_id\tn\tmethod\tprecision")?;
            for row in &self.rows {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{:.6}",
                    row.topic_id, row.n, row.method, row.precision
                )?;
            }
            for (method, n, mean) in &self.means {
                writeln!(w, "# mean\t{method}\t{n}\t{mean:.6}")?;
            }
            writeln!(w, "# evaluated_topics\t{}", self.evaluated_topics)?;
            writeln!(w, "# skipped_short\t{}", self.skipped_short)?;
            writeln!(w, "# seedless_topics\t{}", self.seedless_topics)?;
            writeln!(w, "# unrankable_adopters\t{}", self.unrankable_adopters)?;
            w.flush()
        };
        out().map_err(|e| Error::io(path, e))
    }

    pub fn write_histogram(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut out = || -> std::io::Result<()> {
            writeln!(w, "bin_start\tcount")?;
            for (start, count) in &self.histogram {
                writeln!(w, "{start:.1}\t{count}")?;
            }
            w.flush()
        };
        out().map_err(|e| Error::io(path, e))
    }

    pub fn mean_for(&self, method: &str, n: usize) -> Option<f64> {
        self.means
            .iter()
            .find(|(m, nn, _)| m == method && *nn == n)
            .map(|&(_, _, mean)| mean)
    }
}

/// Run the evaluation protocol over held-out topics.
///
/// Each test sequence is deduplicated to first adoptions; topics with fewer
/// than `min_adopters` distinct adopters are filtered out, then at most
/// `sample_size` of them are drawn (seeded). For each topic and each n, the
/// embedding scorer plus the frequency baseline (and the exposure baseline
/// when a network is given) are scored with denominator-k precision.
pub fn evaluate_adopter_prediction(
    test: &[AdoptionSequence],
    train: &[AdoptionSequence],
    index: &NeighborIndex,
    network: Option<&FollowerNetwork>,
    cfg: &AdopterEvalConfig,
) -> Result<AdopterEvaluation> {
    if cfg.k < 1 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if cfg.n_values.is_empty() {
        return Err(Error::InvalidConfig("need at least one n value".into()));
    }
    let fanout = cfg.fanout.unwrap_or_else(|| default_fanout(cfg.k));
    let frequency = FrequencyBaseline::new(train);

    let mut qualifying: Vec<&AdoptionSequence> = test
        .iter()
        .filter(|seq| seq.first_adopters().len() >= cfg.min_adopters)
        .collect();
    qualifying.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
    if qualifying.is_empty() {
        return Err(Error::NoTopicsPassFilter {
            min_adopters: cfg.min_adopters,
        });
    }
    if let Some(size) = cfg.sample_size {
        let mut rng = SeedDerive::new(cfg.rng_seed).text("adopter-sample").rng();
        qualifying.shuffle(&mut rng);
        qualifying.truncate(size);
        qualifying.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
    }

    struct TopicOutcome {
        rows: Vec<EvalRow>,
        skipped_short: usize,
        seedless: bool,
        unrankable: usize,
    }

    let emb = index.embeddings();
    let scorer_name = cfg.scorer.to_string();
    let outcomes: Vec<Result<TopicOutcome>> = qualifying
        .par_iter()
        .map(|seq| {
            let mut outcome = TopicOutcome {
                rows: Vec::new(),
                skipped_short: 0,
                seedless: false,
                unrankable: 0,
            };
            for &n in &cfg.n_values {
                let Some((query, truth)) = query_and_truth(seq, n, cfg.k, fanout) else {
                    outcome.skipped_short += 1;
                    continue;
                };
                outcome.unrankable += truth.iter().filter(|u| !emb.contains(u)).count();
                let precision = match score_rank(&query, cfg.scorer, index) {
                    Ok(pred) => precision_at_k(&pred.with_ground_truth(truth.clone()), cfg.k)?,
                    Err(Error::NoEmbeddedSeeds { .. }) => {
                        outcome.seedless = true;
                        0.0
                    }
                    Err(e) => return Err(e),
                };
                outcome.rows.push(EvalRow {
                    topic_id: seq.topic_id.clone(),
                    n,
                    method: scorer_name.clone(),
                    precision,
                });

                let seeds: BTreeSet<String> = query.seeds.iter().cloned().collect();
                let freq_list = frequency.top_k(cfg.k, &seeds);
                outcome.rows.push(EvalRow {
                    topic_id: seq.topic_id.clone(),
                    n,
                    method: "frequency".into(),
                    precision: precision_of_list(&freq_list, &truth, cfg.k)?,
                });

                if let Some(net) = network {
                    let exp_list: Vec<String> = exposure_rank(&query, net, cfg.k)
                        .into_iter()
                        .map(|(u, _)| u)
                        .collect();
                    outcome.rows.push(EvalRow {
                        topic_id: seq.topic_id.clone(),
                        n,
                        method: "exposure".into(),
                        precision: precision_of_list(&exp_list, &truth, cfg.k)?,
                    });
                }
            }
            Ok(outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped_short = 0;
    let mut seedless_topics = 0;
    let mut unrankable_adopters = 0;
    let mut evaluated_topics = 0;
    for outcome in outcomes {
        let outcome = outcome?;
        if !outcome.rows.is_empty() {
            evaluated_topics += 1;
        }
        skipped_short += outcome.skipped_short;
        seedless_topics += outcome.seedless as usize;
        unrankable_adopters += outcome.unrankable;
        rows.extend(outcome.rows);
    }

    let mut sums: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for row in &rows {
        let entry = sums.entry((row.method.clone(), row.n)).or_insert((0.0, 0));
        entry.0 += row.precision;
        entry.1 += 1;
    }
    let means = sums
        .into_iter()
        .map(|((method, n), (sum, count))| (method, n, sum / count as f64))
        .collect();

    let mut bins = vec![0usize; 10];
    for row in rows.iter().filter(|r| r.method == scorer_name) {
        let bin = ((row.precision * 10.0).floor() as usize).min(9);
        bins[bin] += 1;
    }
    let histogram = bins
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 / 10.0, c))
        .collect();

    Ok(AdopterEvaluation {
        rows,
        means,
        evaluated_topics,
        skipped_short,
        seedless_topics,
        unrankable_adopters,
        histogram,
    })
}
