//! Geo-class inference: one-vs-rest logistic regression on embedding
//! features, compared against a majority-guess baseline and a
//! friend-majority baseline that votes over a user's followees.
//!
//! The solver is batch gradient descent with Armijo backtracking. The bias
//! is carried as a constant-1 feature so the whole extended weight vector
//! is L2-regularized uniformly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::embed::NormalizedEmbeddings;
use crate::error::{Error, Result};
use crate::ingest::{FollowerNetwork, GeoLabels};
use crate::rng::SeedDerive;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    /// L2 regularization strength.
    pub l2: f64,
    /// Stop when the gradient L2 norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1.0,
            tolerance: 1e-5,
            max_iterations: 1000,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return Err(Error::InvalidConfig(
                "regularization strength must be finite and non-negative".into(),
            ));
        }
        if self.tolerance <= 0.0 || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one binary fit; `weights` has dim + 1 entries, the last being
/// the bias on the constant feature.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub final_loss: f64,
    pub gradient_norm: f64,
}

/// ln(1 + e^a) without overflow.
fn log1p_exp(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

fn extended_dot(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// Regularized negative log-likelihood and its gradient in the extended
/// weight space.
pub fn loss_and_gradient(
    features: &[&[f64]],
    targets: &[bool],
    w: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = w.len() - 1;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (x, &t) in features.iter().zip(targets) {
        let score = extended_dot(w, x);
        let y = if t { 1.0 } else { -1.0 };
        loss += log1p_exp(-y * score);
        let sigma = 1.0 / (1.0 + (-score).exp().min(f64::MAX));
        let coeff = sigma - if t { 1.0 } else { 0.0 };
        for (g, &xi) in grad[..d].iter_mut().zip(*x) {
            *g += coeff * xi;
        }
        grad[d] += coeff;
    }
    for (g, &wi) in grad.iter_mut().zip(w) {
        *g += l2 * wi;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss, grad)
}

/// Gradient descent from a given starting point. The objective is convex,
/// so the optimum does not depend on `init`; exposing it lets tests verify
/// exactly that.
pub fn fit_binary_from(
    features: &[&[f64]],
    targets: &[bool],
    init: &[f64],
    cfg: &LogisticConfig,
) -> Result<BinaryFit> {
    cfg.validate()?;
    if features.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "feature and target counts differ".into(),
        ));
    }
    let mut w = init.to_vec();
    let (mut loss, mut grad) = loss_and_gradient(features, targets, &w, cfg.l2);
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    for _ in 0..cfg.max_iterations {
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        if grad_sq.sqrt() < cfg.tolerance {
            break;
        }
        iterations += 1;
        // Armijo backtracking: shrink until sufficient decrease
        step = (step * 2.0).min(1e6);
        loop {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi - step * g).collect();
            let (trial_loss, trial_grad) = loss_and_gradient(features, targets, &trial, cfg.l2);
            if trial_loss <= loss - 1e-4 * step * grad_sq {
                w = trial;
                loss = trial_loss;
                grad = trial_grad;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                // flat to machine precision; gradient check ends the loop
                break;
            }
        }
    }
    let gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(BinaryFit {
        weights: w,
        iterations,
        final_loss: loss,
        gradient_norm,
    })
}

/// Binary fit from the zero vector.
pub fn fit_binary(
    features: &[&[f64]],
    targets: &[bool],
    cfg: &LogisticConfig,
) -> Result<BinaryFit> {
    let dim = features.first().map_or(0, |x| x.len());
    fit_binary_from(features, targets, &vec![0.0; dim + 1], cfg)
}

/// One-vs-rest model: one weight vector and bias per class, classes sorted
/// ascending.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub classes: Vec<String>,
    pub dim: usize,
    /// Per-class weight vectors, each of length `dim`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub l2: f64,
    pub iterations: Vec<usize>,
}

impl ClassifierModel {
    /// Per-class linear scores for one feature vector.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut out = || -> std::io::Result<()> {
            writeln!(w, "{} {}", self.classes.len(), self.dim)?;
            for ((class, weights), bias) in self.classes.iter().zip(&self.weights).zip(&self.biases)
            {
                write!(w, "{class} {bias:.12e}")?;
                for v in weights {
                    write!(w, " {v:.12e}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        out().map_err(|e| Error::io(path, e))
    }
}

/// Train one binary problem per observed class, in parallel over classes.
pub fn train_ovr_logistic(
    features: &[&[f64]],
    labels: &[&str],
    cfg: &LogisticConfig,
) -> Result<ClassifierModel> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "feature and label counts differ".into(),
        ));
    }
    let mut classes: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = features.first().map_or(0, |x| x.len());
    if features.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: features.iter().find(|x| x.len() != dim).unwrap().len(),
        });
    }

    let fits: Vec<Result<BinaryFit>> = classes
        .par_iter()
        .map(|class| {
            let targets: Vec<bool> = labels.iter().map(|l| *l == class).collect();
            fit_binary(features, &targets, cfg)
        })
        .collect();

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut iterations = Vec::with_capacity(classes.len());
    for fit in fits {
        let mut fit = fit?;
        if fit.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "training produced non-finite weights".into(),
            ));
        }
        let bias = fit.weights.pop().expect("extended vector is non-empty");
        weights.push(fit.weights);
        biases.push(bias);
        iterations.push(fit.iterations);
    }
    Ok(ClassifierModel {
        classes,
        dim,
        weights,
        biases,
        l2: cfg.l2,
        iterations,
    })
}

/// Argmax of the per-class scores; ties go to the earlier class.
pub fn predict_class<'a>(model: &'a ClassifierModel, x: &[f64]) -> Result<&'a str> {
    let scores = model.scores(x)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(&model.classes[best])
}

/// Modal class of the training labels, ties by class order.
pub fn majority_class<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for label in labels {
        *counts.entry(label).or_insert(0) += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (class, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((class, count));
        }
    }
    best.map(|(class, _)| class.to_string())
}

/// Predicts the modal label among a user's followees that appear in the
/// training labels; falls back to the overall modal train class when no
/// followee is labeled. Ties break by class order.
pub struct FriendMajority<'a> {
    network: &'a FollowerNetwork,
    train: &'a BTreeMap<String, String>,
    fallback: String,
}

impl<'a> FriendMajority<'a> {
    pub fn new(network: &'a FollowerNetwork, train: &'a BTreeMap<String, String>) -> Option<Self> {
        let fallback = majority_class(train.values().map(|s| s.as_str()))?;
        Some(FriendMajority {
            network,
            train,
            fallback,
        })
    }

    pub fn predict(&self, user: &str) -> &str {
        let Some(followees) = self.network.followees(user) else {
            return &self.fallback;
        };
        let labeled = followees
            .iter()
            .filter_map(|f| self.train.get(f))
            .map(|s| s.as_str());
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for label in labeled {
            *counts.entry(label).or_insert(0) += 1;
        }
        let mut best: Option<(&str, usize)> = None;
        for (class, count) in counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((class, count));
            }
        }
        match best {
            Some((class, _)) => {
                // reborrow from the train map so the lifetime outlives self
                self.train
                    .values()
                    .map(|s| s.as_str())
                    .find(|s| *s == class)
                    .expect("class came from the train map")
            }
            None => &self.fallback,
        }
    }
}

/// Shuffle `users` with the derived seed and split off the first
/// round(n * fraction) as the train side.
pub fn split_users(
    users: &[String],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {fraction}"
        )));
    }
    let total = users.len();
    let train_count = (total as f64 * fraction).round() as usize;
    if train_count == 0 {
        return Err(Error::EmptyTrainSet { fraction, total });
    }
    if train_count >= total {
        return Err(Error::InvalidConfig(format!(
            "train fraction {fraction} leaves no test users (total {total})"
        )));
    }
    let mut shuffled = users.to_vec();
    let mut rng = SeedDerive::new(seed).text("geo-split").rng();
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(train_count);
    Ok((shuffled, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoAccuracyRow {
    pub method: String,
    pub train_fraction: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoEvalConfig {
    /// Train fractions to sweep, e.g. 0.01, 0.05, 0.10.
    pub fractions: Vec<f64>,
    /// Evaluate on at most this many labeled users.
    pub sample_size: Option<usize>,
    pub rng_seed: u64,
    pub logistic: LogisticConfig,
}

/// Sweep train fractions; per fraction, fit the classifier and score all
/// methods on the held-out users. Only users with both a label and an
/// embedding participate.
pub fn evaluate_geo(
    embeddings: &NormalizedEmbeddings,
    labels: &GeoLabels,
    network: Option<&FollowerNetwork>,
    cfg: &GeoEvalConfig,
) -> Result<Vec<GeoAccuracyRow>> {
    cfg.logistic.validate()?;
    if cfg.fractions.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one train fraction".into(),
        ));
    }
    let mut eligible: Vec<String> = labels
        .iter()
        .filter(|(user, _)| embeddings.contains(user))
        .map(|(user, _)| user.to_string())
        .collect();
    if let Some(size) = cfg.sample_size {
        let mut rng = SeedDerive::new(cfg.rng_seed).text("geo-sample").rng();
        eligible.shuffle(&mut rng);
        eligible.truncate(size);
        eligible.sort();
    }

    let mut rows = Vec::new();
    for (i, &fraction) in cfg.fractions.iter().enumerate() {
        let split_seed = SeedDerive::new(cfg.rng_seed)
            .text("geo-eval")
            .index(i as u64)
            .seed();
        let (train, test) = split_users(&eligible, fraction, split_seed)?;

        let features: Vec<&[f64]> = train
            .iter()
            .map(|u| embeddings.get(u).expect("eligible users are embedded"))
            .collect();
        let train_labels: Vec<&str> = train
            .iter()
            .map(|u| labels.get(u).expect("eligible users are labeled"))
            .collect();
        let model = train_ovr_logistic(&features, &train_labels, &cfg.logistic)?;

        let truth: Vec<&str> = test
            .iter()
            .map(|u| labels.get(u).expect("eligible users are labeled"))
            .collect();

        let predicted: Vec<&str> = test
            .iter()
            .map(|u| predict_class(&model, embeddings.get(u).unwrap()))
            .collect::<Result<_>>()?;
        rows.push(GeoAccuracyRow {
            method: "logistic".into(),
            train_fraction: fraction,
            accuracy: accuracy(&predicted, &truth),
        });

        let modal = majority_class(train_labels.iter().copied()).expect("train is non-empty");
        let majority_predictions: Vec<&str> = vec![modal.as_str(); test.len()];
        rows.push(GeoAccuracyRow {
            method: "majority".into(),
            train_fraction: fraction,
            accuracy: accuracy(&majority_predictions, &truth),
        });

        if let Some(net) = network {
            let train_map: BTreeMap<String, String> = train
                .iter()
                .map(|u| (u.clone(), labels.get(u).unwrap().to_string()))
                .collect();
            let friend = FriendMajority::new(net, &train_map).expect("train is non-empty");
            let friend_predictions: Vec<&str> = test.iter().map(|u| friend.predict(u)).collect();
            rows.push(GeoAccuracyRow {
                method: "friend_majority".into(),
                train_fraction: fraction,
                accuracy: accuracy(&friend_predictions, &truth),
            });
        }
    }
    Ok(rows)
}

fn accuracy(predicted: &[&str], truth: &[&str]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / predicted.len() as f64
}

pub fn write_accuracy_table(rows: &[GeoAccuracyRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut out = || -> std::io::Result<()> {
        writeln!(w, "method\ttrain_fraction\taccuracy")?;
        for row in rows {
            writeln!(
                w,
                "{}\t{}\t{:.6}",
                row.method, row.train_fraction, row.accuracy
            )?;
        }
        w.flush()
    };
    out().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn two_clusters(per_cluster: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let mut rng = SeedDerive::new(seed).text("geo-test-clusters").rng();
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..per_cluster * 2 {
            let (center, label) = if i % 2 == 0 {
                ([2.0, 0.0], "east")
            } else {
                ([-2.0, 0.0], "west")
            };
            features.push(vec![
                center[0] + noise.sample(&mut rng),
                center[1] + noise.sample(&mut rng),
            ]);
            labels.push(label);
        }
        (features, labels)
    }

    fn as_slices(features: &[Vec<f64>]) -> Vec<&[f64]> {
        features.iter().map(|f| f.as_slice()).collect()
    }

    #[test]
    fn separable_clusters_reach_high_training_accuracy() {
        let (features, labels) = two_clusters(100, 7);
        let slices = as_slices(&features);
        let model = train_ovr_logistic(&slices, &labels, &LogisticConfig::default()).unwrap();
        let correct = slices
            .iter()
            .zip(&labels)
            .filter(|(x, l)| predict_class(&model, x).unwrap() == **l)
            .count();
        assert!(
            correct as f64 / labels.len() as f64 >= 0.99,
            "train accuracy {correct}/{}",
            labels.len()
        );
    }

    #[test]
    fn final_loss_is_independent_of_initialization() {
        let (features, labels) = two_clusters(40, 11);
        let slices = as_slices(&features);
        let targets: Vec<bool> = labels.iter().map(|l| *l == "east").collect();
        let cfg = LogisticConfig {
            tolerance: 1e-8,
            ..LogisticConfig::default()
        };
        let mut losses = Vec::new();
        for restart in 0..5 {
            let mut rng = SeedDerive::new(restart).text("geo-restart").rng();
            let init: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let fit = fit_binary_from(&slices, &targets, &init, &cfg).unwrap();
            losses.push(fit.final_loss);
        }
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max - min < 1e-6, "losses spread {losses:?}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (features, labels) = two_clusters(15, 3);
        let slices = as_slices(&features);
        let targets: Vec<bool> = labels.iter().map(|l| *l == "east").collect();
        let mut rng = SeedDerive::new(5).text("geo-fd").rng();
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&slices, &targets, &w, 1.0);
        let h = 1e-5;
        for j in 0..w.len() {
            let mut plus = w.clone();
            plus[j] += h;
            let mut minus = w.clone();
            minus[j] -= h;
            let (lp, _) = loss_and_gradient(&slices, &targets, &plus, 1.0);
            let (lm, _) = loss_and_gradient(&slices, &targets, &minus, 1.0);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = grad[j].abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((grad[j] - numeric) / denom).abs() < 1e-4,
                "coordinate {j}: exact {} numeric {numeric}",
                grad[j]
            );
        }
    }

    #[test]
    fn ovr_training_decomposes_per_class() {
        let mut rng = SeedDerive::new(23).text("geo-decompose").rng();
        let features: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let classes = ["a", "b", "c"];
        let labels: Vec<&str> = (0..60).map(|i| classes[i % 3]).collect();
        let slices = as_slices(&features);
        let cfg = LogisticConfig::default();
        let model = train_ovr_logistic(&slices, &labels, &cfg).unwrap();
        // fitting each class alone, in any order, gives the same weights
        for (ci, class) in ["c", "a", "b"]
            .iter()
            .flat_map(|c| model.classes.iter().position(|m| m == c).map(|ci| (ci, *c)))
        {
            let targets: Vec<bool> = labels.iter().map(|l| *l == class).collect();
            let fit = fit_binary(&slices, &targets, &cfg).unwrap();
            for (a, b) in model.weights[ci].iter().zip(&fit.weights) {
                assert!((a - b).abs() < 1e-8);
            }
            assert!((model.biases[ci] - fit.weights[4]).abs() < 1e-8);
        }
    }

    #[test]
    fn predict_ties_go_to_first_class() {
        let model = ClassifierModel {
            classes: vec!["alpha".into(), "beta".into()],
            dim: 2,
            weights: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            biases: vec![0.0, 0.0],
            l2: 1.0,
            iterations: vec![0, 0],
        };
        assert_eq!(predict_class(&model, &[1.0, -1.0]).unwrap(), "alpha");
        let model = ClassifierModel {
            weights: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            ..model
        };
        assert_eq!(predict_class(&model, &[1.0, 0.0]).unwrap(), "beta");
        assert!(matches!(
            predict_class(&model, &[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn single_class_training_is_rejected() {
        let features = vec![vec![1.0], vec![2.0]];
        let slices = as_slices(&features);
        assert!(matches!(
            train_ovr_logistic(&slices, &["same", "same"], &LogisticConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn majority_class_breaks_ties_by_order() {
        assert_eq!(majority_class(["a", "a", "b"]).unwrap(), "a");
        assert_eq!(majority_class(["b", "a"]).unwrap(), "a");
        assert_eq!(majority_class(["z", "z", "y", "y", "x"]).unwrap(), "y");
        assert!(majority_class([]).is_none());
    }

    #[test]
    fn friend_majority_recount_on_a_small_graph() {
        let mut net = FollowerNetwork::new();
        for (follower, followee) in [
            ("q", "t1"),
            ("q", "t2"),
            ("q", "t3"),
            ("r", "t3"),
            ("s", "unlabeled"),
        ] {
            net.add_edge(follower, followee);
        }
        let train: BTreeMap<String, String> = [
            ("t1", "A"),
            ("t2", "A"),
            ("t3", "B"),
            ("t4", "B"),
            ("t5", "B"),
        ]
        .iter()
        .map(|(u, l)| (u.to_string(), l.to_string()))
        .collect();
        let friend = FriendMajority::new(&net, &train).unwrap();
        // q follows {A, A, B} -> A
        assert_eq!(friend.predict("q"), "A");
        // r follows {B} -> B
        assert_eq!(friend.predict("r"), "B");
        // s has no labeled followees -> modal train class B
        assert_eq!(friend.predict("s"), "B");
        // unknown user -> fallback
        assert_eq!(friend.predict("nobody"), "B");
    }

    #[test]
    fn split_users_is_disjoint_and_seeded() {
        let users: Vec<String> = (0..100).map(|i| format!("u{i:03}")).collect();
        let (train, test) = split_users(&users, 0.1, 9).unwrap();
        assert_eq!(train.len(), 10);
        assert_eq!(test.len(), 90);
        for u in &train {
            assert!(!test.contains(u));
        }
        let (train2, _) = split_users(&users, 0.1, 9).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = split_users(&users, 0.1, 10).unwrap();
        assert_ne!(train, train3);

        assert!(matches!(
            split_users(&users[..3], 0.01, 0),
            Err(Error::EmptyTrainSet { total: 3, .. })
        ));
        assert!(split_users(&users, 0.999, 0).is_err());
        assert!(split_users(&users, 1.5, 0).is_err());
    }

    #[test]
    fn clustered_embeddings_beat_majority_at_small_fractions() {
        use crate::skipgram::RawEmbeddings;
        // three classes at well-separated directions with small noise
        let mut rng = SeedDerive::new(40).text("geo-eval-test").rng();
        let centers = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut vectors = Vec::new();
        let mut geo = GeoLabels::new();
        for i in 0..180 {
            let class = i % 3;
            let user = format!("u{i:03}");
            let v: Vec<f64> = centers[class]
                .iter()
                .map(|c| c + rng.gen_range(-0.2..0.2))
                .collect();
            vectors.push((user.clone(), v));
            geo.insert(&user, ["east", "mid", "west"][class]);
        }
        let (emb, _) =
            crate::embed::NormalizedEmbeddings::from_raw(&RawEmbeddings { dim: 3, vectors });
        let cfg = GeoEvalConfig {
            fractions: vec![0.05, 0.10],
            sample_size: None,
            rng_seed: 1,
            logistic: LogisticConfig::default(),
        };
        let rows = evaluate_geo(&emb, &geo, None, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for fraction in [0.05, 0.10] {
            let get = |method: &str| {
                rows.iter()
                    .find(|r| r.method == method && r.train_fraction == fraction)
                    .unwrap()
                    .accuracy
            };
            assert!((0.0..=1.0).contains(&get("majority")));
            assert!(
                get("logistic") > get("majority"),
                "fraction {fraction}: logistic {} vs majority {}",
                get("logistic"),
                get("majority")
            );
        }
    }

    #[test]
    fn majority_accuracy_equals_modal_test_frequency() {
        use crate::skipgram::RawEmbeddings;
        let mut rng = SeedDerive::new(77).text("geo-majority").rng();
        let mut vectors = Vec::new();
        let mut geo = GeoLabels::new();
        for i in 0..60 {
            let user = format!("u{i:02}");
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            vectors.push((user.clone(), v));
            // 2:1 imbalance
            geo.insert(&user, if i % 3 == 0 { "rare" } else { "common" });
        }
        let (emb, _) =
            crate::embed::NormalizedEmbeddings::from_raw(&RawEmbeddings { dim: 3, vectors });
        let cfg = GeoEvalConfig {
            fractions: vec![0.2],
            sample_size: None,
            rng_seed: 3,
            logistic: LogisticConfig::default(),
        };
        let rows = evaluate_geo(&emb, &geo, None, &cfg).unwrap();
        let majority = rows.iter().find(|r| r.method == "majority").unwrap();

        // recount: rebuild the same split and count the modal class in test
        let eligible: Vec<String> = geo.iter().map(|(u, _)| u.to_string()).collect();
        let split_seed = SeedDerive::new(3).text("geo-eval").index(0).seed();
        let (train, test) = split_users(&eligible, 0.2, split_seed).unwrap();
        let modal = majority_class(train.iter().map(|u| geo.get(u).unwrap())).unwrap();
        let expected =
            test.iter().filter(|u| geo.get(u).unwrap() == modal).count() as f64 / test.len() as f64;
        assert!((majority.accuracy - expected).abs() < 1e-12);
    }
}
