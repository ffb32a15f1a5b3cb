//! The embedding parameter matrices and the exact softmax oracle.

use std::collections::HashMap;

use rand::Rng;

use crate::rng::SeedDerive;
use crate::skipgram::vocab::Vocabulary;

/// Input and context matrices, both |V| x d, stored row-major.
///
/// The input matrix holds the user vectors that become the embeddings. The
/// context matrix doubles as storage for the hierarchical-softmax inner-node
/// parameters (|V| - 1 of its rows are used in that mode).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingModel {
    /// Standard initialization: input rows uniform in [-0.5/d, 0.5/d],
    /// context rows zero.
    pub fn init(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let n = vocab.len();
        let mut rng = SeedDerive::new(seed).text("model-init").rng();
        let input = (0..n * dim)
            .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
            .collect();
        EmbeddingModel {
            vocab,
            dim,
            input,
            context: vec![0.0; n * dim],
        }
    }

    /// Build from explicit matrices (tests and oracles).
    pub fn from_parts(vocab: Vocabulary, dim: usize, input: Vec<f64>, context: Vec<f64>) -> Self {
        assert_eq!(input.len(), vocab.len() * dim);
        assert_eq!(context.len(), vocab.len() * dim);
        EmbeddingModel {
            vocab,
            dim,
            input,
            context,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, idx: usize) -> &[f64] {
        &self.input[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.input[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn context_row(&self, idx: usize) -> &[f64] {
        &self.context[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn context_row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.context[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Mutable access to both matrix buffers at once (training hot path).
    pub fn matrices_mut(&mut self) -> (&mut Vec<f64>, &mut Vec<f64>) {
        (&mut self.input, &mut self.context)
    }

    pub fn all_finite(&self) -> bool {
        self.input
            .iter()
            .chain(&self.context)
            .all(|x| x.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact softmax p(context | center) over the whole vocabulary, Eq. style:
/// exp(v'_c . v_u) / sum_w exp(v'_w . v_u). O(|V| d); test oracle only.
pub fn softmax_probability(model: &EmbeddingModel, center: usize, context: usize) -> f64 {
    let u = model.input_row(center);
    let scores: Vec<f64> = (0..model.vocab.len())
        .map(|w| dot(model.context_row(w), u))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    (scores[context] - max).exp() / denom
}

/// Sum of log softmax probabilities over (center, context) pairs.
///
/// The log-denominator is cached per distinct center, so cost is
/// O(distinct centers * |V| d + pairs). Test oracle only.
pub fn corpus_log_likelihood(model: &EmbeddingModel, pairs: &[(u32, u32)]) -> f64 {
    let mut cache: HashMap<u32, (Vec<f64>, f64)> = HashMap::new();
    let mut total = 0.0;
    for &(center, context) in pairs {
        let (scores, log_denom) = cache.entry(center).or_insert_with(|| {
            let u = model.input_row(center as usize);
            let scores: Vec<f64> = (0..model.vocab.len())
                .map(|w| dot(model.context_row(w), u))
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_denom = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            (scores, log_denom)
        });
        total += scores[context as usize] - *log_denom;
    }
    total
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::WalkCorpus;
    use rand::Rng;

    pub(crate) fn toy_vocab(n: usize) -> Vocabulary {
        let corpus = WalkCorpus {
            walks: vec![(0..n).map(|i| format!("u{i:03}")).collect()],
        };
        Vocabulary::build(&corpus, 1).unwrap()
    }

    pub(crate) fn random_model(n: usize, dim: usize, seed: u64) -> EmbeddingModel {
        let mut rng = SeedDerive::new(seed).text("random-model").rng();
        let input = (0..n * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let context = (0..n * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        EmbeddingModel::from_parts(toy_vocab(n), dim, input, context)
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = EmbeddingModel::from_parts(toy_vocab(5), 3, vec![0.0; 15], vec![0.0; 15]);
        for u in 0..5 {
            for c in 0..5 {
                assert!((softmax_probability(&model, u, c) - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_word_closed_form() {
        // v_u = e1, context rows e1 and 0: p(0|u) = e/(e+1)
        let input = vec![1.0, 0.0, 0.0, 0.0];
        let context = vec![1.0, 0.0, 0.0, 0.0];
        let model = EmbeddingModel::from_parts(toy_vocab(2), 2, input, context);
        let p = softmax_probability(&model, 0, 0);
        let expected = std::f64::consts::E / (std::f64::consts::E + 1.0);
        assert!((p - expected).abs() < 1e-9, "p={p}");
        assert!((p - 0.731059).abs() < 1e-6);
        assert!((softmax_probability(&model, 0, 1) - (1.0 - expected)).abs() < 1e-9);
    }

    #[test]
    fn probabilities_normalize() {
        for seed in 0..5 {
            let model = random_model(37, 8, seed);
            for u in [0usize, 11, 36] {
                let sum: f64 = (0..37).map(|c| softmax_probability(&model, u, c)).sum();
                assert!((sum - 1.0).abs() < 1e-12, "seed {seed} sum {sum}");
            }
        }
    }

    #[test]
    fn likelihood_of_empty_pair_set_is_zero() {
        let model = random_model(6, 4, 1);
        assert_eq!(corpus_log_likelihood(&model, &[]), 0.0);
    }

    #[test]
    fn likelihood_uniform_case() {
        let model = EmbeddingModel::from_parts(toy_vocab(4), 3, vec![0.0; 12], vec![0.0; 12]);
        let pairs = [(0, 1), (2, 3), (1, 0)];
        let expected = 3.0 * (0.25f64).ln();
        assert!((corpus_log_likelihood(&model, &pairs) - expected).abs() < 1e-12);
    }

    #[test]
    fn likelihood_matches_per_pair_softmax() {
        let model = random_model(12, 5, 7);
        let pairs = [(0u32, 3u32), (0, 5), (7, 1), (11, 0), (7, 1)];
        let direct: f64 = pairs
            .iter()
            .map(|&(u, c)| softmax_probability(&model, u as usize, c as usize).ln())
            .sum();
        assert!((corpus_log_likelihood(&model, &pairs) - direct).abs() < 1e-9);
    }

    #[test]
    fn init_ranges_and_shapes() {
        let model = EmbeddingModel::init(toy_vocab(10), 8, 3);
        assert!(model.all_finite());
        let bound = 0.5 / 8.0;
        for i in 0..10 {
            for &x in model.input_row(i) {
                assert!(x.abs() <= bound);
            }
            assert!(model.context_row(i).iter().all(|&x| x == 0.0));
        }
        let again = EmbeddingModel::init(toy_vocab(10), 8, 3);
        assert_eq!(model, again);
    }
}
