//! Corpus preprocessing and the SGD training loop.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::WalkCorpus;
use crate::error::{Error, Result};
use crate::rng::SeedDerive;
use crate::skipgram::huffman::HuffmanTree;
use crate::skipgram::loss::{sigmoid, NoiseDistribution};
use crate::skipgram::model::EmbeddingModel;
use crate::skipgram::vocab::Vocabulary;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Huffman-tree hierarchical softmax (the default).
    HierarchicalSoftmax,
    /// Negative sampling with `negatives` noise draws per pair.
    NegativeSampling { negatives: usize },
}

/// All training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    /// `None` disables subsampling.
    pub subsample_threshold: Option<f64>,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub min_count: u64,
    pub mode: TrainMode,
    pub rng_seed: u64,
    /// 1 = deterministic mode; more workers update the shared matrices
    /// lock-free, tolerating races (results vary run to run).
    pub worker_count: usize,
    /// Shrink the window uniformly per center token (off by default, so the
    /// context definition stays exactly positional).
    pub dynamic_window: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 10,
            subsample_threshold: Some(1e-4),
            epochs: 20,
            initial_learning_rate: 0.025,
            min_count: 1,
            mode: TrainMode::HierarchicalSoftmax,
            rng_seed: 0,
            worker_count: 1,
            dynamic_window: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dim must be at least 1".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.initial_learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.initial_learning_rate
            )));
        }
        if self.worker_count < 1 {
            return Err(Error::InvalidConfig(
                "worker_count must be at least 1".into(),
            ));
        }
        if let Some(t) = self.subsample_threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "subsample threshold must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Randomly discard frequent users from the corpus.
///
/// Each occurrence of user w is dropped independently with probability
/// max(0, 1 - sqrt(threshold / f(w))); tokens below the vocabulary's
/// min_count are always dropped, and emptied walks are removed.
pub fn subsample(
    corpus: &WalkCorpus,
    vocab: &Vocabulary,
    threshold: f64,
    seed: u64,
) -> Result<WalkCorpus> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "subsample threshold must be positive, got {threshold}"
        )));
    }
    let mut rng = SeedDerive::new(seed).text("subsample").rng();
    let mut walks = Vec::new();
    for walk in &corpus.walks {
        let mut kept = Vec::new();
        for user in walk {
            let Some(idx) = vocab.get(user) else { continue };
            let discard = 1.0 - (threshold / vocab.frequency(idx as usize)).sqrt();
            if discard > 0.0 && rng.gen::<f64>() < discard {
                continue;
            }
            kept.push(user.clone());
        }
        if !kept.is_empty() {
            walks.push(kept);
        }
    }
    Ok(WalkCorpus { walks })
}

/// Map walks to vocabulary indices, dropping unknown tokens and walks that
/// end up empty.
pub fn index_corpus(corpus: &WalkCorpus, vocab: &Vocabulary) -> Vec<Vec<u32>> {
    corpus
        .walks
        .iter()
        .map(|walk| {
            walk.iter()
                .filter_map(|u| vocab.get(u))
                .collect::<Vec<u32>>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Enumerate every (center, context) pair within `window` positions.
/// Materialized form of the training pair stream; used by oracles.
pub fn extract_pairs(walks: &[Vec<u32>], window: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for walk in walks {
        for i in 0..walk.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for j in lo..=hi {
                if j != i {
                    pairs.push((walk[i], walk[j]));
                }
            }
        }
    }
    pairs
}

enum Routine {
    Hs(HuffmanTree),
    Ns {
        noise: NoiseDistribution,
        negatives: usize,
    },
}

/// Both parameter matrices behind one lock-free handle.
///
/// In parallel mode workers may update the same row concurrently; those
/// races are tolerated by design and the result is judged statistically.
/// Deterministic mode uses a single worker, so no row is ever aliased.
struct SharedMatrices<'a> {
    input: &'a UnsafeCell<Vec<f64>>,
    context: &'a UnsafeCell<Vec<f64>>,
    dim: usize,
}

unsafe impl Sync for SharedMatrices<'_> {}

impl SharedMatrices<'_> {
    /// Caller must tolerate concurrent writes to the same row.
    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row(&self, idx: usize) -> &mut [f64] {
        let vec = &mut *self.input.get();
        std::slice::from_raw_parts_mut(vec.as_mut_ptr().add(idx * self.dim), self.dim)
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn context_row(&self, idx: usize) -> &mut [f64] {
        let vec = &mut *self.context.get();
        std::slice::from_raw_parts_mut(vec.as_mut_ptr().add(idx * self.dim), self.dim)
    }
}

/// Reusable per-worker buffers for the pair update.
struct Scratch {
    center_grad: Vec<f64>,
    /// (context row, loss coefficient) per target of the current pair.
    targets: Vec<(usize, f64)>,
}

/// One SGD step on the pair (center, context): all gradients are evaluated
/// at the current parameters before any row moves, so the step equals one
/// application of the analytic-gradient functions. An HS path never repeats
/// an inner node, but NS draws can repeat a row, hence the two phases.
unsafe fn sgd_pair_step(
    shared: &SharedMatrices,
    routine: &Routine,
    center: usize,
    context: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) {
    let u = shared.input_row(center);
    scratch.center_grad.fill(0.0);
    scratch.targets.clear();
    match routine {
        Routine::Hs(tree) => {
            let (path, code) = tree.path(context);
            for (&inner, &bit) in path.iter().zip(code) {
                let w = shared.context_row(inner as usize);
                let sign = if bit { -1.0 } else { 1.0 };
                let x: f64 = w.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                let coeff = sign * (sigmoid(sign * x) - 1.0);
                scratch.targets.push((inner as usize, coeff));
                for (g, wi) in scratch.center_grad.iter_mut().zip(w.iter()) {
                    *g += coeff * *wi;
                }
            }
        }
        Routine::Ns { noise, negatives } => {
            for t in 0..=*negatives {
                let (word, label) = if t == 0 {
                    (context, 1.0)
                } else {
                    (noise.sample(rng) as usize, 0.0)
                };
                let w = shared.context_row(word);
                let x: f64 = w.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                let coeff = sigmoid(x) - label;
                scratch.targets.push((word, coeff));
                for (g, wi) in scratch.center_grad.iter_mut().zip(w.iter()) {
                    *g += coeff * *wi;
                }
            }
        }
    }
    for &(word, coeff) in &scratch.targets {
        let w = shared.context_row(word);
        for (wi, ui) in w.iter_mut().zip(u.iter()) {
            *wi -= lr * coeff * *ui;
        }
    }
    for (ui, g) in u.iter_mut().zip(scratch.center_grad.iter()) {
        *ui -= lr * g;
    }
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    shared: &SharedMatrices,
    walks: &[Vec<u32>],
    stride: usize,
    offset: usize,
    routine: &Routine,
    cfg: &TrainConfig,
    processed: &AtomicU64,
    total_updates: f64,
) {
    let mut rng = SeedDerive::new(cfg.rng_seed)
        .text("train-worker")
        .index(offset as u64)
        .rng();
    let mut scratch = Scratch {
        center_grad: vec![0.0; cfg.dim],
        targets: Vec::new(),
    };
    let floor = 1e-4;
    for _epoch in 0..cfg.epochs {
        for walk in walks.iter().skip(offset).step_by(stride) {
            for i in 0..walk.len() {
                let done = processed.fetch_add(1, Ordering::Relaxed) as f64;
                let lr =
                    cfg.initial_learning_rate * (1.0 - done / (total_updates + 1.0)).max(floor);
                let window = if cfg.dynamic_window {
                    rng.gen_range(1..=cfg.window)
                } else {
                    cfg.window
                };
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(walk.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        unsafe {
                            sgd_pair_step(
                                shared,
                                routine,
                                walk[i] as usize,
                                walk[j] as usize,
                                lr,
                                &mut rng,
                                &mut scratch,
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Train the skip-gram model on a walk corpus.
///
/// Builds the vocabulary, optionally subsamples, then runs `epochs` passes
/// of windowed pair updates. The learning rate decays linearly over the
/// total token count to a floor of 1e-4 of the initial rate. With
/// `worker_count` = 1 the result is a pure function of corpus and config.
pub fn train(corpus: &WalkCorpus, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    cfg.validate()?;
    let vocab = Vocabulary::build(corpus, cfg.min_count)?;
    if vocab.len() < 2 {
        return Err(Error::VocabularyTooSmall(vocab.len()));
    }
    let working;
    let walks = match cfg.subsample_threshold {
        Some(t) => {
            working = subsample(corpus, &vocab, t, cfg.rng_seed)?;
            index_corpus(&working, &vocab)
        }
        None => index_corpus(corpus, &vocab),
    };
    let routine = match cfg.mode {
        TrainMode::HierarchicalSoftmax => Routine::Hs(HuffmanTree::build(vocab.counts())?),
        TrainMode::NegativeSampling { negatives } => Routine::Ns {
            noise: NoiseDistribution::new(&vocab, 0.75),
            negatives,
        },
    };
    let mut model = EmbeddingModel::init(vocab, cfg.dim, cfg.rng_seed);
    let token_count: usize = walks.iter().map(|w| w.len()).sum();
    if token_count == 0 {
        return Ok(model); // everything subsampled away; nothing to train
    }
    let total_updates = (cfg.epochs * token_count) as f64;
    let processed = AtomicU64::new(0);

    {
        let (input, context) = model.matrices_mut();
        let input_cell = UnsafeCell::new(std::mem::take(input));
        let context_cell = UnsafeCell::new(std::mem::take(context));
        let shared = SharedMatrices {
            input: &input_cell,
            context: &context_cell,
            dim: cfg.dim,
        };
        let workers = cfg.worker_count.min(walks.len()).max(1);
        if workers == 1 {
            run_worker(
                &shared,
                &walks,
                1,
                0,
                &routine,
                cfg,
                &processed,
                total_updates,
            );
        } else {
            std::thread::scope(|scope| {
                for offset in 0..workers {
                    let shared = &shared;
                    let walks = &walks;
                    let routine = &routine;
                    let processed = &processed;
                    scope.spawn(move || {
                        run_worker(
                            shared,
                            walks,
                            workers,
                            offset,
                            routine,
                            cfg,
                            processed,
                            total_updates,
                        );
                    });
                }
            });
        }
        *input = input_cell.into_inner();
        *context = context_cell.into_inner();
    }
    Ok(model)
}
