//! Skip-gram embedding training over the walk corpus.
//!
//! The objective trains each user's input vector to predict the users
//! around it on a walk, through either a Huffman-tree hierarchical softmax
//! or negative sampling. [`model::softmax_probability`] and
//! [`model::corpus_log_likelihood`] evaluate the exact softmax for small
//! vocabularies and exist for oracles, not training.

pub mod huffman;
pub mod io;
pub mod loss;
pub mod model;
pub mod train;
pub mod vocab;

pub use huffman::HuffmanTree;
pub use io::RawEmbeddings;
pub use loss::{
    hs_leaf_probability, hs_pair_loss_and_gradients, ns_loss_and_gradients_with_negatives,
    ns_pair_loss_and_gradients, sigmoid, NoiseDistribution, PairGradients,
};
pub use model::{corpus_log_likelihood, softmax_probability, EmbeddingModel};
pub use train::{extract_pairs, index_corpus, subsample, train, TrainConfig, TrainMode};
pub use vocab::Vocabulary;
