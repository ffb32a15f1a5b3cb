//! User embeddings learned from the temporal dynamics of topic adoption.
//!
//! The pipeline turns a raw adoption log (who adopted which topic, when)
//! into dense user vectors and runs three analyses on top of them:
//!
//! 1. ingest the log, follower edges, and geo labels ([`ingest`]);
//! 2. build one temporal adoption graph per topic and sample random walks
//!    from it to form a corpus of user-id sentences ([`corpus`]);
//! 3. train skip-gram embeddings over that corpus ([`skipgram`]);
//! 4. consume the normalized vectors: exact nearest-neighbor search
//!    ([`embed`]), future-adopter prediction ([`adopter`]), location
//!    inference ([`geo`]), and neighborhood structure ([`neighborhood`]).
//!
//! [`synth`] generates a small planted-community dataset so the whole
//! pipeline can be exercised end to end without real data. Every stage is
//! deterministic for a fixed seed; see [`rng`].

// Config validation negates the positive check so NaN fails it too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adopter;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod neighborhood;
pub mod rng;
pub mod skipgram;
pub mod synth;

pub use error::{Error, Result};
