//! Irony detection for English tweets, implemented from scratch.
//!
//! The crate covers the full pipeline: loading the labeled tweet corpus,
//! social-media-aware preprocessing and tokenization, pre-trained embedding
//! handling with sphere-sampled out-of-vocabulary vectors, binary linguistic
//! features, a bidirectional LSTM classifier trained with Adam and early
//! stopping, a four-model ensemble, a TF-IDF + linear-SVM baseline, and the
//! usual binary classification metrics.
//!
//! All numeric code is `f64` and fully deterministic given a seed: the same
//! configuration, data and seed reproduce every reported number bit for bit.

pub mod baseline;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod feats;
pub mod metrics;
pub mod neural;
pub mod optim;
pub mod seeds;
pub mod textprep;
pub mod train;

pub use baseline::{LinearSvmModel, TfidfVocab};
pub use corpus::{Split, Tweet};
pub use embed::{EmbeddingTable, Vocabulary};
pub use error::{Error, Result};
pub use feats::{EncodedExample, FeatureConfig};
pub use metrics::MetricsReport;
pub use neural::{Checkpoint, Gradients, ModelParams};
pub use optim::{AdamHyper, AdamState, EarlyStopping};
pub use textprep::TokenSeq;
pub use train::{Ensemble, TrainConfig};
