//! Implicit-feedback subreddit recommendation.
//!
//! The pipeline runs from raw comment logs to ranked subreddit lists:
//!
//! - [`corpus`] parses and filters comments and normalizes their text.
//! - [`interactions`] builds the user × subreddit incidence and its holdout split.
//! - [`embeddings`] trains PV-DBOW document vectors for subreddits and users.
//! - [`als`] fits implicit alternating least squares.
//! - [`ranking`] fits BPR and its two text-augmented variants.
//! - [`eval`] computes pairwise AUC on the holdout.
//! - [`recommend`] answers top-k and popularity queries.
//!
//! Every randomized routine takes an explicit seed.

pub mod als;
pub mod binfmt;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
mod hogwild;
pub mod interactions;
pub mod matrix;
pub mod ranking;
pub mod recommend;
pub mod rng;
pub mod scorer;
pub mod synthetic;

pub use als::{als_objective, train_als, AlsConfig, AlsModel};
pub use corpus::{filter_comments, normalize_text, Comment, FilterPolicy, Stopwords};
pub use embeddings::{train_doc_vectors, Doc2VecConfig, DocTag, DocumentCorpus, TextFeatureSet};
pub use error::{Error, Result};
pub use eval::{auc_bruteforce_oracle, evaluate_auc, AucReport, EvalMode};
pub use interactions::{
    build_dataset, stratified_split, IdMap, Interaction, InteractionDataset, SplitConfig, SplitDataset,
};
pub use matrix::Matrix;
pub use ranking::{train_rank, RankModel, RankScorer, TrainConfig, Variant};
pub use recommend::{popularity_report, top_k, Recommendation};
pub use scorer::Scorer;
