//! Value of social tags for exploratory search.
//!
//! A tag is worth something to an information seeker when it both narrows the
//! space of items they have to look at and leads them to items they would
//! find relevant. This crate measures the first with the KL divergence between
//! a seeker's tag-conditioned relevance distribution and their prior one, the
//! second with a generalized Kendall distance between what the tag retrieves
//! and the seeker's top relevant items, and multiplies the two.
//!
//! The pipeline mirrors an offline hidden-vs-random validation:
//!
//! 1. [`corpus`]: parse a tagging trace, sample active users, split each
//!    user's history chronologically into train / param / test segments.
//! 2. [`relevance`]: fit a user-topic-item-tag model by collapsed Gibbs
//!    sampling and tune it with Success@10 on the param segment.
//! 3. [`value`]: score (user, tag) pairs.
//! 4. [`eval`]: compare value distributions of held-out (hidden) tags against
//!    random unused tags with a two-sample KS test and MRR.
//!
//! [`pipeline`] chains the stages and writes every intermediate artifact.
//!
//! Data-parallel loops go through [`Exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod pipeline;
pub mod relevance;
pub mod synth;
pub mod value;

pub use corpus::{Annotation, Corpus, ItemId, SplitFractions, SplitTrace, TagId, TraceFormat, UserId};
pub use error::{Error, Result};
pub use eval::{ExperimentReport, ExperimentSettings, KsResult, Method};
pub use exec::Exec;
pub use pipeline::{PipelineConfig, PipelineReport};
pub use relevance::{RelevanceModel, RelevantSet, TopicModelConfig};
pub use value::{Ranking, TagValueRecord};
