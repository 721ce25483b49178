//! Document similarity from word-embedding densities.
//!
//! Each document is turned into a kernel-regression density over a word
//! embedding and evaluated at `n` random points of a ball that covers the
//! embedding. Rows of the resulting documents-by-points matrix are compared
//! with cosine (or Jensen-Shannon) similarity. The relaxed word mover's
//! distance is provided as a baseline, along with soft top-k accuracy and
//! soft Jaccard agreement for evaluation.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`embedding`] | word2vec text loader, vocabulary intersection |
//! | [`corpus`] | tokenizer, sparse document-feature matrix, TF-IDF |
//! | [`bandwidth`] | Silverman, volume rule, least-squares cross-validation |
//! | [`sampler`] | uniform points in a `d`-ball, counter-based |
//! | [`density`] | density matrix with log-space kernel sums |
//! | [`similarity`] | cosine, Jensen-Shannon, ranking, RWMD |
//! | [`metrics`] | soft top-k accuracy, Jaccard@k, soft Jaccard |
//! | [`io`] | binary matrix and CSV formats |
//! | [`synth`] | labeled synthetic corpora |
//! | [`pipeline`] | end-to-end runners |

pub mod bandwidth;
pub mod corpus;
pub mod density;
pub mod embedding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod points;
pub mod sampler;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use bandwidth::Bandwidth;
pub use corpus::{DocFeatureMatrix, Document, IdfVariant, Transform};
pub use density::{DensityConfig, DensityMatrix, KernelShape, KernelSpec};
pub use embedding::{EmbeddingTable, FeatureId};
pub use error::{Error, Result};
pub use metrics::{LabeledQuery, MetricSummary};
pub use points::PointsView;
pub use sampler::SamplePoints;
pub use similarity::{RankMatrix, RwmdVariant, SimilarityKind, SimilarityMatrix};
