//! End-to-end runners shared by the command-line tool, the benchmarks and the
//! integration tests.

use std::collections::{HashSet, BTreeSet};
use std::time::{Duration, Instant};

use crate::bandwidth::{self, Bandwidth};
use crate::corpus::{self, DocFeatureMatrix, Transform};
use crate::density::{self, CrossDensities, DensityConfig, KernelShape, KernelSpec};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::sampler::{self, SamplePoints};
use crate::similarity::{self, RwmdVariant, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMethod {
    Volume,
    /// Per-axis Silverman bandwidths; `diagonal = false` keeps only their
    /// geometric mean.
    Silverman { diagonal: bool },
    /// Grid search spanning `[h_V / 64, 4 h_V]` geometrically.
    Lscv { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsSimilarity {
    Cosine,
    JensenShannon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsParams {
    pub kernel: KernelShape,
    pub bandwidth: BandwidthMethod,
    pub adjust: f64,
    pub n_points: usize,
    pub seed: u64,
    pub normalize: bool,
    pub similarity: DsSimilarity,
    pub radius_quantile: f64,
    pub q_low: f64,
    pub q_high: f64,
}

impl Default for DsParams {
    fn default() -> Self {
        Self {
            kernel: KernelShape::Gaussian,
            bandwidth: BandwidthMethod::Volume,
            adjust: 1.0,
            n_points: 1000,
            seed: 0,
            normalize: false,
            similarity: DsSimilarity::Cosine,
            radius_quantile: sampler::DEFAULT_RADIUS_QUANTILE,
            q_low: bandwidth::DEFAULT_Q_LOW,
            q_high: bandwidth::DEFAULT_Q_HIGH,
        }
    }
}

/// Bandwidth estimate for the embedding, before any adjustment factor.
pub fn estimate_bandwidth(
    emb: &EmbeddingTable,
    method: BandwidthMethod,
    q_low: f64,
    q_high: f64,
) -> Result<Bandwidth> {
    match method {
        BandwidthMethod::Volume => {
            bandwidth::volume_bandwidth(&emb.vector_norms(), emb.dim(), emb.len(), q_low, q_high)
        }
        BandwidthMethod::Silverman { diagonal } => {
            let b = bandwidth::silverman_bandwidth(emb.into())?;
            if diagonal {
                Ok(b)
            } else {
                Bandwidth::scalar(b.h())
            }
        }
        BandwidthMethod::Lscv { steps } => {
            let hv = bandwidth::volume_bandwidth(&emb.vector_norms(), emb.dim(), emb.len(), q_low, q_high)?
                .h();
            let grid = bandwidth::geometric_grid(hv / 64.0, hv * 4.0, steps.max(1));
            bandwidth::lscv_minimize(emb.into(), &grid)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsTimings {
    /// Bandwidth, sample points and density matrices.
    pub density: Duration,
    pub similarity: Duration,
}

impl DsTimings {
    pub fn total(&self) -> Duration {
        self.density + self.similarity
    }
}

#[derive(Debug, Clone)]
pub struct DsOutput {
    pub bandwidth: Bandwidth,
    pub samples: SamplePoints,
    pub densities: CrossDensities,
    pub similarity: SimilarityMatrix,
    pub timings: DsTimings,
}

/// Density-similarity scores between `queries` and `items`. Pass the same
/// reference twice for a single corpus; one density matrix is then built.
pub fn run_ds(
    queries: &DocFeatureMatrix,
    items: &DocFeatureMatrix,
    emb: &EmbeddingTable,
    p: &DsParams,
) -> Result<DsOutput> {
    if p.n_points == 0 {
        return Err(Error::invalid("number of sample points must be at least 1"));
    }
    let t0 = Instant::now();
    let bw = estimate_bandwidth(emb, p.bandwidth, p.q_low, p.q_high)?.adjusted(p.adjust)?;
    let radius = sampler::sampling_radius(&emb.vector_norms(), p.radius_quantile)?;
    let samples = sampler::sample_ball(p.n_points, emb.dim(), radius, p.seed)?;
    let cfg = DensityConfig {
        bandwidth: &bw,
        kernel: KernelSpec::new(p.kernel, emb.dim())?,
        normalize: p.normalize,
    };
    let densities = density::cross_corpus_densities(queries, items, emb, &samples, &cfg)?;
    let t1 = Instant::now();
    let sim = match p.similarity {
        DsSimilarity::Cosine => similarity::cosine_similarity_rows(&densities.queries, densities.items())?,
        DsSimilarity::JensenShannon => {
            similarity::jensen_shannon_similarity(&densities.queries, densities.items())?
        }
    };
    let t2 = Instant::now();
    Ok(DsOutput {
        bandwidth: bw,
        samples,
        densities,
        similarity: sim,
        timings: DsTimings {
            density: t1 - t0,
            similarity: t2 - t1,
        },
    })
}

/// RWMD scores and wall time. Rows are renormalized to unit sum first.
pub fn run_rwmd(
    queries: &DocFeatureMatrix,
    items: &DocFeatureMatrix,
    emb: &EmbeddingTable,
    variant: RwmdVariant,
    timeout: Option<Duration>,
) -> Result<(SimilarityMatrix, Duration)> {
    let t0 = Instant::now();
    let deadline = timeout.map(|d| t0 + d);
    let q = corpus::row_normalize(queries);
    let sim = if std::ptr::eq(queries, items) {
        similarity::rwmd_matrix(&q, &q, emb, variant, deadline)?
    } else {
        let i = corpus::row_normalize(items);
        similarity::rwmd_matrix(&q, &i, emb, variant, deadline)?
    };
    Ok((sim, t0.elapsed()))
}

/// Weighted document-feature matrices ready for scoring.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Embedding restricted to the corpus vocabulary.
    pub embedding: EmbeddingTable,
    pub queries: DocFeatureMatrix,
    /// `None` when queries and items are the same corpus.
    pub items: Option<DocFeatureMatrix>,
    /// Documents dropped because no weight survived tokenization and weighting.
    pub dropped: Vec<String>,
}

impl Prepared {
    pub fn items(&self) -> &DocFeatureMatrix {
        self.items.as_ref().unwrap_or(&self.queries)
    }
}

/// Tokenized corpora to weighted matrices over the shared vocabulary.
///
/// Documents left without any weight are dropped (and listed), since neither
/// method can score them.
pub fn prepare(
    queries: (Vec<String>, Vec<Vec<String>>),
    items: Option<(Vec<String>, Vec<Vec<String>>)>,
    emb: &EmbeddingTable,
    transforms: &[Transform],
) -> Result<Prepared> {
    let mut vocab: HashSet<String> = HashSet::new();
    for doc in queries.1.iter().chain(items.iter().flat_map(|i| i.1.iter())) {
        vocab.extend(doc.iter().cloned());
    }
    let emb = emb.intersect_vocabulary(&vocab)?;
    let mut dropped = Vec::new();
    let mut weigh = |(ids, docs): (Vec<String>, Vec<Vec<String>>)| -> Result<DocFeatureMatrix> {
        let counts = corpus::build_dfm(ids, &docs, &emb)?.matrix;
        let m = corpus::apply_transforms(&counts, transforms)?;
        let empty: BTreeSet<usize> = (0..m.n_docs()).filter(|&t| m.row(t).0.is_empty()).collect();
        if empty.is_empty() {
            return Ok(m);
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for t in 0..m.n_docs() {
            if empty.contains(&t) {
                dropped.push(m.doc_ids()[t].clone());
            } else {
                let (f, w) = m.row(t);
                ids.push(m.doc_ids()[t].clone());
                rows.push(f.iter().copied().zip(w.iter().copied()).collect());
            }
        }
        log::warn!("dropping {} document(s) with no remaining weight", empty.len());
        DocFeatureMatrix::from_rows(ids, m.n_features(), rows)
    };
    let q = weigh(queries)?;
    let i = items.map(&mut weigh).transpose()?;
    if q.n_docs() == 0 || i.as_ref().is_some_and(|m| m.n_docs() == 0) {
        return Err(Error::EmptyInput("no document kept any weight"));
    }
    Ok(Prepared {
        embedding: emb,
        queries: q,
        items: i,
        dropped,
    })
}
