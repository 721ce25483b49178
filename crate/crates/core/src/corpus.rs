//! Tokenization and the sparse document-feature matrix.
//!
//! Default weighting order is counts, then [`row_normalize`], then
//! [`tfidf_transform`]. Lemmatization, if wanted, happens before text reaches
//! [`tokenize`].

use std::collections::{HashMap, HashSet};

use crate::embedding::{EmbeddingTable, FeatureId};
use crate::error::{Error, Result};

/// Default minimum token length in characters.
pub const DEFAULT_MIN_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

/// Lower-cases `text`, splits on non-alphabetic characters and drops
/// stopwords and tokens shorter than `min_len` characters.
pub fn tokenize(text: &str, stopwords: &HashSet<String>, min_len: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .filter(|tok| tok.chars().count() >= min_len && !stopwords.contains(tok))
        .collect()
}

/// IDF variant used by [`tfidf_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdfVariant {
    /// `ln(N_d / df)`; features present in every document vanish.
    #[default]
    Plain,
    /// `ln((1 + N_d) / (1 + df)) + 1`.
    Smooth,
}

/// Sparse documents-by-features weights in compressed row form.
///
/// Within a row, feature ids are strictly increasing and every stored weight
/// is positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFeatureMatrix {
    n_features: usize,
    doc_ids: Vec<String>,
    row_ptr: Vec<usize>,
    features: Vec<FeatureId>,
    weights: Vec<f64>,
}

impl DocFeatureMatrix {
    /// Builds a matrix from per-document `(feature, weight)` lists. Entries are
    /// sorted; duplicates, non-positive and non-finite weights are rejected.
    pub fn from_rows(
        doc_ids: Vec<String>,
        n_features: usize,
        rows: Vec<Vec<(FeatureId, f64)>>,
    ) -> Result<Self> {
        if doc_ids.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} doc ids for {} rows",
                doc_ids.len(),
                rows.len()
            )));
        }
        let mut seen = HashSet::with_capacity(doc_ids.len());
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate doc id {id:?}")));
            }
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut features = Vec::new();
        let mut weights = Vec::new();
        for (t, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(f, _)| f);
            for (k, &(f, w)) in row.iter().enumerate() {
                if f >= n_features {
                    return Err(Error::invalid(format!(
                        "doc {t}: feature {f} out of range (N_f = {n_features})"
                    )));
                }
                if k > 0 && row[k - 1].0 == f {
                    return Err(Error::invalid(format!("doc {t}: duplicate feature {f}")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::invalid(format!(
                        "doc {t}: feature {f} has weight {w}, expected positive and finite"
                    )));
                }
                features.push(f);
                weights.push(w);
            }
            row_ptr.push(features.len());
        }
        Ok(Self {
            n_features,
            doc_ids,
            row_ptr,
            features,
            weights,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Feature ids and weights of document `t`.
    pub fn row(&self, t: usize) -> (&[FeatureId], &[f64]) {
        let span = self.row_ptr[t]..self.row_ptr[t + 1];
        (&self.features[span.clone()], &self.weights[span])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[FeatureId], &[f64])> {
        (0..self.n_docs()).map(move |t| self.row(t))
    }

    /// `(doc, feature, weight)` triplets in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, FeatureId, f64)> + '_ {
        (0..self.n_docs()).flat_map(move |t| {
            let (f, w) = self.row(t);
            f.iter().zip(w).map(move |(&f, &w)| (t, f, w))
        })
    }

    /// Dense copy of row `t`, mostly for tests.
    pub fn dense_row(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let (f, w) = self.row(t);
        for (&f, &w) in f.iter().zip(w) {
            out[f] = w;
        }
        out
    }

    /// Mean number of distinct features per document.
    pub fn mean_unique_features(&self) -> f64 {
        if self.n_docs() == 0 {
            return 0.0;
        }
        self.nnz() as f64 / self.n_docs() as f64
    }

    fn map_rows(&self, mut f: impl FnMut(usize, &[FeatureId], &[f64]) -> Vec<(FeatureId, f64)>) -> Self {
        let mut row_ptr = Vec::with_capacity(self.row_ptr.len());
        row_ptr.push(0);
        let mut features = Vec::with_capacity(self.nnz());
        let mut weights = Vec::with_capacity(self.nnz());
        for t in 0..self.n_docs() {
            let (fs, ws) = self.row(t);
            for (fid, w) in f(t, fs, ws) {
                features.push(fid);
                weights.push(w);
            }
            row_ptr.push(features.len());
        }
        Self {
            n_features: self.n_features,
            doc_ids: self.doc_ids.clone(),
            row_ptr,
            features,
            weights,
        }
    }
}

/// Result of [`build_dfm`]: the count matrix plus the indices of documents
/// that ended up with no in-vocabulary token.
#[derive(Debug, Clone)]
pub struct BuiltDfm {
    pub matrix: DocFeatureMatrix,
    pub empty_docs: Vec<usize>,
}

/// Counts tokens per document against the embedding vocabulary. Tokens the
/// embedding does not know are skipped.
pub fn build_dfm(
    doc_ids: Vec<String>,
    docs: &[Vec<String>],
    emb: &EmbeddingTable,
) -> Result<BuiltDfm> {
    let mut empty_docs = Vec::new();
    let rows: Vec<Vec<(FeatureId, f64)>> = docs
        .iter()
        .enumerate()
        .map(|(t, tokens)| {
            let mut counts: HashMap<FeatureId, u64> = HashMap::new();
            for tok in tokens {
                if let Some(id) = emb.id_of(tok) {
                    *counts.entry(id).or_default() += 1;
                }
            }
            if counts.is_empty() {
                empty_docs.push(t);
            }
            counts.into_iter().map(|(f, c)| (f, c as f64)).collect()
        })
        .collect();
    let matrix = DocFeatureMatrix::from_rows(doc_ids, emb.len(), rows)?;
    Ok(BuiltDfm { matrix, empty_docs })
}

/// Reweights every entry by the inverse document frequency of its feature.
///
/// Document frequency counts rows where the feature is stored. With the
/// plain variant, features present in every document get weight zero and are
/// removed from the sparse structure.
pub fn tfidf_transform(m: &DocFeatureMatrix, variant: IdfVariant) -> Result<DocFeatureMatrix> {
    let n_docs = m.n_docs();
    if n_docs == 0 {
        return Err(Error::EmptyInput("TF-IDF on a corpus with no documents"));
    }
    let mut df = vec![0usize; m.n_features()];
    for &f in &m.features {
        df[f] += 1;
    }
    let n = n_docs as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| match variant {
            IdfVariant::Plain if d > 0 => (n / d as f64).ln(),
            IdfVariant::Smooth => ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0,
            _ => 0.0,
        })
        .collect();
    let out = m.map_rows(|_, fs, ws| {
        fs.iter()
            .zip(ws)
            .map(|(&f, &w)| (f, w * idf[f]))
            .filter(|&(_, w)| w > 0.0)
            .collect()
    });
    if out.nnz() == 0 && m.nnz() > 0 {
        log::warn!(
            "TF-IDF removed every weight ({} document(s); each feature occurs in all of them)",
            n_docs
        );
    }
    Ok(out)
}

/// Divides each non-empty row by its sum.
pub fn row_normalize(m: &DocFeatureMatrix) -> DocFeatureMatrix {
    m.map_rows(|_, fs, ws| {
        let sum: f64 = ws.iter().sum();
        fs.iter().zip(ws).map(|(&f, &w)| (f, w / sum)).collect()
    })
}

/// Weighting steps applied after counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Normalize,
    Tfidf(IdfVariant),
}

pub const DEFAULT_TRANSFORMS: [Transform; 2] =
    [Transform::Normalize, Transform::Tfidf(IdfVariant::Plain)];

pub fn apply_transforms(m: &DocFeatureMatrix, steps: &[Transform]) -> Result<DocFeatureMatrix> {
    let mut cur = m.clone();
    for step in steps {
        cur = match step {
            Transform::Normalize => row_normalize(&cur),
            Transform::Tfidf(v) => tfidf_transform(&cur, *v)?,
        };
    }
    Ok(cur)
}
