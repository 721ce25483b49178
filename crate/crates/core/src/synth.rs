//! Labeled synthetic corpora with a matching embedding.
//!
//! Each class owns `words_per_class` tokens whose vectors form a unit-variance
//! Gaussian cloud around the class center. Centers sit on a regular simplex
//! centered at the origin, `separation` apart pairwise. A document of class
//! `c` draws `doc_len` tokens from its own vocabulary, except that each token
//! comes from a uniformly chosen other class with probability `mixing`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::Document;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub docs_per_class: usize,
    pub words_per_class: usize,
    pub doc_len: usize,
    pub dim: usize,
    pub separation: f64,
    pub mixing: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 5,
            docs_per_class: 60,
            words_per_class: 200,
            doc_len: 60,
            dim: 50,
            separation: 10.0 * 50f64.sqrt(),
            mixing: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub docs: Vec<Document>,
    pub embedding: EmbeddingTable,
    /// `(doc_id, class label)` in document order.
    pub labels: Vec<(String, String)>,
}

impl SynthCorpus {
    pub fn label_map(&self) -> HashMap<String, Vec<String>> {
        self.labels
            .iter()
            .map(|(d, l)| (d.clone(), vec![l.clone()]))
            .collect()
    }

    /// Documents as token lists (the generated text is already tokenized).
    pub fn token_lists(&self) -> Vec<Vec<String>> {
        self.docs
            .iter()
            .map(|d| d.text.split(' ').map(String::from).collect())
            .collect()
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.doc_id.clone()).collect()
    }
}

/// Fixed-width lowercase base-26 encoding, so tokens survive the tokenizer.
fn alpha(mut v: usize, width: usize) -> String {
    let mut out = vec![b'a'; width];
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (v % 26) as u8;
        v /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

pub fn token_name(class: usize, word: usize) -> String {
    format!("{}{}", alpha(class, 3), alpha(word, 4))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let counts = [cfg.n_classes, cfg.docs_per_class, cfg.words_per_class, cfg.doc_len, cfg.dim];
    if counts.contains(&0) {
        return Err(Error::invalid("synthetic corpus counts must all be at least 1"));
    }
    if cfg.n_classes > cfg.dim {
        return Err(Error::invalid(format!(
            "{} classes need at least as many dimensions (got {})",
            cfg.n_classes, cfg.dim
        )));
    }
    if cfg.n_classes > 26usize.pow(3) || cfg.words_per_class > 26usize.pow(4) {
        return Err(Error::invalid("too many classes or words per class for token names"));
    }
    if !(cfg.separation >= 0.0 && cfg.separation.is_finite()) {
        return Err(Error::invalid(format!("separation must be >= 0, got {}", cfg.separation)));
    }
    if !(0.0..=1.0).contains(&cfg.mixing) {
        return Err(Error::invalid(format!("mixing rate must be in [0, 1], got {}", cfg.mixing)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.n_classes;
    let scale = cfg.separation / std::f64::consts::SQRT_2;
    let mut tokens = Vec::with_capacity(k * cfg.words_per_class);
    let mut vectors = Vec::with_capacity(k * cfg.words_per_class);
    for c in 0..k {
        let mut center = vec![0.0; cfg.dim];
        for (a, x) in center.iter_mut().enumerate().take(k) {
            let e = if a == c { 1.0 } else { 0.0 };
            *x = scale * (e - 1.0 / k as f64);
        }
        for w in 0..cfg.words_per_class {
            tokens.push(token_name(c, w));
            vectors.push(
                center
                    .iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
    }
    let embedding = EmbeddingTable::from_rows(tokens, vectors)?;

    let mut docs = Vec::with_capacity(k * cfg.docs_per_class);
    let mut labels = Vec::with_capacity(k * cfg.docs_per_class);
    for c in 0..k {
        for n in 0..cfg.docs_per_class {
            let words: Vec<String> = (0..cfg.doc_len)
                .map(|_| {
                    let class = if k > 1 && rng.random::<f64>() < cfg.mixing {
                        let other = rng.random_range(0..k - 1);
                        if other >= c {
                            other + 1
                        } else {
                            other
                        }
                    } else {
                        c
                    };
                    token_name(class, rng.random_range(0..cfg.words_per_class))
                })
                .collect();
            let doc_id = format!("doc{:05}", c * cfg.docs_per_class + n);
            labels.push((doc_id.clone(), format!("class{c}")));
            docs.push(Document {
                doc_id,
                text: words.join(" "),
            });
        }
    }
    Ok(SynthCorpus {
        docs,
        embedding,
        labels,
    })
}
