//! Query-item similarity, per-query ranking and the relaxed word mover's
//! distance (RWMD) baseline.
//!
//! Every score is a similarity: larger means closer. RWMD distances are
//! negated so that one ranking path serves all methods.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::DocFeatureMatrix;
use crate::density::DensityMatrix;
use crate::embedding::{EmbeddingTable, FeatureId};
use crate::error::{Error, Result};
use crate::points::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    Cosine,
    JensenShannon,
    NegRwmd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub kind: SimilarityKind,
    n_items: usize,
    data: Vec<f64>,
    query_ids: Vec<String>,
    item_ids: Vec<String>,
    /// Query rows that were all zero (scored 0 against every item).
    pub zero_queries: Vec<usize>,
    /// Item rows that were all zero.
    pub zero_items: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn from_raw(
        kind: SimilarityKind,
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != query_ids.len() * item_ids.len() {
            return Err(Error::invalid(format!(
                "{} values for {} x {} similarity matrix",
                data.len(),
                query_ids.len(),
                item_ids.len()
            )));
        }
        Ok(Self {
            kind,
            n_items: item_ids.len(),
            data,
            query_ids,
            item_ids,
            zero_queries: Vec::new(),
            zero_items: Vec::new(),
        })
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.n_items..(q + 1) * self.n_items]
    }

    pub fn get(&self, q: usize, i: usize) -> f64 {
        self.data[q * self.n_items + i]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }
}

fn check_points(q: &DensityMatrix, i: &DensityMatrix) -> Result<()> {
    if q.n_points() != i.n_points() {
        return Err(Error::DimensionMismatch {
            expected: q.n_points(),
            got: i.n_points(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity between every query row and every item row.
pub fn cosine_similarity_rows(q: &DensityMatrix, i: &DensityMatrix) -> Result<SimilarityMatrix> {
    check_points(q, i)?;
    let qn: Vec<f64> = (0..q.n_docs()).map(|t| dot(q.row(t), q.row(t)).sqrt()).collect();
    let inorm: Vec<f64> = (0..i.n_docs()).map(|t| dot(i.row(t), i.row(t)).sqrt()).collect();
    let n_items = i.n_docs();
    let mut data = vec![0.0; q.n_docs() * n_items];
    if n_items > 0 {
        data.par_chunks_mut(n_items).enumerate().for_each(|(a, out)| {
            if qn[a] == 0.0 {
                return;
            }
            let qa = q.row(a);
            for (b, o) in out.iter_mut().enumerate() {
                if inorm[b] > 0.0 {
                    *o = (dot(qa, i.row(b)) / (qn[a] * inorm[b])).clamp(-1.0, 1.0);
                }
            }
        });
    }
    let zero_queries = zero_positions(&qn);
    let zero_items = zero_positions(&inorm);
    if !zero_queries.is_empty() || !zero_items.is_empty() {
        log::warn!(
            "{} query and {} item density rows are all zero; their similarities are 0",
            zero_queries.len(),
            zero_items.len()
        );
    }
    Ok(SimilarityMatrix {
        kind: SimilarityKind::Cosine,
        n_items,
        data,
        query_ids: q.doc_ids().to_vec(),
        item_ids: i.doc_ids().to_vec(),
        zero_queries,
        zero_items,
    })
}

fn zero_positions(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x == 0.0)
        .map(|(k, _)| k)
        .collect()
}

/// `1 - JSD(p, q) / ln 2` between two probability vectors, JSD in nats.
pub fn js_similarity(p: &[f64], q: &[f64]) -> f64 {
    let mut jsd = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let mut term = 0.0;
        if a > 0.0 {
            term += a * (a / m).ln();
        }
        if b > 0.0 {
            term += b * (b / m).ln();
        }
        jsd += 0.5 * term;
    }
    (1.0 - jsd / std::f64::consts::LN_2).clamp(0.0, 1.0)
}

fn to_probability(row: &[f64]) -> Option<Vec<f64>> {
    let s: f64 = row.iter().sum();
    (s > 0.0).then(|| row.iter().map(|v| v / s).collect())
}

/// Jensen-Shannon similarity between rows renormalized to unit sum. Pairs
/// involving an all-zero row score 0.
pub fn jensen_shannon_similarity(q: &DensityMatrix, i: &DensityMatrix) -> Result<SimilarityMatrix> {
    check_points(q, i)?;
    let qp: Vec<Option<Vec<f64>>> = (0..q.n_docs()).map(|t| to_probability(q.row(t))).collect();
    let ip: Vec<Option<Vec<f64>>> = (0..i.n_docs()).map(|t| to_probability(i.row(t))).collect();
    let n_items = i.n_docs();
    let mut data = vec![0.0; q.n_docs() * n_items];
    if n_items > 0 {
        data.par_chunks_mut(n_items).enumerate().for_each(|(a, out)| {
            if let Some(pa) = &qp[a] {
                for (o, pb) in out.iter_mut().zip(&ip) {
                    if let Some(pb) = pb {
                        *o = js_similarity(pa, pb);
                    }
                }
            }
        });
    }
    let zero_queries: Vec<usize> = qp.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(k, _)| k).collect();
    let zero_items: Vec<usize> = ip.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(k, _)| k).collect();
    if !zero_queries.is_empty() || !zero_items.is_empty() {
        log::warn!(
            "{} query and {} item density rows are all zero; their similarities are 0",
            zero_queries.len(),
            zero_items.len()
        );
    }
    Ok(SimilarityMatrix {
        kind: SimilarityKind::JensenShannon,
        n_items,
        data,
        query_ids: q.doc_ids().to_vec(),
        item_ids: i.doc_ids().to_vec(),
        zero_queries,
        zero_items,
    })
}

/// Ranks one row of scores: rank 1 is the highest score, ties go to the
/// lower item index. An excluded item (self-recommendation) is ranked after
/// every other item.
pub fn rank_items(scores: &[f64], exclude: Option<usize>) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&k| Some(k) != exclude).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    if let Some(x) = exclude.filter(|&x| x < scores.len()) {
        order.push(x);
    }
    let mut ranks = vec![0u32; scores.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos as u32 + 1;
    }
    debug_assert!(is_permutation(&ranks));
    ranks
}

pub(crate) fn is_permutation(ranks: &[u32]) -> bool {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        let k = r as usize;
        if k == 0 || k > ranks.len() || seen[k - 1] {
            return false;
        }
        seen[k - 1] = true;
    }
    true
}

/// Per-query ranks over all items; each row is a permutation of `1..=n_items`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    n_items: usize,
    ranks: Vec<u32>,
    query_ids: Vec<String>,
    item_ids: Vec<String>,
    /// Item excluded from each query's list (self-recommendation), if any.
    excluded: Vec<Option<usize>>,
}

impl RankMatrix {
    /// Ranks every row of `sim`. With `exclude_self`, query `q` drops the
    /// item with the same id.
    pub fn from_similarity(sim: &SimilarityMatrix, exclude_self: bool) -> Self {
        let excluded: Vec<Option<usize>> = (0..sim.n_queries())
            .map(|q| {
                exclude_self
                    .then(|| sim.item_ids.iter().position(|id| *id == sim.query_ids[q]))
                    .flatten()
            })
            .collect();
        let rows: Vec<Vec<u32>> = (0..sim.n_queries())
            .into_par_iter()
            .map(|q| rank_items(sim.row(q), excluded[q]))
            .collect();
        Self {
            n_items: sim.n_items(),
            ranks: rows.concat(),
            query_ids: sim.query_ids.clone(),
            item_ids: sim.item_ids.clone(),
            excluded,
        }
    }

    /// Builds from explicit rank rows, validating each as a permutation.
    pub fn from_rows(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        rows: Vec<Vec<u32>>,
        excluded: Vec<Option<usize>>,
    ) -> Result<Self> {
        if rows.len() != query_ids.len() || excluded.len() != query_ids.len() {
            return Err(Error::invalid("rank rows do not match the query list"));
        }
        for (q, r) in rows.iter().enumerate() {
            if r.len() != item_ids.len() || !is_permutation(r) {
                return Err(Error::invalid(format!(
                    "ranks of query {:?} are not a permutation of 1..={}",
                    query_ids[q],
                    item_ids.len()
                )));
            }
        }
        Ok(Self {
            n_items: item_ids.len(),
            ranks: rows.concat(),
            query_ids,
            item_ids,
            excluded,
        })
    }

    /// Same ranks with queries and items reordered to the given id lists.
    /// Both lists must be permutations of this matrix's ids.
    pub fn aligned_to(&self, query_ids: &[String], item_ids: &[String]) -> Result<Self> {
        fn index(ids: &[String]) -> HashMap<&str, usize> {
            ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect()
        }
        let (qi, ii) = (index(&self.query_ids), index(&self.item_ids));
        let lookup = |want: &[String], have: &HashMap<&str, usize>, what: &str| -> Result<Vec<usize>> {
            let missing: Vec<&str> = want
                .iter()
                .filter(|id| !have.contains_key(id.as_str()))
                .map(String::as_str)
                .collect();
            if want.len() != have.len() || !missing.is_empty() {
                return Err(Error::invalid(format!(
                    "{what} ids differ ({} vs {}); missing: {}",
                    want.len(),
                    have.len(),
                    missing.join(", ")
                )));
            }
            Ok(want.iter().map(|id| have[id.as_str()]).collect())
        };
        let q_src = lookup(query_ids, &qi, "query")?;
        let i_src = lookup(item_ids, &ii, "item")?;
        let mut new_pos = vec![0usize; i_src.len()];
        for (new, &old) in i_src.iter().enumerate() {
            new_pos[old] = new;
        }
        let rows = q_src
            .iter()
            .map(|&q| i_src.iter().map(|&i| self.row(q)[i]).collect())
            .collect();
        let excluded = q_src
            .iter()
            .map(|&q| self.excluded[q].map(|x| new_pos[x]))
            .collect();
        Self::from_rows(query_ids.to_vec(), item_ids.to_vec(), rows, excluded)
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn row(&self, q: usize) -> &[u32] {
        &self.ranks[q * self.n_items..(q + 1) * self.n_items]
    }

    pub fn excluded(&self, q: usize) -> Option<usize> {
        self.excluded[q]
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Item indices of query `q` in rank order, without the excluded item.
    pub fn ordered_items(&self, q: usize) -> Vec<usize> {
        let mut order = vec![0usize; self.n_items];
        for (item, &r) in self.row(q).iter().enumerate() {
            order[r as usize - 1] = item;
        }
        if self.excluded[q].is_some() {
            order.pop();
        }
        order
    }
}

/// Nearest squared distance from `x` to any point of `support`.
fn nearest_sq(emb: &EmbeddingTable, x: &[f64], support: &[FeatureId]) -> f64 {
    support
        .iter()
        .map(|&j| squared_distance(x, emb.vector(j)))
        .fold(f64::INFINITY, f64::min)
}

/// `sum_i wa_i min_{j in b} |x_i - x_j|`.
pub fn rwmd_one_sided(
    a: (&[FeatureId], &[f64]),
    b: (&[FeatureId], &[f64]),
    emb: &EmbeddingTable,
) -> Result<f64> {
    if a.0.is_empty() || b.0.is_empty() {
        return Err(Error::EmptyInput("RWMD on a document with empty support"));
    }
    Ok(a.0
        .iter()
        .zip(a.1)
        .map(|(&i, &w)| w * nearest_sq(emb, emb.vector(i), b.0).sqrt())
        .sum())
}

/// Symmetric RWMD: the larger of the two one-sided relaxations.
pub fn rwmd_distance(
    a: (&[FeatureId], &[f64]),
    b: (&[FeatureId], &[f64]),
    emb: &EmbeddingTable,
) -> Result<f64> {
    Ok(rwmd_one_sided(a, b, emb)?.max(rwmd_one_sided(b, a, emb)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RwmdVariant {
    /// `max(cost(a -> b), cost(b -> a))`.
    #[default]
    Symmetric,
    /// `cost(query -> item)` only.
    OneSided,
}

/// For every document of `docs`, the distance from each feature in
/// `targets` to that document's nearest feature. Row-major
/// `docs.n_docs() x targets.len()`.
fn nearest_tables(
    docs: &DocFeatureMatrix,
    targets: &[FeatureId],
    emb: &EmbeddingTable,
    deadline: Option<Instant>,
) -> Result<Vec<f64>> {
    let width = targets.len();
    let mut out = vec![0.0; docs.n_docs() * width];
    if width == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(t, row)| {
            if deadline.is_some_and(|d| Instant::now() > d) {
                return Err(());
            }
            let (support, _) = docs.row(t);
            if support.is_empty() {
                return Ok(());
            }
            for (o, &f) in row.iter_mut().zip(targets) {
                *o = nearest_sq(emb, emb.vector(f), support).sqrt();
            }
            Ok(())
        })
        .map_err(|_| Error::Timeout(0.0))?;
    Ok(out)
}

fn features_in(m: &DocFeatureMatrix) -> (Vec<FeatureId>, Vec<usize>) {
    let mut seen = vec![false; m.n_features()];
    for (_, f, _) in m.triplets() {
        seen[f] = true;
    }
    let used: Vec<FeatureId> = (0..m.n_features()).filter(|&f| seen[f]).collect();
    let mut slot = vec![usize::MAX; m.n_features()];
    for (s, &f) in used.iter().enumerate() {
        slot[f] = s;
    }
    (used, slot)
}

/// Negated RWMD between every query and item document.
///
/// Distances are identical to calling [`rwmd_distance`] per pair; the
/// nearest-neighbour distances of each feature are tabulated once per
/// document instead of once per pair. Rows must be normalized to unit sum.
/// The optional `deadline` aborts with [`Error::Timeout`].
pub fn rwmd_matrix(
    queries: &DocFeatureMatrix,
    items: &DocFeatureMatrix,
    emb: &EmbeddingTable,
    variant: RwmdVariant,
    deadline: Option<Instant>,
) -> Result<SimilarityMatrix> {
    let started = Instant::now();
    if queries.n_features() != emb.len() || items.n_features() != emb.len() {
        return Err(Error::DimensionMismatch {
            expected: emb.len(),
            got: queries.n_features().max(items.n_features()),
        });
    }
    for (name, m) in [("query", queries), ("item", items)] {
        if let Some(t) = (0..m.n_docs()).find(|&t| m.row(t).0.is_empty()) {
            return Err(Error::Degenerate(format!(
                "{name} document {:?} has empty support",
                m.doc_ids()[t]
            )));
        }
    }
    let timeout = |e: Error| match e {
        Error::Timeout(_) => Error::Timeout(started.elapsed().as_secs_f64()),
        other => other,
    };
    let same = std::ptr::eq(queries, items);

    // Item tables over query features: cost(query -> item).
    let (q_feats, q_slot) = features_in(queries);
    let item_tab = nearest_tables(items, &q_feats, emb, deadline).map_err(timeout)?;
    // Query tables over item features: cost(item -> query).
    let (i_feats, i_slot, query_tab) = match variant {
        RwmdVariant::OneSided => (Vec::new(), Vec::new(), Vec::new()),
        RwmdVariant::Symmetric if same => (q_feats.clone(), q_slot.clone(), item_tab.clone()),
        RwmdVariant::Symmetric => {
            let (f, s) = features_in(items);
            let tab = nearest_tables(queries, &f, emb, deadline).map_err(timeout)?;
            (f, s, tab)
        }
    };

    let n_items = items.n_docs();
    let qw = q_feats.len();
    let iw = i_feats.len();
    let mut data = vec![0.0; queries.n_docs() * n_items];
    if n_items > 0 {
        data.par_chunks_mut(n_items).enumerate().for_each(|(a, out)| {
            let (fa, wa) = queries.row(a);
            for (b, o) in out.iter_mut().enumerate() {
                let tab_b = &item_tab[b * qw..(b + 1) * qw];
                let forward: f64 = fa.iter().zip(wa).map(|(&f, &w)| w * tab_b[q_slot[f]]).sum();
                let dist = match variant {
                    RwmdVariant::OneSided => forward,
                    RwmdVariant::Symmetric => {
                        let (fb, wb) = items.row(b);
                        let tab_a = &query_tab[a * iw..(a + 1) * iw];
                        let backward: f64 =
                            fb.iter().zip(wb).map(|(&f, &w)| w * tab_a[i_slot[f]]).sum();
                        forward.max(backward)
                    }
                };
                *o = -dist;
            }
        });
    }
    Ok(SimilarityMatrix {
        kind: SimilarityKind::NegRwmd,
        n_items,
        data,
        query_ids: queries.doc_ids().to_vec(),
        item_ids: items.doc_ids().to_vec(),
        zero_queries: Vec::new(),
        zero_items: Vec::new(),
    })
}
