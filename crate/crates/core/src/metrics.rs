//! Soft top-k accuracy, Jaccard@k and soft Jaccard agreement.
//!
//! Both soft metrics take a softness exponent `s >= 0`. At `s = 0` the soft
//! top-k accuracy weights every position equally and the soft Jaccard term
//! `min(1, (r / k)^(-1/s))` becomes the sharp indicator `r <= k`, so the two
//! reduce exactly to plain top-k accuracy and Jaccard@k.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::similarity::RankMatrix;
use crate::stats;

/// Rank-weighted share of correct items among the first `k`.
///
/// `correct` is ordered by ascending rank; position `k'` (1-based) carries
/// weight `k'^(-s)`.
pub fn soft_topk_accuracy(correct: &[bool], k: usize, s: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > correct.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} ranked items",
            correct.len()
        )));
    }
    if s.is_nan() || s < 0.0 {
        return Err(Error::invalid(format!("softness must be >= 0, got {s}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (pos, &c) in correct[..k].iter().enumerate() {
        let w = if s == 0.0 { 1.0 } else { ((pos + 1) as f64).powf(-s) };
        den += w;
        if c {
            num += w;
        }
    }
    Ok(num / den)
}

fn top_set(ranks: &[u32], k: usize) -> BTreeSet<usize> {
    ranks
        .iter()
        .enumerate()
        .filter(|(_, &r)| (r as usize) <= k)
        .map(|(t, _)| t)
        .collect()
}

/// `|A ∩ B| / |A ∪ B|` over the items each ranking places within `k`.
pub fn jaccard_at_k(ranks_a: &[u32], ranks_b: &[u32], k: usize) -> f64 {
    let a = top_set(ranks_a, k);
    let b = top_set(ranks_b, k);
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// `min(1, (r / k)^(-1/s))`, with the `s = 0` limit as an indicator.
fn soft_term(r: u32, k: usize, s: f64) -> f64 {
    if (r as usize) <= k {
        1.0
    } else if s == 0.0 {
        0.0
    } else {
        (k as f64 / r as f64).powf(1.0 / s)
    }
}

/// Soft Jaccard agreement between two rankings of the same items.
///
/// Terms equal to one are counted as integers and only the fractional terms
/// are summed in floating point, so `s = 0` reproduces [`jaccard_at_k`] bit
/// for bit.
pub fn soft_jaccard(ranks_a: &[u32], ranks_b: &[u32], k: usize, s: f64) -> f64 {
    let union: Vec<usize> = top_set(ranks_a, k)
        .union(&top_set(ranks_b, k))
        .copied()
        .collect();
    if union.is_empty() {
        return 1.0;
    }
    let mut ones = 0usize;
    let mut frac = 0.0;
    for &t in &union {
        let ta = soft_term(ranks_a[t], k, s);
        let tb = soft_term(ranks_b[t], k, s);
        debug_assert!(ta == 1.0 || tb == 1.0, "neither ranking puts item {t} within k");
        for term in [ta, tb] {
            if term == 1.0 {
                ones += 1;
            } else {
                frac += term;
            }
        }
    }
    let u = union.len();
    ((ones - u) as f64 + frac) / u as f64
}

/// Per-query item relevance: `correct[i]` is true when item `i` is relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub query_id: String,
    pub correct: Vec<bool>,
}

/// Relevance from class labels: an item is correct when it shares at least
/// one label with the query. Every missing id is listed in the error.
pub fn labels_from_classes(
    query_ids: &[String],
    item_ids: &[String],
    classes: &HashMap<String, Vec<String>>,
) -> Result<Vec<LabeledQuery>> {
    let missing: Vec<&str> = query_ids
        .iter()
        .chain(item_ids)
        .filter(|id| !classes.contains_key(*id))
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "{} id(s) have no label: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(query_ids
        .iter()
        .map(|q| {
            let ql = &classes[q];
            LabeledQuery {
                query_id: q.clone(),
                correct: item_ids
                    .iter()
                    .map(|i| classes[i].iter().any(|l| ql.contains(l)))
                    .collect(),
            }
        })
        .collect())
}

/// Per-query values with their mean, spread and quartiles.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub per_query: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl MetricSummary {
    pub fn from_values(per_query: Vec<f64>) -> Result<Self> {
        if per_query.is_empty() {
            return Err(Error::EmptyInput("metric summary over zero queries"));
        }
        let q = stats::quantiles(&per_query, &[0.25, 0.5, 0.75])?;
        let sd = stats::sample_sd(&per_query);
        Ok(Self {
            mean: stats::mean(&per_query),
            se: sd / (per_query.len() as f64).sqrt(),
            sd,
            q1: q[0],
            median: q[1],
            q3: q[2],
            per_query,
        })
    }
}

/// Soft top-k accuracy of every query, summarized.
pub fn evaluate_model(
    ranks: &RankMatrix,
    labels: &[LabeledQuery],
    k: usize,
    s: f64,
) -> Result<MetricSummary> {
    let by_id: HashMap<&str, &LabeledQuery> =
        labels.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let missing: Vec<&str> = ranks
        .query_ids()
        .iter()
        .filter(|q| !by_id.contains_key(q.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "{} query id(s) have no labels: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let values = (0..ranks.n_queries())
        .map(|q| {
            let lab = by_id[ranks.query_ids()[q].as_str()];
            if lab.correct.len() != ranks.n_items() {
                return Err(Error::DimensionMismatch {
                    expected: ranks.n_items(),
                    got: lab.correct.len(),
                });
            }
            let c: Vec<bool> = ranks
                .ordered_items(q)
                .into_iter()
                .take(k)
                .map(|i| lab.correct[i])
                .collect();
            soft_topk_accuracy(&c, k, s)
        })
        .collect::<Result<Vec<f64>>>()?;
    MetricSummary::from_values(values)
}

/// Soft Jaccard agreement of two rankings per query, summarized. `b` is
/// realigned to the query and item order of `a`; both must cover the same ids.
pub fn compare_models(a: &RankMatrix, b: &RankMatrix, k: usize, s: f64) -> Result<MetricSummary> {
    if k == 0 || s.is_nan() || s < 0.0 {
        return Err(Error::invalid("need k >= 1 and s >= 0"));
    }
    let b = if a.query_ids() == b.query_ids() && a.item_ids() == b.item_ids() {
        std::borrow::Cow::Borrowed(b)
    } else {
        std::borrow::Cow::Owned(b.aligned_to(a.query_ids(), a.item_ids())?)
    };
    let values = (0..a.n_queries())
        .map(|q| soft_jaccard(a.row(q), b.row(q), k, s))
        .collect();
    MetricSummary::from_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        let c = [true, false, true];
        assert_eq!(soft_topk_accuracy(&c, 3, 0.0).unwrap(), 2.0 / 3.0);
        let a1 = soft_topk_accuracy(&c, 3, 1.0).unwrap();
        assert!((a1 - 8.0 / 11.0).abs() < 1e-15);
        for s in [0.0, 0.5, 1.0, 3.0] {
            assert_eq!(soft_topk_accuracy(&[true; 4], 4, s).unwrap(), 1.0);
        }
        assert!(soft_topk_accuracy(&c, 0, 0.0).is_err());
        assert!(soft_topk_accuracy(&c, 4, 0.0).is_err());
    }

    #[test]
    fn jaccard_examples() {
        let a = [1, 2, 3, 4];
        assert_eq!(jaccard_at_k(&a, &a, 2), 1.0);
        assert_eq!(jaccard_at_k(&[1, 2, 3, 4], &[3, 4, 1, 2], 2), 0.0);
        // top-2 {0, 1} vs {1, 2}
        assert_eq!(jaccard_at_k(&[1, 2, 3], &[3, 1, 2], 2), 1.0 / 3.0);
    }

    #[test]
    fn soft_jaccard_examples() {
        for s in [0.0, 0.5, 1.0, 2.0] {
            assert_eq!(soft_jaccard(&[2, 1, 3], &[2, 1, 3], 2, s), 1.0);
        }
        assert_eq!(soft_jaccard(&[1, 2], &[2, 1], 1, 1.0), 0.5);
        assert_eq!(soft_jaccard(&[1, 2], &[2, 1], 1, 0.0), 0.0);
    }

    #[test]
    fn summary_examples() {
        let s = MetricSummary::from_values(vec![0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.q1, s.median, s.q3), (0.5, 0.25, 0.5, 0.75));
        let one = MetricSummary::from_values(vec![0.4]).unwrap();
        assert_eq!((one.q1, one.median, one.q3, one.se), (0.4, 0.4, 0.4, 0.0));
        let flat = MetricSummary::from_values(vec![1.0; 5]).unwrap();
        assert_eq!((flat.mean, flat.se), (1.0, 0.0));
    }

    fn ranks(rows: Vec<Vec<u32>>, qids: &[&str], iids: &[&str]) -> RankMatrix {
        let n = rows.len();
        RankMatrix::from_rows(
            qids.iter().map(|s| s.to_string()).collect(),
            iids.iter().map(|s| s.to_string()).collect(),
            rows,
            vec![None; n],
        )
        .unwrap()
    }

    #[test]
    fn model_evaluation() {
        let r = ranks(vec![vec![1, 2, 3], vec![3, 1, 2]], &["q0", "q1"], &["a", "b", "c"]);
        let labels = vec![
            LabeledQuery {
                query_id: "q0".into(),
                correct: vec![true, true, false],
            },
            LabeledQuery {
                query_id: "q1".into(),
                correct: vec![true, false, false],
            },
        ];
        let s = evaluate_model(&r, &labels, 1, 0.0).unwrap();
        assert_eq!(s.per_query, vec![1.0, 0.0]);
        assert_eq!((s.q1, s.median, s.q3), (0.25, 0.5, 0.75));
        assert!(evaluate_model(&r, &labels[..1], 1, 0.0).is_err());

        let same = compare_models(&r, &r, 2, 1.0).unwrap();
        assert!(same.per_query.iter().all(|&v| v == 1.0));
        let other = ranks(vec![vec![1, 2, 3]], &["q0"], &["a", "b", "c"]);
        assert!(compare_models(&r, &other, 2, 1.0).is_err());

        // Same ranking with items and queries listed in another order.
        let shuffled = ranks(vec![vec![1, 2, 3], vec![2, 3, 1]], &["q1", "q0"], &["b", "c", "a"]);
        let agree = compare_models(&r, &shuffled, 1, 0.0).unwrap();
        assert!(agree.per_query.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn class_labels_and_missing_ids() {
        let classes: HashMap<String, Vec<String>> = [
            ("q", vec!["x", "y"]),
            ("a", vec!["y"]),
            ("b", vec!["z"]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
        .collect();
        let l = labels_from_classes(&["q".into()], &["a".into(), "b".into()], &classes).unwrap();
        assert_eq!(l[0].correct, vec![true, false]);
        let err = labels_from_classes(&["q".into(), "m1".into()], &["m2".into()], &classes)
            .unwrap_err()
            .to_string();
        assert!(err.contains("m1") && err.contains("m2"), "{err}");
    }

    fn perm(n: usize) -> impl Strategy<Value = Vec<u32>> {
        Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn soft_jaccard_bounds_symmetry_and_reduction(
            (a, b) in (2usize..30).prop_flat_map(|n| (perm(n), perm(n))),
            k in 1usize..10,
            s in 0.0f64..4.0,
        ) {
            let j = soft_jaccard(&a, &b, k, s);
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j, soft_jaccard(&b, &a, k, s));
            prop_assert_eq!(soft_jaccard(&a, &b, k, 0.0), jaccard_at_k(&a, &b, k));
        }

        #[test]
        fn accuracy_bounds_and_monotone(
            c in prop::collection::vec(any::<bool>(), 1..20),
            s in 0.0f64..4.0,
            pick in 0usize..20,
        ) {
            let k = c.len();
            let a = soft_topk_accuracy(&c, k, s).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a == 1.0, c.iter().all(|&x| x));
            let mut fixed = c.clone();
            let p = pick % k;
            if !fixed[p] {
                fixed[p] = true;
                prop_assert!(soft_topk_accuracy(&fixed, k, s).unwrap() > a);
            }
        }

        #[test]
        fn soft_jaccard_non_decreasing_in_s(
            (a, b) in (2usize..30).prop_flat_map(|n| (perm(n), perm(n))),
            k in 1usize..10,
        ) {
            let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
            let vals: Vec<f64> = grid.iter().map(|&s| soft_jaccard(&a, &b, k, s)).collect();
            // Larger s softens the penalty: (k/r)^(1/s) grows toward 1.
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
        }
    }
}
