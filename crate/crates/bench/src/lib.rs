//! Fixtures shared by the criterion benches.

use densim::pipeline::{self, Prepared};
use densim::synth::{self, SynthConfig};
use densim::{corpus, Bandwidth, Result};

/// A prepared synthetic corpus of `n_docs` documents in 50 dimensions.
pub fn corpus(n_docs: usize) -> Result<Prepared> {
    let n_classes = 5;
    let cfg = SynthConfig {
        n_classes,
        docs_per_class: n_docs.div_ceil(n_classes),
        words_per_class: 200,
        doc_len: 60,
        dim: 50,
        separation: 10.0 * 50f64.sqrt(),
        mixing: 0.1,
        seed: 1,
    };
    let s = synth::generate(&cfg)?;
    pipeline::prepare((s.doc_ids(), s.token_lists()), None, &s.embedding, &corpus::DEFAULT_TRANSFORMS)
}

/// Volume-rule bandwidth of the corpus embedding.
pub fn bandwidth(p: &Prepared) -> Result<Bandwidth> {
    let d = pipeline::DsParams::default();
    pipeline::estimate_bandwidth(&p.embedding, d.bandwidth, d.q_low, d.q_high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_builds() {
        let p = corpus(20).unwrap();
        assert_eq!(p.queries.n_docs(), 20);
        assert!(bandwidth(&p).unwrap().h() > 0.0);
    }
}
