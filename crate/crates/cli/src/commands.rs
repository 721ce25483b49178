//! The stage-by-stage subcommands and the helpers they share with `bench`
//! and `pipeline`.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use densim::corpus::{self, IdfVariant, Transform};
use densim::density::{self, DensityConfig, KernelSpec};
use densim::io as dio;
use densim::metrics;
use densim::pipeline::{self, BandwidthMethod, DsParams, DsSimilarity, Prepared};
use densim::sampler;
use densim::similarity;
use densim::synth::{self, SynthConfig};
use densim::{EmbeddingTable, KernelShape, RankMatrix, RwmdVariant};

use crate::args::*;
use crate::error::{invalid, CliError, CliResult, StageExt};
use crate::files;
use crate::output::OutputDir;

/// What a command leaves behind besides its files: comment lines for the
/// manifest and an error to report after the outputs are kept.
#[derive(Default)]
pub struct Finish {
    pub notes: Vec<(String, String)>,
    pub deferred_error: Option<CliError>,
}

impl Finish {
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

pub type Ran = CliResult<(OutputDir, Finish)>;

// ---------------------------------------------------------------------------
// argument parsing helpers

pub fn parse_transforms(spec: &str) -> CliResult<Vec<Transform>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(|s| match s {
            "normalize" => Ok(Transform::Normalize),
            "tfidf" => Ok(Transform::Tfidf(IdfVariant::Plain)),
            "tfidf-smooth" => Ok(Transform::Tfidf(IdfVariant::Smooth)),
            other => invalid(format!(
                "unknown transform {other:?} (expected normalize, tfidf, tfidf-smooth or none)"
            )),
        })
        .collect()
}

pub fn parse_k_grid(spec: &str) -> CliResult<Vec<usize>> {
    let ks: Vec<usize> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Invalid(format!("bad k value {s:?}"))))
        .collect::<CliResult<_>>()?;
    if ks.is_empty() {
        return invalid("the k grid is empty");
    }
    if ks.contains(&0) {
        return invalid("k values must be at least 1");
    }
    Ok(ks)
}

/// Softness grid; an empty grid means `s = 0` only.
pub fn parse_s_grid(spec: &str) -> CliResult<Vec<f64>> {
    let ss: Vec<f64> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Invalid(format!("bad s value {s:?}"))))
        .collect::<CliResult<_>>()?;
    if let Some(bad) = ss.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return invalid(format!("s values must be finite and >= 0, got {bad}"));
    }
    Ok(if ss.is_empty() { vec![0.0] } else { ss })
}

fn kernel_shape(k: KernelArg) -> KernelShape {
    match k {
        KernelArg::Gaussian => KernelShape::Gaussian,
        KernelArg::Epanechnikov => KernelShape::Epanechnikov,
    }
}

pub fn rwmd_variant(v: RwmdVariantArg) -> RwmdVariant {
    match v {
        RwmdVariantArg::Symmetric => RwmdVariant::Symmetric,
        RwmdVariantArg::OneSided => RwmdVariant::OneSided,
    }
}

pub fn timeout(a: &RwmdArgs) -> CliResult<Option<Duration>> {
    if !(a.timeout >= 0.0 && a.timeout.is_finite()) {
        return invalid(format!("timeout must be >= 0 seconds, got {}", a.timeout));
    }
    Ok((a.timeout > 0.0).then(|| Duration::from_secs_f64(a.timeout)))
}

fn check_quantiles(q_low: f64, q_high: f64) -> CliResult<()> {
    if !(0.0 <= q_low && q_low < q_high && q_high <= 1.0) {
        return invalid(format!("need 0 <= qlow < qhigh <= 1, got {q_low}, {q_high}"));
    }
    Ok(())
}

fn check_adjust(adjust: f64) -> CliResult<()> {
    if !(adjust > 0.0 && adjust.is_finite()) {
        return invalid(format!("adjustment factor must be > 0, got {adjust}"));
    }
    Ok(())
}

fn check_radius_quantile(q: f64) -> CliResult<()> {
    if !(q > 0.0 && q <= 1.0) {
        return invalid(format!("radius quantile must be in (0, 1], got {q}"));
    }
    Ok(())
}

fn bandwidth_method(m: BandwidthMethodArg, diagonal: bool, steps: usize) -> CliResult<BandwidthMethod> {
    if diagonal && m != BandwidthMethodArg::Silverman {
        return invalid("--diagonal needs --bandwidth silverman");
    }
    Ok(match m {
        BandwidthMethodArg::Volume => BandwidthMethod::Volume,
        BandwidthMethodArg::Silverman => BandwidthMethod::Silverman { diagonal },
        BandwidthMethodArg::Lscv => {
            if steps == 0 {
                return invalid("lscv-steps must be at least 1");
            }
            BandwidthMethod::Lscv { steps }
        }
    })
}

/// Validated density-similarity parameters.
pub fn ds_params(a: &DsArgs) -> CliResult<DsParams> {
    if a.n_points == 0 {
        return invalid("n-points must be at least 1");
    }
    check_adjust(a.adjust)?;
    check_quantiles(a.qlow, a.qhigh)?;
    check_radius_quantile(a.radius_quantile)?;
    Ok(DsParams {
        kernel: kernel_shape(a.kernel),
        bandwidth: bandwidth_method(a.bandwidth, a.diagonal, a.lscv_steps)?,
        adjust: a.adjust,
        n_points: a.n_points,
        seed: a.seed,
        normalize: a.normalize,
        similarity: match a.similarity {
            SimilarityArg::Cosine => DsSimilarity::Cosine,
            SimilarityArg::Js => DsSimilarity::JensenShannon,
        },
        radius_quantile: a.radius_quantile,
        q_low: a.qlow,
        q_high: a.qhigh,
    })
}

// ---------------------------------------------------------------------------
// corpus loading

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn read_tokenized(path: &Path, stop: &HashSet<String>, min_len: usize) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let docs = dio::read_corpus(path)
        .map_err(|e| CliError::Invalid(format!("read corpus {}: {e}", path.display())))?;
    let ids = docs.iter().map(|d| d.doc_id.clone()).collect();
    let tokens = docs.iter().map(|d| corpus::tokenize(&d.text, stop, min_len)).collect();
    Ok((ids, tokens))
}

/// Whether the item corpus is the query corpus.
pub fn single_corpus(a: &CorpusArgs) -> bool {
    a.items.as_ref().is_none_or(|p| same_file(p, &a.corpus))
}

/// Embedding, tokenization and weighting for `dfm`, `bench` and `pipeline`.
pub fn prepare_corpora(a: &CorpusArgs) -> CliResult<Prepared> {
    let transforms = parse_transforms(&a.transforms)?;
    if a.min_len == 0 {
        return invalid("min-len must be at least 1");
    }
    let stop: HashSet<String> = match &a.stopwords {
        Some(p) => dio::read_word_list(p)
            .stage("read stopwords")?
            .into_iter()
            .map(|w| w.to_lowercase())
            .collect(),
        None => HashSet::new(),
    };
    let mut emb = EmbeddingTable::load(&a.embedding, a.limit).stage("load embedding")?;
    if a.unit_normalize {
        emb = emb.unit_normalized();
    }
    log::info!("embedding: {} tokens, d = {}", emb.len(), emb.dim());
    let queries = read_tokenized(&a.corpus, &stop, a.min_len)?;
    let items = match &a.items {
        Some(p) if !single_corpus(a) => Some(read_tokenized(p, &stop, a.min_len)?),
        _ => None,
    };
    let p = pipeline::prepare(queries, items, &emb, &transforms).stage("document-feature matrix")?;
    if !p.dropped.is_empty() {
        log::warn!("{} document(s) dropped: {}", p.dropped.len(), p.dropped.join(", "));
    }
    log::info!(
        "{} query docs, {} features after intersecting with the corpus",
        p.queries.n_docs(),
        p.embedding.len()
    );
    Ok(p)
}

// ---------------------------------------------------------------------------
// synth

pub fn synth(a: &SynthArgs) -> Ran {
    let separation = a.separation.unwrap_or(10.0 * (a.dim as f64).sqrt());
    if !(separation > 0.0 && separation.is_finite()) {
        return invalid(format!("separation must be > 0, got {separation}"));
    }
    let cfg = SynthConfig {
        n_classes: a.classes,
        docs_per_class: a.docs_per_class,
        words_per_class: a.words_per_class,
        doc_len: a.doc_len,
        dim: a.dim,
        separation,
        mixing: a.mixing,
        seed: a.seed,
    };
    let s = synth::generate(&cfg).map_err(|e| CliError::Invalid(format!("synth: {e}")))?;
    let mut out = OutputDir::create(&a.out.out)?;
    out.write("corpus.tsv", |w| dio::write_corpus(w, &s.docs))?;
    out.write(files::EMBEDDING, |w| s.embedding.write(w))?;
    out.write("labels.tsv", |w| {
        for (id, label) in &s.labels {
            writeln!(w, "{id}\t{label}")?;
        }
        Ok(())
    })?;
    let mut fin = Finish::default();
    fin.note("separation", separation);
    fin.note("documents", s.docs.len());
    fin.note("vocabulary", s.embedding.len());
    Ok((out, fin))
}

// ---------------------------------------------------------------------------
// dfm

pub fn dfm(a: &DfmArgs) -> Ran {
    let p = prepare_corpora(&a.corpus)?;
    let mut out = OutputDir::create(&a.out.out)?;
    files::write_dfm_dir(&mut out, &p.embedding, &p.queries, p.items.as_ref(), &p.dropped)?;
    let mut fin = Finish::default();
    fin.note("query documents", p.queries.n_docs());
    if let Some(i) = &p.items {
        fin.note("item documents", i.n_docs());
    }
    fin.note("features", p.embedding.len());
    fin.note("dropped documents", p.dropped.len());
    Ok((out, fin))
}

// ---------------------------------------------------------------------------
// bandwidth

pub fn bandwidth(a: &BandwidthArgs) -> Ran {
    check_adjust(a.adjust)?;
    check_quantiles(a.qlow, a.qhigh)?;
    // Silverman always reports its per-axis values; `density --diagonal` picks them up.
    let method = bandwidth_method(a.method, a.method == BandwidthMethodArg::Silverman, a.lscv_steps)?;
    let emb = EmbeddingTable::load(&a.embedding, None).stage("load embedding")?;
    let bw = pipeline::estimate_bandwidth(&emb, method, a.qlow, a.qhigh)
        .and_then(|b| b.adjusted(a.adjust))
        .stage("bandwidth")?;
    let mut out = OutputDir::create(&a.out.out)?;
    files::write_bandwidth(&mut out, &bw)?;
    let mut fin = Finish::default();
    fin.note("h", format!("{:?}", bw.h()));
    Ok((out, fin))
}

// ---------------------------------------------------------------------------
// sample

pub fn sample(a: &SampleArgs) -> Ran {
    if a.n_points == 0 {
        return invalid("n-points must be at least 1");
    }
    let (dim, radius) = match (&a.embedding, a.dim, a.radius) {
        (Some(path), _, _) => {
            check_radius_quantile(a.radius_quantile)?;
            let emb = EmbeddingTable::load(path, None).stage("load embedding")?;
            let r = sampler::sampling_radius(&emb.vector_norms(), a.radius_quantile).stage("sampling radius")?;
            (emb.dim(), r)
        }
        (None, Some(d), Some(r)) => (d, r),
        _ => return invalid("give either --embedding or both --dim and --radius"),
    };
    let s = sampler::sample_ball(a.n_points, dim, radius, a.seed).stage("sample")?;
    let mut out = OutputDir::create(&a.out.out)?;
    files::write_samples(&mut out, &s)?;
    let mut fin = Finish::default();
    fin.note("radius", format!("{radius:?}"));
    Ok((out, fin))
}

// ---------------------------------------------------------------------------
// density

pub fn density(a: &DensityArgs) -> Ran {
    let bw = files::read_bandwidth(&a.bandwidth.join(files::BANDWIDTH), a.diagonal)?;
    let samples = files::read_samples(&a.samples)?;
    let d = files::read_dfm_dir(&a.dfm)?;
    let cfg = DensityConfig {
        bandwidth: &bw,
        kernel: KernelSpec::new(kernel_shape(a.kernel), d.embedding.dim()).stage("density")?,
        normalize: a.normalize,
    };
    let dens = density::cross_corpus_densities(&d.queries, d.items(), &d.embedding, &samples, &cfg).stage("density")?;
    warn_zero_denominators(&dens);
    let mut out = OutputDir::create(&a.out.out)?;
    files::write_densities(&mut out, &dens)?;
    let mut fin = Finish::default();
    fin.note("single density matrix", dens.shared());
    Ok((out, fin))
}

pub fn warn_zero_denominators(d: &density::CrossDensities) {
    let z = d.queries.zero_denominator.len();
    if z > 0 {
        log::warn!("normalizing sum vanished at {z} sample point(s); those entries are 0 (bandwidth too small?)");
    }
}

// ---------------------------------------------------------------------------
// similar

pub fn similar(a: &SimilarArgs) -> Ran {
    let limit = timeout(&a.rwmd)?;
    let sim = match a.kind {
        SimilarKindArg::Rwmd => {
            let Some(dir) = &a.dfm else {
                return invalid("--kind rwmd needs --dfm");
            };
            let d = files::read_dfm_dir(dir)?;
            let (sim, took) = pipeline::run_rwmd(&d.queries, d.items(), &d.embedding, rwmd_variant(a.rwmd.rwmd_variant), limit)
                .stage("rwmd")?;
            log::info!("rwmd took {:.2} s", took.as_secs_f64());
            sim
        }
        SimilarKindArg::Cosine | SimilarKindArg::Js => {
            let Some(dir) = &a.density else {
                return invalid("--kind cosine and --kind js need --density");
            };
            let d = files::read_densities(dir)?;
            if a.kind == SimilarKindArg::Cosine {
                similarity::cosine_similarity_rows(&d.queries, d.items()).stage("similarity")?
            } else {
                similarity::jensen_shannon_similarity(&d.queries, d.items()).stage("similarity")?
            }
        }
    };
    let mut out = OutputDir::create(&a.out.out)?;
    files::write_similarity(&mut out, &sim)?;
    Ok((out, Finish::default()))
}

// ---------------------------------------------------------------------------
// rank

pub fn rank(a: &RankArgs) -> Ran {
    let sim = files::read_similarity(&a.similarity)?;
    let ranks = RankMatrix::from_similarity(&sim, a.exclude_self);
    let mut out = OutputDir::create(&a.out.out)?;
    out.write(files::RANKINGS, |w| dio::write_rankings(w, &ranks, &sim))?;
    Ok((out, Finish::default()))
}

// ---------------------------------------------------------------------------
// eval

fn model_names(paths: &[&str], names: Option<&str>) -> CliResult<Vec<String>> {
    let names: Vec<String> = match names {
        Some(n) => n.split(',').map(|s| s.trim().to_string()).collect(),
        None => {
            let stem = |p: &str| {
                Path::new(p)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            };
            let parent = |p: &str| {
                Path::new(p)
                    .parent()
                    .and_then(Path::file_name)
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            };
            let stems: Vec<String> = paths.iter().map(|p| stem(p)).collect();
            let unique = stems.iter().collect::<HashSet<_>>().len() == stems.len();
            if unique {
                stems
            } else {
                paths.iter().map(|p| parent(p)).collect()
            }
        }
    };
    if names.len() != paths.len() {
        return invalid(format!("{} names for {} rankings files", names.len(), paths.len()));
    }
    let mut seen = HashSet::new();
    for n in &names {
        if n.is_empty() || n.contains([',', ':']) || !seen.insert(n) {
            return invalid(format!(
                "model names must be unique, non-empty and free of ',' and ':'; got {names:?} (use --names)"
            ));
        }
    }
    Ok(names)
}

fn read_rankings_file(path: &Path) -> CliResult<RankMatrix> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    dio::read_rankings(std::io::BufReader::new(f))
        .map_err(|e| CliError::Invalid(format!("read rankings {}: {e}", path.display())))
}

/// One evaluation row: metric name, k, s and the summary.
pub struct EvalRow {
    pub metric: String,
    pub k: usize,
    pub s: f64,
    pub summary: metrics::MetricSummary,
}

pub fn accuracy_rows(
    name: &str,
    ranks: &RankMatrix,
    classes: &HashMap<String, Vec<String>>,
    ks: &[usize],
    ss: &[f64],
) -> CliResult<Vec<EvalRow>> {
    let labels = metrics::labels_from_classes(ranks.query_ids(), ranks.item_ids(), classes)
        .map_err(|e| CliError::Invalid(format!("labels: {e}")))?;
    let mut rows = Vec::new();
    for &k in ks {
        for &s in ss {
            let summary = metrics::evaluate_model(ranks, &labels, k, s)
                .map_err(|e| CliError::Invalid(format!("accuracy of {name} at k={k}, s={s}: {e}")))?;
            rows.push(EvalRow {
                metric: format!("accuracy:{name}"),
                k,
                s,
                summary,
            });
        }
    }
    Ok(rows)
}

pub fn write_eval(out: &mut OutputDir, rows: &[EvalRow], query_ids: &[&[String]], per_query: bool) -> CliResult<()> {
    out.write(files::EVAL, |w| {
        writeln!(w, "{}", dio::EVAL_HEADER)?;
        for r in rows {
            dio::write_eval_row(&mut *w, &r.metric, r.k, r.s, &r.summary)?;
        }
        Ok(())
    })?;
    if per_query {
        out.write(files::EVAL_PER_QUERY, |w| {
            writeln!(w, "metric,k,s,query_id,value")?;
            for (r, ids) in rows.iter().zip(query_ids) {
                for (q, v) in ids.iter().zip(&r.summary.per_query) {
                    writeln!(w, "{},{},{:?},{q},{v:?}", r.metric, r.k, r.s)?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Ran {
    let ks = parse_k_grid(&a.grid.k)?;
    let ss = parse_s_grid(&a.grid.s)?;
    let paths: Vec<&str> = a.rankings.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if paths.is_empty() {
        return invalid("no rankings files given");
    }
    let names = model_names(&paths, a.names.as_deref())?;
    if a.labels.is_none() && paths.len() < 2 {
        return invalid("nothing to evaluate: give --labels or at least two rankings files");
    }
    let models: Vec<RankMatrix> = paths
        .iter()
        .map(|p| read_rankings_file(Path::new(p)))
        .collect::<CliResult<_>>()?;
    let classes = match &a.labels {
        Some(p) => Some(dio::read_labels(p).map_err(|e| CliError::Invalid(format!("read labels: {e}")))?),
        None => None,
    };

    let mut rows = Vec::new();
    let mut row_queries: Vec<&[String]> = Vec::new();
    if let Some(classes) = &classes {
        for (name, m) in names.iter().zip(&models) {
            let r = accuracy_rows(name, m, classes, &ks, &ss)?;
            row_queries.extend(std::iter::repeat_n(m.query_ids(), r.len()));
            rows.extend(r);
        }
    }
    for x in 0..models.len() {
        for y in x + 1..models.len() {
            for &k in &ks {
                for &s in &ss {
                    let summary = metrics::compare_models(&models[x], &models[y], k, s)
                        .map_err(|e| CliError::Invalid(format!("compare {} and {}: {e}", names[x], names[y])))?;
                    rows.push(EvalRow {
                        metric: format!("soft_jaccard:{}:{}", names[x], names[y]),
                        k,
                        s,
                        summary,
                    });
                    row_queries.push(models[x].query_ids());
                }
            }
        }
    }
    let mut out = OutputDir::create(&a.out.out)?;
    write_eval(&mut out, &rows, &row_queries, a.per_query)?;
    let mut fin = Finish::default();
    fin.note("rows", rows.len());
    Ok((out, fin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_k_grid("5, 10").unwrap(), vec![5, 10]);
        assert!(parse_k_grid("").is_err());
        assert!(parse_k_grid("0").is_err());
        assert!(parse_k_grid("x").is_err());
        assert_eq!(parse_s_grid("").unwrap(), vec![0.0]);
        assert_eq!(parse_s_grid("0,0.5,2").unwrap(), vec![0.0, 0.5, 2.0]);
        assert!(parse_s_grid("-1").is_err());
    }

    #[test]
    fn transforms() {
        assert_eq!(
            parse_transforms("normalize,tfidf").unwrap(),
            vec![Transform::Normalize, Transform::Tfidf(IdfVariant::Plain)]
        );
        assert_eq!(parse_transforms("none").unwrap(), vec![]);
        assert_eq!(parse_transforms("").unwrap(), vec![]);
        assert_eq!(
            parse_transforms("tfidf-smooth").unwrap(),
            vec![Transform::Tfidf(IdfVariant::Smooth)]
        );
        assert!(parse_transforms("stem").is_err());
    }

    #[test]
    fn names_from_stems_or_parents() {
        assert_eq!(model_names(&["a/ds.csv", "b/rwmd.csv"], None).unwrap(), vec!["ds", "rwmd"]);
        assert_eq!(
            model_names(&["x/ds/rankings.csv", "x/rwmd/rankings.csv"], None).unwrap(),
            vec!["ds", "rwmd"]
        );
        assert!(model_names(&["a.csv", "b.csv"], Some("one")).is_err());
        assert!(model_names(&["a.csv", "b.csv"], Some("m,m")).is_err());
    }

    #[test]
    fn ds_params_validation() {
        use clap::Parser;
        #[derive(Parser)]
        struct T {
            #[command(flatten)]
            ds: DsArgs,
        }
        let parse = |args: &[&str]| ds_params(&T::parse_from(std::iter::once("t").chain(args.iter().copied())).ds);
        let p = parse(&[]).unwrap();
        assert_eq!(p, DsParams::default());
        assert!(parse(&["--n-points", "0"]).is_err());
        assert!(parse(&["--adjust", "0"]).is_err());
        assert!(parse(&["--qlow", "0.9", "--qhigh", "0.1"]).is_err());
        assert!(parse(&["--diagonal"]).is_err());
        assert!(parse(&["--bandwidth", "silverman", "--diagonal"]).is_ok());
    }
}
