//! File layout of stage directories. Every stage writes fixed file names, so
//! a directory produced by one command (or by `pipeline`) can be handed to
//! the next.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use densim::density::CrossDensities;
use densim::io::{self as dio, Matrix};
use densim::sampler::GENERATOR_NAME;
use densim::{Bandwidth, DensityMatrix, DocFeatureMatrix, EmbeddingTable, SamplePoints, SimilarityKind, SimilarityMatrix};

use crate::error::{invalid, CliError, CliResult, StageExt};
use crate::output::OutputDir;

pub const EMBEDDING: &str = "embedding.txt";
pub const QUERY_IDS: &str = "queries.ids";
pub const ITEM_IDS: &str = "items.ids";
pub const DFM_QUERIES: &str = "dfm_queries.csv";
pub const DFM_ITEMS: &str = "dfm_items.csv";
pub const DROPPED: &str = "dropped.ids";
pub const BANDWIDTH: &str = "bandwidth.csv";
pub const SAMPLES: &str = "samples.dsm";
pub const SAMPLES_META: &str = "samples.meta";
pub const DENSITY_QUERIES: &str = "density_queries.dsm";
pub const DENSITY_ITEMS: &str = "density_items.dsm";
pub const SIMILARITY: &str = "similarity.dsm";
pub const SIMILARITY_META: &str = "similarity.meta";
pub const RANKINGS: &str = "rankings.csv";
pub const EVAL: &str = "eval.csv";
pub const EVAL_PER_QUERY: &str = "eval_per_query.csv";
pub const REPORT: &str = "report.csv";
pub const MANIFEST: &str = "manifest.txt";

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_ids(out: &mut OutputDir, name: &str, ids: &[String]) -> CliResult<()> {
    out.write(name, |w| dio::write_word_list(w, ids)).map(drop)
}

pub fn read_ids(path: &Path) -> CliResult<Vec<String>> {
    dio::read_word_list(path).stage("read ids")
}

/// `key = value` lines, as used by the small metadata sidecars.
fn read_meta(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

fn meta_field<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str, path: &Path) -> CliResult<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Invalid(format!("{}: missing or bad field {key:?}", path.display())))
}

// ---------------------------------------------------------------------------
// document-feature matrices

pub fn write_dfm_dir(
    out: &mut OutputDir,
    emb: &EmbeddingTable,
    queries: &DocFeatureMatrix,
    items: Option<&DocFeatureMatrix>,
    dropped: &[String],
) -> CliResult<()> {
    out.write(EMBEDDING, |w| emb.write(w))?;
    out.write(DFM_QUERIES, |w| dio::write_dfm_csv(w, queries))?;
    write_ids(out, QUERY_IDS, queries.doc_ids())?;
    if let Some(items) = items {
        out.write(DFM_ITEMS, |w| dio::write_dfm_csv(w, items))?;
        write_ids(out, ITEM_IDS, items.doc_ids())?;
    }
    if !dropped.is_empty() {
        write_ids(out, DROPPED, dropped)?;
    }
    Ok(())
}

pub struct DfmDir {
    pub embedding: EmbeddingTable,
    pub queries: DocFeatureMatrix,
    pub items: Option<DocFeatureMatrix>,
}

impl DfmDir {
    pub fn items(&self) -> &DocFeatureMatrix {
        self.items.as_ref().unwrap_or(&self.queries)
    }
}

pub fn read_dfm_dir(dir: &Path) -> CliResult<DfmDir> {
    let embedding = EmbeddingTable::load(dir.join(EMBEDDING), None).stage("load embedding")?;
    let n_f = embedding.len();
    let read = |csv: &str, ids: &str| -> CliResult<DocFeatureMatrix> {
        let ids = read_ids(&dir.join(ids))?;
        dio::read_dfm_csv(open(&dir.join(csv))?, ids, n_f).stage("read document-feature matrix")
    };
    let queries = read(DFM_QUERIES, QUERY_IDS)?;
    let items = if dir.join(DFM_ITEMS).exists() {
        Some(read(DFM_ITEMS, ITEM_IDS)?)
    } else {
        None
    };
    Ok(DfmDir {
        embedding,
        queries,
        items,
    })
}

// ---------------------------------------------------------------------------
// bandwidth

/// `axis,h` rows: `all` carries the scalar, numbered rows the per-axis values.
pub fn write_bandwidth(out: &mut OutputDir, bw: &Bandwidth) -> CliResult<()> {
    out.write(BANDWIDTH, |w| {
        writeln!(w, "axis,h")?;
        writeln!(w, "all,{:?}", bw.h())?;
        for (a, h) in bw.per_axis().unwrap_or(&[]).iter().enumerate() {
            writeln!(w, "{a},{h:?}")?;
        }
        Ok(())
    })
    .map(drop)
}

/// Reads a bandwidth file; per-axis rows are used only with `diagonal`.
pub fn read_bandwidth(path: &Path, diagonal: bool) -> CliResult<Bandwidth> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("axis,h") {
        return Err(bad("expected header axis,h".into()));
    }
    let mut scalar = None;
    let mut axes = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (axis, h) = line.split_once(',').ok_or_else(|| bad(format!("bad row {line:?}")))?;
        let h: f64 = h.trim().parse().map_err(|_| bad(format!("bad value in {line:?}")))?;
        if axis == "all" {
            scalar = Some(h);
        } else {
            let a: usize = axis.parse().map_err(|_| bad(format!("bad axis in {line:?}")))?;
            if a != axes.len() {
                return Err(bad(format!("axis {a} out of order")));
            }
            axes.push(h);
        }
    }
    if diagonal {
        if axes.is_empty() {
            return Err(bad("no per-axis bandwidths (estimate with --method silverman)".into()));
        }
        return Bandwidth::diagonal(axes).stage("bandwidth");
    }
    let h = scalar.ok_or_else(|| bad("missing `all` row".into()))?;
    Bandwidth::scalar(h).stage("bandwidth")
}

// ---------------------------------------------------------------------------
// sample points

pub fn write_samples(out: &mut OutputDir, s: &SamplePoints) -> CliResult<()> {
    out.write(SAMPLES, |w| dio::write_matrix(w, s.len(), s.dim(), s.as_flat()))?;
    out.write(SAMPLES_META, |w| {
        writeln!(w, "n = {}", s.len())?;
        writeln!(w, "d = {}", s.dim())?;
        writeln!(w, "radius = {:?}", s.radius())?;
        writeln!(w, "seed = {}", s.seed())?;
        writeln!(w, "generator = {GENERATOR_NAME}")
    })?;
    Ok(())
}

pub fn read_samples(dir: &Path) -> CliResult<SamplePoints> {
    let meta_path = dir.join(SAMPLES_META);
    let meta = read_meta(&meta_path)?;
    let m = dio::load_matrix(dir.join(SAMPLES)).stage("read sample points")?;
    let n: usize = meta_field(&meta, "n", &meta_path)?;
    let d: usize = meta_field(&meta, "d", &meta_path)?;
    if (n, d) != (m.rows, m.cols) {
        return invalid(format!(
            "{}: sidecar says {n} x {d}, matrix is {} x {}",
            meta_path.display(),
            m.rows,
            m.cols
        ));
    }
    if let Some(g) = meta.get("generator") {
        if g != GENERATOR_NAME {
            log::warn!("sample points were drawn by {g:?}, not {GENERATOR_NAME:?}");
        }
    }
    let radius: f64 = meta_field(&meta, "radius", &meta_path)?;
    let seed: u64 = meta_field(&meta, "seed", &meta_path)?;
    SamplePoints::from_raw(d, radius, seed, m.data).stage("read sample points")
}

// ---------------------------------------------------------------------------
// densities and similarities

pub fn write_densities(out: &mut OutputDir, d: &CrossDensities) -> CliResult<()> {
    let q = &d.queries;
    out.write(DENSITY_QUERIES, |w| dio::write_matrix(w, q.n_docs(), q.n_points(), q.as_flat()))?;
    write_ids(out, QUERY_IDS, q.doc_ids())?;
    if let Some(i) = &d.items {
        out.write(DENSITY_ITEMS, |w| dio::write_matrix(w, i.n_docs(), i.n_points(), i.as_flat()))?;
        write_ids(out, ITEM_IDS, i.doc_ids())?;
    }
    Ok(())
}

fn density_from(m: Matrix, ids: Vec<String>) -> CliResult<DensityMatrix> {
    if m.rows != ids.len() {
        return invalid(format!("{} density rows but {} ids", m.rows, ids.len()));
    }
    DensityMatrix::from_raw(ids, m.cols, m.data, false).stage("read densities")
}

pub fn read_densities(dir: &Path) -> CliResult<CrossDensities> {
    let queries = density_from(
        dio::load_matrix(dir.join(DENSITY_QUERIES)).stage("read densities")?,
        read_ids(&dir.join(QUERY_IDS))?,
    )?;
    let items = if dir.join(DENSITY_ITEMS).exists() {
        Some(density_from(
            dio::load_matrix(dir.join(DENSITY_ITEMS)).stage("read densities")?,
            read_ids(&dir.join(ITEM_IDS))?,
        )?)
    } else {
        None
    };
    Ok(CrossDensities { queries, items })
}

pub fn kind_name(kind: SimilarityKind) -> &'static str {
    match kind {
        SimilarityKind::Cosine => "cosine",
        SimilarityKind::JensenShannon => "js",
        SimilarityKind::NegRwmd => "neg-rwmd",
    }
}

pub fn write_similarity(out: &mut OutputDir, s: &SimilarityMatrix) -> CliResult<()> {
    out.write(SIMILARITY, |w| dio::write_matrix(w, s.n_queries(), s.n_items(), s.as_flat()))?;
    out.write_str(SIMILARITY_META, &format!("kind = {}\n", kind_name(s.kind)))?;
    write_ids(out, QUERY_IDS, s.query_ids())?;
    write_ids(out, ITEM_IDS, s.item_ids())?;
    Ok(())
}

pub fn read_similarity(dir: &Path) -> CliResult<SimilarityMatrix> {
    let meta_path = dir.join(SIMILARITY_META);
    let meta = read_meta(&meta_path)?;
    let kind = match meta.get("kind").map(String::as_str) {
        Some("cosine") => SimilarityKind::Cosine,
        Some("js") => SimilarityKind::JensenShannon,
        Some("neg-rwmd") => SimilarityKind::NegRwmd,
        other => return invalid(format!("{}: unknown kind {other:?}", meta_path.display())),
    };
    let m = dio::load_matrix(dir.join(SIMILARITY)).stage("read similarity")?;
    let q = read_ids(&dir.join(QUERY_IDS))?;
    let i = read_ids(&dir.join(ITEM_IDS))?;
    if (m.rows, m.cols) != (q.len(), i.len()) {
        return invalid(format!(
            "similarity matrix is {} x {} but there are {} query and {} item ids",
            m.rows,
            m.cols,
            q.len(),
            i.len()
        ));
    }
    SimilarityMatrix::from_raw(kind, q, i, m.data).stage("read similarity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        let bw = Bandwidth::diagonal(vec![0.5, 2.0, 0.1]).unwrap();
        write_bandwidth(&mut out, &bw).unwrap();
        out.commit();
        let path = tmp.path().join(BANDWIDTH);
        assert_eq!(read_bandwidth(&path, true).unwrap(), bw);
        let scalar = read_bandwidth(&path, false).unwrap();
        assert_eq!(scalar.h(), bw.h());
        assert!(scalar.per_axis().is_none());
    }

    #[test]
    fn scalar_bandwidth_cannot_be_diagonal() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        write_bandwidth(&mut out, &Bandwidth::scalar(0.3).unwrap()).unwrap();
        out.commit();
        let text = std::fs::read_to_string(tmp.path().join(BANDWIDTH)).unwrap();
        assert_eq!(text, "axis,h\nall,0.3\n");
        assert!(read_bandwidth(&tmp.path().join(BANDWIDTH), true).is_err());
    }

    #[test]
    fn samples_round_trip_with_sidecar() {
        let tmp = tempfile::tempdir().unwrap();
        let s = densim::sampler::sample_ball(7, 3, 2.5, 42).unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        write_samples(&mut out, &s).unwrap();
        out.commit();
        let back = read_samples(tmp.path()).unwrap();
        assert_eq!(back.as_flat(), s.as_flat());
        assert_eq!((back.radius(), back.seed()), (2.5, 42));
        let meta = std::fs::read_to_string(tmp.path().join(SAMPLES_META)).unwrap();
        assert!(meta.contains("generator = chacha20"));
    }
}
