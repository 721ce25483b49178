//! On-disk formats.
//!
//! * Binary matrix: magic `DSM1`, little-endian `u32` version (1), `u64`
//!   rows, `u64` cols, then `rows * cols` little-endian IEEE-754 `f64`
//!   values in row-major order.
//! * Corpus: one `doc_id<TAB>text` record per line.
//! * Labels: one `doc_id<TAB>label[,label...]` record per line.
//! * Document-feature matrix: CSV `doc,feature,weight` with zero-based
//!   indices; ids travel in a separate one-per-line file.
//! * Rankings: CSV `query_id,item_id,rank,score`.
//!
//! CSV output uses `,`, `.` decimals, LF line endings and shortest
//! round-trip float formatting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::{DocFeatureMatrix, Document};
use crate::error::{Error, Result};
use crate::metrics::MetricSummary;
use crate::similarity::{RankMatrix, SimilarityMatrix};

pub const MATRIX_MAGIC: &[u8; 4] = b"DSM1";
pub const MATRIX_VERSION: u32 = 1;

/// A plain dense matrix as stored in the binary format.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn write_matrix<W: Write>(mut w: W, rows: usize, cols: usize, data: &[f64]) -> std::io::Result<()> {
    assert_eq!(data.len(), rows * cols, "matrix data does not match its shape");
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Matrix> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(io)?;
    let version = u32::from_le_bytes(b4);
    if version != MATRIX_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "{rows} x {cols} matrix needs {} payload bytes, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Matrix { rows, cols, data })
}

pub fn save_matrix(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_matrix(&mut w, rows, cols, data)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::new(f))
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let owned = path.to_path_buf();
    Ok(BufReader::new(f)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(&owned, e)))))
}

fn check_id(id: &str, line: usize) -> Result<()> {
    if id.is_empty() || id.contains([',', '\t', '\n', '\r']) {
        return Err(Error::Parse {
            line,
            msg: format!("invalid id {id:?} (empty, or contains a comma or tab)"),
        });
    }
    Ok(())
}

/// Reads `doc_id<TAB>text` records. Blank lines are skipped; ids must be unique.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, text) in open_lines(path.as_ref())? {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let (id, body) = text.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            msg: "expected doc_id<TAB>text".into(),
        })?;
        check_id(id, line)?;
        if let Some(first) = seen.insert(id.to_string(), line) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate doc id {id:?} (first at line {first})"),
            });
        }
        docs.push(Document {
            doc_id: id.to_string(),
            text: body.to_string(),
        });
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut w: W, docs: &[Document]) -> std::io::Result<()> {
    for d in docs {
        writeln!(w, "{}\t{}", d.doc_id, d.text)?;
    }
    Ok(())
}

/// One token per line; blank lines ignored.
pub fn read_word_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (_, l) in open_lines(path.as_ref())? {
        let l = l?;
        let t = l.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

pub fn write_word_list<W: Write>(mut w: W, words: &[String]) -> std::io::Result<()> {
    for x in words {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// Reads `doc_id<TAB>label[,label...]`.
pub fn read_labels(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for (line, text) in open_lines(path.as_ref())? {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let (id, labels) = text.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            msg: "expected doc_id<TAB>label".into(),
        })?;
        let labels: Vec<String> = labels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        if labels.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("document {id:?} has no label"),
            });
        }
        if out.insert(id.to_string(), labels).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate doc id {id:?}"),
            });
        }
    }
    Ok(out)
}

pub fn write_dfm_csv<W: Write>(mut w: W, m: &DocFeatureMatrix) -> std::io::Result<()> {
    w.write_all(b"doc,feature,weight\n")?;
    for (t, f, v) in m.triplets() {
        writeln!(w, "{t},{f},{v:?}")?;
    }
    Ok(())
}

pub fn read_dfm_csv<R: BufRead>(r: R, doc_ids: Vec<String>, n_features: usize) -> Result<DocFeatureMatrix> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); doc_ids.len()];
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<dfm>", e))?;
        if idx == 0 {
            if line.trim() != "doc,feature,weight" {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header doc,feature,weight, got {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: lineno, msg };
        let mut parts = line.split(',');
        let (Some(t), Some(f), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("expected 3 fields in {line:?}")));
        };
        let t: usize = t.parse().map_err(|_| bad(format!("bad doc index {t:?}")))?;
        let f: usize = f.parse().map_err(|_| bad(format!("bad feature index {f:?}")))?;
        let v: f64 = v.parse().map_err(|_| bad(format!("bad weight {v:?}")))?;
        let row = rows
            .get_mut(t)
            .ok_or_else(|| bad(format!("doc index {t} out of range")))?;
        row.push((f, v));
    }
    DocFeatureMatrix::from_rows(doc_ids, n_features, rows)
}

pub fn write_rankings<W: Write>(mut w: W, ranks: &RankMatrix, sim: &SimilarityMatrix) -> std::io::Result<()> {
    w.write_all(b"query_id,item_id,rank,score\n")?;
    for q in 0..ranks.n_queries() {
        let qid = &ranks.query_ids()[q];
        for (pos, item) in ranks.ordered_items(q).into_iter().enumerate() {
            writeln!(
                w,
                "{qid},{},{},{:?}",
                ranks.item_ids()[item],
                pos + 1,
                sim.get(q, item)
            )?;
        }
    }
    Ok(())
}

/// Reads a rankings CSV back into a [`RankMatrix`].
///
/// Items are ordered by first appearance. A query may omit exactly one item
/// (a removed self-recommendation); it is ranked last.
pub fn read_rankings<R: BufRead>(r: R) -> Result<RankMatrix> {
    let mut query_ids: Vec<String> = Vec::new();
    let mut q_index: HashMap<String, usize> = HashMap::new();
    let mut item_ids: Vec<String> = Vec::new();
    let mut i_index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<Vec<(usize, u32)>> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<rankings>", e))?;
        if idx == 0 {
            if line.trim() != "query_id,item_id,rank,score" {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header query_id,item_id,rank,score, got {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 fields in {line:?}"),
            });
        }
        let rank: u32 = f[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad rank {:?}", f[2]),
        })?;
        let q = *q_index.entry(f[0].to_string()).or_insert_with(|| {
            query_ids.push(f[0].to_string());
            entries.push(Vec::new());
            query_ids.len() - 1
        });
        let i = *i_index.entry(f[1].to_string()).or_insert_with(|| {
            item_ids.push(f[1].to_string());
            item_ids.len() - 1
        });
        entries[q].push((i, rank));
    }
    let n = item_ids.len();
    let mut rows = Vec::with_capacity(entries.len());
    let mut excluded = Vec::with_capacity(entries.len());
    for (q, e) in entries.into_iter().enumerate() {
        let mut row = vec![0u32; n];
        for (i, r) in &e {
            row[*i] = *r;
        }
        let missing: Vec<usize> = (0..n).filter(|&i| row[i] == 0).collect();
        match missing.as_slice() {
            [] => excluded.push(None),
            [x] => {
                row[*x] = n as u32;
                excluded.push(Some(*x));
            }
            _ => {
                return Err(Error::invalid(format!(
                    "query {:?} ranks {} of {n} items; rankings must be complete",
                    query_ids[q],
                    e.len()
                )))
            }
        }
        rows.push(row);
    }
    RankMatrix::from_rows(query_ids, item_ids, rows, excluded)
}

pub const EVAL_HEADER: &str = "metric,k,s,mean,se,q1,median,q3";

pub fn write_eval_row<W: Write>(mut w: W, metric: &str, k: usize, s: f64, m: &MetricSummary) -> std::io::Result<()> {
    writeln!(
        w,
        "{metric},{k},{s:?},{:?},{:?},{:?},{:?},{:?}",
        m.mean, m.se, m.q1, m.median, m.q3
    )
}
