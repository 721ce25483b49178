//! Word-embedding storage and the word2vec text loader.
//!
//! The text format is a header line `N d` followed by one line per token:
//! the token, then `d` whitespace-separated decimal components. Vectors are
//! kept as `f64` regardless of the precision written in the file.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Index of a feature (token) in an [`EmbeddingTable`].
pub type FeatureId = usize;

/// Immutable map from feature ids to `dim`-dimensional vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    /// Row-major `len() x dim`.
    data: Vec<f64>,
    tokens: Vec<String>,
    ids: HashMap<String, FeatureId>,
}

impl EmbeddingTable {
    /// Builds a table from parallel token and vector lists.
    pub fn from_rows(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.len() != vectors.len() {
            return Err(Error::invalid(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::EmptyInput("embedding with no vectors or zero dimension"));
        }
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("embedding vector has a non-finite component"));
            }
            data.extend_from_slice(v);
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if let Some(first) = ids.insert(t.clone(), i) {
                return Err(Error::DuplicateToken {
                    token: t.clone(),
                    line: i + 1,
                    first: first + 1,
                });
            }
        }
        Ok(Self {
            dim,
            data,
            tokens,
            ids,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of features `N_f`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vector(&self, id: FeatureId) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Row-major backing storage, `len() * dim()` values.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn token(&self, id: FeatureId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<FeatureId> {
        self.ids.get(token).copied()
    }

    pub fn vectors(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.dim)
    }

    /// Keeps only tokens present in `corpus_tokens`, preserving file order and
    /// re-compacting ids to `0..N_f'`.
    pub fn intersect_vocabulary(&self, corpus_tokens: &HashSet<String>) -> Result<Self> {
        let keep: Vec<FeatureId> = (0..self.len())
            .filter(|&i| corpus_tokens.contains(&self.tokens[i]))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyIntersection);
        }
        let mut data = Vec::with_capacity(keep.len() * self.dim);
        let mut tokens = Vec::with_capacity(keep.len());
        let mut ids = HashMap::with_capacity(keep.len());
        for (new_id, &old) in keep.iter().enumerate() {
            data.extend_from_slice(self.vector(old));
            tokens.push(self.tokens[old].clone());
            ids.insert(self.tokens[old].clone(), new_id);
        }
        Ok(Self {
            dim: self.dim,
            data,
            tokens,
            ids,
        })
    }

    /// Euclidean norm of every vector, in id order.
    pub fn vector_norms(&self) -> Vec<f64> {
        self.vectors()
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect()
    }

    /// Copy with every non-zero vector scaled to unit length.
    pub fn unit_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|c| *c /= norm);
            }
        }
        out
    }

    /// Reads word2vec text format, stopping after `limit` vectors if given.
    pub fn load(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), limit).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read<R: BufRead>(reader: R, limit: Option<usize>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io("<reader>", e))?,
            None => return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            }),
        };
        let (n_declared, dim) = parse_header(&header)?;
        let n_target = limit.map_or(n_declared, |l| l.min(n_declared));

        let mut data = Vec::with_capacity(n_target * dim);
        let mut tokens = Vec::with_capacity(n_target);
        let mut ids: HashMap<String, FeatureId> = HashMap::with_capacity(n_target);
        for (idx, line) in lines.enumerate() {
            if tokens.len() == n_target {
                break;
            }
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io("<reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default().to_string();
            let start = data.len();
            for field in fields {
                let c: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("cannot parse component {field:?}"),
                })?;
                if !c.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("non-finite component {field:?}"),
                    });
                }
                data.push(c);
            }
            let got = data.len() - start;
            if got != dim {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("row has {got} components, expected {dim}"),
                });
            }
            if let Some(&first) = ids.get(&token) {
                return Err(Error::DuplicateToken {
                    token,
                    line: lineno,
                    first: first + 2,
                });
            }
            ids.insert(token.clone(), tokens.len());
            tokens.push(token);
        }
        if tokens.len() < n_target {
            return Err(Error::Parse {
                line: tokens.len() + 2,
                msg: format!("header declares {n_declared} rows, file has {}", tokens.len()),
            });
        }
        Ok(Self {
            dim,
            data,
            tokens,
            ids,
        })
    }

    /// Writes word2vec text format using shortest round-trip decimals.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (tok, v) in self.tokens.iter().zip(self.vectors()) {
            w.write_all(tok.as_bytes())?;
            for c in v {
                write!(w, " {c:?}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        msg: format!("malformed header {line:?}: {msg}"),
    };
    let mut parts = line.split_whitespace();
    let n = parts
        .next()
        .ok_or_else(|| bad("missing vocabulary size"))?
        .parse::<usize>()
        .map_err(|_| bad("vocabulary size is not an integer"))?;
    let d = parts
        .next()
        .ok_or_else(|| bad("missing dimension"))?
        .parse::<usize>()
        .map_err(|_| bad("dimension is not an integer"))?;
    if parts.next().is_some() {
        return Err(bad("trailing fields"));
    }
    if d == 0 {
        return Err(bad("dimension must be positive"));
    }
    Ok((n, d))
}
