//! Document densities at the sample points.
//!
//! For document `t` and sample point `z_j` the density is the kernel
//! regression
//!
//! ```text
//! rho_t(z_j) = sum_i k((z_j - x_i) / h) w_{t,i}  /  sum_i k((z_j - x_i) / h)
//! ```
//!
//! where the denominator runs over every feature of the embedding. By default
//! only the numerator is kept; cosine similarity downstream does not see the
//! per-point scale.
//!
//! Kernel values are handled as logarithms and each entry is reduced with a
//! max-shifted log-sum-exp in a fixed feature order, so results do not depend
//! on how work is split across threads. Entries whose value falls below the
//! smallest normal `f64` are stored as exactly zero.

use rayon::prelude::*;

use crate::bandwidth::Bandwidth;
use crate::corpus::DocFeatureMatrix;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::sampler::SamplePoints;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelShape {
    #[default]
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be at least 1"));
        }
        Ok(Self { shape, dim })
    }

    /// `log k(y)` given `|y|^2`.
    #[inline]
    pub fn log_value_scaled(&self, y2: f64) -> f64 {
        let d = self.dim as f64;
        match self.shape {
            KernelShape::Gaussian => -0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * y2,
            KernelShape::Epanechnikov => {
                let v = d - y2;
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// `log k((z - x) / h)` for a scalar bandwidth, given `|z - x|^2`.
pub fn kernel_log_value(spec: KernelSpec, squared_distance: f64, h: f64) -> f64 {
    spec.log_value_scaled(squared_distance / (h * h))
}

/// Dense documents-by-sample-points density values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_points: usize,
    data: Vec<f64>,
    doc_ids: Vec<String>,
    normalized: bool,
    /// Sample points where the normalizing sum underflowed to zero.
    pub zero_denominator: Vec<usize>,
}

impl DensityMatrix {
    pub fn from_raw(
        doc_ids: Vec<String>,
        n_points: usize,
        data: Vec<f64>,
        normalized: bool,
    ) -> Result<Self> {
        if data.len() != doc_ids.len() * n_points {
            return Err(Error::invalid(format!(
                "{} values for {} x {n_points} density matrix",
                data.len(),
                doc_ids.len()
            )));
        }
        Ok(Self {
            n_points,
            data,
            doc_ids,
            normalized,
            zero_denominator: Vec::new(),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_points..(t + 1) * self.n_points]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.n_points + j]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Documents whose density vanished at every sample point.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n_docs())
            .filter(|&t| self.row(t).iter().all(|&v| v == 0.0))
            .collect()
    }
}

/// Everything that shapes a density evaluation apart from the data.
#[derive(Debug, Clone)]
pub struct DensityConfig<'a> {
    pub bandwidth: &'a Bandwidth,
    pub kernel: KernelSpec,
    pub normalize: bool,
}

const BLOCK: usize = 32;

/// Squared scaled distance `|(z - x) / h|^2`, per axis when a diagonal
/// bandwidth is present.
#[inline]
fn scaled_sq_distance(z: &[f64], x: &[f64], inv_h2: f64, inv_axis: Option<&[f64]>) -> f64 {
    match inv_axis {
        None => {
            let mut s = 0.0;
            for (a, b) in z.iter().zip(x) {
                let diff = a - b;
                s += diff * diff;
            }
            s * inv_h2
        }
        Some(inv) => {
            let mut s = 0.0;
            for ((a, b), ih) in z.iter().zip(x).zip(inv) {
                let diff = (a - b) * ih;
                s += diff * diff;
            }
            s
        }
    }
}

/// Evaluates every document of `dfm` at every sample point.
pub fn density_matrix(
    dfm: &DocFeatureMatrix,
    emb: &EmbeddingTable,
    samples: &SamplePoints,
    cfg: &DensityConfig<'_>,
) -> Result<DensityMatrix> {
    if dfm.n_features() != emb.len() {
        return Err(Error::DimensionMismatch {
            expected: emb.len(),
            got: dfm.n_features(),
        });
    }
    if samples.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: samples.dim(),
        });
    }
    if cfg.kernel.dim != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: cfg.kernel.dim,
        });
    }
    let h = cfg.bandwidth.h();
    let inv_axis: Option<Vec<f64>> = match cfg.bandwidth.per_axis() {
        Some(axes) if axes.len() != emb.dim() => {
            return Err(Error::DimensionMismatch {
                expected: emb.dim(),
                got: axes.len(),
            })
        }
        Some(axes) => Some(axes.iter().map(|h| 1.0 / h).collect()),
        None => None,
    };
    let inv_h2 = 1.0 / (h * h);

    // Kernel rows are needed for features used by some document, or for all
    // features when the normalizing sum is wanted.
    let mut slot = vec![usize::MAX; emb.len()];
    let mut used: Vec<usize> = Vec::new();
    if cfg.normalize {
        used.extend(0..emb.len());
    } else {
        let mut seen = vec![false; emb.len()];
        for (_, f, _) in dfm.triplets() {
            seen[f] = true;
        }
        used.extend((0..emb.len()).filter(|&f| seen[f]));
    }
    for (s, &f) in used.iter().enumerate() {
        slot[f] = s;
    }
    let log_w: Vec<(Vec<usize>, Vec<f64>)> = dfm
        .rows()
        .map(|(fs, ws)| (fs.iter().map(|&f| slot[f]).collect(), ws.iter().map(|w| w.ln()).collect()))
        .collect();

    let n = samples.len();
    let n_docs = dfm.n_docs();
    let n_blocks = n.div_ceil(BLOCK);
    let log_tiny = f64::MIN_POSITIVE.ln();

    let blocks: Vec<(Vec<f64>, Vec<usize>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let j0 = b * BLOCK;
            let width = BLOCK.min(n - j0);
            // Log-kernel values, feature-major with `width` columns.
            let mut logk = vec![0.0; used.len() * width];
            for (s, &f) in used.iter().enumerate() {
                let x = emb.vector(f);
                for jj in 0..width {
                    let y2 = scaled_sq_distance(samples.point(j0 + jj), x, inv_h2, inv_axis.as_deref());
                    logk[s * width + jj] = cfg.kernel.log_value_scaled(y2);
                }
            }
            let mut zero_den = Vec::new();
            let log_den: Option<Vec<f64>> = cfg.normalize.then(|| {
                (0..width)
                    .map(|jj| {
                        let v = log_sum_exp((0..used.len()).map(|s| logk[s * width + jj]));
                        if v == f64::NEG_INFINITY {
                            zero_den.push(j0 + jj);
                        }
                        v
                    })
                    .collect()
            });

            let mut out = vec![0.0; n_docs * width];
            let mut max = vec![0.0; width];
            let mut acc = vec![0.0; width];
            for (t, (slots, lw)) in log_w.iter().enumerate() {
                if slots.is_empty() {
                    continue;
                }
                max.fill(f64::NEG_INFINITY);
                for (&s, &l) in slots.iter().zip(lw) {
                    let row = &logk[s * width..(s + 1) * width];
                    for (m, &v) in max.iter_mut().zip(row) {
                        *m = m.max(v + l);
                    }
                }
                acc.fill(0.0);
                for (&s, &l) in slots.iter().zip(lw) {
                    let row = &logk[s * width..(s + 1) * width];
                    for jj in 0..width {
                        if max[jj] > f64::NEG_INFINITY {
                            acc[jj] += (row[jj] + l - max[jj]).exp();
                        }
                    }
                }
                for jj in 0..width {
                    if max[jj] == f64::NEG_INFINITY {
                        continue;
                    }
                    let mut log_rho = max[jj] + acc[jj].ln();
                    if let Some(den) = &log_den {
                        if den[jj] == f64::NEG_INFINITY {
                            continue;
                        }
                        log_rho -= den[jj];
                    }
                    if log_rho >= log_tiny {
                        out[t * width + jj] = log_rho.exp();
                    }
                }
            }
            (out, zero_den)
        })
        .collect();

    let mut data = vec![0.0; n_docs * n];
    let mut zero_denominator = Vec::new();
    for (b, (out, zd)) in blocks.into_iter().enumerate() {
        let j0 = b * BLOCK;
        let width = BLOCK.min(n - j0);
        for t in 0..n_docs {
            data[t * n + j0..t * n + j0 + width].copy_from_slice(&out[t * width..(t + 1) * width]);
        }
        zero_denominator.extend(zd);
    }
    if !zero_denominator.is_empty() {
        log::warn!(
            "normalizing sum underflowed at {} sample point(s); bandwidth is small for the sample spread",
            zero_denominator.len()
        );
    }
    Ok(DensityMatrix {
        n_points: n,
        data,
        doc_ids: dfm.doc_ids().to_vec(),
        normalized: cfg.normalize,
        zero_denominator,
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Query and item densities over the same sample points and kernel.
#[derive(Debug, Clone)]
pub struct CrossDensities {
    pub queries: DensityMatrix,
    /// `None` when the item corpus is the query corpus.
    pub items: Option<DensityMatrix>,
}

impl CrossDensities {
    pub fn items(&self) -> &DensityMatrix {
        self.items.as_ref().unwrap_or(&self.queries)
    }

    /// True when queries and items are one corpus and a single matrix was built.
    pub fn shared(&self) -> bool {
        self.items.is_none()
    }
}

/// Densities for a query corpus and an item corpus. When both arguments are
/// the same object only one matrix is computed.
pub fn cross_corpus_densities(
    queries: &DocFeatureMatrix,
    items: &DocFeatureMatrix,
    emb: &EmbeddingTable,
    samples: &SamplePoints,
    cfg: &DensityConfig<'_>,
) -> Result<CrossDensities> {
    let q = density_matrix(queries, emb, samples, cfg)?;
    let items = if std::ptr::eq(queries, items) {
        None
    } else {
        Some(density_matrix(items, emb, samples, cfg)?)
    };
    Ok(CrossDensities { queries: q, items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_ball;

    fn gaussian(d: usize) -> KernelSpec {
        KernelSpec::new(KernelShape::Gaussian, d).unwrap()
    }

    #[test]
    fn kernel_values() {
        let g = kernel_log_value(gaussian(2), 0.0, 1.0);
        assert!((g - (1.0 / (2.0 * std::f64::consts::PI)).ln()).abs() < 1e-15);
        assert!((g + 1.83788).abs() < 1e-5);
        let e = KernelSpec::new(KernelShape::Epanechnikov, 3).unwrap();
        assert_eq!(kernel_log_value(e, 5.0, 1.0), f64::NEG_INFINITY);
        assert!((kernel_log_value(e, 0.0, 1.0) - 3f64.ln()).abs() < 1e-15);
        // h rescales the distance.
        assert_eq!(kernel_log_value(e, 12.0, 2.0), kernel_log_value(e, 3.0, 1.0));
        assert!(KernelSpec::new(KernelShape::Gaussian, 0).is_err());
    }

    fn one_doc(weights: Vec<(usize, f64)>, n_features: usize) -> DocFeatureMatrix {
        DocFeatureMatrix::from_rows(vec!["d".into()], n_features, vec![weights]).unwrap()
    }

    #[test]
    fn single_feature_normalized_is_constant() {
        let emb = EmbeddingTable::from_rows(vec!["a".into()], vec![vec![0.3, -0.2]]).unwrap();
        let dfm = one_doc(vec![(0, 0.7)], 1);
        let samples = sample_ball(20, 2, 1.0, 1).unwrap();
        let bw = Bandwidth::scalar(0.5).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: gaussian(2),
            normalize: true,
        };
        let m = density_matrix(&dfm, &emb, &samples, &cfg).unwrap();
        for &v in m.row(0) {
            assert!((v - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn equidistant_features_average() {
        let emb = EmbeddingTable::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        )
        .unwrap();
        let dfm = one_doc(vec![(0, 0.2), (1, 0.6)], 2);
        let samples = SamplePoints::from_raw(2, 1.0, 0, vec![0.0, 0.5, 0.0, -0.3]).unwrap();
        let bw = Bandwidth::scalar(0.8).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: gaussian(2),
            normalize: true,
        };
        let m = density_matrix(&dfm, &emb, &samples, &cfg).unwrap();
        assert!((m.get(0, 0) - 0.4).abs() < 1e-14);
        assert!((m.get(0, 1) - 0.4).abs() < 1e-14);
    }

    #[test]
    fn epanechnikov_zero_denominator_is_reported() {
        let emb = EmbeddingTable::from_rows(vec!["a".into()], vec![vec![0.0]]).unwrap();
        let dfm = one_doc(vec![(0, 1.0)], 1);
        let samples = SamplePoints::from_raw(1, 10.0, 0, vec![0.1, 9.0]).unwrap();
        let bw = Bandwidth::scalar(1.0).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: KernelSpec::new(KernelShape::Epanechnikov, 1).unwrap(),
            normalize: true,
        };
        let m = density_matrix(&dfm, &emb, &samples, &cfg).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.zero_denominator, vec![1]);
    }

    #[test]
    fn underflow_stored_as_zero() {
        let emb = EmbeddingTable::from_rows(vec!["a".into()], vec![vec![0.0]]).unwrap();
        let dfm = one_doc(vec![(0, 1.0)], 1);
        let samples = SamplePoints::from_raw(1, 100.0, 0, vec![60.0]).unwrap();
        let bw = Bandwidth::scalar(1.0).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: gaussian(1),
            normalize: false,
        };
        let m = density_matrix(&dfm, &emb, &samples, &cfg).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.zero_rows(), vec![0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let emb = EmbeddingTable::from_rows(vec!["a".into()], vec![vec![0.0, 1.0]]).unwrap();
        let dfm = one_doc(vec![(0, 1.0)], 1);
        let samples = sample_ball(3, 3, 1.0, 0).unwrap();
        let bw = Bandwidth::scalar(1.0).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: gaussian(2),
            normalize: false,
        };
        assert!(matches!(
            density_matrix(&dfm, &emb, &samples, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn same_corpus_computed_once() {
        let emb = EmbeddingTable::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let dfm = DocFeatureMatrix::from_rows(
            vec!["x".into(), "y".into()],
            2,
            vec![vec![(0, 1.0)], vec![(1, 2.0)]],
        )
        .unwrap();
        let samples = sample_ball(16, 2, 1.5, 3).unwrap();
        let bw = Bandwidth::scalar(0.7).unwrap();
        let cfg = DensityConfig {
            bandwidth: &bw,
            kernel: gaussian(2),
            normalize: false,
        };
        let shared = cross_corpus_densities(&dfm, &dfm, &emb, &samples, &cfg).unwrap();
        assert!(shared.shared());
        assert_eq!(shared.items(), &shared.queries);

        let copy = dfm.clone();
        let separate = cross_corpus_densities(&dfm, &copy, &emb, &samples, &cfg).unwrap();
        assert!(!separate.shared());
        assert_eq!(separate.items(), &separate.queries);
    }
}
