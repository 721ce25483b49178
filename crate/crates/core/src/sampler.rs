//! Uniform sample points in a `d`-ball.
//!
//! Point `j` is `Z u^(1/d) R / |Z|` with `Z` a standard normal `d`-vector and
//! `u` standard uniform. Generation is counter based: every point draws from
//! its own ChaCha20 stream (key from `seed_from_u64(seed)`, stream id `j`), so
//! output is bit-identical regardless of how points are split across threads.
//!
//! Within a stream, uniforms are `(next_u64 >> 11) * 2^-53` and normals come
//! from the Marsaglia polar method, consumed in pairs. The `d` normal
//! components are drawn first, then `u`. If `|Z|` is exactly zero the point
//! keeps drawing from the same stream.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::PointsView;
use crate::stats;

/// Name recorded in sample-point sidecar headers.
pub const GENERATOR_NAME: &str = "chacha20-stream-per-point+marsaglia-polar";

/// Default quantile of the embedding norms used as the ball radius.
pub const DEFAULT_RADIUS_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoints {
    dim: usize,
    radius: f64,
    seed: u64,
    data: Vec<f64>,
}

impl SamplePoints {
    /// Wraps externally produced points (e.g. read back from disk).
    pub fn from_raw(dim: usize, radius: f64, seed: u64, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self {
            dim,
            radius,
            seed,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn view(&self) -> PointsView<'_> {
        PointsView::new(&self.data, self.dim)
    }
}

/// Ball radius: the `q` quantile of the embedding norms.
pub fn sampling_radius(norms: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("radius quantile must be in (0, 1], got {q}")));
    }
    if norms.is_empty() {
        return Err(Error::EmptyInput("no norms to take a radius from"));
    }
    if norms.iter().all(|&n| n == 0.0) {
        return Err(Error::Degenerate("all embedding vectors are zero".into()));
    }
    let r = stats::quantiles(norms, &[q])?[0];
    if r <= 0.0 {
        return Err(Error::Degenerate(format!(
            "the {q} quantile of the norms is zero; raise the quantile"
        )));
    }
    Ok(r)
}

struct PointStream(ChaCha20Rng);

impl PointStream {
    fn new(seed: u64, j: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(j);
        Self(rng)
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal_pair(&mut self) -> (f64, f64) {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                return (u * f, v * f);
            }
        }
    }

    fn fill_point(&mut self, out: &mut [f64], radius: f64) {
        let d = out.len();
        loop {
            let mut k = 0;
            while k < d {
                let (a, b) = self.normal_pair();
                out[k] = a;
                if k + 1 < d {
                    out[k + 1] = b;
                }
                k += 2;
            }
            let norm = out.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let u = self.uniform();
            let scale = u.powf(1.0 / d as f64) * radius / norm;
            out.iter_mut().for_each(|c| *c *= scale);
            return;
        }
    }
}

/// Draws `n` points uniformly in the `d`-ball of radius `radius`.
pub fn sample_ball(n: usize, d: usize, radius: f64, seed: u64) -> Result<SamplePoints> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(d)
        .enumerate()
        .for_each(|(j, out)| PointStream::new(seed, j as u64).fill_point(out, radius));
    Ok(SamplePoints {
        dim: d,
        radius,
        seed,
        data,
    })
}
