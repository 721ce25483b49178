/// Borrowed row-major set of `dim`-dimensional points.
#[derive(Debug, Clone, Copy)]
pub struct PointsView<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> PointsView<'a> {
    /// # Panics
    /// If `dim` is zero or does not divide `data.len()`.
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0, "points must have positive dimension");
        assert_eq!(data.len() % dim, 0, "flat length not a multiple of dim");
        Self { data, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'a, f64> {
        self.data.chunks_exact(self.dim)
    }
}

impl<'a> From<&'a crate::embedding::EmbeddingTable> for PointsView<'a> {
    fn from(e: &'a crate::embedding::EmbeddingTable) -> Self {
        PointsView::new(e.as_flat(), e.dim())
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
