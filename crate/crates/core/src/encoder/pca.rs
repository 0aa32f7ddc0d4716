use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{symmetric_eigen, Matrix};
use crate::{Error, Result};

/// Centered projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `D x D'`, orthonormal columns ordered by decreasing variance.
    pub projection: Matrix,
    /// Fraction of total variance carried by each kept component.
    pub explained_ratio: Vec<f64>,
}

/// Halves the dimension, rounding up.
pub fn default_components(dim: usize) -> usize {
    dim.div_ceil(2)
}

impl PcaTransform {
    /// Fits on the rows of `data` (`N x D`, `N > D`), keeping `components` directions.
    pub fn fit(data: &Matrix, components: usize) -> Result<Self> {
        let (n, dim) = (data.rows(), data.cols());
        if n <= dim {
            return Err(Error::TooFewSamples { required: dim + 1, got: n });
        }
        if components == 0 || components > dim {
            return Err(Error::invalid("components", format!("must lie in 1..={dim}, got {components}")));
        }
        let mut mean = alloc::vec![0.0; dim];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut centered = data.clone();
        for i in 0..n {
            for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut cov = centered.gram_cols();
        cov.scale(1.0 / (n - 1) as f64);
        let eig = symmetric_eigen(&cov)?;
        let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        let mut projection = Matrix::zeros(dim, components);
        for i in 0..dim {
            for j in 0..components {
                projection[(i, j)] = eig.vectors[(i, j)];
            }
        }
        let explained_ratio = eig.values[..components]
            .iter()
            .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
            .collect();
        Ok(PcaTransform { mean, projection, explained_ratio })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn apply(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: data.cols() });
        }
        let mut centered = data.clone();
        for i in 0..centered.rows() {
            for (v, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul(&self.projection)
    }

    /// Maps projected rows back to the input space.
    pub fn reconstruct(&self, projected: &Matrix) -> Result<Matrix> {
        let mut out = projected.matmul(&self.projection.transpose())?;
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}
