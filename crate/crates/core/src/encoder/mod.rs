//! Descriptor encoding: PCA, diagonal GMM, Fisher vectors and normalization.
//!
//! A [`FisherCodec`] is fitted once on pooled training descriptors and then maps
//! each descriptor set to one fixed-length, unit-norm vector. Descriptors from all
//! levels of a sample are pooled into that single vector.

mod fisher;
mod gmm;
mod pca;

pub use fisher::{concat_renormalize, fisher_vector, l2_normalize, power_normalize, FisherEncoding};
pub use gmm::{GmmConfig, GmmModel, COLLAPSE_WEIGHT};
pub use pca::{default_components, PcaTransform};

use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::skipstack::SeriesDescriptorSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    /// Kept PCA dimensions; `None` halves the descriptor dimension (rounding up).
    pub pca_components: Option<usize>,
    pub gmm: GmmConfig,
    /// Pooled training descriptors sampled for fitting.
    pub sample_budget: usize,
    /// Append the normalized temporal location after PCA.
    pub append_location: bool,
    /// Final L2 after concatenation.
    pub renormalize: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            pca_components: None,
            gmm: GmmConfig::default(),
            sample_budget: 20_000,
            append_location: true,
            renormalize: true,
        }
    }
}

/// Fitted PCA + GMM + normalization state. Immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherCodec {
    pub pca: PcaTransform,
    pub gmm: GmmModel,
    pub append_location: bool,
    pub renormalize: bool,
}

impl FisherCodec {
    pub fn fit(sets: &[SeriesDescriptorSet], config: &CodecConfig, rng: &mut Stream) -> Result<Self> {
        let dim = sets.first().map(SeriesDescriptorSet::dim).ok_or(Error::TooFewSamples { required: 1, got: 0 })?;
        if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        let mut pool: Vec<(usize, usize)> =
            sets.iter().enumerate().flat_map(|(s, set)| (0..set.len()).map(move |r| (s, r))).collect();
        if pool.len() > config.sample_budget {
            rng::shuffle(rng, &mut pool);
            pool.truncate(config.sample_budget);
            pool.sort_unstable();
        }
        let mut motion = Matrix::zeros(pool.len(), dim);
        let mut locations = Vec::with_capacity(pool.len());
        for (i, &(s, r)) in pool.iter().enumerate() {
            motion.row_mut(i).copy_from_slice(sets[s].descriptors.row(r));
            locations.push(sets[s].locations[r]);
        }
        let components = config.pca_components.unwrap_or_else(|| default_components(dim));
        let pca = PcaTransform::fit(&motion, components)?;
        let projected = augment(pca.apply(&motion)?, &locations, config.append_location);
        let gmm = GmmModel::fit(&projected, &config.gmm, rng)?;
        Ok(FisherCodec { pca, gmm, append_location: config.append_location, renormalize: config.renormalize })
    }

    /// `2 K (D' + 1)` with location, `2 K D'` without.
    pub fn encoding_dim(&self) -> usize {
        2 * self.gmm.components() * self.gmm.dim()
    }

    /// PCA projection followed by the optional location column.
    pub fn project(&self, set: &SeriesDescriptorSet) -> Result<Matrix> {
        Ok(augment(self.pca.apply(&set.descriptors)?, &set.locations, self.append_location))
    }

    /// Fisher vector plus the power / L2 / renormalization chain.
    pub fn encode(&self, set: &SeriesDescriptorSet) -> Result<FisherEncoding> {
        if set.is_empty() {
            return Ok(FisherEncoding::zeros(self.encoding_dim()));
        }
        let fv = fisher_vector(&self.gmm, &self.project(set)?)?;
        let values = concat_renormalize(&[&fv.values], self.renormalize);
        let normalized = values.iter().any(|v| *v != 0.0);
        Ok(FisherEncoding { values, powered: true, normalized, empty: false })
    }
}

fn augment(projected: Matrix, locations: &[f64], append: bool) -> Matrix {
    if !append {
        return projected;
    }
    let (n, dim) = (projected.rows(), projected.cols());
    let mut out = Matrix::zeros(n, dim + 1);
    for i in 0..n {
        out.row_mut(i)[..dim].copy_from_slice(projected.row(i));
        out[(i, dim)] = locations[i];
    }
    out
}

/// Encodes every sample; rows of the returned matrix follow `sets`.
pub fn encode_dataset(codec: &FisherCodec, sets: &[SeriesDescriptorSet]) -> Result<(Matrix, Vec<FisherEncoding>)> {
    let encodings = sets.iter().map(|s| codec.encode(s)).collect::<Result<Vec<_>>>()?;
    let dim = codec.encoding_dim();
    let mut m = Matrix::zeros(encodings.len(), dim);
    for (i, e) in encodings.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&e.values);
    }
    Ok((m, encodings))
}
