use alloc::vec;
use alloc::vec::Vec;

use super::gmm::GmmModel;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Fisher vector of a descriptor set: gradients of the mean log-likelihood with
/// respect to the GMM means and standard deviations, each scaled by the inverse
/// square root of its Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherEncoding {
    /// Mean block (`K x D`, row-major) followed by the variance block (`K x D`).
    pub values: Vec<f64>,
    pub powered: bool,
    pub normalized: bool,
    /// Set for empty descriptor sets, which encode to the zero vector.
    pub empty: bool,
}

impl FisherEncoding {
    pub fn zeros(dim: usize) -> Self {
        FisherEncoding { values: vec![0.0; dim], powered: false, normalized: false, empty: true }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.values)
    }

    pub fn mean_block(&self) -> &[f64] {
        &self.values[..self.values.len() / 2]
    }

    pub fn variance_block(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }
}

/// Unnormalized Fisher vector of the rows of `descriptors`:
///
/// ```text
/// g_μ(k) = 1/(N √w_k)   Σ_n γ_n(k) (x_n - μ_k) / σ_k
/// g_σ(k) = 1/(N √(2w_k)) Σ_n γ_n(k) ((x_n - μ_k)² / σ_k² - 1)
/// ```
pub fn fisher_vector(gmm: &GmmModel, descriptors: &Matrix) -> Result<FisherEncoding> {
    let n = descriptors.rows();
    if n == 0 {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    let (k, dim) = (gmm.components(), gmm.dim());
    let (post, _) = gmm.posteriors(descriptors)?;
    let mut values = vec![0.0; 2 * k * dim];
    let (mean_block, var_block) = values.split_at_mut(k * dim);
    let sd: Vec<f64> = gmm.variances.as_slice().iter().map(|v| libm::sqrt(*v)).collect();
    for i in 0..n {
        let x = descriptors.row(i);
        for c in 0..k {
            let g = post[(i, c)];
            if g == 0.0 {
                continue;
            }
            for d in 0..dim {
                let z = (x[d] - gmm.means[(c, d)]) / sd[c * dim + d];
                mean_block[c * dim + d] += g * z;
                var_block[c * dim + d] += g * (z * z - 1.0);
            }
        }
    }
    for c in 0..k {
        let w = gmm.weights[c];
        let sm = 1.0 / (n as f64 * libm::sqrt(w));
        let sv = 1.0 / (n as f64 * libm::sqrt(2.0 * w));
        mean_block[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= sm);
        var_block[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= sv);
    }
    Ok(FisherEncoding { values, powered: false, normalized: false, empty: false })
}

/// Elementwise signed square root.
pub fn power_normalize(v: &[f64]) -> Vec<f64> {
    v.iter().map(|z| libm::copysign(libm::sqrt(z.abs()), *z)).collect()
}

/// Divides by the Euclidean norm. A zero vector is returned unchanged with `false`.
pub fn l2_normalize(v: &[f64]) -> (Vec<f64>, bool) {
    let norm = crate::linalg::norm2(v);
    if norm > 0.0 {
        (v.iter().map(|z| z / norm).collect(), true)
    } else {
        (v.to_vec(), false)
    }
}

/// Power + L2 per part, concatenation, then (with `renormalize`) a final L2.
pub fn concat_renormalize(parts: &[&[f64]], renormalize: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend(l2_normalize(&power_normalize(p)).0);
    }
    if renormalize {
        out = l2_normalize(&out).0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_and_l2_examples() {
        assert_eq!(power_normalize(&[4.0, -9.0, 0.0]), vec![2.0, -3.0, 0.0]);
        let (v, ok) = l2_normalize(&[3.0, 4.0]);
        assert!(ok && (v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(l2_normalize(&[0.0, 0.0]), (vec![0.0, 0.0], false));
    }

    #[test]
    fn concat_of_unit_parts_splits_norm_evenly() {
        let a = [0.36, 0.64];
        let b = [1.0, 0.0, 0.0];
        let out = concat_renormalize(&[&a, &b], true);
        let norm = |s: &[f64]| crate::linalg::norm2(s);
        assert!((norm(&out) - 1.0).abs() < 1e-12);
        assert!((norm(&out[..2]) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((norm(&out[2..]) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn descriptors_at_the_mode() {
        let gmm = GmmModel::from_parameters(vec![1.0], Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap(), Matrix::from_rows(&[vec![2.0, 0.5]]).unwrap()).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0], vec![1.0, -1.0]]).unwrap();
        let fv = fisher_vector(&gmm, &x).unwrap();
        assert_eq!(fv.mean_block(), &[0.0, 0.0]);
        for v in fv.variance_block() {
            assert!((v + core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }
}
