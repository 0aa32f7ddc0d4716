use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Components whose weight drops below this are re-seeded.
pub const COLLAPSE_WEIGHT: f64 = 1e-8;
const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Stop when the mean log-likelihood improves by less than `tol` relative.
    pub tol: f64,
    /// Variance floor as a fraction of the per-dimension data variance.
    pub variance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig { components: 16, max_iters: 100, tol: 1e-6, variance_floor: 1e-6 }
    }
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `K x D`.
    pub means: Matrix,
    /// `K x D`, per-dimension variances.
    pub variances: Matrix,
    /// Mean log-likelihood per EM iteration (of the final, un-reseeded run).
    pub log_likelihood: Vec<f64>,
    pub reseeds: usize,
}

impl GmmModel {
    /// Builds a model from explicit parameters (e.g. loaded from disk).
    pub fn from_parameters(weights: Vec<f64>, means: Matrix, variances: Matrix) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("weights", "need at least one component"));
        }
        if means.rows() != k || variances.rows() != k || means.cols() != variances.cols() {
            return Err(Error::DimensionMismatch { expected: k, got: means.rows() });
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", "must be positive and sum to 1"));
        }
        if variances.as_slice().iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !means.is_finite() {
            return Err(Error::invalid("variances", "must be positive and finite"));
        }
        Ok(GmmModel { weights, means, variances, log_likelihood: Vec::new(), reseeds: 0 })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Per-component `log w_k - ½(D log 2π + Σ log σ²)` and inverse variances.
    fn log_constants(&self) -> (Vec<f64>, Matrix) {
        let (k, dim) = (self.components(), self.dim());
        let mut inv = Matrix::zeros(k, dim);
        let consts = (0..k)
            .map(|c| {
                let var = self.variances.row(c);
                let logdet: f64 = var.iter().map(|v| libm::log(*v)).sum();
                for (iv, v) in inv.row_mut(c).iter_mut().zip(var) {
                    *iv = 1.0 / v;
                }
                libm::log(self.weights[c]) - 0.5 * (dim as f64 * LN_2PI + logdet)
            })
            .collect();
        (consts, inv)
    }

    /// Posterior responsibilities (`N x K`, rows sum to 1) and the mean log-likelihood.
    pub fn posteriors(&self, data: &Matrix) -> Result<(Matrix, f64)> {
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: data.cols() });
        }
        let (n, k) = (data.rows(), self.components());
        let (consts, inv) = self.log_constants();
        let mut post = Matrix::zeros(n, k);
        let mut total = 0.0;
        for i in 0..n {
            let x = data.row(i);
            let row = post.row_mut(i);
            for (c, o) in row.iter_mut().enumerate() {
                let (mu, iv) = (self.means.row(c), inv.row(c));
                let mut s = 0.0;
                for d in 0..x.len() {
                    let diff = x[d] - mu[d];
                    s += diff * diff * iv[d];
                }
                *o = consts[c] - 0.5 * s;
            }
            let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - max);
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
            total += max + libm::log(sum);
        }
        Ok((post, if n > 0 { total / n as f64 } else { 0.0 }))
    }

    /// Mean log-likelihood of the rows of `data`.
    pub fn mean_log_likelihood(&self, data: &Matrix) -> Result<f64> {
        Ok(self.posteriors(data)?.1)
    }

    /// Draws `n` points from the mixture.
    pub fn sample(&self, n: usize, rng: &mut Stream) -> Matrix {
        let dim = self.dim();
        let mut out = Matrix::zeros(n, dim);
        for i in 0..n {
            let u = rng::uniform(rng);
            let mut acc = 0.0;
            let mut comp = self.components() - 1;
            for (k, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = k;
                    break;
                }
            }
            for d in 0..dim {
                out[(i, d)] = self.means[(comp, d)] + libm::sqrt(self.variances[(comp, d)]) * rng::normal(rng);
            }
        }
        out
    }

    /// EM fit on the rows of `data`, seeded k-means++ style.
    pub fn fit(data: &Matrix, config: &GmmConfig, rng: &mut Stream) -> Result<Self> {
        let (n, dim, k) = (data.rows(), data.cols(), config.components);
        if k == 0 {
            return Err(Error::invalid("components", "must be positive"));
        }
        if n < 10 * k {
            return Err(Error::TooFewSamples { required: 10 * k, got: n });
        }
        if dim == 0 {
            return Err(Error::invalid("data", "has zero columns"));
        }
        if !data.is_finite() {
            return Err(Error::NonFinite("GMM training data"));
        }
        let (_, data_var) = column_moments(data);
        let floor: Vec<f64> = data_var.iter().map(|v| (v * config.variance_floor).max(1e-12)).collect();
        let init_var: Vec<f64> = data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();

        let seeds = plus_plus_seeds(data, k, rng);
        let mut means = Matrix::zeros(k, dim);
        for (c, &s) in seeds.iter().enumerate() {
            means.row_mut(c).copy_from_slice(data.row(s));
        }
        let mut variances = Matrix::zeros(k, dim);
        for c in 0..k {
            variances.row_mut(c).copy_from_slice(&init_var);
        }
        let mut model = GmmModel { weights: vec![1.0 / k as f64; k], means, variances, log_likelihood: Vec::new(), reseeds: 0 };

        for _ in 0..config.max_iters {
            let (post, ll) = model.posteriors(data)?;
            if !ll.is_finite() {
                return Err(Error::Numerical(format!("log-likelihood became {ll}")));
            }
            if let Some(&prev) = model.log_likelihood.last() {
                model.log_likelihood.push(ll);
                if ll - prev <= config.tol * prev.abs() {
                    return Ok(model);
                }
            } else {
                model.log_likelihood.push(ll);
            }
            if model.m_step(data, &post, &floor, &init_var, rng)? {
                model.log_likelihood.clear();
            }
        }
        let (_, ll) = model.posteriors(data)?;
        model.log_likelihood.push(ll);
        Ok(model)
    }

    /// Returns true when a collapsed component had to be re-seeded.
    fn m_step(&mut self, data: &Matrix, post: &Matrix, floor: &[f64], init_var: &[f64], rng: &mut Stream) -> Result<bool> {
        let (n, dim, k) = (data.rows(), data.cols(), self.components());
        let mut nk = vec![0.0; k];
        let mut sums = Matrix::zeros(k, dim);
        let mut sq = Matrix::zeros(k, dim);
        for i in 0..n {
            let x = data.row(i);
            for c in 0..k {
                let g = post[(i, c)];
                if g == 0.0 {
                    continue;
                }
                nk[c] += g;
                let s = sums.row_mut(c);
                for d in 0..dim {
                    s[d] += g * x[d];
                }
            }
        }
        for c in 0..k {
            if nk[c] > 0.0 {
                for d in 0..dim {
                    self.means[(c, d)] = sums[(c, d)] / nk[c];
                }
            }
        }
        // Second pass around the new means for numerically stable variances.
        for i in 0..n {
            let x = data.row(i);
            for c in 0..k {
                let g = post[(i, c)];
                if g == 0.0 {
                    continue;
                }
                for d in 0..dim {
                    let diff = x[d] - self.means[(c, d)];
                    sq[(c, d)] += g * diff * diff;
                }
            }
        }
        let mut reseeded = false;
        for c in 0..k {
            let w = nk[c] / n as f64;
            if !(w >= COLLAPSE_WEIGHT) {
                if self.reseeds >= MAX_RESEEDS {
                    return Err(Error::Numerical(format!("GMM component {c} collapsed after {MAX_RESEEDS} re-seeds")));
                }
                self.reseeds += 1;
                reseeded = true;
                let pick = rng::index(rng, n);
                self.means.row_mut(c).copy_from_slice(data.row(pick));
                self.variances.row_mut(c).copy_from_slice(init_var);
                self.weights[c] = 1.0 / k as f64;
                continue;
            }
            self.weights[c] = w;
            for d in 0..dim {
                self.variances[(c, d)] = (sq[(c, d)] / nk[c]).max(floor[d]);
            }
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        Ok(reseeded)
    }
}

/// Per-column mean and population variance.
pub(crate) fn column_moments(data: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, dim) = (data.rows(), data.cols());
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    (mean, var)
}

/// k-means++ seeding: first center uniform, then proportional to squared distance.
fn plus_plus_seeds(data: &Matrix, k: usize, rng: &mut Stream) -> Vec<usize> {
    let n = data.rows();
    let mut seeds = vec![rng::index(rng, n)];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(seeds[0]))).collect();
    while seeds.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng::uniform(rng) * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng::index(rng, n)
        };
        seeds.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    seeds
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
