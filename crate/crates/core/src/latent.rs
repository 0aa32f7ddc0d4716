//! Latent action-signal model.
//!
//! An observed signal is a linear mixture `X(t) = X̄ α(t) + ε(t)` of `k` unit-norm
//! latent directions. Each coefficient `α_i` is Rademacher-valued and its sign flips
//! between `t` and `t + τ` with probability `q`, drawn per pair from
//! `[e^{-γ_i/τ} / 2, (1 + c) e^{-γ_i/τ} / 2]`. That gives
//! `E[(α(t+τ) - α(t))²] ∈ [2 e^{-γ/τ}, 2 (1 + c) e^{-γ/τ}]`, i.e. a signal that is
//! `γ`-dynamic with slack `c`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{orthonormalize_columns, Matrix};
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    k: usize,
    d: usize,
    gammas: Vec<f64>,
    c: f64,
    sigma: f64,
    seed: u64,
    /// `d x k`, orthonormal columns.
    xbar: Matrix,
}

/// Coefficient values of one latent signal at `t` and `t + τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingPair {
    pub alpha_t: f64,
    pub alpha_t_tau: f64,
    pub tau: f64,
}

impl MixingPair {
    #[inline]
    pub fn difference(&self) -> f64 {
        self.alpha_t_tau - self.alpha_t
    }

    #[inline]
    pub fn flipped(&self) -> bool {
        self.alpha_t_tau != self.alpha_t
    }
}

fn validate(k: usize, d: usize, gammas: &[f64], c: f64, sigma: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "need at least one latent signal"));
    }
    if d < k {
        return Err(Error::invalid("d", format!("ambient dimension {d} is smaller than k = {k}")));
    }
    if gammas.len() != k {
        return Err(Error::invalid("gammas", format!("expected {k} values, got {}", gammas.len())));
    }
    // NaN fails this too; +inf (a perfectly static signal) is allowed.
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::invalid("gammas", format!("values must be positive, got {g}")));
    }
    if gammas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("gammas", "values must be sorted non-decreasing"));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(Error::invalid("c", format!("must lie in [0, 1), got {c}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", format!("must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

impl LatentModel {
    /// Builds a model whose mixing directions are the orthonormalized columns of a
    /// seeded Gaussian `d x k` matrix.
    pub fn new(k: usize, d: usize, gammas: Vec<f64>, c: f64, sigma: f64, seed: u64) -> Result<Self> {
        validate(k, d, &gammas, c, sigma)?;
        let mut rng = rng::substream(seed, &[0x58_42_41_52]);
        let xbar = loop {
            let mut m = Matrix::zeros(d, k);
            for i in 0..d {
                for j in 0..k {
                    m[(i, j)] = rng::normal(&mut rng);
                }
            }
            // A Gaussian matrix is rank-deficient with probability zero; redraw if it happens.
            if orthonormalize_columns(&mut m).is_ok() {
                break m;
            }
        };
        Ok(LatentModel { k, d, gammas, c, sigma, seed, xbar })
    }

    /// Reassembles a model from persisted parts, checking every invariant.
    pub fn from_parts(
        k: usize,
        d: usize,
        gammas: Vec<f64>,
        c: f64,
        sigma: f64,
        seed: u64,
        xbar: Matrix,
    ) -> Result<Self> {
        validate(k, d, &gammas, c, sigma)?;
        if xbar.rows() != d || xbar.cols() != k {
            return Err(Error::invalid("xbar", format!("expected {d} x {k}, got {} x {}", xbar.rows(), xbar.cols())));
        }
        for a in 0..k {
            for b in a..k {
                let ip: f64 = (0..d).map(|i| xbar[(i, a)] * xbar[(i, b)]).sum();
                if a == b && (ip - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid("xbar", format!("column {a} is not unit norm")));
                }
                if a != b && ip.abs() >= 0.99 {
                    return Err(Error::invalid("xbar", format!("columns {a} and {b} are nearly parallel")));
                }
            }
        }
        Ok(LatentModel { k, d, gammas, c, sigma, seed, xbar })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn xbar(&self) -> &Matrix {
        &self.xbar
    }

    /// Same model with a different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        validate(self.k, self.d, &self.gammas, self.c, sigma)?;
        Ok(LatentModel { sigma, ..self.clone() })
    }

    /// Flip-probability band `[e^{-γ/τ}/2, (1+c) e^{-γ/τ}/2]` of signal `i` at skip `tau`.
    pub fn flip_band(&self, signal_index: usize, tau: f64) -> Result<(f64, f64)> {
        check_tau(tau)?;
        let gamma = *self
            .gammas
            .get(signal_index)
            .ok_or_else(|| Error::invalid("signal_index", format!("{signal_index} >= k = {}", self.k)))?;
        let decay = libm::exp(-gamma / tau);
        let (lo, hi) = (0.5 * decay, 0.5 * (1.0 + self.c) * decay);
        if hi > 0.5 {
            return Err(Error::GammaTooSmallForTau { gamma, tau, c: self.c, q_max: hi });
        }
        Ok((lo, hi))
    }

    /// Checks that every signal admits a valid flip band at `tau`.
    pub fn check_skip(&self, tau: f64) -> Result<()> {
        // gammas are sorted, so the first one has the widest band.
        self.flip_band(0, tau).map(|_| ())
    }

    pub fn sample_mixing_pair(&self, signal_index: usize, tau: f64, rng: &mut Stream) -> Result<MixingPair> {
        let band = self.flip_band(signal_index, tau)?;
        Ok(draw_pair(band, tau, rng))
    }

    /// Independent mixing pairs at each sample time; requires `t + tau <= 1`.
    pub fn sample_alpha_path(
        &self,
        signal_index: usize,
        times: &[f64],
        tau: f64,
        rng: &mut Stream,
    ) -> Result<Vec<MixingPair>> {
        let band = self.flip_band(signal_index, tau)?;
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t + tau <= 1.0 + 1e-12)) {
            return Err(Error::invalid("times", format!("t = {t} with tau = {tau} leaves [0, 1]")));
        }
        Ok(times.iter().map(|_| draw_pair(band, tau, rng)).collect())
    }
}

fn draw_pair((lo, hi): (f64, f64), tau: f64, rng: &mut Stream) -> MixingPair {
    let alpha_t = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let q = lo + (hi - lo) * rng::uniform(rng);
    let flip = rng::uniform(rng) < q;
    MixingPair { alpha_t, alpha_t_tau: if flip { -alpha_t } else { alpha_t }, tau }
}
