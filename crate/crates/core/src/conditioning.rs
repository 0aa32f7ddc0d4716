//! Condition numbers of feature matrices and the concentration bounds on them.
//!
//! For a `k x T` coefficient-difference matrix `P`, the condition number
//! `β(PPᵀ) = λ_max / λ_min` is sandwiched, with probability `1 - δ`, between
//!
//! ```text
//! ((1+c) e^{-γ₁/τ} ∓ Δ) / (e^{-γ_k/τ} ± Δ),     Δ = 2 √(k (1+c) log(2k/δ) / T)
//! ```
//!
//! and for a stacked schedule the exponentials become `T_l / T` weighted averages over
//! the levels while `T` becomes `Σ T_l`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::latent::LatentModel;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::rng::{self, Stream};
use crate::skipstack::{self, SkipSchedule};
use crate::stats;
use crate::{Error, Result};

/// Relative eigenvalue threshold below which `PPᵀ` counts as singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalCondition {
    /// `λ_max / λ_min` of `(1/T) PPᵀ`; `+inf` when numerically singular.
    pub beta: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl EmpiricalCondition {
    pub fn is_singular(&self) -> bool {
        self.beta.is_infinite()
    }
}

/// Two-sided bound on `β(PPᵀ)`. `upper` is `+inf` when its denominator is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub upper: f64,
    pub delta_tau: f64,
    /// Minimum feature count for the bound to hold.
    pub t_min_required: usize,
    pub features: usize,
}

impl Sandwich {
    pub fn contains(&self, beta: f64) -> bool {
        self.lower <= beta && beta <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub beta_empirical: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
    pub delta_tau: f64,
    pub t_min_required: usize,
    pub within_bounds: bool,
}

impl ConditionReport {
    pub fn new(empirical: EmpiricalCondition, bounds: Sandwich) -> Self {
        ConditionReport {
            beta_empirical: empirical.beta,
            lambda_max: empirical.lambda_max,
            lambda_min: empirical.lambda_min,
            bound_lower: bounds.lower,
            bound_upper: bounds.upper,
            delta_tau: bounds.delta_tau,
            t_min_required: bounds.t_min_required,
            within_bounds: bounds.contains(empirical.beta),
        }
    }
}

/// `β` of the normalized Gram matrix `(1/T) PPᵀ` of a `k x T` matrix.
pub fn condition_number(p: &Matrix) -> Result<EmpiricalCondition> {
    let (k, t) = (p.rows(), p.cols());
    if k == 0 {
        return Err(Error::invalid("p", "has no rows"));
    }
    if t < k {
        return Err(Error::TooFewSamples { required: k, got: t });
    }
    let mut gram = p.gram_rows();
    gram.scale(1.0 / t as f64);
    let eig = symmetric_eigen(&gram)?;
    let lambda_max = eig.values[0].max(0.0);
    let lambda_min = eig.values[k - 1].max(0.0);
    let beta = if lambda_min <= RANK_TOLERANCE * lambda_max || lambda_max == 0.0 {
        f64::INFINITY
    } else {
        lambda_max / lambda_min
    };
    Ok(EmpiricalCondition { beta, lambda_max, lambda_min })
}

fn log_term(k: usize, delta: f64) -> f64 {
    libm::log(2.0 * k as f64 / delta)
}

/// `Δ = 2 √(k (1+c) log(2k/δ) / T)`.
pub fn delta_tau(k: usize, t: usize, c: f64, delta: f64) -> f64 {
    2.0 * libm::sqrt(k as f64 * (1.0 + c) * log_term(k, delta) / t as f64)
}

/// Smallest `T` with `T >= k log(2k/δ) / (9 (1+c))`.
pub fn min_features(k: usize, c: f64, delta: f64) -> usize {
    libm::ceil(k as f64 * log_term(k, delta) / (9.0 * (1.0 + c))).max(1.0) as usize
}

fn check_common(c: f64, k: usize, delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::invalid("c", format!("must lie in [0, 1), got {c}")));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn sandwich(numer: f64, denom: f64, delta_tau: f64, t_min_required: usize, features: usize) -> Sandwich {
    let upper_den = denom - delta_tau;
    let upper = if upper_den <= 0.0 { f64::INFINITY } else { (numer + delta_tau) / upper_den };
    let lower = ((numer - delta_tau) / (denom + delta_tau)).max(1.0);
    Sandwich { lower, upper, delta_tau, t_min_required, features }
}

/// Fixed-skip sandwich for `T = t` features.
pub fn theorem1_bounds(gamma1: f64, gammak: f64, c: f64, tau: f64, k: usize, t: usize, delta: f64) -> Result<Sandwich> {
    check_common(c, k, delta)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", format!("must lie in (0, 1], got {tau}")));
    }
    if !(gamma1 > 0.0 && gammak >= gamma1) {
        return Err(Error::invalid("gammas", format!("need 0 < gamma1 <= gammak, got {gamma1}, {gammak}")));
    }
    let t_min = min_features(k, c, delta);
    if t < t_min {
        return Err(Error::TooFewSamples { required: t_min, got: t });
    }
    let numer = (1.0 + c) * libm::exp(-gamma1 / tau);
    let denom = libm::exp(-gammak / tau);
    Ok(sandwich(numer, denom, delta_tau(k, t, c, delta), t_min, t))
}

/// Stacked-schedule sandwich: exponentials averaged with weights `T_l / Σ T_l` over the
/// active levels, `Δ` evaluated at `Σ T_l`.
pub fn theorem2_bounds(gammas: &[f64], c: f64, schedule: &SkipSchedule, delta: f64) -> Result<Sandwich> {
    let k = gammas.len();
    check_common(c, k, delta)?;
    let (gamma1, gammak) = (gammas[0], gammas[k - 1]);
    if !(gamma1 > 0.0 && gammak >= gamma1) {
        return Err(Error::invalid("gammas", format!("need 0 < gamma1 <= gammak, got {gamma1}, {gammak}")));
    }
    let total = schedule.total_budget();
    let t_min = min_features(k, c, delta);
    if total < t_min {
        return Err(Error::TooFewSamples { required: t_min, got: total });
    }
    let mut numer = 0.0;
    let mut denom = 0.0;
    for l in schedule.active_levels() {
        let w = schedule.budget(l) as f64 / total as f64;
        let tau = schedule.tau(l);
        numer += w * (1.0 + c) * libm::exp(-gamma1 / tau);
        denom += w * libm::exp(-gammak / tau);
    }
    Ok(sandwich(numer, denom, delta_tau(k, total, c, delta), t_min, total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary1 {
    /// `(1+c) e^{m γ₁/τ}`.
    pub exponential: f64,
    /// `(1+c) (1 + γ₁/τ)^m`.
    pub polynomial: f64,
}

/// Lower bounds on `E β` when `γ_k >= (m+1) γ₁`.
pub fn corollary1_lower(m: u32, gamma1: f64, tau: f64, c: f64) -> Corollary1 {
    let x = gamma1 / tau;
    Corollary1 {
        exponential: (1.0 + c) * libm::exp(m as f64 * x),
        polynomial: (1.0 + c) * libm::pow(1.0 + x, m as f64),
    }
}

/// Right-hand side of the matrix Bernstein inequality for `S = Σ xᵢxᵢᵀ`,
/// `‖xᵢ‖² <= B`, `p`-dimensional:
/// `√(2 B ‖E S‖ log(2p/δ)) + (B/3) log(2p/δ)`.
///
/// The log term is clamped at zero, so `δ >= 2p` gives a zero bound.
pub fn bernstein_bound(b: f64, norm_es: f64, p_dim: usize, delta: f64) -> f64 {
    let l = libm::log(2.0 * p_dim as f64 / delta).max(0.0);
    libm::sqrt(2.0 * b * norm_es * l) + b / 3.0 * l
}

/// How the bounded vectors of a Bernstein check are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorLaw {
    /// Independent `±√(B/p)` coordinates, so `‖x‖² = B` and `E xxᵀ = (B/p) I`.
    Rademacher,
    /// The constant vector `√(B/p) · 1`; `S` equals its expectation.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinReport {
    pub p_dim: usize,
    pub n: usize,
    pub b: f64,
    pub norm_es: f64,
    pub deltas: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Fraction of trials with `‖S - E S‖ >` the bound, per `δ`.
    pub exceedance: Vec<f64>,
    pub deviations: Vec<f64>,
}

/// Monte-Carlo check of the Bernstein bound: each trial draws `n` vectors, forms `S`
/// and measures the spectral deviation `‖S - E S‖`. Trial `i` uses sub-stream `(seed, i)`.
pub fn bernstein_coverage_test(
    p_dim: usize,
    n: usize,
    b: f64,
    deltas: &[f64],
    trials: usize,
    law: VectorLaw,
    seed: u64,
) -> Result<BernsteinReport> {
    if trials < 100 {
        return Err(Error::TooFewSamples { required: 100, got: trials });
    }
    if p_dim == 0 || n == 0 || !(b > 0.0) {
        return Err(Error::invalid("bernstein", "p_dim, n and B must be positive"));
    }
    let coord = libm::sqrt(b / p_dim as f64);
    let norm_es = match law {
        VectorLaw::Rademacher => n as f64 * b / p_dim as f64,
        VectorLaw::Fixed => n as f64 * b,
    };
    let deviations = (0..trials)
        .map(|trial| bernstein_deviation(p_dim, n, coord, law, &mut rng::substream(seed, &[trial as u64])))
        .collect::<Result<Vec<_>>>()?;
    let bounds: Vec<f64> = deltas.iter().map(|d| bernstein_bound(b, norm_es, p_dim, *d)).collect();
    let exceedance = bounds
        .iter()
        .map(|bound| deviations.iter().filter(|dev| *dev > bound).count() as f64 / trials as f64)
        .collect();
    Ok(BernsteinReport { p_dim, n, b, norm_es, deltas: deltas.to_vec(), bounds, exceedance, deviations })
}

fn bernstein_deviation(p: usize, n: usize, coord: f64, law: VectorLaw, rng: &mut Stream) -> Result<f64> {
    let mut s = Matrix::zeros(p, p);
    let mut x = alloc::vec![coord; p];
    for _ in 0..n {
        if law == VectorLaw::Rademacher {
            for v in x.iter_mut() {
                *v = if rng::uniform(rng) < 0.5 { -coord } else { coord };
            }
        }
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] += x[i] * x[j];
            }
        }
    }
    let expected = coord * coord * n as f64;
    for i in 0..p {
        for j in 0..p {
            let e = match law {
                VectorLaw::Rademacher if i != j => 0.0,
                _ => expected,
            };
            s[(i, j)] -= e;
        }
    }
    let eig = symmetric_eigen(&s)?;
    Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Top normalized singular values of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub label: String,
    /// `σ_i / σ_1`, non-increasing, first entry exactly 1.
    pub sigmas: Vec<f64>,
}

pub const SPECTRUM_LENGTH: usize = 10;

/// Top-10 singular values from the smaller Gram matrix, divided by the largest.
pub fn spectrum_curve(m: &Matrix, label: impl Into<String>) -> Result<SpectrumCurve> {
    if m.rows().min(m.cols()) < SPECTRUM_LENGTH {
        return Err(Error::invalid(
            "matrix",
            format!("need at least {SPECTRUM_LENGTH} rows and columns, got {} x {}", m.rows(), m.cols()),
        ));
    }
    let gram = if m.rows() <= m.cols() { m.gram_rows() } else { m.gram_cols() };
    let eig = symmetric_eigen(&gram)?;
    let top = libm::sqrt(eig.values[0].max(0.0));
    if !(top > 0.0) {
        return Err(Error::Degenerate("all-zero matrix has no spectrum"));
    }
    let mut sigmas: Vec<f64> = eig.values[..SPECTRUM_LENGTH].iter().map(|v| libm::sqrt(v.max(0.0)) / top).collect();
    sigmas[0] = 1.0;
    for i in 1..sigmas.len() {
        sigmas[i] = sigmas[i].min(sigmas[i - 1]);
    }
    Ok(SpectrumCurve { label: label.into(), sigmas })
}

/// What each Monte-Carlo trial samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// One skip. `columns: None` uses the grid budget `⌊1/τ⌋` and the same random
    /// sub-stream as level 0 of a stacked trial, which pairs the two designs.
    Fixed { tau: f64, columns: Option<usize> },
    Stacked(SkipSchedule),
}

impl Sampling {
    pub fn label(&self) -> String {
        match self {
            Sampling::Fixed { tau, columns: Some(t) } => format!("tau={tau},T={t}"),
            Sampling::Fixed { tau, columns: None } => format!("tau={tau}"),
            Sampling::Stacked(s) => s.label(),
        }
    }

    pub fn sandwich(&self, model: &LatentModel, delta: f64) -> Result<Sandwich> {
        let g = model.gammas();
        match self {
            Sampling::Fixed { tau, columns } => {
                let t = columns.unwrap_or_else(|| libm::floor(1.0 / tau + 1e-9) as usize);
                theorem1_bounds(g[0], g[g.len() - 1], model.c(), *tau, model.k(), t, delta)
            }
            Sampling::Stacked(s) => theorem2_bounds(g, model.c(), s, delta),
        }
    }

    /// Noiseless `P` for one trial.
    pub fn sample(&self, model: &LatentModel, trial_seed: u64) -> Result<Matrix> {
        match self {
            Sampling::Fixed { tau, columns: Some(t) } => Ok(skipstack::build_feature_matrix_with_columns(
                model,
                *tau,
                *t,
                false,
                &mut rng::substream(trial_seed, &[0]),
            )?
            .p),
            Sampling::Fixed { tau, columns: None } => {
                Ok(skipstack::build_feature_matrix(model, *tau, false, &mut rng::substream(trial_seed, &[0]))?.p)
            }
            Sampling::Stacked(s) => Ok(skipstack::mifs_stack(model, s, false, trial_seed)?.p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
}

/// One coverage trial; its randomness comes only from `(seed, trial)`.
pub fn coverage_trial(model: &LatentModel, sampling: &Sampling, bounds: &Sandwich, seed: u64, trial: usize) -> Result<TrialRecord> {
    let p = sampling.sample(model, rng::derive_seed(seed, &[trial as u64]))?;
    let beta = condition_number(&p)?.beta;
    Ok(TrialRecord { trial, beta, lower: bounds.lower, upper: bounds.upper, within: bounds.contains(beta) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub label: String,
    pub bounds: Sandwich,
    pub trials: Vec<TrialRecord>,
    pub coverage: f64,
    pub mean_beta: f64,
    pub var_beta: f64,
    pub singular_trials: usize,
}

impl CoverageSummary {
    /// Summarizes trial records (in any order; they are sorted by trial index).
    pub fn from_trials(label: String, bounds: Sandwich, mut trials: Vec<TrialRecord>) -> Self {
        trials.sort_by_key(|t| t.trial);
        let betas: Vec<f64> = trials.iter().map(|t| t.beta).collect();
        let n = trials.len().max(1) as f64;
        CoverageSummary {
            label,
            bounds,
            coverage: trials.iter().filter(|t| t.within).count() as f64 / n,
            mean_beta: stats::mean(&betas),
            var_beta: stats::variance(&betas),
            singular_trials: betas.iter().filter(|b| b.is_infinite()).count(),
            trials,
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.beta).collect()
    }
}

/// Runs `trials` coverage trials sequentially.
pub fn coverage_experiment(
    model: &LatentModel,
    sampling: &Sampling,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageSummary> {
    if trials < 100 {
        return Err(Error::TooFewSamples { required: 100, got: trials });
    }
    let bounds = sampling.sandwich(model, delta)?;
    let records = (0..trials)
        .map(|t| coverage_trial(model, sampling, &bounds, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageSummary::from_trials(sampling.label(), bounds, records))
}
