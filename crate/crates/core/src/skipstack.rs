//! Differential features at one or more time skips.
//!
//! A single pass at skip `τ` differences the latent coefficients over `⌊1/τ⌋`
//! grid times, giving the `k x T` coefficient-difference matrix `P`. Stacking runs one
//! pass per level `l` at skip `(l + 1) τ` and concatenates the columns.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::latent::LatentModel;
use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Skips `τ_l = (l + 1) base_tau` for `l = 0..=levels`, optionally with some levels
/// masked out (e.g. `L=2-0` keeps levels 1 and 2 only).
#[derive(Debug, Clone, PartialEq)]
pub struct SkipSchedule {
    base_tau: f64,
    levels: usize,
    active: Vec<bool>,
}

// Guards floor(1/τ) against 1/τ landing a hair below an integer.
const FLOOR_SLACK: f64 = 1e-9;

impl SkipSchedule {
    pub fn new(base_tau: f64, levels: usize) -> Result<Self> {
        if !(base_tau > 0.0 && base_tau <= 1.0) {
            return Err(Error::invalid("base_tau", format!("must lie in (0, 1], got {base_tau}")));
        }
        if (levels + 1) as f64 * base_tau > 1.0 + FLOOR_SLACK {
            return Err(Error::invalid(
                "levels",
                format!("deepest skip {} x {base_tau} exceeds 1", levels + 1),
            ));
        }
        Ok(SkipSchedule { base_tau, levels, active: vec![true; levels + 1] })
    }

    /// Schedule for a `frames`-frame series: `base_tau = 1 / frames`.
    pub fn from_frames(frames: usize, levels: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::invalid("frames", "must be positive"));
        }
        SkipSchedule::new(1.0 / frames as f64, levels)
    }

    /// Single level `l` only (the "single-scale" configuration at skip `(l + 1) base_tau`).
    pub fn single_level(base_tau: f64, level: usize) -> Result<Self> {
        let excluded: Vec<usize> = (0..level).collect();
        SkipSchedule::new(base_tau, level)?.excluding(&excluded)
    }

    /// Masks out the given levels. At least one level must remain.
    pub fn excluding(mut self, levels: &[usize]) -> Result<Self> {
        for &l in levels {
            if l > self.levels {
                return Err(Error::invalid("mask", format!("level {l} is beyond L = {}", self.levels)));
            }
            self.active[l] = false;
        }
        if !self.active.iter().any(|a| *a) {
            return Err(Error::invalid("mask", "every level is excluded"));
        }
        Ok(self)
    }

    pub fn base_tau(&self) -> f64 {
        self.base_tau
    }

    /// Deepest level `L`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn is_active(&self, level: usize) -> bool {
        self.active.get(level).copied().unwrap_or(false)
    }

    pub fn active_levels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.levels).filter(|l| self.active[*l])
    }

    pub fn tau(&self, level: usize) -> f64 {
        (level + 1) as f64 * self.base_tau
    }

    /// Feature budget `T_l = ⌊1 / τ_l⌋`.
    pub fn budget(&self, level: usize) -> usize {
        libm::floor(1.0 / self.tau(level) + FLOOR_SLACK) as usize
    }

    /// `Σ T_l` over active levels.
    pub fn total_budget(&self) -> usize {
        self.active_levels().map(|l| self.budget(l)).sum()
    }

    /// `L=2`, or `L=2-0` when level 0 is masked, `L=3-0,1` for several.
    pub fn label(&self) -> String {
        let excluded: Vec<String> =
            (0..=self.levels).filter(|l| !self.active[*l]).map(|l| format!("{l}")).collect();
        if excluded.is_empty() {
            format!("L={}", self.levels)
        } else {
            format!("L={}-{}", self.levels, excluded.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `k x T` coefficient differences, entries in `{-2, 0, 2}`.
    pub p: Matrix,
    /// `d x T` observed features `X̄ P + ε' - ε`, when requested.
    pub f: Option<Matrix>,
    pub level_of_column: Vec<usize>,
    pub tau_of_column: Vec<f64>,
}

impl FeatureMatrix {
    pub fn columns(&self) -> usize {
        self.p.cols()
    }

    /// Keeps only the columns tagged with `level`.
    pub fn level(&self, level: usize) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.columns()).filter(|j| self.level_of_column[*j] == level).collect();
        let pick = |m: &Matrix| {
            let mut out = Matrix::zeros(m.rows(), keep.len());
            for i in 0..m.rows() {
                for (dst, &src) in keep.iter().enumerate() {
                    out[(i, dst)] = m[(i, src)];
                }
            }
            out
        };
        FeatureMatrix {
            p: pick(&self.p),
            f: self.f.as_ref().map(pick),
            level_of_column: vec![level; keep.len()],
            tau_of_column: keep.iter().map(|j| self.tau_of_column[*j]).collect(),
        }
    }
}

/// Differential features at a single skip over the grid `t_j = j τ`, `j < ⌊1/τ⌋`.
///
/// With `observe`, also produces `f = X̄ P + (ε' - ε)` with `ε ~ N(0, sigma²)`.
pub fn build_feature_matrix(model: &LatentModel, tau: f64, observe: bool, rng: &mut Stream) -> Result<FeatureMatrix> {
    model.check_skip(tau)?;
    let t = libm::floor(1.0 / tau + FLOOR_SLACK) as usize;
    if t == 0 {
        return Err(Error::invalid("tau", "no feature fits in [0, 1]"));
    }
    let times: Vec<f64> = (0..t).map(|j| j as f64 * tau).collect();
    let mut p = Matrix::zeros(model.k(), t);
    for i in 0..model.k() {
        let path = model.sample_alpha_path(i, &times, tau, rng)?;
        for (j, pair) in path.iter().enumerate() {
            p[(i, j)] = pair.difference();
        }
    }
    finish(model, p, tau, 0, observe, rng)
}

/// Single-skip features with an explicit column count.
///
/// Columns are i.i.d. draws, so the count need not equal `⌊1/τ⌋`; this decouples the
/// sample size from the skip for concentration experiments.
pub fn build_feature_matrix_with_columns(
    model: &LatentModel,
    tau: f64,
    columns: usize,
    observe: bool,
    rng: &mut Stream,
) -> Result<FeatureMatrix> {
    model.check_skip(tau)?;
    if columns == 0 {
        return Err(Error::invalid("columns", "must be positive"));
    }
    let mut p = Matrix::zeros(model.k(), columns);
    for i in 0..model.k() {
        for j in 0..columns {
            p[(i, j)] = model.sample_mixing_pair(i, tau, rng)?.difference();
        }
    }
    finish(model, p, tau, 0, observe, rng)
}

fn finish(model: &LatentModel, p: Matrix, tau: f64, level: usize, observe: bool, rng: &mut Stream) -> Result<FeatureMatrix> {
    let t = p.cols();
    let f = if observe {
        let mut f = model.xbar().matmul(&p)?;
        let sigma = model.sigma();
        if sigma > 0.0 {
            for i in 0..f.rows() {
                for v in f.row_mut(i) {
                    *v += sigma * (rng::normal(rng) - rng::normal(rng));
                }
            }
        }
        Some(f)
    } else {
        None
    };
    Ok(FeatureMatrix { p, f, level_of_column: vec![level; t], tau_of_column: vec![tau; t] })
}

/// Stacks one [`build_feature_matrix`] pass per active level.
///
/// Level `l` draws from the sub-stream `(seed, l)`, so the result does not depend
/// on which other levels are present or on evaluation order.
pub fn mifs_stack(model: &LatentModel, schedule: &SkipSchedule, observe: bool, seed: u64) -> Result<FeatureMatrix> {
    let parts: Vec<FeatureMatrix> = schedule
        .active_levels()
        .map(|l| level_pass(model, schedule, l, observe, seed))
        .collect::<Result<_>>()?;
    concat_levels(parts)
}

/// The single level-`l` pass of [`mifs_stack`].
pub fn level_pass(
    model: &LatentModel,
    schedule: &SkipSchedule,
    level: usize,
    observe: bool,
    seed: u64,
) -> Result<FeatureMatrix> {
    let mut rng = rng::substream(seed, &[level as u64]);
    let mut fm = build_feature_matrix(model, schedule.tau(level), observe, &mut rng)?;
    fm.level_of_column.iter_mut().for_each(|l| *l = level);
    Ok(fm)
}

/// Concatenates per-level feature matrices column-wise, in the given order.
pub fn concat_levels(parts: Vec<FeatureMatrix>) -> Result<FeatureMatrix> {
    if parts.is_empty() {
        return Err(Error::invalid("schedule", "no active level"));
    }
    let ps: Vec<&Matrix> = parts.iter().map(|fm| &fm.p).collect();
    let p = Matrix::hconcat(&ps)?;
    let f = if parts.iter().all(|fm| fm.f.is_some()) {
        let fs: Vec<&Matrix> = parts.iter().filter_map(|fm| fm.f.as_ref()).collect();
        Some(Matrix::hconcat(&fs)?)
    } else {
        None
    };
    let mut level_of_column = Vec::with_capacity(p.cols());
    let mut tau_of_column = Vec::with_capacity(p.cols());
    for fm in &parts {
        level_of_column.extend_from_slice(&fm.level_of_column);
        tau_of_column.extend_from_slice(&fm.tau_of_column);
    }
    Ok(FeatureMatrix { p, f, level_of_column, tau_of_column })
}

/// Windowed difference descriptors of a real multichannel series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDescriptorSet {
    /// `N x (W·d)`.
    pub descriptors: Matrix,
    /// Normalized temporal position of each window center, in `[0, 1]`.
    pub locations: Vec<f64>,
    pub level_of_row: Vec<usize>,
}

impl SeriesDescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.descriptors.cols()
    }

    /// Empty set of descriptor dimension `dim`.
    pub fn empty(dim: usize) -> Self {
        SeriesDescriptorSet { descriptors: Matrix::zeros(0, dim), locations: Vec::new(), level_of_row: Vec::new() }
    }

    /// Rows belonging to `level` only.
    pub fn level(&self, level: usize) -> SeriesDescriptorSet {
        let keep: Vec<usize> = (0..self.len()).filter(|r| self.level_of_row[*r] == level).collect();
        let mut d = Matrix::zeros(keep.len(), self.dim());
        for (dst, &src) in keep.iter().enumerate() {
            d.row_mut(dst).copy_from_slice(self.descriptors.row(src));
        }
        SeriesDescriptorSet {
            descriptors: d,
            locations: keep.iter().map(|r| self.locations[*r]).collect(),
            level_of_row: vec![level; keep.len()],
        }
    }
}

/// Extracts descriptors of a `K x d` series (rows are frames).
///
/// Level `l` keeps every `(l + 1)`-th frame, differences consecutive kept frames and
/// slides a length-`window` window over the differences; each window yields the
/// concatenated difference vectors (dimension `window · d`).
pub fn extract_series_descriptors(series: &Matrix, schedule: &SkipSchedule, window: usize) -> Result<SeriesDescriptorSet> {
    let (frames, channels) = (series.rows(), series.cols());
    if window == 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    if channels == 0 {
        return Err(Error::invalid("series", "needs at least one channel"));
    }
    let deepest = schedule.active_levels().last().unwrap_or(0);
    let needed = (deepest + 1) * window + 1;
    if frames < needed {
        return Err(Error::TooFewSamples { required: needed, got: frames });
    }
    if !series.is_finite() {
        return Err(Error::NonFinite("series"));
    }

    let dim = window * channels;
    let mut data = Vec::new();
    let mut locations = Vec::new();
    let mut level_of_row = Vec::new();
    let span = (frames - 1) as f64;
    for level in schedule.active_levels() {
        let step = level + 1;
        let kept: Vec<usize> = (0..frames).step_by(step).collect();
        let diffs: Vec<f64> = kept
            .windows(2)
            .flat_map(|w| (0..channels).map(move |ch| (w[0], w[1], ch)))
            .map(|(a, b, ch)| series[(b, ch)] - series[(a, ch)])
            .collect();
        let n_diffs = kept.len() - 1;
        for start in 0..=(n_diffs - window) {
            data.extend_from_slice(&diffs[start * channels..(start + window) * channels]);
            let center = (start as f64 + 0.5 * window as f64) * step as f64;
            locations.push((center / span).clamp(0.0, 1.0));
            level_of_row.push(level);
        }
    }
    let rows = locations.len();
    Ok(SeriesDescriptorSet { descriptors: Matrix::from_row_major(rows, dim, data)?, locations, level_of_row })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCost {
    pub level: usize,
    pub tau: f64,
    pub features: usize,
    /// `T_l / T_0`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub label: String,
    pub levels: Vec<LevelCost>,
    /// `Σ T_l / T_0` over active levels.
    pub total_relative: f64,
}

/// Feature-count cost of each active level relative to level 0 (whether or not level 0
/// is itself active).
pub fn level_cost_report(schedule: &SkipSchedule) -> CostReport {
    let t0 = schedule.budget(0) as f64;
    let levels: Vec<LevelCost> = schedule
        .active_levels()
        .map(|l| {
            let features = schedule.budget(l);
            LevelCost { level: l, tau: schedule.tau(l), features, relative: features as f64 / t0 }
        })
        .collect();
    let total_relative = levels.iter().map(|c| c.features).sum::<usize>() as f64 / t0;
    CostReport { label: schedule.label(), levels, total_relative }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model4() -> LatentModel {
        LatentModel::new(4, 6, vec![1.0, 2.0, 4.0, 8.0], 0.1, 0.0, 3).unwrap()
    }

    #[test]
    fn schedule_budgets() {
        let s = SkipSchedule::new(0.01, 2).unwrap();
        assert_eq!([s.budget(0), s.budget(1), s.budget(2)], [100, 50, 33]);
        assert_eq!(s.total_budget(), 183);
        assert_eq!(s.label(), "L=2");
        let masked = SkipSchedule::new(0.01, 1).unwrap().excluding(&[0]).unwrap();
        assert_eq!(masked.total_budget(), 50);
        assert_eq!(masked.label(), "L=1-0");
        assert!(SkipSchedule::new(0.5, 2).is_err());
        assert!(SkipSchedule::new(0.0, 0).is_err());
        assert!(SkipSchedule::new(0.1, 1).unwrap().excluding(&[0, 1]).is_err());
        assert_eq!(SkipSchedule::single_level(0.01, 2).unwrap().active_levels().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn unit_skip_gives_one_column() {
        let m = LatentModel::new(1, 1, vec![5.0], 0.0, 0.0, 1).unwrap();
        let fm = build_feature_matrix(&m, 1.0, false, &mut rng::stream(1)).unwrap();
        assert_eq!(fm.columns(), 1);
    }

    #[test]
    fn entries_are_rademacher_differences() {
        let fm = build_feature_matrix(&model4(), 0.001, false, &mut rng::stream(2)).unwrap();
        assert_eq!((fm.p.rows(), fm.p.cols()), (4, 1000));
        assert!(fm.p.as_slice().iter().all(|v| *v == 0.0 || *v == 2.0 || *v == -2.0));
    }

    #[test]
    fn static_model_has_zero_p() {
        let m = LatentModel::new(2, 2, vec![f64::INFINITY, f64::INFINITY], 0.0, 0.0, 1).unwrap();
        let fm = build_feature_matrix(&m, 0.01, true, &mut rng::stream(1)).unwrap();
        assert!(fm.p.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn too_fast_signal_propagates() {
        let m = LatentModel::new(1, 1, vec![0.1], 0.5, 0.0, 1).unwrap();
        let s = SkipSchedule::new(0.5, 1).unwrap();
        assert!(matches!(mifs_stack(&m, &s, false, 1), Err(Error::GammaTooSmallForTau { .. })));
    }

    #[test]
    fn stack_column_counts() {
        let m = model4();
        let s = SkipSchedule::new(0.01, 2).unwrap();
        let fm = mifs_stack(&m, &s, false, 9).unwrap();
        assert_eq!(fm.columns(), 183);
        assert_eq!(fm.level(2).columns(), 33);
        let masked = SkipSchedule::new(0.01, 1).unwrap().excluding(&[0]).unwrap();
        let fm = mifs_stack(&m, &masked, false, 9).unwrap();
        assert_eq!(fm.columns(), 50);
        assert!(fm.tau_of_column.iter().all(|t| (*t - 0.02).abs() < 1e-15));
    }

    #[test]
    fn degenerate_schedule_equals_single_pass() {
        let m = model4();
        let s = SkipSchedule::new(0.01, 0).unwrap();
        let stacked = mifs_stack(&m, &s, true, 4).unwrap();
        let single = build_feature_matrix(&m, 0.01, true, &mut rng::substream(4, &[0])).unwrap();
        assert_eq!(stacked, single);
    }

    #[test]
    fn zero_noise_observation_is_exact_mixture() {
        let fm = build_feature_matrix(&model4(), 0.01, true, &mut rng::stream(1)).unwrap();
        let want = model4().xbar().matmul(&fm.p).unwrap();
        assert_eq!(fm.f.unwrap(), want);
    }

    #[test]
    fn descriptors_of_constant_and_ramp() {
        let k = 9;
        let constant = Matrix::from_row_major(k, 2, vec![3.0; 2 * k]).unwrap();
        let s = SkipSchedule::from_frames(k, 1).unwrap();
        let set = extract_series_descriptors(&constant, &s, 3).unwrap();
        assert!(set.descriptors.as_slice().iter().all(|v| *v == 0.0));

        let ramp = Matrix::from_row_major(k, 1, (0..k).map(|j| j as f64 / (k - 1) as f64).collect()).unwrap();
        let level0 = SkipSchedule::from_frames(k, 0).unwrap();
        let set = extract_series_descriptors(&ramp, &level0, 2).unwrap();
        assert_eq!(set.len(), k - 2);
        for r in 0..set.len() {
            for v in set.descriptors.row(r) {
                assert!((v - 1.0 / (k - 1) as f64).abs() < 1e-15);
            }
        }
        assert!(set.locations.iter().all(|l| (0.0..=1.0).contains(l)));
    }

    #[test]
    fn level_one_of_slow_sine_matches_level_zero_of_fast_sine() {
        let k = 128;
        let sine = |period: f64, frames: usize| {
            Matrix::from_row_major(
                frames,
                1,
                (0..frames).map(|n| libm::sin(2.0 * core::f64::consts::PI * n as f64 / period)).collect(),
            )
            .unwrap()
        };
        let slow = extract_series_descriptors(&sine(32.0, k), &SkipSchedule::single_level(1.0 / k as f64, 1).unwrap(), 5)
            .unwrap();
        let fast = extract_series_descriptors(&sine(16.0, k / 2), &SkipSchedule::from_frames(k / 2, 0).unwrap(), 5)
            .unwrap();
        assert_eq!(slow.len(), fast.len());
        for (a, b) in slow.descriptors.as_slice().iter().zip(fast.descriptors.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn short_series_is_rejected() {
        let s = SkipSchedule::from_frames(10, 2).unwrap();
        let series = Matrix::zeros(9, 1);
        assert!(matches!(
            extract_series_descriptors(&series, &s, 3),
            Err(Error::TooFewSamples { required: 10, got: 9 })
        ));
    }

    #[test]
    fn cost_report_floor_arithmetic() {
        let r = level_cost_report(&SkipSchedule::new(1.0 / 1000.0, 2).unwrap());
        let counts: Vec<usize> = r.levels.iter().map(|c| c.features).collect();
        assert_eq!(counts, vec![1000, 500, 333]);
        assert!((r.total_relative - 1.833).abs() < 1e-12);
        assert_eq!(level_cost_report(&SkipSchedule::new(0.001, 0).unwrap()).total_relative, 1.0);
        let masked = SkipSchedule::new(0.001, 2).unwrap().excluding(&[0]).unwrap();
        assert!((level_cost_report(&masked).total_relative - 0.833).abs() < 1e-12);
    }
}
