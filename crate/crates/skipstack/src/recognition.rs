//! Extract → encode → train → evaluate over single-scale and stacked configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skipstack_core::classify::{self, EvalReport, LinearModel, SvmConfig};
use skipstack_core::encoder::{encode_dataset, CodecConfig, FisherCodec, GmmConfig};
use skipstack_core::rng;
use skipstack_core::skipstack::{extract_series_descriptors, level_cost_report, SeriesDescriptorSet, SkipSchedule};
use skipstack_core::Matrix;

use crate::dataset::SyntheticActionDataset;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    /// Kept PCA dimensions; `null` halves the descriptor dimension.
    pub pca_components: Option<usize>,
    pub gmm_components: usize,
    pub sample_budget: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub append_location: bool,
    pub renormalize: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            pca_components: None,
            gmm_components: 16,
            sample_budget: 20_000,
            max_iters: 100,
            tol: 1e-6,
            append_location: true,
            renormalize: true,
        }
    }
}

impl EncoderSettings {
    pub fn codec_config(&self) -> CodecConfig {
        CodecConfig {
            pca_components: self.pca_components,
            gmm: GmmConfig { components: self.gmm_components, max_iters: self.max_iters, tol: self.tol, ..GmmConfig::default() },
            sample_budget: self.sample_budget,
            append_location: self.append_location,
            renormalize: self.renormalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub c: f64,
    /// When set, `C` is chosen from this grid by stratified cross-validation.
    pub cv_grid: Option<Vec<f64>>,
    pub folds: usize,
    pub epochs: usize,
    pub tol: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings { c: 100.0, cv_grid: None, folds: 5, epochs: 1000, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionSettings {
    /// Deepest level `L` of the grid.
    pub levels: usize,
    /// Descriptor window length in (subsampled) frame differences.
    pub window: usize,
    /// Extra stacked runs `(L, excluded levels)`, e.g. `(2, [0])` for `L=2-0`.
    pub masked: Vec<(usize, Vec<usize>)>,
    /// Datasets `seed, seed + 1, ...` averaged by `run-recognition`.
    pub repeats: usize,
}

impl Default for RecognitionSettings {
    fn default() -> Self {
        RecognitionSettings { levels: 3, window: 4, masked: vec![(1, vec![0]), (2, vec![0])], repeats: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Single,
    Stacked,
    Masked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub kind: RunKind,
    pub level: usize,
    pub macc: f64,
    pub map: f64,
    pub relative_cost: f64,
    pub c: f64,
    pub report: EvalReport,
}

/// Descriptor sets of every sample under `schedule`.
pub fn extract_all(ds: &SyntheticActionDataset, schedule: &SkipSchedule, window: usize) -> Result<Vec<SeriesDescriptorSet>> {
    ds.samples
        .par_iter()
        .map(|s| extract_series_descriptors(&s.series, schedule, window).map_err(CliError::from))
        .collect()
}

pub fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols());
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).copy_from_slice(m.row(src));
    }
    out
}

pub fn fit_codec(sets: &[SeriesDescriptorSet], train: &[usize], enc: &EncoderSettings, seed: u64) -> Result<FisherCodec> {
    let train_sets: Vec<SeriesDescriptorSet> = train.iter().map(|i| sets[*i].clone()).collect();
    Ok(FisherCodec::fit(&train_sets, &enc.codec_config(), &mut rng::substream(seed, &[0xc0dec]))?)
}

pub fn train_classifier(x: &Matrix, labels: &[usize], cls: &ClassifierSettings, seed: u64) -> Result<LinearModel> {
    let mut cfg = SvmConfig { c: cls.c, epochs: cls.epochs, tol: cls.tol, seed };
    if let Some(grid) = &cls.cv_grid {
        cfg.c = classify::cross_validate_c(x, labels, grid, cls.folds, &cfg)?.0;
    }
    Ok(classify::svm_train(x, labels, &cfg)?)
}

/// Full pipeline for one schedule.
pub fn run_schedule(
    ds: &SyntheticActionDataset,
    schedule: &SkipSchedule,
    settings: &RecognitionSettings,
    enc: &EncoderSettings,
    cls: &ClassifierSettings,
    seed: u64,
) -> Result<(EvalReport, f64)> {
    let sets = extract_all(ds, schedule, settings.window)?;
    let codec = fit_codec(&sets, &ds.train, enc, seed)?;
    let (x, _) = encode_dataset(&codec, &sets)?;
    let model = train_classifier(&select_rows(&x, &ds.train), &ds.labels(&ds.train), cls, seed)?;
    let report = classify::evaluate(&model, &select_rows(&x, &ds.test), &ds.labels(&ds.test))?;
    Ok((report, model.c))
}

/// Schedules of the accuracy grid: single levels `0..=L`, stacked `1..=L`, then masked runs.
pub fn grid_schedules(frames: usize, settings: &RecognitionSettings) -> Result<Vec<(RunKind, usize, SkipSchedule)>> {
    let base = 1.0 / frames as f64;
    let mut out = Vec::new();
    for l in 0..=settings.levels {
        out.push((RunKind::Single, l, SkipSchedule::single_level(base, l)?));
    }
    for l in 1..=settings.levels {
        out.push((RunKind::Stacked, l, SkipSchedule::new(base, l)?));
    }
    for (deepest, mask) in &settings.masked {
        out.push((RunKind::Masked, *deepest, SkipSchedule::new(base, *deepest)?.excluding(mask)?));
    }
    Ok(out)
}

/// Runs every grid configuration (in parallel); output order follows [`grid_schedules`].
pub fn run_grid(
    ds: &SyntheticActionDataset,
    settings: &RecognitionSettings,
    enc: &EncoderSettings,
    cls: &ClassifierSettings,
    seed: u64,
) -> Result<Vec<RunResult>> {
    let schedules = grid_schedules(ds.config.frames, settings)?;
    schedules
        .par_iter()
        .map(|(kind, level, schedule)| {
            let (report, c) = run_schedule(ds, schedule, settings, enc, cls, seed)?;
            let label = match kind {
                RunKind::Single => format!("l={level}"),
                _ => schedule.label(),
            };
            Ok(RunResult {
                label,
                kind: *kind,
                level: *level,
                macc: report.macc,
                map: report.map,
                relative_cost: level_cost_report(schedule).total_relative,
                c,
                report,
            })
        })
        .collect()
}
