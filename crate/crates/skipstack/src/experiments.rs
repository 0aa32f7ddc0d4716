//! One function per CLI verb. Each reads its inputs, writes its outputs into an
//! [`OutputDir`] and returns the in-memory results for callers that want them.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use skipstack_core::conditioning::{
    self, coverage_trial, BernsteinReport, CoverageSummary, Sampling, Sandwich, SpectrumCurve,
};
use skipstack_core::encoder::encode_dataset;
use skipstack_core::latent::LatentModel;
use skipstack_core::skipstack::{self as stack, level_cost_report, CostReport, SkipSchedule};
use skipstack_core::{classify, rng, stats, Error};

use crate::config::ExperimentConfig;
use crate::dataset::{self, SyntheticActionDataset};
use crate::error::{CliError, Result};
use crate::formats::{self, CodecDoc, DatasetDoc, EvalReportDoc, LinearModelDoc, MatrixHeader, ModelDoc, OutputDir, Table};
use crate::recognition::{self, RunKind, RunResult};
use crate::svg::{self, PlotKind};

pub fn model_gen(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<LatentModel> {
    let model = cfg.latent_model()?;
    out.write_json("model.json", &ModelDoc::from(&model))?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Conditioning

/// Runs coverage trials in parallel; trial `i` draws only from `(seed, i)`.
pub fn coverage(model: &LatentModel, sampling: &Sampling, delta: f64, trials: usize, seed: u64) -> Result<CoverageSummary> {
    if trials < 100 {
        return Err(Error::TooFewSamples { required: 100, got: trials }.into());
    }
    let bounds = sampling.sandwich(model, delta)?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| coverage_trial(model, sampling, &bounds, seed, t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(CoverageSummary::from_trials(sampling.label(), bounds, records))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichDoc {
    pub lower: f64,
    pub upper: Option<f64>,
    pub delta_tau: f64,
    pub t_min_required: usize,
    pub features: usize,
}

impl From<&Sandwich> for SandwichDoc {
    fn from(s: &Sandwich) -> Self {
        SandwichDoc {
            lower: s.lower,
            upper: s.upper.is_finite().then_some(s.upper),
            delta_tau: s.delta_tau,
            t_min_required: s.t_min_required,
            features: s.features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageDoc {
    pub label: String,
    pub bounds: SandwichDoc,
    pub trials: usize,
    pub coverage: f64,
    /// `P(X <= covered)` for `X ~ Binomial(trials, 1 - δ)`.
    pub coverage_p_value: f64,
    /// `null` when some trial was singular.
    pub mean_beta: Option<f64>,
    pub var_beta: Option<f64>,
    pub singular_trials: usize,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl CoverageDoc {
    pub fn new(s: &CoverageSummary, delta: f64) -> Self {
        let covered = s.trials.iter().filter(|t| t.within).count() as u64;
        CoverageDoc {
            label: s.label.clone(),
            bounds: (&s.bounds).into(),
            trials: s.trials.len(),
            coverage: s.coverage,
            coverage_p_value: stats::binomial_lower_tail(covered, s.trials.len() as u64, 1.0 - delta),
            mean_beta: finite(s.mean_beta),
            var_beta: finite(s.var_beta),
            singular_trials: s.singular_trials,
        }
    }
}

/// Paired comparison of the single-skip design against the stacked one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    pub mean_difference: Option<f64>,
    pub variance_difference: Option<f64>,
    /// 5% bootstrap quantiles of `stat(single) - stat(stacked)`.
    pub mean_difference_q05: Option<f64>,
    pub variance_difference_q05: Option<f64>,
    pub mean_reduced: bool,
    pub variance_reduced: bool,
    pub resamples: usize,
}

pub fn paired_comparison(single: &CoverageSummary, stacked: &CoverageSummary, resamples: usize, seed: u64) -> PairedComparison {
    let (a, b) = (single.betas(), stacked.betas());
    let usable = a.iter().chain(&b).all(|v| v.is_finite()) && resamples > 0;
    if !usable {
        return PairedComparison {
            mean_difference: None,
            variance_difference: None,
            mean_difference_q05: None,
            variance_difference_q05: None,
            mean_reduced: false,
            variance_reduced: false,
            resamples,
        };
    }
    let mean_q = stats::quantile(&stats::paired_bootstrap(&a, &b, stats::mean, resamples, &mut rng::substream(seed, &[0xb0, 0])), 0.05);
    let var_q = stats::quantile(&stats::paired_bootstrap(&a, &b, stats::variance, resamples, &mut rng::substream(seed, &[0xb0, 1])), 0.05);
    PairedComparison {
        mean_difference: Some(stats::mean(&a) - stats::mean(&b)),
        variance_difference: Some(stats::variance(&a) - stats::variance(&b)),
        mean_difference_q05: Some(mean_q),
        variance_difference_q05: Some(var_q),
        mean_reduced: mean_q > 0.0,
        variance_reduced: var_q > 0.0,
        resamples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummaryDoc {
    pub delta: f64,
    pub single: CoverageDoc,
    pub stacked: CoverageDoc,
    pub comparison: PairedComparison,
}

fn coverage_table(s: &CoverageSummary) -> Table {
    let mut t = Table::new(&["trial", "beta", "lower", "upper", "within"]);
    for r in &s.trials {
        t.push(vec![r.trial.into(), r.beta.into(), r.lower.into(), r.upper.into(), r.within.into()]);
    }
    t
}

pub struct ConditionOutcome {
    pub single: CoverageSummary,
    pub stacked: CoverageSummary,
    pub summary: ConditionSummaryDoc,
}

pub fn sim_condition(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ConditionOutcome> {
    let model = cfg.latent_model()?;
    let single = Sampling::Fixed { tau: cfg.condition.tau, columns: cfg.condition.columns };
    let stacked = Sampling::Stacked(cfg.stacked_schedule()?);
    let seed = cfg.seed();
    let single = coverage(&model, &single, cfg.delta, cfg.trials, seed)?;
    let stacked = coverage(&model, &stacked, cfg.delta, cfg.trials, seed)?;
    let summary = ConditionSummaryDoc {
        delta: cfg.delta,
        single: CoverageDoc::new(&single, cfg.delta),
        stacked: CoverageDoc::new(&stacked, cfg.delta),
        comparison: paired_comparison(&single, &stacked, cfg.condition.bootstrap_resamples, seed),
    };
    coverage_table(&single).write(out, "coverage_single", cfg.format())?;
    coverage_table(&stacked).write(out, "coverage_stacked", cfg.format())?;
    out.write_json("condition_summary.json", &summary)?;
    Ok(ConditionOutcome { single, stacked, summary })
}

// ---------------------------------------------------------------------------
// Bounds and the corollary

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryBatch {
    pub m: u32,
    pub batch: usize,
    pub mean_beta: f64,
    pub polynomial: f64,
    pub exponential: f64,
}

impl CorollaryBatch {
    pub fn holds_polynomial(&self) -> bool {
        self.mean_beta >= self.polynomial
    }
}

/// Mean `β` of `batches` batches of single-skip trials on a two-signal model with
/// `γ_k = (m + 1) γ₁`.
pub fn corollary_batches(cfg: &ExperimentConfig, m: u32) -> Result<Vec<CorollaryBatch>> {
    let c = &cfg.corollary;
    let gammas = vec![c.gamma1, (m as f64 + 1.0) * c.gamma1];
    let model = LatentModel::new(2, 2, gammas, c.c, 0.0, rng::derive_seed(cfg.seed(), &[m as u64]))?;
    let sampling = Sampling::Fixed { tau: c.tau, columns: Some(c.columns) };
    let bounds = sampling.sandwich(&model, cfg.delta)?;
    let lower = conditioning::corollary1_lower(m, c.gamma1, c.tau, c.c);
    (0..c.batches)
        .into_par_iter()
        .map(|batch| {
            let batch_seed = rng::derive_seed(cfg.seed(), &[m as u64, batch as u64]);
            let betas = (0..c.batch_trials)
                .map(|t| Ok(coverage_trial(&model, &sampling, &bounds, batch_seed, t)?.beta))
                .collect::<Result<Vec<f64>>>()?;
            Ok(CorollaryBatch { m, batch, mean_beta: stats::mean(&betas), polynomial: lower.polynomial, exponential: lower.exponential })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSummaryDoc {
    /// Largest relative gap between the one-level stacked bounds and the single-skip ones.
    pub one_level_relative_gap: f64,
    /// Per `m`: fraction of batches whose mean `β` reaches the polynomial form.
    pub corollary_polynomial_fraction: Vec<(u32, f64)>,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn sim_bounds(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(Table, Vec<CorollaryBatch>, BoundsSummaryDoc)> {
    let g = &cfg.model.gammas;
    let (g1, gk) = match (g.first(), g.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(CliError::Config("model.gammas is empty".into())),
    };
    let (k, c, delta) = (cfg.model.k, cfg.model.c, cfg.delta);
    let mut table = Table::new(&["label", "features", "delta_tau", "t_min_required", "lower", "upper"]);
    let mut push = |label: String, s: &Sandwich| {
        table.push(vec![label.into(), s.features.into(), s.delta_tau.into(), s.t_min_required.into(), s.lower.into(), s.upper.into()]);
    };
    let tau = cfg.condition.tau;
    let t = cfg.condition.columns.unwrap_or((1.0 / tau + 1e-9).floor() as usize);
    let single = conditioning::theorem1_bounds(g1, gk, c, tau, k, t, delta)?;
    push(format!("tau={tau} T={t}"), &single);

    let base = cfg.base_tau();
    let one_level = conditioning::theorem2_bounds(g, c, &SkipSchedule::new(base, 0)?, delta)?;
    let reference = conditioning::theorem1_bounds(g1, gk, c, base, k, one_level.features, delta)?;
    let mut gap = relative_gap(one_level.lower, reference.lower).max(relative_gap(one_level.delta_tau, reference.delta_tau));
    if one_level.upper.is_finite() || reference.upper.is_finite() {
        gap = gap.max(relative_gap(one_level.upper, reference.upper));
    }
    for levels in 0..=cfg.schedule.levels {
        let s = SkipSchedule::new(base, levels)?;
        push(s.label(), &conditioning::theorem2_bounds(g, c, &s, delta)?);
    }
    if !cfg.schedule.mask.is_empty() {
        let s = cfg.stacked_schedule()?;
        push(s.label(), &conditioning::theorem2_bounds(g, c, &s, delta)?);
    }

    let mut batches = Vec::new();
    let mut fractions = Vec::new();
    for &m in &cfg.corollary.ms {
        let b = corollary_batches(cfg, m)?;
        let holds = b.iter().filter(|x| x.holds_polynomial()).count();
        fractions.push((m, holds as f64 / b.len().max(1) as f64));
        batches.extend(b);
    }
    let mut ct = Table::new(&["m", "batch", "mean_beta", "polynomial", "exponential", "holds_polynomial"]);
    for b in &batches {
        ct.push(vec![(b.m as usize).into(), b.batch.into(), b.mean_beta.into(), b.polynomial.into(), b.exponential.into(), b.holds_polynomial().into()]);
    }
    let summary = BoundsSummaryDoc { one_level_relative_gap: gap, corollary_polynomial_fraction: fractions };
    table.write(out, "bounds", cfg.format())?;
    ct.write(out, "corollary", cfg.format())?;
    out.write_json("bounds_summary.json", &summary)?;
    Ok((table, batches, summary))
}

// ---------------------------------------------------------------------------
// Bernstein

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinSummaryDoc {
    pub p_dim: usize,
    pub n: usize,
    pub b: f64,
    pub norm_es: f64,
    pub trials: usize,
    pub max_deviation: f64,
    pub rows: Vec<BernsteinRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub delta: f64,
    pub bound: f64,
    pub exceedance: f64,
    pub within: bool,
}

pub fn bernstein_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<BernsteinReport> {
    let b = &cfg.bernstein;
    let report = conditioning::bernstein_coverage_test(b.p_dim, b.n, b.b, &b.deltas, b.trials, b.law.into(), cfg.seed())?;
    let rows: Vec<BernsteinRow> = report
        .deltas
        .iter()
        .zip(&report.bounds)
        .zip(&report.exceedance)
        .map(|((d, bound), e)| BernsteinRow { delta: *d, bound: *bound, exceedance: *e, within: e <= d })
        .collect();
    let mut t = Table::new(&["delta", "bound", "exceedance", "within"]);
    for r in &rows {
        t.push(vec![r.delta.into(), r.bound.into(), r.exceedance.into(), r.within.into()]);
    }
    t.write(out, "bernstein", cfg.format())?;
    out.write_json(
        "bernstein_summary.json",
        &BernsteinSummaryDoc {
            p_dim: report.p_dim,
            n: report.n,
            b: report.b,
            norm_es: report.norm_es,
            trials: report.deviations.len(),
            max_deviation: report.deviations.iter().fold(0.0, |m: f64, v| m.max(*v)),
            rows,
        },
    )?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Spectrum

/// Curves for stacked levels `0..=max_level` of one model.
pub fn spectrum_curves(model: &LatentModel, base_tau: f64, max_level: usize, observe: bool, seed: u64) -> Result<Vec<(SpectrumCurve, stack::FeatureMatrix)>> {
    (0..=max_level)
        .into_par_iter()
        .map(|levels| {
            let schedule = SkipSchedule::new(base_tau, levels)?;
            let fm = stack::mifs_stack(model, &schedule, observe, seed)?;
            let m = if observe { fm.f.as_ref().unwrap_or(&fm.p) } else { &fm.p };
            let curve = conditioning::spectrum_curve(m, levels.to_string())?;
            Ok((curve, fm))
        })
        .collect()
}

pub fn spectrum_table(curves: &[SpectrumCurve]) -> Table {
    let mut t = Table::new(&["level", "index", "sigma_normalized"]);
    for c in curves {
        for (i, s) in c.sigmas.iter().enumerate() {
            t.push(vec![c.label.clone().into(), (i + 1).into(), (*s).into()]);
        }
    }
    t
}

pub fn spectrum(cfg: &ExperimentConfig, out: &mut OutputDir, svg_out: bool, matrices: bool) -> Result<Vec<SpectrumCurve>> {
    let sc = &cfg.spectrum;
    let model = cfg.build_model(&sc.model)?;
    let results = spectrum_curves(&model, sc.base_tau, sc.max_level, sc.observe, cfg.seed())?;
    let curves: Vec<SpectrumCurve> = results.iter().map(|r| r.0.clone()).collect();
    let table = spectrum_table(&curves);
    table.write(out, "spectrum", cfg.format())?;
    if svg_out {
        let csv = table.to_bytes(formats::TableFormat::Csv)?;
        out.write("spectrum.svg", svg::figure_from_csv(&csv, PlotKind::Spectrum)?.render().as_bytes())?;
    }
    if matrices {
        for (curve, fm) in &results {
            let (kind, m) = match (&fm.f, sc.observe) {
                (Some(f), true) => ("F", f),
                _ => ("P", &fm.p),
            };
            let header = MatrixHeader { rows: m.rows(), cols: m.cols(), kind: kind.into(), levels: fm.level_of_column.clone() };
            out.write(&format!("features_L{}.bin", curve.label), &formats::encode_matrix(&header, m, None)?)?;
        }
    }
    Ok(curves)
}

// ---------------------------------------------------------------------------
// Recognition

pub fn dataset_gen(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<SyntheticActionDataset> {
    let ds = dataset::generate(&cfg.dataset, cfg.seed())?;
    out.write_json("dataset.json", &DatasetDoc::from(&ds))?;
    Ok(ds)
}

fn input_or(out: &OutputDir, given: Option<&Path>, default: &str) -> PathBuf {
    given.map_or_else(|| out.path(default), Path::to_path_buf)
}

/// Schedule of the encode step: the configured levels and mask over `1 / frames`.
pub fn encode_schedule(cfg: &ExperimentConfig, frames: usize) -> Result<SkipSchedule> {
    cfg.schedule_with_base(1.0 / frames as f64)
}

pub fn encode(cfg: &ExperimentConfig, out: &mut OutputDir, dataset: Option<&Path>, descriptors: bool) -> Result<skipstack_core::Matrix> {
    let ds = formats::load_dataset(&input_or(out, dataset, "dataset.json"))?;
    let schedule = encode_schedule(cfg, ds.config.frames)?;
    let sets = recognition::extract_all(&ds, &schedule, cfg.recognition.window)?;
    let codec = recognition::fit_codec(&sets, &ds.train, &cfg.encoder, cfg.seed())?;
    let (x, _) = encode_dataset(&codec, &sets)?;
    out.write_json("codec.json", &CodecDoc::from(&codec))?;
    let header = MatrixHeader { rows: x.rows(), cols: x.cols(), kind: "FV".into(), levels: Vec::new() };
    out.write("encodings.bin", &formats::encode_matrix(&header, &x, None)?)?;
    if descriptors {
        for (i, set) in sets.iter().enumerate() {
            let d = &set.descriptors;
            let header = MatrixHeader { rows: d.rows(), cols: d.cols(), kind: "DESC".into(), levels: set.level_of_row.clone() };
            out.write(&format!("descriptors/sample_{i:05}.bin"), &formats::encode_matrix(&header, d, Some(&set.locations))?)?;
        }
    }
    Ok(x)
}

fn load_encodings(path: &Path, ds: &SyntheticActionDataset) -> Result<skipstack_core::Matrix> {
    let (header, x, _) = formats::decode_matrix(&formats::read_bytes(path)?)?;
    if header.kind != "FV" || x.rows() != ds.samples.len() {
        return Err(CliError::format(
            path.display().to_string(),
            format!("expected FV encodings for {} samples, found kind {} with {} rows", ds.samples.len(), header.kind, x.rows()),
        ));
    }
    Ok(x)
}

pub fn train(cfg: &ExperimentConfig, out: &mut OutputDir, dataset: Option<&Path>, encodings: Option<&Path>) -> Result<classify::LinearModel> {
    let ds = formats::load_dataset(&input_or(out, dataset, "dataset.json"))?;
    let x = load_encodings(&input_or(out, encodings, "encodings.bin"), &ds)?;
    let model = recognition::train_classifier(&recognition::select_rows(&x, &ds.train), &ds.labels(&ds.train), &cfg.classifier, cfg.seed())?;
    out.write_json("classifier.json", &LinearModelDoc::from(&model))?;
    Ok(model)
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    dataset: Option<&Path>,
    encodings: Option<&Path>,
    classifier: Option<&Path>,
) -> Result<classify::EvalReport> {
    let _ = cfg;
    let ds = formats::load_dataset(&input_or(out, dataset, "dataset.json"))?;
    let x = load_encodings(&input_or(out, encodings, "encodings.bin"), &ds)?;
    let model = formats::read_json::<LinearModelDoc>(&input_or(out, classifier, "classifier.json"))?.into_model()?;
    let report = classify::evaluate(&model, &recognition::select_rows(&x, &ds.test), &ds.labels(&ds.test))?;
    out.write_json("eval.json", &EvalReportDoc::from(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDoc {
    pub seed: u64,
    pub label: String,
    pub kind: RunKind,
    pub level: usize,
    pub relative_cost: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub report: EvalReportDoc,
}

/// One grid row averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub label: String,
    pub kind: RunKind,
    pub level: usize,
    pub macc: f64,
    pub map: f64,
    pub relative_cost: f64,
}

fn kind_name(k: RunKind) -> &'static str {
    match k {
        RunKind::Single => "single",
        RunKind::Stacked => "stacked",
        RunKind::Masked => "masked",
    }
}

pub fn average_grid(runs: &[Vec<RunResult>]) -> Vec<GridRow> {
    let Some(first) = runs.first() else { return Vec::new() };
    first
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let maccs: Vec<f64> = runs.iter().map(|rs| rs[i].macc).collect();
            let maps: Vec<f64> = runs.iter().map(|rs| rs[i].map).collect();
            GridRow { label: r.label.clone(), kind: r.kind, level: r.level, macc: stats::mean(&maccs), map: stats::mean(&maps), relative_cost: r.relative_cost }
        })
        .collect()
}

pub fn grid_table(rows: &[GridRow]) -> Table {
    let mut t = Table::new(&["label", "kind", "level", "macc", "map", "relative_cost"]);
    for r in rows {
        t.push(vec![r.label.clone().into(), kind_name(r.kind).into(), r.level.into(), r.macc.into(), r.map.into(), r.relative_cost.into()]);
    }
    t
}

/// Runs the accuracy grid over `repeats` datasets (seeds `seed, seed + 1, ...`), or once
/// on a given dataset file. Per-run results are rewritten after every repeat.
pub fn run_recognition(cfg: &ExperimentConfig, out: &mut OutputDir, dataset: Option<&Path>) -> Result<Vec<GridRow>> {
    let rs = &cfg.recognition;
    let fixed = dataset.map(formats::load_dataset).transpose()?;
    let repeats = if fixed.is_some() { 1 } else { rs.repeats.max(1) };
    let mut runs: Vec<Vec<RunResult>> = Vec::new();
    let mut docs = Vec::new();
    let mut table = Table::new(&["seed", "label", "kind", "level", "macc", "map", "relative_cost", "C"]);
    for r in 0..repeats {
        let seed = cfg.seed().wrapping_add(r as u64);
        let ds = match &fixed {
            Some(ds) => ds.clone(),
            None => dataset::generate(&cfg.dataset, seed)?,
        };
        log::info!("recognition repeat {}/{} (seed {seed})", r + 1, repeats);
        let results = recognition::run_grid(&ds, rs, &cfg.encoder, &cfg.classifier, seed)?;
        for x in &results {
            table.push(vec![
                seed.into(),
                x.label.clone().into(),
                kind_name(x.kind).into(),
                x.level.into(),
                x.macc.into(),
                x.map.into(),
                x.relative_cost.into(),
                x.c.into(),
            ]);
            docs.push(RunDoc {
                seed,
                label: x.label.clone(),
                kind: x.kind,
                level: x.level,
                relative_cost: x.relative_cost,
                c: x.c,
                report: EvalReportDoc::from(&x.report),
            });
        }
        table.write(out, "recognition_runs", cfg.format())?;
        out.write_json("recognition.json", &docs)?;
        runs.push(results);
    }
    let grid = average_grid(&runs);
    grid_table(&grid).write(out, "accuracy_grid", cfg.format())?;
    Ok(grid)
}

// ---------------------------------------------------------------------------
// Cost and plots

pub fn cost_report(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<CostReport>> {
    let base = cfg.base_tau();
    let mut reports = (0..=cfg.schedule.levels)
        .map(|l| Ok(level_cost_report(&SkipSchedule::new(base, l)?)))
        .collect::<Result<Vec<_>>>()?;
    if !cfg.schedule.mask.is_empty() {
        reports.push(level_cost_report(&cfg.stacked_schedule()?));
    }
    let mut levels = Table::new(&["schedule", "level", "tau", "features", "relative"]);
    let mut totals = Table::new(&["schedule", "features", "relative"]);
    for r in &reports {
        for l in &r.levels {
            levels.push(vec![r.label.clone().into(), l.level.into(), l.tau.into(), l.features.into(), l.relative.into()]);
        }
        totals.push(vec![r.label.clone().into(), r.levels.iter().map(|l| l.features).sum::<usize>().into(), r.total_relative.into()]);
    }
    levels.write(out, "cost_levels", cfg.format())?;
    totals.write(out, "cost_totals", cfg.format())?;
    Ok(reports)
}

pub fn plot(out: &mut OutputDir, input: &Path, kind: PlotKind) -> Result<PathBuf> {
    let figure = svg::figure_from_csv(&formats::read_bytes(input)?, kind)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    out.write(&format!("{stem}.svg"), figure.render().as_bytes())
}
