//! Synthetic multi-speed action dataset.
//!
//! Each class owns one band-limited waveform template per channel (a sum of a few
//! sinusoids). A sample plays the template `speed` times faster, scaled by a random
//! amplitude and corrupted by white Gaussian noise. Speed is the nuisance factor:
//! every class appears at every speed in both splits.

use serde::{Deserialize, Serialize};
use skipstack_core::rng::{self, Stream};
use skipstack_core::Matrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub classes: usize,
    pub speeds: Vec<u32>,
    pub samples_per_cell: usize,
    pub frames: usize,
    pub channels: usize,
    /// Sinusoids per channel template.
    pub components: usize,
    /// Template frequency band, in cycles per clip at speed 1.
    pub band: [f64; 2],
    /// Amplitude drawn uniformly from `[1 - jitter, 1 + jitter]`.
    pub amplitude_jitter: f64,
    pub noise: f64,
    pub test_fraction: f64,
    /// Upper bound on the pairwise correlation of class templates at speed 1.
    pub max_template_correlation: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            classes: 5,
            speeds: vec![1, 2, 3],
            samples_per_cell: 20,
            frames: 96,
            channels: 3,
            components: 3,
            band: [1.0, 12.0],
            amplitude_jitter: 0.2,
            noise: 1.6,
            test_fraction: 1.0 / 3.0,
            max_template_correlation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Per-channel sinusoid sums of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub channels: Vec<Vec<Sinusoid>>,
}

impl Template {
    /// Value of `channel` at template time `u` (in clips at speed 1).
    pub fn eval(&self, channel: usize, u: f64) -> f64 {
        self.channels[channel]
            .iter()
            .map(|s| s.amplitude * (std::f64::consts::TAU * s.frequency * u + s.phase).sin())
            .sum()
    }

    /// `frames x channels` rendering at `speed`.
    pub fn render(&self, frames: usize, speed: u32) -> Matrix {
        let channels = self.channels.len();
        let mut m = Matrix::zeros(frames, channels);
        for n in 0..frames {
            let u = speed as f64 * n as f64 / frames as f64;
            for ch in 0..channels {
                m[(n, ch)] = self.eval(ch, u);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub label: usize,
    pub speed: u32,
    pub amplitude: f64,
    /// `frames x channels`.
    pub series: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticActionDataset {
    pub config: DatasetConfig,
    pub templates: Vec<Template>,
    pub samples: Vec<ActionSample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SyntheticActionDataset {
    pub fn labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|i| self.samples[*i].label).collect()
    }
}

fn validate(cfg: &DatasetConfig) -> Result<()> {
    let fail = |m: String| Err(CliError::Config(m));
    if cfg.classes < 2 {
        return fail(format!("dataset.classes must be >= 2, got {}", cfg.classes));
    }
    if cfg.speeds.is_empty() || cfg.speeds.iter().any(|s| !(1..=4).contains(s)) {
        return fail(format!("dataset.speeds must be a non-empty subset of {{1,2,3,4}}, got {:?}", cfg.speeds));
    }
    let mut sorted = cfg.speeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.speeds.len() {
        return fail("dataset.speeds has duplicates".into());
    }
    if cfg.samples_per_cell < 2 {
        return fail(format!(
            "dataset.samples_per_cell = {} leaves a class/speed cell without a train or test sample (need >= 2)",
            cfg.samples_per_cell
        ));
    }
    if cfg.frames < 8 || cfg.channels == 0 || cfg.components == 0 {
        return fail("dataset.frames must be >= 8, channels and components positive".into());
    }
    if !(cfg.band[0] > 0.0 && cfg.band[1] >= cfg.band[0]) {
        return fail(format!("dataset.band must satisfy 0 < lo <= hi, got {:?}", cfg.band));
    }
    if !(0.0..1.0).contains(&cfg.amplitude_jitter) || !(cfg.noise >= 0.0) {
        return fail("dataset.amplitude_jitter must lie in [0, 1) and noise be >= 0".into());
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return fail(format!("dataset.test_fraction must lie in (0, 1), got {}", cfg.test_fraction));
    }
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Pearson correlation of two templates rendered at speed 1, channels concatenated.
pub fn template_correlation(a: &Template, b: &Template, frames: usize) -> f64 {
    pearson(a.render(frames, 1).as_slice(), b.render(frames, 1).as_slice())
}

const TEMPLATE_ATTEMPTS: usize = 10_000;

fn draw_template(cfg: &DatasetConfig, rng: &mut Stream) -> Template {
    let [lo, hi] = cfg.band;
    let channels = (0..cfg.channels)
        .map(|_| {
            (0..cfg.components)
                .map(|_| Sinusoid {
                    amplitude: 0.5 + 0.5 * rng::uniform(rng),
                    frequency: lo + (hi - lo) * rng::uniform(rng),
                    phase: std::f64::consts::TAU * rng::uniform(rng),
                })
                .collect()
        })
        .collect();
    Template { channels }
}

/// Draws class templates by rejection until all pairwise correlations are below the bound.
pub fn draw_templates(cfg: &DatasetConfig, rng: &mut Stream) -> Result<Vec<Template>> {
    let mut templates: Vec<Template> = Vec::with_capacity(cfg.classes);
    let mut attempts = 0;
    while templates.len() < cfg.classes {
        attempts += 1;
        if attempts > TEMPLATE_ATTEMPTS {
            return Err(CliError::Numerical(format!(
                "could not draw {} templates with correlation < {}",
                cfg.classes, cfg.max_template_correlation
            )));
        }
        let t = draw_template(cfg, rng);
        if templates.iter().all(|o| template_correlation(o, &t, cfg.frames).abs() < cfg.max_template_correlation) {
            templates.push(t);
        }
    }
    Ok(templates)
}

pub fn generate(cfg: &DatasetConfig, seed: u64) -> Result<SyntheticActionDataset> {
    validate(cfg)?;
    let templates = draw_templates(cfg, &mut rng::substream(seed, &[0]))?;
    let mut samples = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut split_rng = rng::substream(seed, &[2]);
    for (label, template) in templates.iter().enumerate() {
        let quotas = test_quotas(cfg.speeds.len(), cfg.samples_per_cell, cfg.test_fraction);
        for (cell, &speed) in cfg.speeds.iter().enumerate() {
            let mut r = rng::substream(seed, &[1, label as u64, speed as u64]);
            let clean = template.render(cfg.frames, speed);
            let first = samples.len();
            for _ in 0..cfg.samples_per_cell {
                let amplitude = 1.0 + cfg.amplitude_jitter * (2.0 * rng::uniform(&mut r) - 1.0);
                let mut series = clean.clone();
                for i in 0..cfg.frames {
                    for v in series.row_mut(i) {
                        *v = amplitude * *v + cfg.noise * rng::normal(&mut r);
                    }
                }
                samples.push(ActionSample { label, speed, amplitude, series });
            }
            let mut idx: Vec<usize> = (first..samples.len()).collect();
            rng::shuffle(&mut split_rng, &mut idx);
            let (te, tr) = idx.split_at(quotas[cell]);
            test.extend_from_slice(te);
            train.extend_from_slice(tr);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SyntheticActionDataset { config: cfg.clone(), templates, samples, train, test })
}

/// Test-set size per speed cell of one class: the class total is
/// `round(cells * n * fraction)`, spread as evenly as possible, and every cell keeps at
/// least one sample on each side.
fn test_quotas(cells: usize, n: usize, fraction: f64) -> Vec<usize> {
    let total = ((cells * n) as f64 * fraction).round() as usize;
    let base = total / cells;
    let extra = total % cells;
    (0..cells).map(|c| (base + usize::from(c < extra)).clamp(1, n - 1)).collect()
}
