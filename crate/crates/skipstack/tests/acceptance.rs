//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! non-zero if any fails. Run with `cargo test -p skipstack --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use skipstack::config::{ExperimentConfig, Overrides};
use skipstack::dataset::{self, DatasetConfig};
use skipstack::experiments;
use skipstack::formats::OutputDir;
use skipstack::recognition::{self, ClassifierSettings, EncoderSettings, RecognitionSettings, RunKind};
use skipstack_core::conditioning::{self, Sampling, VectorLaw};
use skipstack_core::encoder::{fisher_vector, GmmConfig, GmmModel};
use skipstack_core::latent::LatentModel;
use skipstack_core::skipstack::{level_cost_report, SkipSchedule};
use skipstack_core::{rng, stats, Matrix};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(Some(&configs().join(name)), &Overrides::default()).expect("bundled config loads")
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn gaussian(rows: usize, cols: usize, r: &mut rng::Stream) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for v in m.row_mut(i) {
            *v = rng::normal(r);
        }
    }
    m
}

fn single_skip_coverage() -> Outcome {
    let cfg = load("coverage.json");
    let model = cfg.latent_model().map_err(|e| e.to_string())?;
    let sampling = Sampling::Fixed { tau: 0.01, columns: Some(2000) };
    let start = Instant::now();
    // The core routine is sequential, so this is the single-threaded runtime.
    let s = conditioning::coverage_experiment(&model, &sampling, 0.1, 200, cfg.seed()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let hits = s.trials.iter().filter(|t| t.within).count() as u64;
    let p = stats::binomial_lower_tail(hits, 200, 0.9);
    check(
        s.coverage >= 0.9 && p > 0.05 && secs < 30.0,
        format!(
            "coverage {:.3} ({hits}/200), binomial p {:.3}, bounds [{:.3}, {}], singular trials {}, {secs:.1}s",
            s.coverage, p, s.bounds.lower, s.bounds.upper, s.singular_trials
        ),
    )
}

fn one_level_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut radius_ok = true;
    for (gammas, c) in [(vec![1.0, 1.0, 8.0, 8.0], 0.1), (vec![0.001, 0.002, 0.004], 0.0), (vec![0.003, 0.03], 0.5)] {
        let k = gammas.len();
        for base in [0.001, 0.002, 0.01, 0.05] {
            let one = SkipSchedule::new(base, 0).unwrap();
            let t = one.budget(0);
            let a = conditioning::theorem1_bounds(gammas[0], gammas[k - 1], c, base, k, t, 0.1).map_err(|e| e.to_string())?;
            let b = conditioning::theorem2_bounds(&gammas, c, &one, 0.1).map_err(|e| e.to_string())?;
            for (x, y) in [(a.lower, b.lower), (a.upper, b.upper), (a.delta_tau, b.delta_tau)] {
                worst = worst.max(rel(x, y));
            }
            for levels in 1..=5 {
                let Ok(s) = SkipSchedule::new(base, levels) else { continue };
                let stacked = conditioning::delta_tau(k, s.total_budget(), c, 0.1);
                radius_ok &= (0..=levels).all(|l| stacked < conditioning::delta_tau(k, s.budget(l), c, 0.1));
            }
        }
    }
    check(worst <= 1e-12 && radius_ok, format!("max relative gap {worst:.1e}, stacked radius below every level: {radius_ok}"))
}

fn variance_reduction() -> Outcome {
    let cfg = load("variance_reduction.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut out = OutputDir::create(dir.path().to_path_buf()).map_err(|e| e.to_string())?;
    let o = experiments::sim_condition(&cfg, &mut out).map_err(|e| e.to_string())?;
    let cmp = &o.summary.comparison;
    check(
        cmp.mean_reduced && cmp.variance_reduced && o.single.trials.len() == 200,
        format!(
            "mean beta {:.3} -> {:.3} (q05 {:.3}), var {:.3} -> {:.4} (q05 {:.3})",
            o.single.mean_beta,
            o.stacked.mean_beta,
            cmp.mean_difference_q05.unwrap_or(f64::NAN),
            o.single.var_beta,
            o.stacked.var_beta,
            cmp.variance_difference_q05.unwrap_or(f64::NAN)
        ),
    )
}

fn corollary_growth() -> Outcome {
    let cfg = load("coverage.json");
    let mut parts = Vec::new();
    let mut ok = true;
    for m in 1..=3 {
        let batches = experiments::corollary_batches(&cfg, m).map_err(|e| e.to_string())?;
        let frac = batches.iter().filter(|b| b.holds_polynomial()).count() as f64 / batches.len() as f64;
        let mean = stats::mean(&batches.iter().map(|b| b.mean_beta).collect::<Vec<_>>());
        ok &= frac >= 0.95 && batches.len() == 20;
        parts.push(format!("M={m}: {:.0}% of batches, mean beta {mean:.3} vs {:.3}", 100.0 * frac, batches[0].polynomial));
    }
    check(ok, parts.join("; "))
}

fn bernstein_exceedance() -> Outcome {
    let deltas = [0.05, 0.1, 0.2];
    let start = Instant::now();
    let r = conditioning::bernstein_coverage_test(4, 500, 4.0, &deltas, 1000, VectorLaw::Rademacher, 2024).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let ok = r.exceedance.iter().zip(&deltas).all(|(e, d)| e <= d) && secs < 20.0;
    check(ok, format!("exceedance {:?} for delta {deltas:?}, {secs:.2}s", r.exceedance))
}

fn spectrum_dominance() -> Outcome {
    let sc = ExperimentConfig::default().spectrum;
    let m = &sc.model;
    let mut wins = 0;
    for seed in 0..50u64 {
        let model = LatentModel::new(m.k, m.d, m.gammas.clone(), m.c, m.sigma, seed).map_err(|e| e.to_string())?;
        let curves = experiments::spectrum_curves(&model, sc.base_tau, 3, sc.observe, seed).map_err(|e| e.to_string())?;
        let (l0, l3) = (&curves[0].0.sigmas, &curves[3].0.sigmas);
        wins += usize::from((1..10).all(|i| l3[i] >= l0[i]));
    }
    check(wins as f64 / 50.0 >= 0.9, format!("L=3 dominates L=0 on {wins}/50 seeds"))
}

fn fisher_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for instance in 0..20u64 {
        let mut r = rng::substream(7, &[instance]);
        let (k, dim) = (1 + rng::index(&mut r, 4), 1 + rng::index(&mut r, 4));
        let raw: Vec<f64> = (0..k).map(|_| 0.2 + rng::uniform(&mut r)).collect();
        let weights: Vec<f64> = raw.iter().map(|w| w / raw.iter().sum::<f64>()).collect();
        let means = gaussian(k, dim, &mut r);
        let mut variances = Matrix::zeros(k, dim);
        for c in 0..k {
            variances.row_mut(c).iter_mut().for_each(|v| *v = 0.3 + rng::uniform(&mut r));
        }
        let x = gaussian(10 + rng::index(&mut r, 40), dim, &mut r);
        let gmm = GmmModel::from_parameters(weights.clone(), means.clone(), variances.clone()).map_err(|e| e.to_string())?;
        let fv = fisher_vector(&gmm, &x).map_err(|e| e.to_string())?;
        let ll = |m: &Matrix, v: &Matrix| GmmModel::from_parameters(weights.clone(), m.clone(), v.clone()).unwrap().mean_log_likelihood(&x).unwrap();
        for c in 0..k {
            for d in 0..dim {
                let sd = variances[(c, d)].sqrt();
                let (mut mp, mut mm) = (means.clone(), means.clone());
                mp[(c, d)] += h;
                mm[(c, d)] -= h;
                let g_mu = (ll(&mp, &variances) - ll(&mm, &variances)) / (2.0 * h) * sd / weights[c].sqrt();
                let (mut vp, mut vm) = (variances.clone(), variances.clone());
                vp[(c, d)] = (sd + h).powi(2);
                vm[(c, d)] = (sd - h).powi(2);
                let g_sd = (ll(&means, &vp) - ll(&means, &vm)) / (2.0 * h) * sd / (2.0 * weights[c]).sqrt();
                // Relative to the block scale so near-zero entries do not blow up the ratio.
                let scale_mu = fv.mean_block().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
                let scale_sd = fv.variance_block().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
                worst = worst.max((fv.mean_block()[c * dim + d] - g_mu).abs() / scale_mu);
                worst = worst.max((fv.variance_block()[c * dim + d] - g_sd).abs() / scale_sd);
            }
        }
    }

    let mut r = rng::stream(99);
    let (k, dim) = (3, 3);
    let means = gaussian(k, dim, &mut r);
    let mut variances = Matrix::zeros(k, dim);
    for c in 0..k {
        variances.row_mut(c).iter_mut().for_each(|v| *v = 0.5 + rng::uniform(&mut r));
    }
    let gmm = GmmModel::from_parameters(vec![0.2, 0.3, 0.5], means, variances).map_err(|e| e.to_string())?;
    let samples = gmm.sample(100_000, &mut r);
    let norm = fisher_vector(&gmm, &samples).map_err(|e| e.to_string())?.norm();
    check(worst < 1e-5 && norm < 0.02, format!("max relative error {worst:.2e} over 20 instances, self-sample norm {norm:.4} at N=1e5"))
}

fn em_monotone() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for fit in 0..50u64 {
        let mut r = rng::substream(8, &[fit]);
        let (k, dim, clusters) = (1 + rng::index(&mut r, 8), 1 + rng::index(&mut r, 5), 1 + rng::index(&mut r, 5));
        let centers = gaussian(clusters, dim, &mut r);
        let n = 200 + rng::index(&mut r, 800);
        let mut data = gaussian(n, dim, &mut r);
        for i in 0..n {
            let c = i % clusters;
            for (j, v) in data.row_mut(i).iter_mut().enumerate() {
                *v = 4.0 * centers[(c, j)] + *v * (0.2 + (c as f64) * 0.3);
            }
        }
        let cfg = GmmConfig { components: k.min(n / 10), max_iters: 80, tol: 0.0, variance_floor: 1e-6 };
        let gmm = GmmModel::fit(&data, &cfg, &mut r).map_err(|e| e.to_string())?;
        for w in gmm.log_likelihood.windows(2) {
            worst = worst.min((w[1] - w[0]) / w[0].abs().max(1e-300));
            steps += 1;
        }
    }
    check(worst >= -1e-9, format!("worst relative step {worst:.2e} over {steps} EM steps in 50 fits"))
}

fn recognition_grid() -> Outcome {
    let start = Instant::now();
    let settings = RecognitionSettings { levels: 3, window: 4, masked: Vec::new(), repeats: 10 };
    let enc = EncoderSettings { pca_components: Some(10), gmm_components: 16, ..EncoderSettings::default() };
    let cls = ClassifierSettings { c: 100.0, ..ClassifierSettings::default() };
    let data_cfg = DatasetConfig { noise: 1.6, band: [1.0, 12.0], ..DatasetConfig::default() };
    let mut runs = Vec::new();
    for seed in 0..10u64 {
        let ds = dataset::generate(&data_cfg, seed).map_err(|e| e.to_string())?;
        runs.push(recognition::run_grid(&ds, &settings, &enc, &cls, seed).map_err(|e| e.to_string())?);
    }
    let grid = experiments::average_grid(&runs);
    let secs = start.elapsed().as_secs_f64();
    let acc = |kind: RunKind, level: usize| grid.iter().find(|r| r.kind == kind && r.level == level).map(|r| r.macc).unwrap_or(f64::NAN);
    let mut ok = secs < 300.0;
    let mut parts = Vec::new();
    for l in 1..=3 {
        let (single, stacked) = (acc(RunKind::Single, l), acc(RunKind::Stacked, l));
        ok &= stacked >= single;
        parts.push(format!("L={l} {stacked:.1} vs l={l} {single:.1}"));
    }
    let gain = acc(RunKind::Stacked, 2) - acc(RunKind::Single, 0);
    ok &= gain >= 5.0;
    parts.push(format!("L=2 - L=0 = {gain:+.1}"));
    parts.push(format!("{secs:.0}s"));
    check(ok, parts.join(", "))
}

fn cost_accounting() -> Outcome {
    let r = level_cost_report(&SkipSchedule::new(0.01, 2).unwrap());
    let features: Vec<usize> = r.levels.iter().map(|l| l.features).collect();
    let fine = level_cost_report(&SkipSchedule::new(0.001, 2).unwrap());
    let fine_features: Vec<usize> = fine.levels.iter().map(|l| l.features).collect();
    let masked = level_cost_report(&SkipSchedule::new(0.01, 2).unwrap().excluding(&[0]).unwrap());
    let ok = features == [100, 50, 33]
        && r.total_relative == 1.83
        && fine_features == [1000, 500, 333]
        && fine.total_relative == 1.833
        && masked.total_relative == 0.83
        && r.total_relative < 2.0;
    check(ok, format!("L=2 features {features:?} total {}, fine {fine_features:?} total {}, L=2-0 {}", r.total_relative, fine.total_relative, masked.total_relative))
}

const SMALL: &str = r#"{
  "seed": 3,
  "trials": 100,
  "model": { "k": 2, "d": 3, "gammas": [0.002, 0.006], "c": 0.1, "sigma": 0.01 },
  "condition": { "tau": 0.002, "bootstrap_resamples": 500 },
  "schedule": { "base_tau": 0.002, "levels": 2, "mask": [] },
  "corollary": { "batches": 4, "batch_trials": 10, "columns": 1000 },
  "bernstein": { "trials": 200 },
  "spectrum": { "max_level": 3, "base_tau": 0.002,
                "model": { "k": 10, "d": 12, "gammas": [0.001, 0.0012, 0.0014, 0.0016, 0.0018, 0.002, 0.0022, 0.0024, 0.0026, 0.0028], "c": 0, "sigma": 0.05 } },
  "dataset": { "classes": 3, "speeds": [1, 2], "samples_per_cell": 8, "frames": 48 },
  "recognition": { "levels": 2, "window": 3, "masked": [[2, [0]]], "repeats": 2 },
  "encoder": { "gmm_components": 3, "sample_budget": 3000, "max_iters": 30 },
  "classifier": { "c": 10 }
}"#;

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("small.json");
    fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let coverage_cfg = configs().join("coverage.json");
    let mut trees = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(run);
        let spectrum_csv = out.join("spectrum.csv").display().to_string();
        let verbs: Vec<Vec<&str>> = vec![
            vec!["model-gen"],
            vec!["sim-condition"],
            vec!["sim-bounds"],
            vec!["bernstein-check"],
            vec!["spectrum", "--svg", "--matrices"],
            vec!["dataset-gen"],
            vec!["encode", "--descriptors"],
            vec!["train"],
            vec!["evaluate"],
            vec!["run-recognition"],
            vec!["cost-report"],
            vec!["cost-report", "--format", "json"],
            vec!["plot", "--input", &spectrum_csv, "--kind", "spectrum"],
        ];
        for verb in verbs {
            let status = Command::new(env!("CARGO_BIN_EXE_skipstack"))
                .args(&verb)
                .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{verb:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        let bundled_out = out.join("full");
        let status = Command::new(env!("CARGO_BIN_EXE_skipstack"))
            .args(["sim-condition", "--config", coverage_cfg.to_str().unwrap(), "--out", bundled_out.to_str().unwrap(), "--threads", threads])
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err("sim-condition on the bundled config failed".into());
        }
        trees.push(tree(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    let svgs = a.keys().filter(|k| k.ends_with(".svg")).count();
    check(
        differing.is_empty() && a.len() == b.len() && svgs > 0,
        format!("{} files across 14 commands byte-identical at 1 and 2 threads ({svgs} svg); differing {differing:?}", a.len()),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture or a name filter are accepted and ignored.
    let criteria: [Criterion; 11] = [
        ("single-skip coverage", single_skip_coverage),
        ("one-level stacked bounds equal single-skip bounds", one_level_consistency),
        ("stacking lowers mean and variance of beta", variance_reduction),
        ("corollary growth, polynomial form", corollary_growth),
        ("matrix Bernstein exceedance", bernstein_exceedance),
        ("stacked spectrum decays slower", spectrum_dominance),
        ("Fisher vector gradients", fisher_correctness),
        ("EM monotonicity", em_monotone),
        ("stacked vs single-scale accuracy", recognition_grid),
        ("cost accounting", cost_accounting),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("{tag} {:>2}. {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
