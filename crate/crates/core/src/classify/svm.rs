use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, Matrix};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    /// Iteration budget in multiples of the training-set size.
    pub epochs: usize,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 100.0, epochs: 1000, tol: 1e-3, seed: 0 }
    }
}

/// One binary hinge-loss model `sign(wᵀx + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Primal objective `½‖w‖² + C Σ max(0, 1 - y(wᵀx + b))` at the returned solution.
    pub objective: f64,
    /// Dual objective `½ αᵀQα - Σα` after each epoch; non-increasing.
    pub dual_trace: Vec<f64>,
}

impl BinaryModel {
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// One-vs-all collection: model `i` separates class `i` from the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub models: Vec<BinaryModel>,
    pub c: f64,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, |m| m.weights.len())
    }
}

fn check_inputs(x: &Matrix, labels: &[usize]) -> Result<usize> {
    if x.rows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.rows(), got: labels.len() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("training features"));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let present = (0..classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::invalid("labels", "need at least two classes"));
    }
    if present < classes {
        return Err(Error::invalid("labels", format!("class ids must be contiguous, {classes} ids but {present} present")));
    }
    Ok(classes)
}

/// Trains one binary SVM per class.
pub fn svm_train(x: &Matrix, labels: &[usize], config: &SvmConfig) -> Result<LinearModel> {
    if !(config.c > 0.0) {
        return Err(Error::invalid("c", "must be positive"));
    }
    let classes = check_inputs(x, labels)?;
    let kernel = x.gram_rows();
    let models = (0..classes)
        .map(|class| {
            let y: Vec<f64> = labels.iter().map(|l| if *l == class { 1.0 } else { -1.0 }).collect();
            train_binary(x, &kernel, &y, config, class as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearModel { models, c: config.c })
}

const TAU: f64 = 1e-12;

/// Sequential minimal optimization on the dual with an unregularized intercept:
///
/// `min ½ αᵀQα - Σα  s.t.  0 <= α <= C,  yᵀα = 0`,  `Q_ij = y_i y_j x_iᵀx_j`,
///
/// with second-order working-set selection. Candidates are scanned in a seeded
/// random order, which only affects how ties are broken.
pub fn train_binary(x: &Matrix, kernel: &Matrix, y: &[f64], config: &SvmConfig, stream: u64) -> Result<BinaryModel> {
    let n = y.len();
    let c = config.c;
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::substream(config.seed, &[stream]), &mut order);

    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Qα - 1.
    let mut grad = vec![-1.0; n];
    let max_iter = config.epochs.max(1) * n.max(1);
    let mut dual_trace = Vec::new();
    let mut iterations = 0;

    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        // i: maximal violating index in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for &t in &order {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for &t in &order {
            if low(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                if i_sel != usize::MAX {
                    let b = gmax - v;
                    if b > 0.0 {
                        let a = kernel[(i_sel, i_sel)] + kernel[(t, t)] - 2.0 * kernel[(i_sel, t)];
                        let obj = -(b * b) / a.max(TAU);
                        if obj < best {
                            best = obj;
                            j_sel = t;
                        }
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < config.tol {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let a = (kernel[(i, i)] + kernel[(j, j)] - 2.0 * kernel[(i, j)]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / a;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / a;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * di * kernel[(i, t)] + y[j] * dj * kernel[(j, t)]);
        }
        iterations += 1;
        if iterations % n.max(1) == 0 {
            dual_trace.push(dual_objective(&alpha, &grad));
        }
    }
    dual_trace.push(dual_objective(&alpha, &grad));

    let mut weights = vec![0.0; x.cols()];
    for t in 0..n {
        if alpha[t] != 0.0 {
            let s = alpha[t] * y[t];
            for (w, v) in weights.iter_mut().zip(x.row(t)) {
                *w += s * v;
            }
        }
    }
    let bias = intercept(&alpha, &grad, y, c);
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("SVM solution is not finite".into()));
    }
    let mut model = BinaryModel { weights, bias, iterations, objective: 0.0, dual_trace };
    model.objective = primal_objective(&model, x, y, c);
    Ok(model)
}

/// `½ αᵀQα - Σα` from the maintained gradient `G = Qα - 1`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

fn intercept(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    -rho
}

pub fn primal_objective(model: &BinaryModel, x: &Matrix, y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * dot(&model.weights, &model.weights);
    let loss: f64 = (0..y.len()).map(|t| (1.0 - y[t] * model.score(x.row(t))).max(0.0)).sum();
    reg + c * loss
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize, sep: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng::stream(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2 {
            let cx = if class == 0 { -sep } else { sep };
            for _ in 0..n_per {
                rows.push(vec![cx + 0.3 * rng::normal(&mut r), 0.3 * rng::normal(&mut r)]);
                labels.push(class);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let (x, labels) = blobs(40, 3.0, 1);
        let m = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        for (i, l) in labels.iter().enumerate() {
            let s0 = m.models[0].score(x.row(i));
            let s1 = m.models[1].score(x.row(i));
            assert_eq!(if s0 >= s1 { 0 } else { 1 }, *l);
        }
    }

    #[test]
    fn objective_beats_zero_vector_and_dual_is_monotone() {
        let (x, labels) = blobs(50, 0.3, 2);
        let cfg = SvmConfig { c: 10.0, ..SvmConfig::default() };
        let m = svm_train(&x, &labels, &cfg).unwrap();
        for model in &m.models {
            assert!(model.objective <= cfg.c * x.rows() as f64);
            for w in model.dual_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = Matrix::zeros(3, 2);
        assert!(svm_train(&x, &[0, 0, 0], &SvmConfig::default()).is_err());
        assert!(svm_train(&x, &[0, 1], &SvmConfig::default()).is_err());
        let mut bad = Matrix::zeros(2, 1);
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(svm_train(&bad, &[0, 1], &SvmConfig::default()), Err(Error::NonFinite(_))));
    }
}
