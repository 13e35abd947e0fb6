//! L1-penalised logistic regression by cyclic coordinate descent.
//!
//! Features are standardised internally; the intercept is never penalised.
//! Each coordinate takes a proximal Newton step on the exact one-dimensional
//! objective and backtracks until that objective does not increase, so the
//! full objective is non-increasing from sweep to sweep.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::LinModelError;
use crate::exec::Execution;

#[derive(Clone, Debug, PartialEq)]
pub struct LassoOptions {
    /// Stop once no coordinate moves more than this within a sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Largest acceptable subgradient-optimality violation at convergence.
    pub kkt_tolerance: f64,
    /// Starting point on the standardised scale, intercept first.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_sweeps: 10_000,
            kkt_tolerance: 1e-6,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, on the original feature scale.
    pub weights: Vec<f64>,
    /// Intercept first, on the standardised scale the penalty acts on.
    pub standardized_weights: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Penalised objective after initialisation and after every sweep.
    pub objective_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn predict_proba(&self, features: &DMatrix<f64>) -> Vec<f64> {
        (0..features.nrows())
            .map(|i| {
                let eta = self.weights[0]
                    + (0..features.ncols())
                        .map(|j| features[(i, j)] * self.weights[j + 1])
                        .sum::<f64>();
                sigmoid(eta)
            })
            .collect()
    }

    /// Σ|w_j| over non-intercept weights, standardised scale.
    pub fn l1_norm(&self) -> f64 {
        self.standardized_weights[1..].iter().map(|w| w.abs()).sum()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta)) - y * eta`, computed without overflow.
fn logistic_loss(eta: f64, y: f64) -> f64 {
    let softplus = if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    };
    softplus - y * eta
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct Standardized {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

fn standardize(features: &DMatrix<f64>) -> Standardized {
    let (n, p) = features.shape();
    let mut cols = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = features.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        // Constant columns carry no information; they stay at weight zero.
        let scaled = if sd > 0.0 {
            col.iter().map(|v| (v - mean) / sd).collect()
        } else {
            vec![0.0; n]
        };
        cols.push(scaled);
        means.push(mean);
        sds.push(sd);
    }
    Standardized { cols, means, sds }
}

fn check_inputs(features: &DMatrix<f64>, labels: &[bool], lambda: f64) -> Result<(), LinModelError> {
    if features.nrows() != labels.len() {
        return Err(LinModelError::Length(format!(
            "{} feature rows, {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(LinModelError::Length("no observations".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LinModelError::Domain(format!("lambda = {lambda} must be finite and >= 0")));
    }
    Ok(())
}

/// Smallest penalty at which every non-intercept weight is exactly zero.
pub fn lambda_max(features: &DMatrix<f64>, labels: &[bool]) -> f64 {
    let st = standardize(features);
    let n = labels.len() as f64;
    let ybar = labels.iter().filter(|&&l| l).count() as f64 / n;
    st.cols
        .iter()
        .map(|c| {
            (c.iter()
                .zip(labels)
                .map(|(x, &l)| x * (l as u8 as f64 - ybar))
                .sum::<f64>()
                / n)
                .abs()
        })
        .fold(0.0, f64::max)
}

pub fn lasso_logistic_fit(features: &DMatrix<f64>, labels: &[bool], lambda: f64) -> Result<LogisticFit, LinModelError> {
    lasso_logistic_fit_with(features, labels, lambda, &LassoOptions::default())
}

pub fn lasso_logistic_fit_with(
    features: &DMatrix<f64>,
    labels: &[bool],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LogisticFit, LinModelError> {
    check_inputs(features, labels, lambda)?;
    let n = labels.len();
    let nf = n as f64;
    let p = features.ncols();
    let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
    let st = standardize(features);

    let mut w = match &opts.warm_start {
        Some(ws) if ws.len() == p + 1 => ws.clone(),
        _ => {
            let ybar = y.iter().sum::<f64>() / nf;
            let b0 = if ybar > 0.0 && ybar < 1.0 { (ybar / (1.0 - ybar)).ln() } else { 0.0 };
            let mut v = vec![0.0; p + 1];
            v[0] = b0;
            v
        }
    };
    for j in 0..p {
        if st.sds[j] == 0.0 {
            w[j + 1] = 0.0;
        }
    }
    let mut eta: Vec<f64> = (0..n)
        .map(|i| w[0] + (0..p).map(|j| st.cols[j][i] * w[j + 1]).sum::<f64>())
        .collect();

    let loss = |eta: &[f64]| eta.iter().zip(&y).map(|(&e, &yy)| logistic_loss(e, yy)).sum::<f64>() / nf;
    let penalty = |w: &[f64]| lambda * w[1..].iter().map(|v| v.abs()).sum::<f64>();
    let mut objective = loss(&eta) + penalty(&w);
    let mut trace = vec![objective];

    let mut converged = false;
    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    let ones = vec![1.0; n];

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for k in 0..=p {
            if k > 0 && st.sds[k - 1] == 0.0 {
                continue;
            }
            let col: &[f64] = if k == 0 { &ones } else { &st.cols[k - 1] };
            let pen = if k == 0 { 0.0 } else { lambda };
            let (mut g, mut h) = (0.0, 0.0);
            for i in 0..n {
                let pi = sigmoid(eta[i]);
                g += (pi - y[i]) * col[i];
                h += pi * (1.0 - pi) * col[i] * col[i];
            }
            g /= nf;
            h = (h / nf).max(1e-12);
            let old = w[k];
            let target = soft_threshold(old - g / h, pen / h);
            if target == old {
                continue;
            }
            // 1-D objective along this coordinate, relative to the current point.
            let line = |cand: f64, eta: &[f64]| -> f64 {
                let d = cand - old;
                eta.iter()
                    .zip(&y)
                    .zip(col)
                    .map(|((&e, &yy), &c)| logistic_loss(e + d * c, yy))
                    .sum::<f64>()
                    / nf
                    + pen * cand.abs()
            };
            let current = line(old, &eta);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = old + step * (target - old);
                if line(cand, &eta) <= current {
                    accepted = Some(cand);
                    break;
                }
                step *= 0.5;
            }
            let Some(new) = accepted else { continue };
            let d = new - old;
            if d == 0.0 {
                continue;
            }
            for i in 0..n {
                eta[i] += d * col[i];
            }
            w[k] = new;
            max_change = max_change.max(d.abs());
        }
        objective = loss(&eta) + penalty(&w);
        trace.push(objective);
        kkt = kkt_residual(&st, &y, &eta, &w, lambda);
        if max_change <= opts.tolerance && kkt <= opts.kkt_tolerance {
            converged = true;
            break;
        }
    }

    let mut weights = vec![0.0; p + 1];
    weights[0] = w[0];
    for j in 0..p {
        if st.sds[j] > 0.0 {
            weights[j + 1] = w[j + 1] / st.sds[j];
            weights[0] -= w[j + 1] * st.means[j] / st.sds[j];
        }
    }
    Ok(LogisticFit {
        weights,
        standardized_weights: w,
        lambda,
        converged,
        iterations: sweeps,
        kkt_residual: kkt,
        objective_trace: trace,
    })
}

fn kkt_residual(st: &Standardized, y: &[f64], eta: &[f64], w: &[f64], lambda: f64) -> f64 {
    let nf = y.len() as f64;
    let resid: Vec<f64> = eta.iter().zip(y).map(|(&e, &yy)| sigmoid(e) - yy).collect();
    let mut worst = (resid.iter().sum::<f64>() / nf).abs();
    for (j, col) in st.cols.iter().enumerate() {
        if st.sds[j] == 0.0 {
            continue;
        }
        let g = col.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>() / nf;
        let wj = w[j + 1];
        let v = if wj != 0.0 {
            (g + lambda * wj.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvFit {
    pub lambdas: Vec<f64>,
    /// Mean held-out deviance per penalty.
    pub cv_deviance: Vec<f64>,
    pub best_lambda: f64,
    /// Refit on all rows at `best_lambda`.
    pub fit: LogisticFit,
}

const PATH_RATIO: f64 = 1e-3;

/// Chooses the penalty from a logarithmic path by k-fold cross-validated
/// deviance. Fold membership is a seeded shuffle; folds are independent and
/// may run in parallel without changing the result.
pub fn lasso_logistic_cv(
    features: &DMatrix<f64>,
    labels: &[bool],
    folds: usize,
    path_len: usize,
    seed: u64,
    exec: Execution,
) -> Result<CvFit, LinModelError> {
    check_inputs(features, labels, 0.0)?;
    let has_pos = labels.iter().any(|&l| l);
    let has_neg = labels.iter().any(|&l| !l);
    if !(has_pos && has_neg) {
        return Err(LinModelError::SingleClass);
    }
    let n = labels.len();
    let folds = folds.clamp(2, n);
    let path_len = path_len.max(1);
    let lmax = lambda_max(features, labels);
    let lambdas: Vec<f64> = if path_len == 1 || lmax == 0.0 {
        vec![lmax]
    } else {
        (0..path_len)
            .map(|k| lmax * PATH_RATIO.powf(k as f64 / (path_len - 1) as f64))
            .collect()
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let per_fold: Vec<Result<Vec<f64>, LinModelError>> = exec.map(folds, |f| {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = features.select_rows(train.iter());
        let yt: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let xv = features.select_rows(test.iter());
        let mut opts = LassoOptions::default();
        let mut out = Vec::with_capacity(lambdas.len());
        for &lam in &lambdas {
            let fit = lasso_logistic_fit_with(&xt, &yt, lam, &opts)?;
            let probs = fit.predict_proba(&xv);
            let dev = test
                .iter()
                .zip(&probs)
                .map(|(&i, &p)| {
                    let p = p.clamp(1e-15, 1.0 - 1e-15);
                    if labels[i] {
                        -2.0 * p.ln()
                    } else {
                        -2.0 * (1.0 - p).ln()
                    }
                })
                .sum::<f64>()
                / test.len().max(1) as f64;
            out.push(dev);
            opts.warm_start = Some(fit.standardized_weights);
        }
        Ok(out)
    });
    let mut cv_deviance = vec![0.0; lambdas.len()];
    for fold in per_fold {
        for (acc, d) in cv_deviance.iter_mut().zip(fold?) {
            *acc += d / folds as f64;
        }
    }
    // Ties resolve toward the larger penalty (earlier on the path).
    let best = cv_deviance
        .iter()
        .enumerate()
        .fold(0, |bi, (i, &d)| if d < cv_deviance[bi] { i } else { bi });
    let best_lambda = lambdas[best];
    let fit = lasso_logistic_fit(features, labels, best_lambda)?;
    Ok(CvFit {
        lambdas,
        cv_deviance,
        best_lambda,
        fit,
    })
}
