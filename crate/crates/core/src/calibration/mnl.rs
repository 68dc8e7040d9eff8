//! Linear-in-parameters multinomial logit likelihood and its maximization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::calibration::dataset::ChoiceDataset;
use crate::error::{Error, Result};
use crate::parallel::Workers;

/// Log-likelihood with first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEval {
    pub loglik: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Neumaier compensated sum, so that tiny likelihood gains near the optimum stay visible.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// One set's contribution: every observation of the set shares the probabilities.
fn set_contribution(
    data: &ChoiceDataset,
    set: usize,
    beta: &[f64],
    scale: &[f64],
    with_hessian: bool,
) -> (CompensatedSum, Vec<f64>, Vec<f64>) {
    let k = beta.len();
    let s = &data.sets()[set];
    let counts = data.chosen_counts(set);
    let n: f64 = counts.iter().sum();
    let mut ll = CompensatedSum::default();
    let mut grad = vec![0.0; k];
    let mut hess = if with_hessian {
        vec![0.0; k * k]
    } else {
        Vec::new()
    };
    if n == 0.0 {
        return (ll, grad, hess);
    }
    let x = |a: usize, j: usize| s.covariates[a * k + j] / scale[j];
    let v: Vec<f64> = (0..s.len())
        .map(|a| (0..k).map(|j| beta[j] * x(a, j)).sum())
        .collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = v.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; k];
    for (a, w) in weights.iter().enumerate() {
        let p = w / total;
        for (j, m) in mean.iter_mut().enumerate() {
            *m += p * x(a, j);
        }
    }
    for (a, &c) in counts.iter().enumerate() {
        if c > 0.0 {
            ll.add(c * v[a]);
            for (j, g) in grad.iter_mut().enumerate() {
                *g += c * x(a, j);
            }
        }
    }
    ll.add(-n * max);
    ll.add(-n * total.ln());
    for (g, m) in grad.iter_mut().zip(&mean) {
        *g -= n * m;
    }
    if with_hessian {
        for (a, w) in weights.iter().enumerate() {
            let p = w / total;
            for i in 0..k {
                let di = x(a, i) - mean[i];
                for j in 0..=i {
                    hess[i * k + j] -= n * p * di * (x(a, j) - mean[j]);
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                hess[j * k + i] = hess[i * k + j];
            }
        }
    }
    (ll, grad, hess)
}

/// `LL(beta + delta) − LL(beta)`, computed from utility differences so that gains far below
/// the resolution of the log-likelihood itself keep their sign and size.
fn loglik_gain(
    data: &ChoiceDataset,
    beta: &[f64],
    delta: &[f64],
    scale: &[f64],
    workers: &Workers,
) -> f64 {
    let k = beta.len();
    let sets: Vec<usize> = (0..data.sets().len()).collect();
    let parts = workers.map(&sets, |&set| {
        let s = &data.sets()[set];
        let counts = data.chosen_counts(set);
        let n: f64 = counts.iter().sum();
        let mut gain = CompensatedSum::default();
        if n == 0.0 {
            return gain;
        }
        let x = |a: usize, j: usize| s.covariates[a * k + j] / scale[j];
        let v: Vec<f64> = (0..s.len())
            .map(|a| (0..k).map(|j| beta[j] * x(a, j)).sum())
            .collect();
        let dv: Vec<f64> = (0..s.len())
            .map(|a| (0..k).map(|j| delta[j] * x(a, j)).sum())
            .collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = v.iter().map(|u| (u - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut shift = CompensatedSum::default();
        for (w, d) in weights.iter().zip(&dv) {
            shift.add(w / total * d.exp_m1());
        }
        for (&c, d) in counts.iter().zip(&dv) {
            if c > 0.0 {
                gain.add(c * d);
            }
        }
        gain.add(-n * shift.value().ln_1p());
        gain
    });
    let mut total = CompensatedSum::default();
    for p in parts {
        total.add(p.sum);
        total.add(p.compensation);
    }
    total.value()
}

/// Sums set contributions in set order, whatever the number of threads.
fn evaluate_scaled(
    data: &ChoiceDataset,
    beta: &[f64],
    scale: &[f64],
    with_hessian: bool,
    workers: &Workers,
) -> LikelihoodEval {
    let k = beta.len();
    let sets: Vec<usize> = (0..data.sets().len()).collect();
    let parts = workers.map(&sets, |&s| {
        set_contribution(data, s, beta, scale, with_hessian)
    });
    let mut loglik = CompensatedSum::default();
    let mut gradient = DVector::zeros(k);
    let mut hessian = DMatrix::zeros(k, k);
    for (ll, g, h) in parts {
        loglik.add(ll.sum);
        loglik.add(ll.compensation);
        for j in 0..k {
            gradient[j] += g[j];
        }
        if with_hessian {
            for i in 0..k {
                for j in 0..k {
                    hessian[(i, j)] += h[i * k + j];
                }
            }
        }
    }
    LikelihoodEval {
        loglik: loglik.value(),
        gradient,
        hessian,
    }
}

fn check_width(data: &ChoiceDataset, beta: &[f64]) -> Result<()> {
    if beta.len() != data.width() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients given for {} covariates",
            beta.len(),
            data.width()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidInput("coefficients must be finite".into()));
    }
    Ok(())
}

/// `LL = Σ (v_chosen − logsum(v))` and its gradient `Σ (x_chosen − E_p[x])`, where
/// coefficient `j` multiplies covariate column `j`.
pub fn mnl_loglik_and_gradient(data: &ChoiceDataset, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_width(data, beta)?;
    let ones = vec![1.0; beta.len()];
    let e = evaluate_scaled(data, beta, &ones, false, &Workers::new(1)?);
    Ok((e.loglik, e.gradient.iter().copied().collect()))
}

/// Log-likelihood, gradient, and Hessian (negative covariance of covariates under the model).
pub fn mnl_evaluate(data: &ChoiceDataset, beta: &[f64]) -> Result<LikelihoodEval> {
    check_width(data, beta)?;
    let ones = vec![1.0; beta.len()];
    Ok(evaluate_scaled(data, beta, &ones, true, &Workers::new(1)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this, with each coefficient measured in units of
    /// its starting-point information (`x_j / sqrt(I_jj)`).
    pub gradient_tolerance: f64,
    pub workers: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// No ascent step could be found before the gradient tolerance was met.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MnlFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Inverse observed information at the optimum.
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub observations: usize,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub status: FitStatus,
    /// Log-likelihood after each accepted step, starting with the initial value; later entries
    /// accumulate the exactly computed per-step gains.
    pub loglik_trace: Vec<f64>,
}

impl MnlFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.standard_errors[i]))
    }
}

/// Relative eigenvalue floor below which the information matrix counts as singular.
const SINGULAR_RATIO: f64 = 1e-10;
/// Eigenvector weight above which a coefficient is named in an identification failure.
const NULL_WEIGHT: f64 = 0.1;

fn unidentified(names: &[String], information: &DMatrix<f64>) -> Option<Vec<String>> {
    let eig = SymmetricEigen::new(information.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut flagged = vec![false; names.len()];
    let mut any = false;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if max <= 0.0 || lambda <= SINGULAR_RATIO * max {
            any = true;
            for (j, f) in flagged.iter_mut().enumerate() {
                if eig.eigenvectors[(j, i)].abs() > NULL_WEIGHT {
                    *f = true;
                }
            }
        }
    }
    any.then(|| {
        names
            .iter()
            .zip(flagged)
            .filter(|(_, f)| *f)
            .map(|(n, _)| n.clone())
            .collect()
    })
}

/// Maximizes the log-likelihood by Newton-direction ascent with Armijo backtracking,
/// falling back to the gradient when the Hessian is not negative definite.
///
/// Covariates are divided by the square root of their information at the start internally. Singular information at the
/// start or at the optimum is an [`Error::Unidentifiable`] naming the affected coefficients.
pub fn fit_mnl(
    data: &ChoiceDataset,
    start: Option<&[f64]>,
    options: &FitOptions,
) -> Result<MnlFit> {
    let k = data.width();
    let beta0: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => vec![0.0; k],
    };
    check_width(data, &beta0)?;
    let names = data.covariate_names().to_vec();
    let workers = Workers::new(options.workers)?;
    let ones = vec![1.0; k];
    let unscaled = evaluate_scaled(data, &beta0, &ones, true, &workers);
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let info = -unscaled.hessian[(j, j)];
            if info > 0.0 {
                info.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut beta: Vec<f64> = beta0.iter().zip(&scale).map(|(b, s)| b * s).collect();
    let mut current = evaluate_scaled(data, &beta, &scale, true, &workers);
    if let Some(coefficients) = unidentified(&names, &(-&current.hessian)) {
        return Err(Error::Unidentifiable { coefficients });
    }
    let initial_loglik = current.loglik;
    let mut path = CompensatedSum::default();
    path.add(current.loglik);
    let mut trace = vec![current.loglik];
    let mut iterations = 0;
    let status = loop {
        if current.gradient.norm() < options.gradient_tolerance {
            break FitStatus::Converged;
        }
        if iterations >= options.max_iterations {
            break FitStatus::MaxIterations;
        }
        iterations += 1;
        let g = &current.gradient;
        let direction = match (-&current.hessian).cholesky() {
            Some(chol) => chol.solve(g),
            None => g.clone(),
        };
        let slope = g.dot(&direction);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let delta: Vec<f64> = direction.iter().map(|d| step * d).collect();
            let gain = loglik_gain(data, &beta, &delta, &scale, &workers);
            if gain.is_finite() && gain >= 0.0 && gain >= 1e-4 * step * slope {
                accepted = Some((delta, gain));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((delta, gain)) => {
                for (b, d) in beta.iter_mut().zip(&delta) {
                    *b += d;
                }
                current = evaluate_scaled(data, &beta, &scale, true, &workers);
                path.add(gain);
                trace.push(path.value());
            }
            None => break FitStatus::Stalled,
        }
    };
    let information = -&current.hessian;
    if let Some(coefficients) = unidentified(&names, &information) {
        return Err(Error::Unidentifiable { coefficients });
    }
    let inverse = information
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| information.clone().try_inverse())
        .ok_or_else(|| Error::Unidentifiable {
            coefficients: names.clone(),
        })?;
    let covariance = DMatrix::from_fn(k, k, |i, j| inverse[(i, j)] / (scale[i] * scale[j]));
    let standard_errors = (0..k).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    Ok(MnlFit {
        names,
        coefficients: beta.iter().zip(&scale).map(|(b, s)| b / s).collect(),
        standard_errors,
        covariance,
        loglik: current.loglik,
        initial_loglik,
        observations: data.len(),
        iterations,
        gradient_norm: current.gradient.norm(),
        status,
        loglik_trace: trace,
    })
}
