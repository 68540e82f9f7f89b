//! Monte Carlo estimation of the stability coefficient `Lambda_p`.
//!
//! For initial states `x_1..x_m` the inner expectation
//! `h(x) = E_x (C_n / C_0)^(1 - gamma)` is estimated from `J` simulated paths,
//! then `rho_hat = (mean_i h(x_i)^p)^(1 / (n p))` and
//! `Lambda_p = beta * rho_hat^(1 / theta)`. Everything is accumulated in logs,
//! so heavy-tailed path weights cannot overflow.
//!
//! Path `(i, j)` draws from `RngStream(seed, i * J + j)` and initial state `i`
//! from its own reserved stream, so results do not depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, StatePoint};
use crate::prefs::PreferenceSpec;
use crate::rng::RngStream;

/// Magnitude of `(1 - gamma) * ln(C_n / C_0)` beyond which a plain
/// `exp` would be at risk of overflowing.
pub const LOG_WEIGHT_GUARD: f64 = 500.0;

const BATCHES: usize = 10;

/// Law of the initial states `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitLaw {
    #[default]
    Stationary,
    /// Uniform draw of the level coordinate, other coordinates stationary.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub p: f64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "J", alias = "j")]
    pub j: usize,
    pub seed: u64,
    pub init_law: InitLaw,
    /// Average `h` rather than `h^p` before taking the `1/(n p)` root.
    pub literal_formula: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            p: 2.0,
            n: 1000,
            m: 1000,
            j: 1000,
            seed: 0,
            init_law: InitLaw::Stationary,
            literal_formula: false,
        }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::domain(format!("p must be >= 1, got {}", self.p)));
        }
        if self.n == 0 || self.m == 0 || self.j == 0 {
            return Err(Error::domain("n, m and J must all be at least 1"));
        }
        if let InitLaw::Uniform { lo, hi } = self.init_law {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!(
                    "uniform init law needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Estimate of `h(x)`, held in logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HEstimate {
    pub log_h: f64,
    /// Standard error of the sample mean divided by the mean.
    pub rel_std_error: f64,
    /// Some path weight exceeded the plain-`exp` range.
    pub overflow_guarded: bool,
}

impl HEstimate {
    pub fn value(&self) -> f64 {
        self.log_h.exp()
    }

    pub fn std_error(&self) -> f64 {
        self.value() * self.rel_std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda_p: f64,
    pub rho_hat: f64,
    pub p: f64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "J")]
    pub j: usize,
    /// Batch-means standard error of `rho_hat`.
    pub std_error: f64,
    /// Batch-means standard error of `lambda_p`.
    pub lambda_std_error: f64,
    /// `rho_hat` recomputed from the first `n / 2` steps of the same paths.
    pub rho_hat_half: f64,
    pub seed: u64,
}

/// `ln(mean(exp(xs)))` without overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + (sum / xs.len() as f64).ln()
}

fn initial_state(model: &ModelSpec, law: InitLaw, seed: u64, index: u64) -> StatePoint {
    let mut rng = RngStream::for_initial_state(seed, index).generator();
    match law {
        InitLaw::Stationary => model.sample_stationary(&mut rng),
        InitLaw::Uniform { lo, hi } => model.sample_uniform_level(lo, hi, &mut rng),
    }
}

/// `(1 - gamma) * ln(C_n / C_0)` and the same at step `mid`, for `count`
/// paths on consecutive streams.
#[allow(clippy::too_many_arguments)]
fn path_log_weights(
    model: &ModelSpec,
    prefs: &PreferenceSpec,
    x: &StatePoint,
    n: usize,
    mid: usize,
    count: usize,
    seed: u64,
    first_stream: u64,
) -> Vec<(f64, f64)> {
    let a = prefs.one_minus_gamma();
    (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::new(seed, first_stream + j).generator();
            let (g, g_mid, _) = model.simulate_growth_with_midpoint(x, n, mid, &mut rng);
            (a * g, a * g_mid)
        })
        .collect()
}

fn summarize_h(logs: &[f64]) -> HEstimate {
    let log_h = log_mean_exp(logs);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let k = scaled.len() as f64;
    let mean = scaled.iter().sum::<f64>() / k;
    let rel_std_error = if scaled.len() > 1 {
        let var = scaled.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt() / mean
    } else {
        0.0
    };
    HEstimate {
        log_h,
        rel_std_error,
        overflow_guarded: logs.iter().any(|l| l.abs() > LOG_WEIGHT_GUARD),
    }
}

/// Estimates `h(x) = E_x (C_n / C_0)^(1 - gamma)` from `j` paths drawn on
/// streams `first_stream..first_stream + j`.
pub fn estimate_h(
    model: &ModelSpec,
    prefs: &PreferenceSpec,
    x: &StatePoint,
    n: usize,
    j: usize,
    seed: u64,
    first_stream: u64,
) -> Result<HEstimate> {
    if n == 0 || j == 0 {
        return Err(Error::domain("n and J must be at least 1"));
    }
    model.check_state(x)?;
    let logs: Vec<f64> = path_log_weights(model, prefs, x, n, n, j, seed, first_stream)
        .into_iter()
        .map(|(l, _)| l)
        .collect();
    let h = summarize_h(&logs);
    if !h.log_h.is_finite() {
        return Err(Error::Overflow(format!("log h(x) is {}", h.log_h)));
    }
    Ok(h)
}

/// `rho_hat` from per-state `log h` values.
fn rho_from_log_h(log_h: &[f64], n: usize, p: f64, literal: bool) -> f64 {
    let scaled: Vec<f64> = if literal {
        log_h.to_vec()
    } else {
        log_h.iter().map(|l| p * l).collect()
    };
    (log_mean_exp(&scaled) / (n as f64 * p)).exp()
}

fn batch_std_errors(log_h: &[f64], n: usize, p: f64, literal: bool, prefs: &PreferenceSpec) -> (f64, f64) {
    let m = log_h.len();
    let batches = BATCHES.min(m);
    if batches < 2 {
        return (0.0, 0.0);
    }
    let (rhos, lambdas): (Vec<f64>, Vec<f64>) = (0..batches)
        .map(|b| {
            let chunk = &log_h[b * m / batches..(b + 1) * m / batches];
            let rho = rho_from_log_h(chunk, n, p, literal);
            (rho, prefs.stability_coefficient(rho))
        })
        .unzip();
    (std_error_of_mean(&rhos), std_error_of_mean(&lambdas))
}

fn std_error_of_mean(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

fn finish(
    prefs: &PreferenceSpec,
    settings: &McSettings,
    log_h: &[f64],
    log_h_half: &[f64],
    n_half: usize,
    p: f64,
    literal: bool,
) -> Result<LambdaEstimate> {
    let rho_hat = rho_from_log_h(log_h, settings.n, p, literal);
    if !(rho_hat.is_finite() && rho_hat > 0.0) {
        return Err(Error::Overflow(format!("rho_hat evaluated to {rho_hat}")));
    }
    let rho_hat_half = rho_from_log_h(log_h_half, n_half, p, literal);
    let (std_error, lambda_std_error) = batch_std_errors(log_h, settings.n, p, literal, prefs);
    let lambda_p = prefs.stability_coefficient(rho_hat);
    if !(lambda_p.is_finite() && lambda_p > 0.0) {
        return Err(Error::Overflow(format!("lambda_p evaluated to {lambda_p}")));
    }
    Ok(LambdaEstimate {
        lambda_p,
        rho_hat,
        p,
        n: settings.n,
        m: log_h.len(),
        j: settings.j,
        std_error,
        lambda_std_error,
        rho_hat_half,
        seed: settings.seed,
    })
}

/// Nested estimator of `Lambda_p`.
pub fn estimate_lambda_p(model: &ModelSpec, prefs: &PreferenceSpec, settings: &McSettings) -> Result<LambdaEstimate> {
    settings.validate()?;
    model.validate()?;
    let McSettings { n, m, j, seed, .. } = *settings;
    let n_half = (n / 2).max(1);

    let per_state: Vec<(f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let x = initial_state(model, settings.init_law, seed, i);
            let weights = path_log_weights(model, prefs, &x, n, n_half, j, seed, i * j as u64);
            let (full, half): (Vec<f64>, Vec<f64>) = weights.into_iter().unzip();
            (log_mean_exp(&full), log_mean_exp(&half))
        })
        .collect();
    let (log_h, log_h_half): (Vec<f64>, Vec<f64>) = per_state.into_iter().unzip();
    if log_h.iter().any(|l| !l.is_finite()) {
        return Err(Error::Overflow("a path weight left the finite range".into()));
    }
    finish(
        prefs,
        settings,
        &log_h,
        &log_h_half,
        n_half,
        settings.p,
        settings.literal_formula,
    )
}

/// Unnested `p = 1` estimator: one path per stationary initial state,
/// `rho_hat = (mean_i (C_n / C_0)_i^(1 - gamma))^(1/n)`.
///
/// Uses the same stream layout as [`estimate_lambda_p`] with `J = 1`.
pub fn estimate_lambda_1_direct(
    model: &ModelSpec,
    prefs: &PreferenceSpec,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<LambdaEstimate> {
    let settings = McSettings {
        p: 1.0,
        n,
        m,
        j: 1,
        seed,
        init_law: InitLaw::Stationary,
        literal_formula: false,
    };
    settings.validate()?;
    model.validate()?;
    let n_half = (n / 2).max(1);
    let a = prefs.one_minus_gamma();
    let paths: Vec<(f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let x = initial_state(model, InitLaw::Stationary, seed, i);
            let mut rng = RngStream::new(seed, i).generator();
            let (g, g_mid, _) = model.simulate_growth_with_midpoint(&x, n, n_half, &mut rng);
            (a * g, a * g_mid)
        })
        .collect();
    let (logs, logs_half): (Vec<f64>, Vec<f64>) = paths.into_iter().unzip();
    if logs.iter().any(|l| !l.is_finite()) {
        return Err(Error::Overflow("a path weight left the finite range".into()));
    }
    finish(prefs, &settings, &logs, &logs_half, n_half, 1.0, false)
}
