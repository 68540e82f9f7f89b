//! Two-parameter stability maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ConfigTree, RunConfig, SweepConfig};
use crate::lambda::estimate_lambda_p;
use crate::rng::mix64;
use crate::solver::classify_stability;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub param_a: f64,
    pub param_b: f64,
    pub lambda_p: f64,
    pub rho_hat: f64,
    pub std_error: f64,
    /// `stable`, `unstable`, `inconclusive` or `error:<code>`.
    pub status: String,
}

/// Seed for cell `(row, col)`; depends on nothing but the indices. The hash
/// is offset so cell `(0, 0)` keeps the global seed, which makes a 1x1 sweep
/// identical to a plain run.
pub fn cell_seed(seed: u64, row: usize, col: usize) -> u64 {
    seed ^ mix64(((row as u64) << 32) | col as u64) ^ mix64(0)
}

fn run_cell(tree: &ConfigTree, sweep: &SweepConfig, row: usize, col: usize, a: f64, b: f64) -> SweepCell {
    let failed = |code: &str| SweepCell {
        param_a: a,
        param_b: b,
        lambda_p: f64::NAN,
        rho_hat: f64::NAN,
        std_error: f64::NAN,
        status: format!("error:{code}"),
    };
    let mut tree = tree.clone();
    let cfg = match tree
        .set_parameter(&sweep.a.name, a)
        .and_then(|_| tree.set_parameter(&sweep.b.name, b))
        .and_then(|_| tree.validated())
    {
        Ok(cfg) => cfg,
        Err(ConfigError::Invalid { source, .. }) => return failed(source.code()),
        Err(_) => return failed("domain"),
    };
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(_) => return failed("domain"),
    };
    let mut settings = cfg.estimation;
    if !sweep.common_random_numbers {
        settings.seed = cell_seed(settings.seed, row, col);
    }
    let outcome = estimate_lambda_p(&model, &cfg.preferences, &settings)
        .and_then(|est| Ok((est, classify_stability(&est, sweep.band)?)));
    match outcome {
        Ok((est, stability)) => SweepCell {
            param_a: a,
            param_b: b,
            lambda_p: est.lambda_p,
            rho_hat: est.rho_hat,
            std_error: est.lambda_std_error,
            status: stability.as_str().to_string(),
        },
        Err(e) => failed(e.code()),
    }
}

/// Evaluates `Lambda_p` on every `(a, b)` cell, row-major in `a`.
///
/// Cell failures become `error:<code>` rows; only an invalid base
/// configuration aborts the sweep.
pub fn sweep_stability_map(tree: &ConfigTree) -> Result<Vec<SweepCell>, ConfigError> {
    let cfg: RunConfig = tree.validated()?;
    let sweep = cfg.sweep.clone().ok_or_else(|| ConfigError::Invalid {
        section: "sweep",
        source: crate::Error::Domain("no [sweep] section".into()),
    })?;
    let a_values = sweep.a.values();
    let b_values = sweep.b.values();
    let cells: Vec<(usize, usize)> = (0..a_values.len())
        .flat_map(|r| (0..b_values.len()).map(move |c| (r, c)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(r, c)| run_cell(tree, &sweep, r, c, a_values[r], b_values[c]))
        .collect())
}
