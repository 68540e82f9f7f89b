//! The linear valuation operator `K` on a quadrature grid.
//!
//! `(K g)(x_i) = sum_j w_j k(x_i, y_j) g(y_j)` where `k(x, y)` is the shock
//! integral of `exp((1 - gamma) kappa)` times the transition density. The
//! spectral radius of `K` drives the stability coefficient
//! `beta * rho(K)^(1/theta)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ModelSpec, StatePoint};
use crate::prefs::PreferenceSpec;
use crate::rng::RngStream;

/// Largest node count for which the kernel matrix is stored.
pub const DENSE_NODE_LIMIT: usize = 5_000;

const OCCUPATION_SEED: u64 = 0x5EED_0CC0_u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorOptions {
    /// Rescale each row so the discretized transition law has unit mass.
    pub normalize_rows: bool,
    /// Simulated steps for the occupation-measure estimate of `pi` when the
    /// model has no closed-form stationary density.
    pub occupation_steps: usize,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            normalize_rows: false,
            occupation_steps: 1_000_000,
        }
    }
}

/// Discretized `K`. Immutable once built; safe to share between threads.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    model: ModelSpec,
    prefs: PreferenceSpec,
    grid: Grid,
    nodes: Vec<StatePoint>,
    weights: Vec<f64>,
    row_scale: Vec<f64>,
    dense: Option<Vec<f64>>,
    stationary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub rho: f64,
    /// Eigenfunction on the grid nodes, sup-norm 1.
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    /// `sup |K e - rho e| / rho`.
    pub residual: f64,
}

impl DiscreteOperator {
    pub fn new(model: &ModelSpec, prefs: &PreferenceSpec, grid: Grid, options: OperatorOptions) -> Result<Self> {
        model.validate()?;
        if grid.dim() != model.dim() {
            return Err(Error::domain(format!(
                "grid dimension {} does not match model dimension {}",
                grid.dim(),
                model.dim()
            )));
        }
        if grid.is_discrete() != model.is_finite_chain() {
            return Err(Error::domain("finite chains need a discrete grid and vice versa"));
        }
        let nodes = grid.nodes();
        let weights = grid.weights();
        let n = nodes.len();

        let row_scale = if options.normalize_rows && !grid.is_discrete() {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mass: f64 = (0..n)
                        .map(|j| weights[j] * model.transition_density_unchecked(&nodes[i], &nodes[j]))
                        .sum();
                    if mass > 0.0 {
                        1.0 / mass
                    } else {
                        1.0
                    }
                })
                .collect()
        } else {
            vec![1.0; n]
        };

        let dense = (n <= DENSE_NODE_LIMIT).then(|| {
            let mut m = vec![0.0; n * n];
            m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, entry) in row.iter_mut().enumerate() {
                    *entry = row_scale[i] * weights[j] * model.kernel_value(prefs, &nodes[i], &nodes[j]);
                }
            });
            m
        });

        let stationary = stationary_weights(model, &grid, &nodes, &weights, options.occupation_steps)?;

        Ok(Self {
            model: model.clone(),
            prefs: *prefs,
            grid,
            nodes,
            weights,
            row_scale,
            dense,
            stationary,
        })
    }

    /// Operator on the model's default grid.
    pub fn build(model: &ModelSpec, prefs: &PreferenceSpec, nodes_per_dim: usize, span_sigmas: f64) -> Result<Self> {
        let grid = Grid::for_model(model, nodes_per_dim, span_sigmas)?;
        Self::new(model, prefs, grid, OperatorOptions::default())
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn prefs(&self) -> &PreferenceSpec {
        &self.prefs
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nodes(&self) -> &[StatePoint] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_materialized(&self) -> bool {
        self.dense.is_some()
    }

    /// Stationary probabilities attached to the nodes (sum to one).
    pub fn stationary_weights(&self) -> &[f64] {
        &self.stationary
    }

    /// Quadrature-weighted matrix entry `w_j k(x_i, y_j)` (row-scaled if enabled).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(m) => m[i * self.nodes.len() + j],
            None => self.compute_entry(i, j),
        }
    }

    fn compute_entry(&self, i: usize, j: usize) -> f64 {
        self.row_scale[i] * self.weights[j] * self.model.kernel_value(&self.prefs, &self.nodes[i], &self.nodes[j])
    }

    /// Applies `K` to a grid function.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let n = self.nodes.len();
        if g.len() != n {
            return Err(Error::domain(format!(
                "grid function has {} values, grid has {n} nodes",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid function has non-finite values"));
        }
        let out = match &self.dense {
            Some(m) => m
                .par_chunks(n)
                .map(|row| row.iter().zip(g).map(|(k, v)| k * v).sum())
                .collect(),
            None => (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| self.compute_entry(i, j) * g[j]).sum())
                .collect(),
        };
        Ok(out)
    }

    /// Power iteration from `g = 1` with sup-norm renormalization. Stops when
    /// successive radius estimates differ by less than `tol` (relative to
    /// `max(1, rho)`) and the eigen-residual is below `tol`.
    pub fn spectral_radius_power(&self, tol: f64, max_iter: usize) -> Result<SpectralResult> {
        if !(tol > 0.0) {
            return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
        }
        let mut v = vec![1.0; self.len()];
        let mut prev = f64::NAN;
        let mut rho = f64::NAN;
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let w = self.apply(&v)?;
            rho = w.iter().fold(0.0f64, |acc, x| acc.max(*x));
            if !rho.is_finite() {
                return Err(Error::Overflow("power iterate left the finite range".into()));
            }
            if rho <= 0.0 {
                return Err(Error::domain("K maps the constant function to zero on this grid"));
            }
            residual = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi / rho - vi).abs())
                .fold(0.0, f64::max);
            let converged = (rho - prev).abs() < tol * rho.max(1.0) && residual < tol;
            if converged {
                return Ok(SpectralResult {
                    rho,
                    eigenfunction: v,
                    iterations: it,
                    residual,
                });
            }
            prev = rho;
            v = w.into_iter().map(|x| x / rho).collect();
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            last_estimate: rho,
            residual,
        })
    }

    /// Gelfand-type sequence `a_n = ||K^n 1||_p^(1/n)` in `L_p(pi)`,
    /// `n = 1..=n_max`. Iterates are rescaled each step and the scale is
    /// carried in logs.
    pub fn gelfand_sequence(&self, n_max: usize, p: f64) -> Result<Vec<f64>> {
        if n_max == 0 {
            return Err(Error::domain("n_max must be at least 1"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::domain(format!("p must be >= 1, got {p}")));
        }
        let mut v = vec![1.0; self.len()];
        let mut log_scale = 0.0;
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            v = self.apply(&v)?;
            let s = v.iter().fold(0.0f64, |acc, x| acc.max(*x));
            if !s.is_finite() {
                return Err(Error::Overflow(format!("K^{n} 1 left the finite range")));
            }
            if s <= 0.0 {
                return Err(Error::domain(format!("K^{n} 1 vanished on the grid")));
            }
            for x in &mut v {
                *x /= s;
            }
            log_scale += s.ln();
            let moment: f64 = self.stationary.iter().zip(&v).map(|(pi, x)| pi * x.abs().powf(p)).sum();
            let nf = n as f64;
            out.push((log_scale / nf + moment.ln() / (nf * p)).exp());
        }
        Ok(out)
    }

    /// Quadrature estimate of `int int k(x, y)^2 dpi(x) dpi(y)`.
    pub fn hs_norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let pi_i = self.stationary[i];
                if pi_i == 0.0 {
                    return 0.0;
                }
                let row: f64 = (0..n)
                    .map(|j| {
                        let k = self.model.kernel_value(&self.prefs, &self.nodes[i], &self.nodes[j]);
                        self.stationary[j] * k * k
                    })
                    .sum();
                pi_i * row
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

/// `pi` at the nodes times quadrature weights, renormalized. Models without a
/// closed-form stationary density use the occupation frequencies of one long
/// simulated chain, binned to the nearest node.
fn stationary_weights(
    model: &ModelSpec,
    grid: &Grid,
    nodes: &[StatePoint],
    weights: &[f64],
    occupation_steps: usize,
) -> Result<Vec<f64>> {
    let mut pi: Vec<f64> = if nodes.iter().all(|x| model.stationary_density(x).is_some()) {
        nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| model.stationary_density(x).unwrap_or(0.0) * w)
            .collect()
    } else {
        if occupation_steps == 0 {
            return Err(Error::domain("occupation_steps must be positive for this model"));
        }
        let mut counts = vec![0.0; nodes.len()];
        let mut rng = RngStream::new(OCCUPATION_SEED, 0).generator();
        let mut x = model.sample_stationary(&mut rng);
        for _ in 0..occupation_steps {
            counts[grid.nearest_index(&x)] += 1.0;
            x = model.step(&x, &mut rng).1;
        }
        counts
    };
    let total: f64 = pi.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::domain("stationary law puts no mass on the grid"));
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}
