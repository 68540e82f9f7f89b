//! Nonlinear recursive-utility operators and their fixed points.
//!
//! With `g` the normalized utility transform on the grid:
//!
//! ```text
//! A g = { xi(x) + beta * (K g)^(1/theta) }^theta            xi = (1 - beta) lambda(x)
//! B g = { (1 - beta) + beta * (K g + b(x))^(1/theta) }^theta
//! ```
//!
//! Both maps are isotone for either sign of `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda::LambdaEstimate;
use crate::model::StatePoint;
use crate::operator::DiscreteOperator;
use crate::prefs::PreferenceSpec;

/// Sup-norm below which iterates are declared collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;
/// Sup-norm above which iterates are declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Bounded positive function of the state, declared in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFunction {
    Constant {
        value: f64,
    },
    /// `clamp(exp(intercept + slope . x), lo, hi)`.
    ExpLinear {
        intercept: f64,
        slope: Vec<f64>,
        lo: f64,
        hi: f64,
    },
}

impl Default for StateFunction {
    fn default() -> Self {
        StateFunction::Constant { value: 1.0 }
    }
}

impl StateFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            StateFunction::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::domain(format!(
                        "constant function value must be positive, got {value}"
                    )));
                }
            }
            StateFunction::ExpLinear {
                intercept,
                slope,
                lo,
                hi,
            } => {
                if !(*lo > 0.0 && lo < hi && hi.is_finite()) {
                    return Err(Error::domain(format!(
                        "exp_linear bounds need 0 < lo < hi < inf, got [{lo}, {hi}]"
                    )));
                }
                if !intercept.is_finite() || slope.iter().any(|s| !s.is_finite()) {
                    return Err(Error::domain("exp_linear coefficients must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &StatePoint) -> f64 {
        match self {
            StateFunction::Constant { value } => *value,
            StateFunction::ExpLinear {
                intercept,
                slope,
                lo,
                hi,
            } => {
                let arg = intercept + slope.iter().zip(x.coords()).map(|(s, c)| s * c).sum::<f64>();
                arg.exp().clamp(*lo, *hi)
            }
        }
    }

    pub fn on_nodes(&self, nodes: &[StatePoint]) -> Vec<f64> {
        nodes.iter().map(|x| self.eval(x)).collect()
    }
}

fn check_bounded_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!(
            "{name} must be positive and finite at every node"
        )));
    }
    Ok(())
}

/// Time-preference shock `lambda(x)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSpec {
    lambda: Vec<f64>,
}

impl ShockSpec {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        check_bounded_positive("lambda", &lambda)?;
        Ok(Self { lambda })
    }

    pub fn from_function(f: &StateFunction, op: &DiscreteOperator) -> Result<Self> {
        f.validate()?;
        Self::new(f.on_nodes(op.nodes()))
    }

    /// `lambda = 1`: the standard Epstein-Zin aggregator.
    pub fn unit(len: usize) -> Self {
        Self { lambda: vec![1.0; len] }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `xi(x) = (1 - beta) lambda(x)`.
    pub fn xi(&self, beta: f64) -> Vec<f64> {
        self.lambda.iter().map(|l| (1.0 - beta) * l).collect()
    }
}

/// Narrow-framing term `b(x)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FramingSpec {
    b: Vec<f64>,
}

impl FramingSpec {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        check_bounded_positive("b", &b)?;
        Ok(Self { b })
    }

    pub fn from_function(f: &StateFunction, op: &DiscreteOperator) -> Result<Self> {
        f.validate()?;
        Self::new(f.on_nodes(op.nodes()))
    }

    /// Skips the positivity check; lets `b = 0` reproduce operator A.
    pub fn relaxed(b: Vec<f64>) -> Self {
        Self { b }
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

fn check_positive_input(g: &[f64]) -> Result<()> {
    if g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain(
            "operator input must be positive and finite at every node",
        ));
    }
    Ok(())
}

/// `{ additive_i + beta * inner_i^(1/theta) }^theta`, nodewise.
fn aggregate(inner: &[f64], additive: impl Fn(usize) -> f64, prefs: &PreferenceSpec) -> Result<Vec<f64>> {
    let theta = prefs.theta();
    let beta = prefs.beta();
    inner
        .iter()
        .enumerate()
        .map(|(i, k)| {
            if !(*k > 0.0) {
                return Err(Error::domain(format!("K g is not positive at node {i} ({k})")));
            }
            Ok((additive(i) + beta * k.powf(1.0 / theta)).powf(theta))
        })
        .collect()
}

/// Time-preference-shock operator `A`.
pub fn apply_a(op: &DiscreteOperator, prefs: &PreferenceSpec, shock: &ShockSpec, g: &[f64]) -> Result<Vec<f64>> {
    check_positive_input(g)?;
    if shock.lambda.len() != g.len() {
        return Err(Error::domain("shock function length differs from grid"));
    }
    let kg = op.apply(g)?;
    let xi = shock.xi(prefs.beta());
    aggregate(&kg, |i| xi[i], prefs)
}

/// Narrow-framing operator `B`.
pub fn apply_b(op: &DiscreteOperator, prefs: &PreferenceSpec, framing: &FramingSpec, g: &[f64]) -> Result<Vec<f64>> {
    check_positive_input(g)?;
    if framing.b.len() != g.len() {
        return Err(Error::domain("framing function length differs from grid"));
    }
    let kg: Vec<f64> = op.apply(g)?.iter().zip(&framing.b).map(|(k, b)| k + b).collect();
    let one_minus_beta = 1.0 - prefs.beta();
    aggregate(&kg, |_| one_minus_beta, prefs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    CollapsedToZero,
    Diverged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub solution: Option<Vec<f64>>,
    pub iterations: usize,
    pub final_residual: f64,
    /// `sup |g_{k+1} - g_k|` per iteration.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

/// Successive approximation `g_{k+1} = apply(g_k)`.
///
/// Converged once `sup |g_{k+1} - g_k| < tol * min(1, sup g_{k+1})`, which is
/// the absolute test for solutions of order one and a relative one for
/// small iterates, so a geometric slide toward zero is not mistaken for
/// convergence.
pub fn solve_fixed_point<F>(mut apply: F, g0: &[f64], tol: f64, max_iter: usize) -> Result<SolveReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    check_positive_input(g0)?;
    let mut g = g0.to_vec();
    let mut history = Vec::new();
    let report = |status, solution, history: Vec<f64>| SolveReport {
        status,
        solution,
        iterations: history.len(),
        final_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    };
    for _ in 0..max_iter {
        let next = apply(&g)?;
        let residual = next.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        history.push(residual);
        let sup = next.iter().copied().fold(0.0, f64::max);
        if next.iter().any(|v| !v.is_finite()) || sup > DIVERGENCE_THRESHOLD {
            return Ok(report(SolveStatus::Diverged, None, history));
        }
        if sup < COLLAPSE_THRESHOLD {
            return Ok(report(SolveStatus::CollapsedToZero, None, history));
        }
        g = next;
        if residual < tol * sup.min(1.0) {
            return Ok(report(SolveStatus::Converged, Some(g), history));
        }
    }
    Ok(report(SolveStatus::MaxIter, Some(g), history))
}

/// Fixed point of `A` on a one-point state space with kernel `k`:
/// `(xi / (1 - Lambda))^theta` when `Lambda = beta k^(1/theta) < 1`.
pub fn scalar_closed_form(prefs: &PreferenceSpec, k: f64, xi: f64) -> Result<Option<f64>> {
    if !(k > 0.0 && k.is_finite()) || !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::domain(format!("need k > 0 and xi > 0, got k = {k}, xi = {xi}")));
    }
    let lambda = prefs.stability_coefficient(k);
    if lambda < 1.0 {
        Ok(Some((xi / (1.0 - lambda)).powf(prefs.theta())))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Inconclusive,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Inconclusive => "inconclusive",
        }
    }
}

/// Threshold test of `lambda` against 1 with an uncertainty band.
pub fn classify_value(lambda: f64, band: f64) -> Stability {
    if lambda + band < 1.0 {
        Stability::Stable
    } else if lambda - band > 1.0 {
        Stability::Unstable
    } else {
        Stability::Inconclusive
    }
}

/// Classifies an estimate; `band` defaults to two standard errors of `lambda_p`.
pub fn classify_stability(estimate: &LambdaEstimate, band: Option<f64>) -> Result<Stability> {
    let band = band.unwrap_or(2.0 * estimate.lambda_std_error);
    if !(band >= 0.0) {
        return Err(Error::domain(format!("band must be nonnegative, got {band}")));
    }
    Ok(classify_value(estimate.lambda_p, band))
}
