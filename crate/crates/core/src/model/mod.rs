//! Markov consumption-growth models.
//!
//! Each model describes an exogenous state `X_t`, its transition law, and the
//! log consumption growth `kappa(X_t, X_{t+1}, eps_{t+1})` with a shock `eps`
//! drawn from a standard normal law. The shock always enters `kappa` linearly,
//! so the shock integral inside the valuation kernel has a closed lognormal form.

mod finite;
mod gaussian;
mod volatility;

use std::ops::Index;

pub use finite::FiniteChain;
pub use gaussian::{ByConstantVol, MehraPrescott};
pub use volatility::{ByStochVol, Ssy};

use crate::error::{Error, Result};
use crate::prefs::PreferenceSpec;
use crate::rng::Sampler;

/// Steps of burn-in used to draw from stationary laws without a closed form.
pub const BURN_IN_STEPS: usize = 10_000;

/// A point of the state space. Finite chains store the state index as the
/// single coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    coords: [f64; 3],
    dim: usize,
}

impl StatePoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::domain(format!(
                "state dimension must be 1..=3, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("state coordinates must be finite"));
        }
        let mut buf = [0.0; 3];
        buf[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: buf,
            dim: coords.len(),
        })
    }

    pub fn scalar(x: f64) -> Self {
        Self {
            coords: [x, 0.0, 0.0],
            dim: 1,
        }
    }

    /// State `i` of a finite chain.
    pub fn index(i: usize) -> Self {
        Self::scalar(i as f64)
    }

    pub(crate) fn from_array(coords: [f64; 3], dim: usize) -> Self {
        Self { coords, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn as_index(&self) -> usize {
        self.coords[0] as usize
    }
}

impl Index<usize> for StatePoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.coords()[i]
    }
}

/// The supported consumption/state models.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    FiniteChain(FiniteChain),
    ByConstantVol(ByConstantVol),
    ByStochVol(ByStochVol),
    MehraPrescott(MehraPrescott),
    Ssy(Ssy),
}

impl From<FiniteChain> for ModelSpec {
    fn from(m: FiniteChain) -> Self {
        ModelSpec::FiniteChain(m)
    }
}

impl From<ByConstantVol> for ModelSpec {
    fn from(m: ByConstantVol) -> Self {
        ModelSpec::ByConstantVol(m)
    }
}

impl From<ByStochVol> for ModelSpec {
    fn from(m: ByStochVol) -> Self {
        ModelSpec::ByStochVol(m)
    }
}

impl From<MehraPrescott> for ModelSpec {
    fn from(m: MehraPrescott) -> Self {
        ModelSpec::MehraPrescott(m)
    }
}

impl From<Ssy> for ModelSpec {
    fn from(m: Ssy) -> Self {
        ModelSpec::Ssy(m)
    }
}

/// Per-dimension interval used when laying out quadrature grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::FiniteChain(_) => "finite_chain",
            ModelSpec::ByConstantVol(_) => "by_constant_vol",
            ModelSpec::ByStochVol(_) => "by_stoch_vol",
            ModelSpec::MehraPrescott(_) => "mehra_prescott",
            ModelSpec::Ssy(_) => "ssy",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::FiniteChain(_) | ModelSpec::ByConstantVol(_) | ModelSpec::MehraPrescott(_) => 1,
            ModelSpec::ByStochVol(_) => 2,
            ModelSpec::Ssy(_) => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::FiniteChain(m) => m.validate(),
            ModelSpec::ByConstantVol(m) => m.validate(),
            ModelSpec::ByStochVol(m) => m.validate(),
            ModelSpec::MehraPrescott(m) => m.validate(),
            ModelSpec::Ssy(m) => m.validate(),
        }
    }

    pub fn is_finite_chain(&self) -> bool {
        matches!(self, ModelSpec::FiniteChain(_))
    }

    pub(crate) fn check_state(&self, x: &StatePoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::domain(format!(
                "{} expects a {}-dimensional state, got {}",
                self.name(),
                self.dim(),
                x.dim()
            )));
        }
        if let ModelSpec::FiniteChain(m) = self {
            let i = x[0];
            if i < 0.0 || i.fract() != 0.0 || i as usize >= m.n_states() {
                return Err(Error::domain(format!("state index {i} outside the chain")));
            }
        }
        Ok(())
    }

    /// Log consumption growth for the transition `x -> y` with shock `eps`.
    pub fn kappa(&self, x: &StatePoint, y: &StatePoint, eps: f64) -> f64 {
        let (drift, scale) = self.growth_terms(x, y);
        drift + scale * eps
    }

    /// `kappa = drift + scale * eps`; returns `(drift, scale)`.
    pub(crate) fn growth_terms(&self, x: &StatePoint, y: &StatePoint) -> (f64, f64) {
        match self {
            ModelSpec::FiniteChain(m) => (m.growth(x.as_index(), y.as_index()), 0.0),
            ModelSpec::ByConstantVol(m) => m.growth_terms(x[0]),
            ModelSpec::ByStochVol(m) => m.growth_terms(x[0], x[1]),
            ModelSpec::MehraPrescott(m) => m.growth_terms(x[0]),
            ModelSpec::Ssy(m) => m.growth_terms(x[0], x[2]),
        }
    }

    /// Density of `X_{t+1} = y` given `X_t = x` (probability mass for finite
    /// chains). Clamped coordinates carry atoms at their bounds; only the
    /// absolutely continuous part is returned.
    pub fn transition_density(&self, x: &StatePoint, y: &StatePoint) -> Result<f64> {
        self.check_state(x)?;
        self.check_state(y)?;
        Ok(self.transition_density_unchecked(x, y))
    }

    pub(crate) fn transition_density_unchecked(&self, x: &StatePoint, y: &StatePoint) -> f64 {
        match self {
            ModelSpec::FiniteChain(m) => m.probability(x.as_index(), y.as_index()),
            ModelSpec::ByConstantVol(m) => m.transition_density(x[0], y[0]),
            ModelSpec::ByStochVol(m) => m.transition_density(x, y),
            ModelSpec::MehraPrescott(m) => m.transition_density(x[0], y[0]),
            ModelSpec::Ssy(m) => m.transition_density(x, y),
        }
    }

    /// `E[exp((1 - gamma) * kappa(x, y, eps))]` over the shock law.
    pub fn conditional_growth_mgf(&self, prefs: &PreferenceSpec, x: &StatePoint, y: &StatePoint) -> f64 {
        let (drift, scale) = self.growth_terms(x, y);
        let a = prefs.one_minus_gamma();
        (a * drift + 0.5 * a * a * scale * scale).exp()
    }

    /// Valuation kernel `k(x, y)`: shock integral times transition density.
    pub fn kernel_value(&self, prefs: &PreferenceSpec, x: &StatePoint, y: &StatePoint) -> f64 {
        let q = self.transition_density_unchecked(x, y);
        if q == 0.0 {
            return 0.0;
        }
        self.conditional_growth_mgf(prefs, x, y) * q
    }

    /// One transition: returns `(kappa, next_state)`.
    pub fn step(&self, x: &StatePoint, rng: &mut Sampler) -> (f64, StatePoint) {
        match self {
            ModelSpec::FiniteChain(m) => m.step(x.as_index(), rng),
            ModelSpec::ByConstantVol(m) => m.step(x[0], rng),
            ModelSpec::ByStochVol(m) => m.step(x[0], x[1], rng),
            ModelSpec::MehraPrescott(m) => m.step(x[0], rng),
            ModelSpec::Ssy(m) => m.step(x, rng),
        }
    }

    /// Simulates `n` transitions from `x0`; returns `ln(C_n / C_0)` and `X_n`.
    pub fn simulate_growth(&self, x0: &StatePoint, n: usize, rng: &mut Sampler) -> (f64, StatePoint) {
        let (total, _, x) = self.simulate_growth_with_midpoint(x0, n, n, rng);
        (total, x)
    }

    /// Like [`simulate_growth`](Self::simulate_growth) but also returns the
    /// partial sum after `mid` steps.
    pub fn simulate_growth_with_midpoint(
        &self,
        x0: &StatePoint,
        n: usize,
        mid: usize,
        rng: &mut Sampler,
    ) -> (f64, f64, StatePoint) {
        let mut x = *x0;
        let mut total = 0.0;
        let mut at_mid = 0.0;
        for t in 0..n {
            if t == mid {
                at_mid = total;
            }
            let (k, y) = self.step(&x, rng);
            total += k;
            x = y;
        }
        if mid >= n {
            at_mid = total;
        }
        (total, at_mid, x)
    }

    /// Draws from the stationary law.
    pub fn sample_stationary(&self, rng: &mut Sampler) -> StatePoint {
        match self {
            ModelSpec::FiniteChain(m) => m.sample_stationary(rng),
            ModelSpec::ByConstantVol(m) => m.sample_stationary(rng),
            ModelSpec::MehraPrescott(m) => m.sample_stationary(rng),
            ModelSpec::ByStochVol(_) | ModelSpec::Ssy(_) => {
                let mut x = self.burn_in_origin();
                for _ in 0..BURN_IN_STEPS {
                    x = self.step(&x, rng).1;
                }
                x
            }
        }
    }

    fn burn_in_origin(&self) -> StatePoint {
        match self {
            ModelSpec::ByStochVol(m) => StatePoint::from_array([0.0, m.mean_variance(), 0.0], 2),
            _ => StatePoint::from_array([0.0; 3], self.dim()),
        }
    }

    /// Coordinate that carries the growth level (`z_t`, or `xi_t` for
    /// Mehra-Prescott). The uniform initial law perturbs only this one.
    pub fn level_coordinate(&self) -> usize {
        match self {
            ModelSpec::Ssy(_) => 2,
            _ => 0,
        }
    }

    /// Draws a stationary state, then replaces the level coordinate with a
    /// `U(lo, hi)` draw. Finite chains draw a uniformly random state.
    pub fn sample_uniform_level(&self, lo: f64, hi: f64, rng: &mut Sampler) -> StatePoint {
        if let ModelSpec::FiniteChain(m) = self {
            let i = ((rng.uniform() * m.n_states() as f64) as usize).min(m.n_states() - 1);
            return StatePoint::index(i);
        }
        let x = self.sample_stationary(rng);
        let mut coords = [0.0; 3];
        coords[..x.dim()].copy_from_slice(x.coords());
        coords[self.level_coordinate()] = lo + (hi - lo) * rng.uniform();
        StatePoint::from_array(coords, x.dim())
    }

    /// Stationary density at `x` when it has a closed form.
    pub fn stationary_density(&self, x: &StatePoint) -> Option<f64> {
        match self {
            ModelSpec::FiniteChain(m) => Some(m.stationary()[x.as_index()]),
            ModelSpec::ByConstantVol(m) => Some(m.stationary_density(x[0])),
            ModelSpec::MehraPrescott(m) => m.stationary_density(x[0]),
            ModelSpec::ByStochVol(_) | ModelSpec::Ssy(_) => None,
        }
    }

    /// Truncation box covering `span` stationary standard deviations on
    /// unbounded axes and the exact support on bounded ones.
    pub fn grid_bounds(&self, span: f64) -> Option<Vec<AxisBounds>> {
        match self {
            ModelSpec::FiniteChain(_) => None,
            ModelSpec::ByConstantVol(m) => Some(vec![symmetric(0.0, span * m.stationary_sd())]),
            ModelSpec::MehraPrescott(m) => m.stationary_sd().map(|sd| vec![symmetric(1.0, span * sd)]),
            ModelSpec::ByStochVol(m) => Some(vec![
                symmetric(0.0, span * m.level_stationary_sd()),
                AxisBounds { lo: 0.0, hi: m.m_bound },
            ]),
            ModelSpec::Ssy(m) => Some(vec![
                symmetric(0.0, m.m_bound),
                symmetric(0.0, m.m_bound),
                symmetric(0.0, span * m.level_stationary_sd()),
            ]),
        }
    }
}

fn symmetric(center: f64, half: f64) -> AxisBounds {
    AxisBounds {
        lo: center - half,
        hi: center + half,
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub(crate) fn normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    INV_SQRT_2PI / sd * (-0.5 * z * z).exp()
}

/// Density of `mean + scale * eta` with `eta` standard normal conditioned on
/// `|eta| <= bound`.
pub(crate) fn truncated_normal_pdf(y: f64, mean: f64, scale: f64, bound: f64) -> f64 {
    let z = (y - mean) / scale;
    if z.abs() > bound {
        return 0.0;
    }
    let mass = libm::erf(bound / std::f64::consts::SQRT_2);
    INV_SQRT_2PI / (scale * mass) * (-0.5 * z * z).exp()
}

pub(crate) fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > -1.0 && v < 1.0) {
        return Err(Error::domain(format!("{name} must lie in (-1, 1), got {v}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::domain(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}
