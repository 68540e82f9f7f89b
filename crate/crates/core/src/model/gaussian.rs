use serde::{Deserialize, Serialize};

use super::{check_finite, check_positive, check_unit_interval, normal_pdf, StatePoint};
use crate::error::{Error, Result};
use crate::rng::Sampler;

/// Long-run risk model with constant volatility:
/// `ln(C'/C) = mu_c + z + sigma * eps`, `z' = rho * z + sigma * eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByConstantVol {
    pub mu_c: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl ByConstantVol {
    pub fn new(mu_c: f64, rho: f64, sigma: f64) -> Result<Self> {
        let m = Self { mu_c, rho, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu_c", self.mu_c)?;
        check_unit_interval("rho", self.rho)?;
        check_positive("sigma", self.sigma)
    }

    pub fn stationary_sd(&self) -> f64 {
        self.sigma / (1.0 - self.rho * self.rho).sqrt()
    }

    pub(crate) fn stationary_density(&self, x: f64) -> f64 {
        normal_pdf(x, 0.0, self.stationary_sd())
    }

    pub(crate) fn growth_terms(&self, z: f64) -> (f64, f64) {
        (self.mu_c + z, self.sigma)
    }

    pub(crate) fn transition_density(&self, x: f64, y: f64) -> f64 {
        normal_pdf(y, self.rho * x, self.sigma)
    }

    pub(crate) fn step(&self, z: f64, rng: &mut Sampler) -> (f64, StatePoint) {
        let eps = rng.standard_normal();
        let eta = rng.standard_normal();
        let (drift, scale) = self.growth_terms(z);
        (drift + scale * eps, StatePoint::scalar(self.rho * z + self.sigma * eta))
    }

    pub(crate) fn sample_stationary(&self, rng: &mut Sampler) -> StatePoint {
        StatePoint::scalar(self.stationary_sd() * rng.standard_normal())
    }
}

/// Permanent-innovation model: `xi' = (1 - a) + a * xi + u` and
/// `ln(C'/C) = ln(1 + g) + (1 - a) + (a - 1) * xi + eps` with unit-variance
/// normal shocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MehraPrescott {
    pub g_rate: f64,
    pub a: f64,
}

impl MehraPrescott {
    pub fn new(g_rate: f64, a: f64) -> Result<Self> {
        let m = Self { g_rate, a };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_rate > -1.0 && self.g_rate.is_finite()) {
            return Err(Error::domain(format!("g_rate must exceed -1, got {}", self.g_rate)));
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(Error::domain(format!("a must lie in (0, 1], got {}", self.a)));
        }
        Ok(())
    }

    /// `None` for the unit-root case `a = 1`.
    pub fn stationary_sd(&self) -> Option<f64> {
        (self.a < 1.0).then(|| 1.0 / (1.0 - self.a * self.a).sqrt())
    }

    pub(crate) fn stationary_density(&self, x: f64) -> Option<f64> {
        self.stationary_sd().map(|sd| normal_pdf(x, 1.0, sd))
    }

    pub(crate) fn growth_terms(&self, xi: f64) -> (f64, f64) {
        let a = self.a;
        ((1.0 + self.g_rate).ln() + (1.0 - a) + (a - 1.0) * xi, 1.0)
    }

    pub(crate) fn transition_density(&self, x: f64, y: f64) -> f64 {
        normal_pdf(y, (1.0 - self.a) + self.a * x, 1.0)
    }

    pub(crate) fn step(&self, xi: f64, rng: &mut Sampler) -> (f64, StatePoint) {
        let eps = rng.standard_normal();
        let u = rng.standard_normal();
        let (drift, scale) = self.growth_terms(xi);
        (
            drift + scale * eps,
            StatePoint::scalar((1.0 - self.a) + self.a * xi + u),
        )
    }

    /// With `a = 1` growth does not depend on the state, so the level is
    /// pinned at its unconditional mean of 1.
    pub(crate) fn sample_stationary(&self, rng: &mut Sampler) -> StatePoint {
        match self.stationary_sd() {
            Some(sd) => StatePoint::scalar(1.0 + sd * rng.standard_normal()),
            None => StatePoint::scalar(1.0),
        }
    }
}
