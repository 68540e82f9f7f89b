use serde::{Deserialize, Serialize};

use super::{check_finite, check_positive, check_unit_interval, normal_pdf, truncated_normal_pdf, StatePoint};
use crate::error::{Error, Result};
use crate::rng::Sampler;

fn default_shock_support() -> f64 {
    3.0
}

fn default_eps_floor() -> f64 {
    1e-8
}

/// Long-run risk model with stochastic volatility and bounded volatility
/// shocks. State is `(z, v)` where `v` is the conditional variance:
///
/// ```text
/// ln(C'/C) = mu_c + z + s(v) * eps
/// z'       = rho * z + phi_e * s(v) * eta_z
/// v'       = clamp(nu * v + d_const + phi_sigma * eta_v, 0, m_bound)
/// s(v)     = sqrt(max(v, 0) + eps_floor)
/// ```
///
/// `eta_v` is a standard normal truncated to `[-shock_support, shock_support]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByStochVol {
    pub mu_c: f64,
    pub rho: f64,
    pub phi_e: f64,
    pub nu: f64,
    pub d_const: f64,
    pub phi_sigma: f64,
    pub m_bound: f64,
    #[serde(default = "default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default = "default_shock_support")]
    pub shock_support: f64,
}

impl ByStochVol {
    /// Monthly calibration with mean volatility 0.0078 and a variance cap of
    /// 2e-4 (about ten stationary standard deviations above the mean).
    pub fn table1() -> Self {
        let sigma_bar: f64 = 0.0078;
        let nu = 0.987;
        Self {
            mu_c: 0.0015,
            rho: 0.979,
            phi_e: 0.044,
            nu,
            d_const: sigma_bar * sigma_bar * (1.0 - nu),
            phi_sigma: 2.3e-6,
            m_bound: 2e-4,
            eps_floor: default_eps_floor(),
            shock_support: default_shock_support(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu_c", self.mu_c)?;
        check_unit_interval("rho", self.rho)?;
        check_unit_interval("nu", self.nu)?;
        check_finite("d_const", self.d_const)?;
        check_positive("phi_e", self.phi_e)?;
        check_positive("phi_sigma", self.phi_sigma)?;
        check_positive("m_bound", self.m_bound)?;
        check_positive("eps_floor", self.eps_floor)?;
        check_positive("shock_support", self.shock_support)
    }

    pub(crate) fn vol(&self, v: f64) -> f64 {
        (v.max(0.0) + self.eps_floor).sqrt()
    }

    /// Fixed point of the variance recursion, clamped to the support.
    pub fn mean_variance(&self) -> f64 {
        (self.d_const / (1.0 - self.nu)).clamp(0.0, self.m_bound)
    }

    pub(crate) fn level_stationary_sd(&self) -> f64 {
        self.phi_e * self.vol(self.mean_variance()) / (1.0 - self.rho * self.rho).sqrt()
    }

    pub(crate) fn growth_terms(&self, z: f64, v: f64) -> (f64, f64) {
        (self.mu_c + z, self.vol(v))
    }

    pub(crate) fn transition_density(&self, x: &StatePoint, y: &StatePoint) -> f64 {
        let v_next = y[1];
        if !(0.0..=self.m_bound).contains(&v_next) {
            return 0.0;
        }
        let qv = truncated_normal_pdf(
            v_next,
            self.nu * x[1] + self.d_const,
            self.phi_sigma,
            self.shock_support,
        );
        if qv == 0.0 {
            return 0.0;
        }
        qv * normal_pdf(y[0], self.rho * x[0], self.phi_e * self.vol(x[1]))
    }

    pub(crate) fn step(&self, z: f64, v: f64, rng: &mut Sampler) -> (f64, StatePoint) {
        let eps = rng.standard_normal();
        let eta_z = rng.standard_normal();
        let eta_v = rng.truncated_normal(self.shock_support);
        let s = self.vol(v);
        let z_next = self.rho * z + self.phi_e * s * eta_z;
        let v_next = (self.nu * v + self.d_const + self.phi_sigma * eta_v).clamp(0.0, self.m_bound);
        (
            self.mu_c + z + s * eps,
            StatePoint::from_array([z_next, v_next, 0.0], 2),
        )
    }
}

/// Long-run risk model with separate consumption and level volatilities.
/// State is `(h_c, h_z, z)`:
///
/// ```text
/// ln(C'/C) = mu_c + z + phi_c * sigma_bar * exp(h_c) * eps
/// z'       = rho * z + sqrt(1 - rho^2) * phi_z * sigma_bar * exp(h_z) * eta_z
/// h_i'     = clamp(rho_hi * h_i + sigma_hi * eta_hi, -m_bound, m_bound)
/// ```
///
/// The `eta_hi` are standard normals truncated to `[-shock_support, shock_support]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ssy {
    pub mu_c: f64,
    pub rho: f64,
    pub phi_c: f64,
    pub phi_z: f64,
    pub sigma_bar: f64,
    pub rho_hc: f64,
    pub rho_hz: f64,
    pub sigma_hc: f64,
    pub sigma_hz: f64,
    pub m_bound: f64,
    #[serde(default = "default_shock_support")]
    pub shock_support: f64,
}

impl Ssy {
    /// Illustrative monthly parameters of the usual magnitude for this model.
    pub fn example() -> Self {
        Self {
            mu_c: 0.0016,
            rho: 0.987,
            phi_c: 1.0,
            phi_z: 0.215,
            sigma_bar: 0.0032,
            rho_hc: 0.991,
            rho_hz: 0.974,
            sigma_hc: 0.0095,
            sigma_hz: 0.0375,
            m_bound: 1.0,
            shock_support: default_shock_support(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu_c", self.mu_c)?;
        check_unit_interval("rho", self.rho)?;
        check_unit_interval("rho_hc", self.rho_hc)?;
        check_unit_interval("rho_hz", self.rho_hz)?;
        check_positive("phi_c", self.phi_c)?;
        check_positive("phi_z", self.phi_z)?;
        check_positive("sigma_bar", self.sigma_bar)?;
        check_positive("sigma_hc", self.sigma_hc)?;
        check_positive("sigma_hz", self.sigma_hz)?;
        check_positive("m_bound", self.m_bound)?;
        check_positive("shock_support", self.shock_support)?;
        if self.m_bound > 50.0 {
            return Err(Error::domain("m_bound above 50 makes exp(h) overflow-prone"));
        }
        Ok(())
    }

    fn level_scale(&self, h_z: f64) -> f64 {
        (1.0 - self.rho * self.rho).sqrt() * self.phi_z * self.sigma_bar * h_z.exp()
    }

    /// Approximate stationary sd of `z`, treating `h_z` as Gaussian.
    pub(crate) fn level_stationary_sd(&self) -> f64 {
        let var_h = self.sigma_hz * self.sigma_hz / (1.0 - self.rho_hz * self.rho_hz);
        self.phi_z * self.sigma_bar * var_h.exp()
    }

    pub(crate) fn growth_terms(&self, h_c: f64, z: f64) -> (f64, f64) {
        (self.mu_c + z, self.phi_c * self.sigma_bar * h_c.exp())
    }

    fn h_density(&self, next: f64, current: f64, rho_h: f64, sigma_h: f64) -> f64 {
        if next.abs() > self.m_bound {
            return 0.0;
        }
        truncated_normal_pdf(next, rho_h * current, sigma_h, self.shock_support)
    }

    pub(crate) fn transition_density(&self, x: &StatePoint, y: &StatePoint) -> f64 {
        let qc = self.h_density(y[0], x[0], self.rho_hc, self.sigma_hc);
        if qc == 0.0 {
            return 0.0;
        }
        let qz = self.h_density(y[1], x[1], self.rho_hz, self.sigma_hz);
        if qz == 0.0 {
            return 0.0;
        }
        qc * qz * normal_pdf(y[2], self.rho * x[2], self.level_scale(x[1]))
    }

    pub(crate) fn step(&self, x: &StatePoint, rng: &mut Sampler) -> (f64, StatePoint) {
        let (h_c, h_z, z) = (x[0], x[1], x[2]);
        let eps = rng.standard_normal();
        let eta_z = rng.standard_normal();
        let eta_hc = rng.truncated_normal(self.shock_support);
        let eta_hz = rng.truncated_normal(self.shock_support);
        let (drift, scale) = self.growth_terms(h_c, z);
        let m = self.m_bound;
        let next = [
            (self.rho_hc * h_c + self.sigma_hc * eta_hc).clamp(-m, m),
            (self.rho_hz * h_z + self.sigma_hz * eta_hz).clamp(-m, m),
            self.rho * z + self.level_scale(h_z) * eta_z,
        ];
        (drift + scale * eps, StatePoint::from_array(next, 3))
    }
}
