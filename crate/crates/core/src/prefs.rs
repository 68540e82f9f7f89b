use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epstein-Zin preference parameters.
///
/// `theta` is never stored; it is recomputed from `gamma` and `psi` on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPreferences", into = "RawPreferences")]
pub struct PreferenceSpec {
    beta: f64,
    gamma: f64,
    psi: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreferences {
    beta: f64,
    gamma: f64,
    psi: f64,
}

impl TryFrom<RawPreferences> for PreferenceSpec {
    type Error = Error;

    fn try_from(raw: RawPreferences) -> Result<Self> {
        PreferenceSpec::new(raw.beta, raw.gamma, raw.psi)
    }
}

impl From<PreferenceSpec> for RawPreferences {
    fn from(p: PreferenceSpec) -> Self {
        RawPreferences {
            beta: p.beta,
            gamma: p.gamma,
            psi: p.psi,
        }
    }
}

impl PreferenceSpec {
    pub fn new(beta: f64, gamma: f64, psi: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !gamma.is_finite() || gamma == 1.0 {
            return Err(Error::domain(format!("gamma must be finite and != 1, got {gamma}")));
        }
        if !psi.is_finite() || psi <= 0.0 || psi == 1.0 {
            return Err(Error::domain(format!("psi must be positive and != 1, got {psi}")));
        }
        let spec = Self { beta, gamma, psi };
        let theta = spec.theta();
        if !theta.is_finite() || theta == 0.0 {
            return Err(Error::domain(format!("theta must be finite and nonzero, got {theta}")));
        }
        Ok(spec)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// `(1 - gamma) / (1 - 1/psi)`.
    pub fn theta(&self) -> f64 {
        (1.0 - self.gamma) / (1.0 - 1.0 / self.psi)
    }

    /// Exponent applied to consumption growth inside the valuation operator.
    pub fn one_minus_gamma(&self) -> f64 {
        1.0 - self.gamma
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.gamma, self.psi)
    }

    /// Stability coefficient `beta * r^(1/theta)` for a spectral radius `r`.
    pub fn stability_coefficient(&self, spectral_radius: f64) -> f64 {
        self.beta * spectral_radius.powf(1.0 / self.theta())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        let p = PreferenceSpec::new(0.998, 10.0, 1.5).unwrap();
        assert!((p.theta() + 27.0).abs() < 1e-12);
        let p = PreferenceSpec::new(0.96, 2.0, 2.0).unwrap();
        assert!((p.theta() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unit_gamma() {
        assert!(matches!(PreferenceSpec::new(0.9, 1.0, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_beta_and_psi() {
        assert!(PreferenceSpec::new(1.0, 2.0, 1.5).is_err());
        assert!(PreferenceSpec::new(0.0, 2.0, 1.5).is_err());
        assert!(PreferenceSpec::new(0.9, 2.0, 1.0).is_err());
        assert!(PreferenceSpec::new(0.9, 2.0, 0.0).is_err());
        assert!(PreferenceSpec::new(0.9, 2.0, -1.0).is_err());
        assert!(PreferenceSpec::new(f64::NAN, 2.0, 1.5).is_err());
    }
}
