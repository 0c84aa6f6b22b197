//! IQ modulator in single-sideband, carrier-suppressed operation.
//!
//! In the small-signal regime the output field is three spectral lines: the
//! desired sideband at `w0 + W` with amplitude proportional to the mean
//! modulation depth `mu = (mu1 + mu2)/2`, the suppressed sideband at
//! `w0 - W` proportional to the arm imbalance `delta = (mu2 - mu1)/2`, and a
//! residual carrier from the bias deviations. The suppressed sideband carries
//! a copy of the modulation, so its amplitude relative to the desired one is
//! the leakage ratio `k`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Above this depth the first-order Jacobi-Anger truncation is no longer
/// accurate to ~1%.
pub const LINEAR_REGIME_LIMIT: f64 = 0.2;

/// Residual leakage at the best observed sideband suppression (about 24 dB).
pub fn default_k_floor() -> f64 {
    10f64.powf(-24.0 / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulatorConfig {
    /// Effective modulation depth of arm 1 (sine drive), radians.
    pub mu1: f64,
    /// Effective modulation depth of arm 2 (cosine drive), radians.
    pub mu2: f64,
    /// DC bias deviation of arm 1, radians.
    pub delta1: f64,
    /// DC bias deviation of arm 2, radians.
    pub delta2: f64,
}

impl ModulatorConfig {
    pub fn new(mu1: f64, mu2: f64, delta1: f64, delta2: f64) -> Result<Self> {
        if !(mu1 >= 0.0 && mu2 >= 0.0) {
            return Err(invalid("modulation depths must be >= 0"));
        }
        if ![mu1, mu2, delta1, delta2].iter().all(|v| v.is_finite()) {
            return Err(invalid("modulator parameters must be finite"));
        }
        Ok(Self { mu1, mu2, delta1, delta2 })
    }

    /// Balanced arms with ideal biasing.
    pub fn ideal(mu: f64) -> Result<Self> {
        Self::new(mu, mu, 0.0, 0.0)
    }

    pub fn mu(&self) -> f64 {
        0.5 * (self.mu1 + self.mu2)
    }

    pub fn delta(&self) -> f64 {
        0.5 * (self.mu2 - self.mu1)
    }

    pub fn carrier_deviation(&self) -> Complex64 {
        Complex64::new(self.delta2, self.delta1)
    }

    /// Set when either arm leaves the linear regime.
    pub fn linearity_warning(&self) -> bool {
        self.mu1.max(self.mu2) > LINEAR_REGIME_LIMIT
    }
}

/// Complex amplitudes of the three output lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCoefficients {
    pub upper: Complex64,
    pub lower: Complex64,
    pub carrier: Complex64,
}

/// Relative line powers, normalized to the desired sideband.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SidebandSpectrum {
    pub p_desired: f64,
    pub p_suppressed: f64,
    pub p_carrier: f64,
}

impl SidebandSpectrum {
    /// Desired-to-suppressed power ratio in dB; `None` when the suppressed
    /// line vanishes.
    pub fn suppression_db(&self) -> Option<f64> {
        if self.p_suppressed > 0.0 {
            Some(10.0 * (self.p_desired / self.p_suppressed).log10())
        } else {
            None
        }
    }
}

/// How the RF scaling `rho` (dB) maps to the arm amplitude ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RhoConvention {
    /// `rho = 10 log10(A1/A2)`.
    #[default]
    Amplitude10,
    /// `rho = 20 log10(A1/A2)`.
    Amplitude20,
}

impl RhoConvention {
    pub fn amplitude_ratio(self, rho_db: f64) -> f64 {
        match self {
            RhoConvention::Amplitude10 => 10f64.powf(rho_db / 10.0),
            RhoConvention::Amplitude20 => 10f64.powf(rho_db / 20.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RhoConvention::Amplitude10 => "amplitude10",
            RhoConvention::Amplitude20 => "amplitude20",
        }
    }
}

/// Small-signal line amplitudes. The overall factor 1/2 is shared by all
/// three lines, so ratios match the exact output field.
pub fn field_coefficients(cfg: &ModulatorConfig) -> FieldCoefficients {
    FieldCoefficients {
        upper: Complex64::new(cfg.mu() / 2.0, 0.0),
        lower: Complex64::new(cfg.delta() / 2.0, 0.0),
        carrier: cfg.carrier_deviation() / 2.0,
    }
}

pub fn spectrum(cfg: &ModulatorConfig) -> Result<SidebandSpectrum> {
    let c = field_coefficients(cfg);
    let p_up = c.upper.norm_sqr();
    if !(p_up > 0.0) {
        return Err(Error::DegenerateConfig("no desired sideband (mu = 0)".into()));
    }
    Ok(SidebandSpectrum {
        p_desired: 1.0,
        p_suppressed: c.lower.norm_sqr() / p_up,
        p_carrier: c.carrier.norm_sqr() / p_up,
    })
}

/// Leakage ratio from the RF scaling: `|1 - r| / (1 + r)` with `r` the arm
/// amplitude ratio, floored at `k_floor`.
pub fn rho_to_k(rho_db: f64, k_floor: f64, convention: RhoConvention) -> Result<f64> {
    if !(0.0..1.0).contains(&k_floor) {
        return Err(invalid(alloc::format!("k_floor {k_floor} outside [0, 1)")));
    }
    if rho_db.is_nan() {
        return Err(invalid("rho is NaN"));
    }
    let r = convention.amplitude_ratio(rho_db);
    let k = if r.is_infinite() { 1.0 } else { (1.0 - r).abs() / (1.0 + r) };
    Ok(k.max(k_floor))
}

/// Sideband suppression `20 log10(1/k)` in dB; `None` for `k = 0`.
pub fn suppression_db(k: f64) -> Result<Option<f64>> {
    if !(k >= 0.0) {
        return Err(invalid(alloc::format!("leakage ratio {k} must be >= 0")));
    }
    if k == 0.0 {
        return Ok(None);
    }
    Ok(Some(20.0 * (1.0 / k).log10()))
}
