//! Optical power, dB losses and mean photons per spatio-temporal mode.
//!
//! A mode is one coherence time `tau_c = 1/Δν` of light in a filter of
//! width `Δν` around `ν = c/λ`, so a power `P` carries
//! `mu = P tau_c / (h ν) = P / (h ν Δν)` photons per mode. Only the absolute
//! scale of `mu` depends on the `tau_c` convention; fidelities do not.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants (CODATA 2018, both exact in SI).
pub mod constants {
    /// Planck constant, J s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Convention for the coherence time: `tau_c = TAU_C_FACTOR / Δν`.
    pub const TAU_C_FACTOR: f64 = 1.0;
    pub const TAU_C_CONVENTION: &str = "tau_c = 1/delta_nu (rectangular filter)";
}

use constants::{PLANCK, SPEED_OF_LIGHT, TAU_C_FACTOR};

/// A filtered optical mode. The bandwidth is stored in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalMode {
    wavelength: f64,
    bandwidth_hz: f64,
}

impl OpticalMode {
    pub fn from_bandwidth_hz(wavelength: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be > 0, got {bandwidth_hz}"
            )));
        }
        Ok(Self {
            wavelength,
            bandwidth_hz,
        })
    }

    /// Builds the mode from a filter width in wavelength, `Δν = c Δλ / λ²`.
    pub fn from_bandwidth_wavelength(wavelength: f64, bandwidth_wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        Self::from_bandwidth_hz(
            wavelength,
            SPEED_OF_LIGHT * bandwidth_wavelength / (wavelength * wavelength),
        )
    }

    /// Convenience constructor in nanometres.
    pub fn from_nm(wavelength_nm: f64, filter_width_nm: f64) -> Result<Self> {
        Self::from_bandwidth_wavelength(wavelength_nm * 1e-9, filter_width_nm * 1e-9)
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn bandwidth_wavelength(&self) -> f64 {
        self.bandwidth_hz * self.wavelength * self.wavelength / SPEED_OF_LIGHT
    }

    pub fn frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    pub fn coherence_time(&self) -> f64 {
        TAU_C_FACTOR / self.bandwidth_hz
    }

    /// Power of one photon per mode, `h ν / tau_c`.
    pub fn power_per_photon(&self) -> f64 {
        PLANCK * self.frequency() / self.coherence_time()
    }
}

impl Default for OpticalMode {
    /// 1550 nm carrier behind a 1 nm filter.
    fn default() -> Self {
        Self::from_nm(1550.0, 1.0).expect("valid default mode")
    }
}

pub fn power_to_photons(power: f64, mode: &OpticalMode) -> Result<f64> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power must be >= 0, got {power}"
        )));
    }
    Ok(power / mode.power_per_photon())
}

pub fn photons_to_power(mu: f64, mode: &OpticalMode) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "photon number must be >= 0, got {mu}"
        )));
    }
    Ok(mu * mode.power_per_photon())
}

/// Attenuates `value` by `loss_db`. A negative loss removes a loss.
pub fn apply_loss_db(value: f64, loss_db: f64) -> f64 {
    value * 10f64.powf(-loss_db / 10.0)
}

/// Fraction of power a polarizer with the given extinction ratio lets
/// through in the blocked polarization.
pub fn extinction_floor(extinction_db: f64) -> Result<f64> {
    if extinction_db.is_nan() || extinction_db < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "extinction ratio must be >= 0 dB, got {extinction_db}"
        )));
    }
    Ok(10f64.powf(-extinction_db / 10.0))
}

/// Loss budget of the setup and the optical mode it is filtered to.
///
/// Read from a flat `key = value` file with exactly these keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Source reference point to EDF input.
    pub input_path_loss_db: f64,
    /// EDF output to power meter (the analysing block).
    pub output_path_loss_db: f64,
    /// Absorption of the unpumped EDF.
    pub edf_attenuation_db: f64,
    pub polarizer_extinction_db: f64,
    pub center_wavelength_nm: f64,
    pub filter_width_nm: f64,
}

impl CalibrationConfig {
    /// No losses, perfect polarizer, 1550 nm / 1 nm mode.
    pub fn lossless() -> Self {
        Self {
            input_path_loss_db: 0.0,
            output_path_loss_db: 0.0,
            edf_attenuation_db: 0.0,
            polarizer_extinction_db: f64::INFINITY,
            center_wavelength_nm: 1550.0,
            filter_width_nm: 1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let losses = [
            ("input_path_loss_db", self.input_path_loss_db),
            ("output_path_loss_db", self.output_path_loss_db),
            ("edf_attenuation_db", self.edf_attenuation_db),
        ];
        for (key, v) in losses {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{key} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.polarizer_extinction_db.is_nan() || self.polarizer_extinction_db < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "polarizer_extinction_db must be >= 0, got {}",
                self.polarizer_extinction_db
            )));
        }
        self.mode().map(|_| ())
    }

    pub fn mode(&self) -> Result<OpticalMode> {
        OpticalMode::from_nm(self.center_wavelength_nm, self.filter_width_nm)
    }

    /// Power entering the EDF, inferred from a power-meter reading taken
    /// with the pump off: both the unpumped EDF absorption and the output
    /// path are undone.
    pub fn edf_input_from_meter(&self, meter_power: f64) -> f64 {
        apply_loss_db(
            meter_power,
            -(self.edf_attenuation_db + self.output_path_loss_db),
        )
    }
}
