//! Clock figures of merit: output power, projection-noise instability and
//! Allan deviation.

use crate::model::{ParamError, SystemParams, TWO_PI};
use serde::Serialize;
use thiserror::Error;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClockError {
    #[error("`{0}` must be positive and finite")]
    NonPositive(&'static str),
    #[error("series needs at least 2 points, got {0}")]
    ShortSeries(usize),
    #[error("photon number must be nonnegative, got {0}")]
    NegativePhotons(f64),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockSpec {
    pub chi_shape: f64,
    /// s
    pub t_cycle: f64,
    /// s
    pub tau: f64,
    /// Hz
    pub linewidth: f64,
    /// Hz
    pub nu_clock: f64,
    pub atom_count: u64,
}

impl ClockSpec {
    pub fn validate(&self) -> Result<(), ClockError> {
        for (name, v) in [
            ("chi_shape", self.chi_shape),
            ("t_cycle", self.t_cycle),
            ("tau", self.tau),
            ("linewidth", self.linewidth),
            ("nu_clock", self.nu_clock),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ClockError::NonPositive(name));
            }
        }
        if self.atom_count == 0 {
            return Err(ClockError::NonPositive("atom_count"));
        }
        Ok(())
    }
}

/// σ = χΔν/(πν) · √(Tc/(Nτ)).
pub fn qpn_instability(spec: &ClockSpec) -> Result<f64, ClockError> {
    spec.validate()?;
    Ok(spec.chi_shape * spec.linewidth / (std::f64::consts::PI * spec.nu_clock)
        * (spec.t_cycle / (spec.atom_count as f64 * spec.tau)).sqrt())
}

/// Fractional Allan deviation of consecutive frequency averages (Hz).
pub fn allan_deviation(series: &[f64], nu_clock: f64) -> Result<f64, ClockError> {
    if series.len() < 2 {
        return Err(ClockError::ShortSeries(series.len()));
    }
    if !(nu_clock > 0.0 && nu_clock.is_finite()) {
        return Err(ClockError::NonPositive("nu_clock"));
    }
    let l = series.len() as f64;
    let s: f64 = series.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((s / (2.0 * (l - 1.0) * nu_clock * nu_clock)).sqrt())
}

/// Which loss rate stands for κ in P = ħωκ⟨a†a⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRate {
    #[default]
    KappaA,
    KappaEff,
}

impl std::str::FromStr for PowerRate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kappa_a" | "kappa-a" => Ok(Self::KappaA),
            "kappa_eff" | "kappa-eff" => Ok(Self::KappaEff),
            o => Err(format!("unknown power rate `{o}` (kappa_a|kappa_eff)")),
        }
    }
}

/// Emitted power in W: ħ(2πνa)(2πκ)n_a with νa = ν_σ + Δa.
pub fn emission_power(p: &SystemParams, n_a: f64, rate: PowerRate) -> Result<f64, ClockError> {
    if !(n_a >= 0.0) {
        return Err(ClockError::NegativePhotons(n_a));
    }
    let kappa = match rate {
        PowerRate::KappaA => p.kappa_a,
        PowerRate::KappaEff => p.derive()?.kappa_eff,
    };
    let nu_a = p.nu_sigma + p.delta_a;
    Ok(HBAR * (TWO_PI * nu_a) * (TWO_PI * kappa) * n_a)
}
