//! Physical parameters of the coupled-cavity system and the quantities
//! derived from them.
//!
//! Every rate, detuning and coupling is stored as a cyclic frequency in Hz.
//! Dynamics run on the angular values returned by [`SystemParams::angular`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * PI;

/// Strontium-87 clock transition, Hz.
pub const SR87_CLOCK_HZ: f64 = 429_228_004_229_873.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("`{0}` must be non-negative")]
    Negative(&'static str),
    #[error("`{0}` must be finite")]
    NonFinite(&'static str),
    #[error("`atom_count` must be at least 1")]
    ZeroAtoms,
    #[error("`kappa_b` is zero: adiabatic elimination of cavity b is undefined")]
    EliminationUndefined,
    #[error("unknown parameter `{0}`")]
    UnknownField(String),
    #[error("bad value for `{field}`: {msg}")]
    BadValue { field: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub delta_a: f64,
    pub delta_b: f64,
    #[serde(rename = "coupling_G")]
    pub coupling_big_g: f64,
    pub coupling_g: f64,
    pub atom_count: u64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma: f64,
    pub eta: f64,
    pub gamma_phi: f64,
    pub nu_sigma: f64,
}

impl Default for SystemParams {
    /// The EP working point at η = 18 Hz.
    fn default() -> Self {
        Self::reference(39.75e3, 18.0)
    }
}

/// Names accepted by [`SystemParams::set`] and [`SystemParams::get`].
pub const FIELD_NAMES: [&str; 11] = [
    "delta_a",
    "delta_b",
    "coupling_G",
    "coupling_g",
    "atom_count",
    "kappa_a",
    "kappa_b",
    "gamma",
    "eta",
    "gamma_phi",
    "nu_sigma",
];

impl SystemParams {
    /// Reference strontium-like parameters with the given tunneling and pump (Hz).
    pub fn reference(coupling_big_g: f64, eta: f64) -> Self {
        Self {
            delta_a: 0.0,
            delta_b: 0.0,
            coupling_big_g,
            coupling_g: 2.41,
            atom_count: 10_000_000,
            kappa_a: 160e3,
            kappa_b: 1e3,
            gamma: 1e-3,
            eta,
            gamma_phi: 1e-3,
            nu_sigma: SR87_CLOCK_HZ,
        }
    }

    pub fn ep(eta: f64) -> Self {
        Self::reference(39.75e3, eta)
    }

    pub fn ptbp(eta: f64) -> Self {
        Self::reference(3.975e3, eta)
    }

    /// Single cavity a, with cavity b inert (κb = 0, G = 0).
    pub fn no_ep(eta: f64) -> Self {
        Self {
            kappa_b: 0.0,
            coupling_big_g: 0.0,
            ..Self::reference(0.0, eta)
        }
    }

    pub fn n(&self) -> f64 {
        self.atom_count as f64
    }

    /// Cavity b takes no part in the dynamics.
    pub fn b_inert(&self) -> bool {
        self.kappa_b == 0.0 && self.coupling_big_g == 0.0
    }

    pub fn validate(&self) -> Result<Validated, ParamError> {
        let rates = [
            ("coupling_G", self.coupling_big_g),
            ("coupling_g", self.coupling_g),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("gamma_phi", self.gamma_phi),
            ("nu_sigma", self.nu_sigma),
        ];
        for (name, v) in [("delta_a", self.delta_a), ("delta_b", self.delta_b)]
            .into_iter()
            .chain(rates)
        {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        for (name, v) in rates {
            if v < 0.0 {
                return Err(ParamError::Negative(name));
            }
        }
        if self.atom_count == 0 {
            return Err(ParamError::ZeroAtoms);
        }
        let mut advisories = Vec::new();
        let collective = self.coupling_g * self.n().sqrt();
        if collective > 0.1 * self.kappa_a {
            advisories.push(format!(
                "bad-cavity condition weak: g*sqrt(N) = {collective:.4e} Hz > 0.1*kappa_a = {:.4e} Hz",
                0.1 * self.kappa_a
            ));
        }
        Ok(Validated {
            params: *self,
            advisories,
        })
    }

    pub fn derive(&self) -> Result<DerivedParams, ParamError> {
        if self.kappa_b == 0.0 {
            return Err(ParamError::EliminationUndefined);
        }
        let (ka, kb, g, gg) = (self.kappa_a, self.kappa_b, self.coupling_big_g, self.coupling_g);
        let denom = 4.0 * g * g + ka * kb;
        let purcell = 4.0 * gg * gg * kb / denom;
        let cooperativity = purcell / self.gamma;
        // Γc is formed from C so that Γc = Cγ holds bit for bit.
        let gamma_c = if self.gamma > 0.0 {
            cooperativity * self.gamma
        } else {
            purcell
        };
        Ok(DerivedParams {
            chi_gauge: (ka + kb) / 4.0,
            g_ep: (ka - kb).abs() / 4.0,
            kappa_eff: ka + 4.0 * g * g / kb,
            cooperativity,
            gamma_c,
            gamma_total: self.gamma_total(),
            eta_max: self.n() * gamma_c,
            pair_rate: 4.0 * gg * gg * (ka + kb) / denom,
        })
    }

    pub fn gamma_total(&self) -> f64 {
        self.eta + self.gamma + self.gamma_phi
    }

    /// Purcell rate seen by one atom, Hz, including cavity detunings.
    ///
    /// Reduces to Γc at resonance and to 4g²/κa when cavity b is inert.
    pub fn purcell_rate(&self) -> f64 {
        use num_complex::Complex64 as C;
        let half_a = C::new(self.kappa_a / 2.0, -self.delta_a);
        let resp = if self.b_inert() {
            half_a
        } else {
            let half_b = C::new(self.kappa_b / 2.0, -self.delta_b);
            half_a + self.coupling_big_g * self.coupling_big_g / half_b
        };
        2.0 * self.coupling_g * self.coupling_g * resp.inv().re
    }

    /// γ < η < NΓc, with the detuning-aware Purcell rate.
    pub fn in_lasing_window(&self) -> bool {
        self.eta > self.gamma && self.eta < self.n() * self.purcell_rate()
    }

    /// The EP tunneling G_PT = |κa − κb|/4, Hz.
    pub fn g_pt(&self) -> f64 {
        (self.kappa_a - self.kappa_b).abs() / 4.0
    }

    pub fn angular(&self) -> Angular {
        Angular {
            delta_a: TWO_PI * self.delta_a,
            delta_b: TWO_PI * self.delta_b,
            big_g: TWO_PI * self.coupling_big_g,
            g: TWO_PI * self.coupling_g,
            n: self.n(),
            kappa_a: TWO_PI * self.kappa_a,
            kappa_b: TWO_PI * self.kappa_b,
            gamma: TWO_PI * self.gamma,
            eta: TWO_PI * self.eta,
            gamma_phi: TWO_PI * self.gamma_phi,
        }
    }

    pub fn get(&self, name: &str) -> Result<f64, ParamError> {
        Ok(match name {
            "delta_a" => self.delta_a,
            "delta_b" => self.delta_b,
            "coupling_G" | "G" => self.coupling_big_g,
            "coupling_g" | "g" => self.coupling_g,
            "atom_count" | "N" => self.n(),
            "kappa_a" => self.kappa_a,
            "kappa_b" => self.kappa_b,
            "gamma" => self.gamma,
            "eta" => self.eta,
            "gamma_phi" => self.gamma_phi,
            "nu_sigma" => self.nu_sigma,
            other => return Err(ParamError::UnknownField(other.to_string())),
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ParamError> {
        let slot = match name {
            "delta_a" => &mut self.delta_a,
            "delta_b" => &mut self.delta_b,
            "coupling_G" | "G" => &mut self.coupling_big_g,
            "coupling_g" | "g" => &mut self.coupling_g,
            "kappa_a" => &mut self.kappa_a,
            "kappa_b" => &mut self.kappa_b,
            "gamma" => &mut self.gamma,
            "eta" => &mut self.eta,
            "gamma_phi" => &mut self.gamma_phi,
            "nu_sigma" => &mut self.nu_sigma,
            "atom_count" | "N" => {
                if !(value.is_finite() && value >= 1.0 && value.fract() == 0.0) {
                    return Err(ParamError::BadValue {
                        field: "atom_count".into(),
                        msg: format!("{value} is not a positive integer"),
                    });
                }
                self.atom_count = value as u64;
                return Ok(());
            }
            other => return Err(ParamError::UnknownField(other.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ParamError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ParamError::BadValue {
            field: kv.to_string(),
            msg: "expected key=value".into(),
        })?;
        let k = k.trim();
        let value: f64 = v.trim().parse().map_err(|_| ParamError::BadValue {
            field: k.to_string(),
            msg: format!("cannot parse `{}` as a number", v.trim()),
        })?;
        self.set(k, value)
    }

    /// Parse a flat TOML table; missing keys keep the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ParamError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ParamError::BadValue {
            field: "<config>".into(),
            msg: e.to_string(),
        })?;
        let mut p = Self::default();
        for (k, v) in &table {
            let x = match v {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                other => {
                    return Err(ParamError::BadValue {
                        field: k.clone(),
                        msg: format!("expected a number, found {}", other.type_str()),
                    })
                }
            };
            p.set(k, x)?;
        }
        Ok(p)
    }

    /// Flat `key = value` lines, in field order.
    pub fn to_key_values(&self) -> Vec<(&'static str, f64)> {
        FIELD_NAMES
            .iter()
            .map(|k| (*k, self.get(k).expect("known field")))
            .collect()
    }

    /// Multiply every rate, detuning and coupling by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            delta_a: self.delta_a * s,
            delta_b: self.delta_b * s,
            coupling_big_g: self.coupling_big_g * s,
            coupling_g: self.coupling_g * s,
            kappa_a: self.kappa_a * s,
            kappa_b: self.kappa_b * s,
            gamma: self.gamma * s,
            eta: self.eta * s,
            gamma_phi: self.gamma_phi * s,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub params: SystemParams,
    pub advisories: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub chi_gauge: f64,
    pub g_ep: f64,
    pub kappa_eff: f64,
    pub cooperativity: f64,
    pub gamma_c: f64,
    pub gamma_total: f64,
    pub eta_max: f64,
    /// 4g²(κa+κb)/(4G²+κaκb), a per-atom coupling rate of the cavity pair.
    pub pair_rate: f64,
}

/// Rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angular {
    pub delta_a: f64,
    pub delta_b: f64,
    pub big_g: f64,
    pub g: f64,
    pub n: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma: f64,
    pub eta: f64,
    pub gamma_phi: f64,
}

impl Angular {
    pub fn gamma_total(&self) -> f64 {
        self.eta + self.gamma + self.gamma_phi
    }

    pub fn to_cyclic(&self, nu_sigma: f64) -> SystemParams {
        SystemParams {
            delta_a: self.delta_a / TWO_PI,
            delta_b: self.delta_b / TWO_PI,
            coupling_big_g: self.big_g / TWO_PI,
            coupling_g: self.g / TWO_PI,
            atom_count: self.n as u64,
            kappa_a: self.kappa_a / TWO_PI,
            kappa_b: self.kappa_b / TWO_PI,
            gamma: self.gamma / TWO_PI,
            eta: self.eta / TWO_PI,
            gamma_phi: self.gamma_phi / TWO_PI,
            nu_sigma,
        }
    }
}
