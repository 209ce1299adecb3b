//! Dicke-ladder coordinates of a mean-field state and the low-excitation
//! bright/dark-mode rate equations.

use crate::cumulant::CumulantState;
use crate::field::PolyField;
use crate::model::{ParamError, SystemParams, TWO_PI};
use crate::ode::{self, OdeError, StepControl};
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

/// |Im corr| above which the discarded imaginary part is reported.
pub const IMAG_CORR_WARN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollectiveError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("⟨J²⟩ radicand {radicand:.6e} is negative beyond closure tolerance")]
    ClosureViolation { radicand: f64 },
    #[error("atom count must be positive")]
    NoAtoms,
    #[error("t_end must be positive and finite")]
    BadTime,
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DickePoint {
    /// ⟨Jz⟩/ħ
    pub jz: f64,
    /// √⟨J²⟩/ħ
    pub j_len: f64,
    /// J with J(J+1) = ⟨J²⟩/ħ²
    pub j_eff: f64,
    pub m: f64,
    /// Im corr exceeded [`IMAG_CORR_WARN`] and was dropped.
    pub imag_discarded: bool,
}

pub fn dicke_coordinates(s: &CumulantState, n: u64) -> Result<DickePoint, CollectiveError> {
    if n == 0 {
        return Err(CollectiveError::NoAtoms);
    }
    let nf = n as f64;
    let jz = nf * (s.pop - 0.5);
    let radicand = 0.75 * nf + nf * (nf - 1.0) * (s.corr.re + s.pair - s.pop + 0.25);
    if radicand < -1e-9 * nf * nf {
        return Err(CollectiveError::ClosureViolation { radicand });
    }
    let j2 = radicand.max(0.0);
    let j_len = j2.sqrt();
    let j_eff = 0.5 * ((1.0 + 4.0 * j2).sqrt() - 1.0);
    Ok(DickePoint {
        jz,
        j_len,
        j_eff,
        m: jz,
        imag_discarded: s.corr.im.abs() > IMAG_CORR_WARN,
    })
}

/// Collective decay rate of the bright mode per atom, Hz.
pub fn kappa_ato(p: &SystemParams) -> Result<f64, ParamError> {
    if p.kappa_b <= 0.0 || p.kappa_a <= 0.0 {
        return Err(ParamError::EliminationUndefined);
    }
    let (ka, kb, g, gg) = (p.kappa_a, p.kappa_b, p.coupling_big_g, p.coupling_g);
    Ok(4.0 * gg * gg * (4.0 * g * g + ka * kb) / (ka * ka * kb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSample {
    pub t: f64,
    pub bright: f64,
    pub dark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrightDark {
    pub kappa_ato: f64,
    pub samples: Vec<ModeSample>,
    /// η ≥ Nκ_ato + γ + γφ
    pub bright_diverges: bool,
    /// η ≥ γ
    pub dark_diverges: bool,
}

/// Net exponential rates (bright, dark) of the mode equations, Hz.
pub fn mode_rates(p: &SystemParams) -> Result<(f64, f64), ParamError> {
    let k = kappa_ato(p)?;
    Ok((
        p.eta - (p.n() * k + p.gamma + p.gamma_phi),
        p.eta - p.gamma,
    ))
}

fn mode_field(p: &SystemParams) -> Result<PolyField, ParamError> {
    let (lb, ld) = mode_rates(p)?;
    let mut f = PolyField::new();
    let nb = f.real();
    let nd = f.real();
    let re = |v: f64| C::new(TWO_PI * v, 0.0);
    f.lin(nb, nb, re(lb));
    f.konst(nb, re(p.eta));
    f.lin(nd, nd, re(ld));
    f.lin(nd, nb, re(p.gamma_phi));
    f.konst(nd, re((p.n() - 1.0) * p.eta));
    Ok(f)
}

/// Integrate the bright/dark populations from zero, sampled at `samples`
/// evenly spaced times in (0, t_end].
pub fn bright_dark(p: &SystemParams, t_end: f64, samples: usize) -> Result<BrightDark, CollectiveError> {
    p.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CollectiveError::BadTime);
    }
    let f = mode_field(p)?;
    let (lb, ld) = mode_rates(p)?;
    let ctl = StepControl {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        ..Default::default()
    };
    let samples = samples.max(1);
    let mut y = vec![0.0, 0.0];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(samples);
    for k in 1..=samples {
        let t1 = t_end * k as f64 / samples as f64;
        let tr = ode::integrate(&f, &y, t1 - t, &ctl)?;
        y = tr.last().1.to_vec();
        t = t1;
        out.push(ModeSample {
            t,
            bright: y[0],
            dark: y[1],
        });
    }
    Ok(BrightDark {
        kappa_ato: kappa_ato(p)?,
        samples: out,
        bright_diverges: lb >= 0.0,
        dark_diverges: ld >= 0.0,
    })
}
