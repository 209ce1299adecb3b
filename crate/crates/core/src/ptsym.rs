//! Eigenpairs of the 2×2 effective non-Hermitian Hamiltonian of the cavity
//! pair and PT-phase classification.

use crate::model::SystemParams;
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_TOL_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    PTSymmetric,
    ExceptionalPoint,
    PTBroken,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::PTSymmetric => "PTSymmetric",
            Phase::ExceptionalPoint => "ExceptionalPoint",
            Phase::PTBroken => "PTBroken",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PtError {
    #[error("phase classification needs delta_a == delta_b (got {0} and {1})")]
    AsymmetricDetuning(f64, f64),
    #[error("empty G grid")]
    EmptyGrid,
    #[error("G grid must be ascending")]
    Unsorted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtEigensystem {
    pub lambda_plus: C,
    pub lambda_minus: C,
    pub vec_plus: [C; 2],
    pub vec_minus: [C; 2],
    /// Phase on the symmetric-detuning line, `None` when Δa ≠ Δb.
    pub phase: Option<Phase>,
    pub ep_distance: f64,
    pub defective: bool,
}

/// Non-Hermitian two-mode matrix, Hz.
pub fn hamiltonian(p: &SystemParams) -> [[C; 2]; 2] {
    let loss = (p.kappa_b - p.kappa_a) / 4.0;
    let g = C::new(p.coupling_big_g, 0.0);
    [
        [C::new(p.delta_a, loss), g],
        [g, C::new(p.delta_b, -loss)],
    ]
}

fn normalize(v: [C; 2]) -> [C; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Unconjugated product uᵀv, the biorthogonality pairing for the complex
/// symmetric Hamiltonian.
pub fn c_product(u: &[C; 2], v: &[C; 2]) -> C {
    u[0] * v[0] + u[1] * v[1]
}

pub fn classify(p: &SystemParams, tol_rel: f64) -> Result<Phase, PtError> {
    if p.delta_a != p.delta_b {
        return Err(PtError::AsymmetricDetuning(p.delta_a, p.delta_b));
    }
    let gpt = p.g_pt();
    let g = p.coupling_big_g;
    Ok(if (g - gpt).abs() <= tol_rel * gpt {
        Phase::ExceptionalPoint
    } else if g > gpt {
        Phase::PTSymmetric
    } else {
        Phase::PTBroken
    })
}

pub fn eigensystem(p: &SystemParams) -> PtEigensystem {
    eigensystem_tol(p, DEFAULT_TOL_REL)
}

pub fn eigensystem_tol(p: &SystemParams, tol_rel: f64) -> PtEigensystem {
    let phase = classify(p, tol_rel).ok();
    let g = p.coupling_big_g;
    let gpt = p.g_pt();
    let ep_distance = g - gpt;
    let resonant = p.delta_a == 0.0 && p.delta_b == 0.0;
    let i = C::i();

    if resonant && p.kappa_a >= p.kappa_b {
        // Closed forms at resonance.
        match phase {
            Some(Phase::ExceptionalPoint) => {
                let v = normalize([C::new(1.0, 0.0), i]);
                return PtEigensystem {
                    lambda_plus: C::new(0.0, 0.0),
                    lambda_minus: C::new(0.0, 0.0),
                    vec_plus: v,
                    vec_minus: v,
                    phase,
                    ep_distance,
                    defective: true,
                };
            }
            Some(Phase::PTSymmetric) => {
                let w = (g * g - gpt * gpt).sqrt();
                let phi = (gpt / g).asin();
                let e = C::from_polar(1.0, phi);
                return PtEigensystem {
                    lambda_plus: C::new(w, 0.0),
                    lambda_minus: C::new(-w, 0.0),
                    vec_plus: normalize([C::new(1.0, 0.0), e]),
                    vec_minus: normalize([C::new(1.0, 0.0), -e.conj()]),
                    phase,
                    ep_distance,
                    defective: false,
                };
            }
            Some(Phase::PTBroken) if g > 0.0 => {
                let w = (gpt * gpt - g * g).sqrt();
                let phi = (gpt / g).acosh();
                return PtEigensystem {
                    lambda_plus: C::new(0.0, w),
                    lambda_minus: C::new(0.0, -w),
                    vec_plus: normalize([C::new(1.0, 0.0), i * phi.exp()]),
                    vec_minus: normalize([C::new(1.0, 0.0), i * (-phi).exp()]),
                    phase,
                    ep_distance,
                    defective: false,
                };
            }
            _ => {}
        }
    }

    // General 2×2 solve.
    let h = hamiltonian(p);
    let mean = (h[0][0] + h[1][1]) / 2.0;
    let half = (h[0][0] - h[1][1]) / 2.0;
    let mut root = (half * half + h[0][1] * h[1][0]).sqrt();
    // Branch convention matching the closed forms: Re ≥ 0, else Im ≥ 0.
    if root.re < 0.0 || (root.re == 0.0 && root.im < 0.0) {
        root = -root;
    }
    let lp = mean + root;
    let lm = mean - root;
    let vec_for = |lam: C| {
        let a = [h[0][1], lam - h[0][0]];
        let b = [lam - h[1][1], h[1][0]];
        let na = a[0].norm_sqr() + a[1].norm_sqr();
        let nb = b[0].norm_sqr() + b[1].norm_sqr();
        if na == 0.0 && nb == 0.0 {
            [C::new(1.0, 0.0), C::new(0.0, 0.0)]
        } else if na >= nb {
            normalize(a)
        } else {
            normalize(b)
        }
    };
    let scale = h.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let defective = root.norm() <= 1e-12 * scale && h[0][1].norm() > 0.0;
    let vp = vec_for(lp);
    PtEigensystem {
        lambda_plus: lp,
        lambda_minus: lm,
        vec_plus: vp,
        vec_minus: if defective { vp } else { vec_for(lm) },
        phase,
        ep_distance,
        defective,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub g_hz: f64,
    pub re_plus: f64,
    pub im_plus: f64,
    pub re_minus: f64,
    pub im_minus: f64,
    pub phase: Option<Phase>,
}

pub fn phase_diagram(p: &SystemParams, g_grid: &[f64]) -> Result<Vec<PhaseRow>, PtError> {
    if g_grid.is_empty() {
        return Err(PtError::EmptyGrid);
    }
    if g_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(PtError::Unsorted);
    }
    Ok(g_grid
        .iter()
        .map(|&g| {
            let q = SystemParams {
                coupling_big_g: g,
                ..*p
            };
            let e = eigensystem(&q);
            PhaseRow {
                g_hz: g,
                re_plus: e.lambda_plus.re,
                im_plus: e.lambda_plus.im,
                re_minus: e.lambda_minus.re,
                im_minus: e.lambda_minus.im,
                phase: e.phase,
            }
        })
        .collect())
}
