//! Emission spectrum of cavity a from the quantum regression theorem.
//!
//! The two-time correlations (⟨a†(t)a(0)⟩, ⟨σ⁺(t)a(0)⟩, ⟨b†(t)a(0)⟩) obey a
//! linear 3×3 system. Its biorthogonal eigendecomposition turns the spectrum
//! into a sum of complex-weighted Lorentzians. Frequencies on the spectrum
//! axis are offsets from the atomic transition, in Hz.

use crate::cumulant::CumulantState;
use crate::model::{SystemParams, TWO_PI};
use crate::ptsym::{self, Phase};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

/// Relative eigenvalue gap below which the decomposition is abandoned.
pub const DEFECTIVE_GAP: f64 = 1e-6;
/// Narrowest composite width that is still resolved, Hz.
pub const FWHM_FLOOR_HZ: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("empty frequency grid")]
    EmptyGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrtSystem {
    /// Coefficient matrix, rad/s.
    pub matrix: Matrix3<C>,
    pub r0: Vector3<C>,
    /// Eigenvalues, rad/s. Filled by [`decompose`].
    pub eigenvalues: [C; 3],
    /// Columns are right eigenvectors.
    pub right_vecs: Matrix3<C>,
    /// Rows are left eigenvectors with ⟨ĩ|j⟩ = δij.
    pub left_vecs: Matrix3<C>,
    pub weights: [C; 3],
    pub defective: bool,
    pub decomposed: bool,
}

pub fn build_qrt(p: &SystemParams, s: &CumulantState) -> QrtSystem {
    let w = p.angular();
    let i = C::i();
    let z = C::new(0.0, 0.0);
    let gam = w.gamma_total();
    // An inert cavity b is parked on a decoupled, lossy diagonal entry so its
    // zero-weight pole does not pose as a zero-width line.
    let bb = if p.b_inert() {
        C::new(-w.kappa_a / 2.0, 0.0)
    } else {
        C::new(-w.kappa_b / 2.0, w.delta_b)
    };
    let matrix = Matrix3::new(
        C::new(-w.kappa_a / 2.0, w.delta_a),
        i * w.n * w.g,
        i * w.big_g,
        i * w.g - 2.0 * i * w.g * s.pop,
        C::new(-gam / 2.0, 0.0),
        z,
        i * w.big_g,
        z,
        bb,
    );
    QrtSystem {
        matrix,
        r0: Vector3::new(C::new(s.n_a, 0.0), s.as_.conj(), s.ab.conj()),
        eigenvalues: [z; 3],
        right_vecs: Matrix3::zeros(),
        left_vecs: Matrix3::zeros(),
        weights: [z; 3],
        defective: false,
        decomposed: false,
    }
}

/// Unconjugated 3-vector product uᵀv.
fn dot(u: &Vector3<C>, v: &Vector3<C>) -> C {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn cross(u: &Vector3<C>, v: &Vector3<C>) -> Vector3<C> {
    Vector3::new(
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )
}

/// Null vector of a rank-2 matrix from the best-conditioned pair of rows,
/// refined by inverse iteration.
fn null_vector(a: &Matrix3<C>) -> Vector3<C> {
    let rows: Vec<Vector3<C>> = (0..3).map(|k| a.row(k).transpose()).collect();
    let mut best = Vector3::zeros();
    let mut best_score = -1.0;
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let c = cross(&rows[p], &rows[q]);
        let denom = rows[p].norm() * rows[q].norm();
        let score = if denom > 0.0 { c.norm() / denom } else { 0.0 };
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    if best.norm() == 0.0 {
        // Two or more rows vanish: pick the coordinate axis orthogonal to the rest.
        let k = (0..3)
            .min_by(|&i, &j| a.column(i).norm().total_cmp(&a.column(j).norm()))
            .unwrap();
        best = Vector3::zeros();
        best[k] = C::new(1.0, 0.0);
    }
    let mut v = best / C::new(best.norm(), 0.0);
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let shifted = a + Matrix3::identity() * C::new(scale * 1e-14, 0.0);
    let lu = shifted.lu();
    for _ in 0..2 {
        if let Some(x) = lu.solve(&v) {
            let n = x.norm();
            if n.is_finite() && n > 0.0 {
                v = x / C::new(n, 0.0);
            }
        }
    }
    v
}

fn eigenvalues3(m: &Matrix3<C>) -> [C; 3] {
    let schur = nalgebra::Schur::new(*m);
    let ev = schur
        .eigenvalues()
        .expect("complex Schur form is triangular");
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    out
}

pub fn decompose(mut q: QrtSystem) -> QrtSystem {
    let lam = eigenvalues3(&q.matrix);
    q.eigenvalues = lam;
    q.decomposed = true;
    let radius = lam.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let mut gap = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            gap = gap.min((lam[a] - lam[b]).norm());
        }
    }
    q.defective = gap < DEFECTIVE_GAP * radius;
    if q.defective {
        q.weights = [C::new(0.0, 0.0); 3];
        return q;
    }
    for k in 0..3 {
        let shifted = q.matrix - Matrix3::identity() * lam[k];
        let v = null_vector(&shifted);
        let u = null_vector(&shifted.transpose());
        let norm = dot(&u, &v);
        let u = u / norm;
        q.right_vecs.set_column(k, &v);
        q.left_vecs.set_row(k, &u.transpose());
        q.weights[k] = v[0] * dot(&u, &q.r0);
    }
    q
}

impl QrtSystem {
    /// ⟨a†(t)a(0)⟩ from the pole expansion.
    pub fn correlation(&self, t: f64) -> C {
        (0..3).map(|k| self.weights[k] * (self.eigenvalues[k] * t).exp()).sum()
    }

    /// Spectral density at an offset `nu_hz`, as a function of ω = 2πν.
    pub fn density(&self, nu_hz: f64) -> f64 {
        let nu = TWO_PI * nu_hz;
        if self.defective || !self.decomposed {
            // Laplace transform of the propagated correlation, evaluated
            // exactly through the resolvent.
            let m = Matrix3::identity() * C::new(0.0, nu) - self.matrix;
            return match m.lu().solve(&self.r0) {
                Some(x) => 2.0 * x[0].re,
                None => f64::INFINITY,
            };
        }
        (0..3)
            .map(|k| {
                let l = self.eigenvalues[k];
                (2.0 * self.weights[k] / C::new(-l.re, nu - l.im)).re
            })
            .sum()
    }

    /// Full widths 2|Re λ| of the poles, Hz.
    pub fn pole_widths_hz(&self) -> [f64; 3] {
        self.eigenvalues.map(|l| 2.0 * l.re.abs() / TWO_PI)
    }

    /// Centre and width (Hz) of the narrowest pole that carries weight.
    pub fn narrow_pole(&self) -> (f64, f64) {
        let total: f64 = self.weights.iter().map(|w| w.norm()).sum();
        let widths = self.pole_widths_hz();
        let mut best = (0.0, f64::INFINITY);
        for k in 0..3 {
            let carries = self.defective || total == 0.0 || self.weights[k].norm() > 1e-9 * total;
            if carries && widths[k] < best.1 {
                best = (self.eigenvalues[k].im / TWO_PI, widths[k]);
            }
        }
        best
    }

    pub fn max_growth(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn spectrum_curve(q: &QrtSystem, grid_hz: &[f64]) -> Result<Vec<f64>, SpectrumError> {
    if grid_hz.is_empty() {
        return Err(SpectrumError::EmptyGrid);
    }
    Ok(grid_hz.iter().map(|&nu| q.density(nu)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QrtLinewidth {
    /// 2|Re λᵢ|, Hz.
    pub per_pole: [f64; 3],
    pub composite_fwhm: f64,
    pub peak_hz: f64,
    /// Composite width fell below the grid floor; `composite_fwhm` then
    /// carries the narrowest per-pole width.
    pub unresolved: bool,
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Walk away from `peak` in direction `dir` until the density falls under
/// `half`, then bisect the crossing.
fn half_crossing<F: Fn(f64) -> f64>(f: &F, peak: f64, half: f64, step0: f64, dir: f64) -> Option<f64> {
    let mut inner = peak;
    let mut step = step0;
    let mut outer = peak + dir * step;
    let mut k = 0;
    while f(outer) >= half {
        inner = outer;
        step *= 2.0;
        outer = peak + dir * step;
        k += 1;
        if k > 200 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if f(mid) >= half {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    Some(0.5 * (inner + outer))
}

pub fn linewidth_qrt(q: &QrtSystem) -> QrtLinewidth {
    let per_pole = q.pole_widths_hz();
    let (centre, narrow) = q.narrow_pole();
    let f = |nu: f64| q.density(nu);
    if !(narrow >= FWHM_FLOOR_HZ) {
        return QrtLinewidth {
            per_pole,
            composite_fwhm: narrow,
            peak_hz: centre,
            unresolved: true,
        };
    }
    // Global peak among the pole centres, then a local polish.
    let mut peak = centre;
    let mut best = f(centre);
    let mut window = narrow;
    for k in 0..3 {
        let c = q.eigenvalues[k].im / TWO_PI;
        let v = f(c);
        if v > best {
            best = v;
            peak = c;
            window = per_pole[k].max(FWHM_FLOOR_HZ);
        }
    }
    peak = golden_max(&f, peak - window, peak + window);
    let half = 0.5 * f(peak);
    let step0 = (0.25 * narrow).max(FWHM_FLOOR_HZ);
    match (
        half_crossing(&f, peak, half, step0, 1.0),
        half_crossing(&f, peak, half, step0, -1.0),
    ) {
        (Some(r), Some(l)) if r - l >= FWHM_FLOOR_HZ => QrtLinewidth {
            per_pole,
            composite_fwhm: r - l,
            peak_hz: peak,
            unresolved: false,
        },
        _ => QrtLinewidth {
            per_pole,
            composite_fwhm: narrow,
            peak_hz: peak,
            unresolved: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticLinewidth {
    /// Compact form, Hz.
    pub compact: f64,
    /// Expanded-fraction form, Hz; identical to `compact` up to rounding.
    pub expanded: f64,
    /// EP-specialised form, present when the parameters classify as the EP.
    pub ep_form: Option<f64>,
    /// ⟨Jz⟩/ħ used in the formulas.
    pub jz: f64,
}

/// Analytic linewidth from the steady inversion.
///
/// With cavity b inert the single-cavity limit (Γ − 2ΓcJz)/(1 + Γ/κa),
/// Γc = 4g²/κa, is returned in every field.
pub fn linewidth_analytic(p: &SystemParams, s: &CumulantState) -> AnalyticLinewidth {
    let n = p.n();
    let jz = n * (s.pop - 0.5);
    let gam = p.gamma_total();
    let (ka, kb, g, gg) = (p.kappa_a, p.kappa_b, p.coupling_big_g, p.coupling_g);
    if p.b_inert() {
        let gc = 4.0 * gg * gg / ka;
        let v = (gam - 2.0 * gc * jz) / (1.0 + gam / ka);
        return AnalyticLinewidth {
            compact: v,
            expanded: (ka * gam + 4.0 * gg * gg * n * (1.0 - 2.0 * s.pop)) / (ka + gam),
            ep_form: None,
            jz,
        };
    }
    let d = 4.0 * g * g + ka * kb;
    let gc = 4.0 * gg * gg * kb / d;
    let compact = (gam - 2.0 * gc * jz) / (1.0 + (ka + kb) * gam / d - 2.0 * jz * gc / kb);
    let inv = 1.0 - 2.0 * s.pop;
    let expanded = (d * gam + 4.0 * gg * gg * n * kb * inv) / (4.0 * g * g + (ka + kb) * gam + ka * kb + 4.0 * gg * gg * n * inv);
    let ep_form = match ptsym::classify(p, ptsym::DEFAULT_TOL_REL) {
        Ok(Phase::ExceptionalPoint) => {
            let gc_ep = 16.0 * gg * gg * kb / ((ka + kb) * (ka + kb));
            Some((gam - 2.0 * gc_ep * jz) / (1.0 + 4.0 * gam / (ka + kb) - 2.0 * jz * gc_ep / kb))
        }
        _ => None,
    };
    AnalyticLinewidth { compact, expanded, ep_form, jz }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{steady_state, DEFAULT_STEADY_TOL};

    fn check_decomposition(q: &QrtSystem) {
        let mut rec = Matrix3::zeros();
        for k in 0..3 {
            let v = q.right_vecs.column(k).into_owned();
            let u = q.left_vecs.row(k).into_owned();
            rec += v * u * q.eigenvalues[k];
        }
        let scale = q.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = (rec - q.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9 * scale, "reconstruction {err:e}");
        let bi = q.left_vecs * q.right_vecs;
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((bi[(r, c)] - want).norm() < 1e-10, "biorth ({r},{c}) {}", bi[(r, c)]);
            }
        }
    }

    #[test]
    fn decoupled_is_diagonal() {
        let p = SystemParams {
            coupling_g: 0.0,
            coupling_big_g: 0.0,
            delta_a: 10.0,
            ..Default::default()
        };
        let s = CumulantState {
            n_a: 2.0,
            pop: 0.3,
            ..Default::default()
        };
        let q = decompose(build_qrt(&p, &s));
        let w = p.angular();
        let want = [
            C::new(-w.gamma_total() / 2.0, 0.0),
            C::new(-w.kappa_b / 2.0, 0.0),
            C::new(-w.kappa_a / 2.0, w.delta_a),
        ];
        for (a, b) in q.eigenvalues.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9 * b.norm());
        }
        let k = q.eigenvalues.iter().position(|l| l.im != 0.0).unwrap();
        assert!((q.weights[k] - 2.0).norm() < 1e-12);
        check_decomposition(&q);
    }

    #[test]
    fn transparency_point() {
        let s = CumulantState {
            pop: 0.5,
            ..Default::default()
        };
        let q = build_qrt(&SystemParams::default(), &s);
        assert_eq!(q.matrix[(1, 0)], C::new(0.0, 0.0));
    }

    #[test]
    fn ep_pipeline() {
        let p = SystemParams::ep(18.0);
        let s = steady_state(&p, DEFAULT_STEADY_TOL).unwrap();
        let q = decompose(build_qrt(&p, &s));
        assert!(!q.defective);
        check_decomposition(&q);
        let sum: C = q.weights.iter().sum();
        assert!((sum.re / s.n_a - 1.0).abs() < 1e-8 && sum.im.abs() < 1e-8 * s.n_a);
        assert!(q.max_growth() < 0.0);
        let lw = linewidth_qrt(&q);
        let an = linewidth_analytic(&p, &s);
        // Prototype value from numpy eigvals on the same matrix.
        assert!((lw.composite_fwhm / 9.345e-6 - 1.0).abs() < 2e-3, "{}", lw.composite_fwhm);
        assert!((an.compact / lw.composite_fwhm - 1.0).abs() < 1e-3);
        assert!((an.expanded / an.compact - 1.0).abs() < 1e-9);
        assert!((an.ep_form.unwrap() / an.compact - 1.0).abs() < 1e-9);
        // Pole expansion against the matrix exponential.
        for t in [1e-6, 1e-4, 1e-2] {
            let direct = (q.matrix * C::new(t, 0.0)).exp() * q.r0;
            assert!((q.correlation(t) - direct[0]).norm() < 1e-8 * s.n_a, "t={t}");
        }
    }

    #[test]
    fn ptbp_three_distinct_poles() {
        let p = SystemParams::ptbp(18.0);
        let s = steady_state(&p, DEFAULT_STEADY_TOL).unwrap();
        let q = decompose(build_qrt(&p, &s));
        assert!(!q.defective);
        check_decomposition(&q);
        let lw = linewidth_qrt(&q);
        assert!(lw.composite_fwhm > 3e-5 && lw.composite_fwhm < 3e-4);
    }

    #[test]
    fn single_pole_lorentzian() {
        let p = SystemParams {
            coupling_g: 0.0,
            coupling_big_g: 0.0,
            ..Default::default()
        };
        let s = CumulantState {
            n_a: 3.0,
            ..Default::default()
        };
        let q = decompose(build_qrt(&p, &s));
        let lw = linewidth_qrt(&q);
        assert!((lw.composite_fwhm / p.kappa_a - 1.0).abs() < 1e-9);
        let peak = q.density(0.0);
        let ka = TWO_PI * p.kappa_a;
        assert!((peak / (4.0 * 3.0 / ka) - 1.0).abs() < 1e-12);
        // ∫ S dω = 2π n_a on a wide grid.
        let n = 400_001;
        let span = 2000.0 * p.kappa_a;
        let h = 2.0 * span / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|k| -span + k as f64 * h).collect();
        let s_vals = spectrum_curve(&q, &grid).unwrap();
        let integral: f64 = s_vals.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h * TWO_PI).sum();
        assert!((integral / (TWO_PI * 3.0) - 1.0).abs() < 1e-3, "{integral}");
        assert_eq!(spectrum_curve(&q, &[]), Err(SpectrumError::EmptyGrid));
    }

    #[test]
    fn resolvent_matches_pole_sum() {
        let p = SystemParams::ep(10.0);
        let s = steady_state(&p, DEFAULT_STEADY_TOL).unwrap();
        let q = decompose(build_qrt(&p, &s));
        let mut r = q.clone();
        r.defective = true;
        for nu in [0.0, 3e-6, -1e-5, 2.0, 1e4] {
            let a = q.density(nu);
            let b = r.density(nu);
            assert!((a - b).abs() < 1e-5 * a.abs().max(1e-30), "{nu}: {a} {b}");
        }
    }

    #[test]
    fn zero_inversion_reduction() {
        let p = SystemParams::ptbp(5.0);
        let s = CumulantState {
            pop: 0.5,
            ..Default::default()
        };
        let an = linewidth_analytic(&p, &s);
        let gam = p.gamma_total();
        let d = 4.0 * p.coupling_big_g.powi(2) + p.kappa_a * p.kappa_b;
        let want = gam / (1.0 + (p.kappa_a + p.kappa_b) * gam / d);
        assert!((an.compact / want - 1.0).abs() < 1e-14);
        assert!(an.ep_form.is_none());
    }
}
