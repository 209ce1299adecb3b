//! Filter-cavity spectroscopy: a weakly coupled resonator f is added to the
//! cumulant system, its steady photon number is scanned against detuning and
//! fitted with a Lorentzian. Pulling and atom-number sensitivity are built on
//! top of the scan.

use crate::cumulant::{self, CumulantError, CumulantState, SteadyOptions, STATE_DIM};
use crate::field::PolyField;
use crate::model::{ParamError, SystemParams, TWO_PI};
use crate::spectrum;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const AUG_DIM: usize = STATE_DIM + 7;
/// Filter photon number aimed for at the scan peak, relative to ⟨a†a⟩.
pub const PROBE_FRACTION: f64 = 1e-4;
pub const KAPPA_F_MIN_HZ: f64 = 1e-9;
pub const POOR_FIT_RATIO: f64 = 0.1;
const COARSE_POINTS: usize = 31;
const COARSE_HALF_SPAN: f64 = 20.0;
const FINE_POINTS: usize = 61;
const FINE_HALF_SPAN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
    #[error("filter `{0}` must be positive and finite")]
    BadFilter(&'static str),
    #[error("empty detuning grid")]
    EmptyGrid,
    #[error("grid spans {span:.3e} Hz, need at least {needed:.3e} Hz (10 estimated linewidths)")]
    GridTooNarrow { span: f64, needed: f64 },
    #[error("Lorentzian fit residual is {ratio:.3} of the peak amplitude")]
    PoorFit { ratio: f64, rows: Vec<ScanRow> },
    #[error("Lorentzian fit failed: {0}")]
    FitFailed(String),
    #[error("peak at {peak:.6e} Hz is not bracketed by the grid [{lo:.6e}, {hi:.6e}] Hz")]
    NotBracketed { peak: f64, lo: f64, hi: f64 },
    #[error("need at least {need} points, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("no lasing point left to fit")]
    NoLasingPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterParams {
    /// ωf − ωσ, Hz.
    pub delta_f: f64,
    pub beta: f64,
    pub kappa_f: f64,
}

impl FilterParams {
    /// Defaults sized by a linewidth estimate (Hz): κf a tenth of it, and β
    /// such that the filter holds about 10⁻⁴ of the cavity-a photons on
    /// resonance.
    pub fn for_linewidth(linewidth: f64) -> Self {
        let kappa_f = (linewidth / 10.0).max(KAPPA_F_MIN_HZ);
        let beta = (PROBE_FRACTION * kappa_f * (linewidth + kappa_f) / 4.0).sqrt();
        Self {
            delta_f: 0.0,
            beta,
            kappa_f,
        }
    }

    /// Errors on invalid values; returns advisories otherwise.
    pub fn validate(&self, linewidth_est: Option<f64>) -> Result<Vec<String>, FilterError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(FilterError::BadFilter("beta"));
        }
        if !(self.kappa_f > 0.0 && self.kappa_f.is_finite()) {
            return Err(FilterError::BadFilter("kappa_f"));
        }
        if !self.delta_f.is_finite() {
            return Err(FilterError::BadFilter("delta_f"));
        }
        let mut notes = Vec::new();
        if let Some(lw) = linewidth_est {
            if self.kappa_f > 0.2 * lw {
                notes.push(format!(
                    "kappa_f = {:.3e} Hz exceeds 0.2 x the estimated linewidth {:.3e} Hz",
                    self.kappa_f, lw
                ));
            }
        }
        Ok(notes)
    }

    pub fn at(&self, delta_f: f64) -> Self {
        Self { delta_f, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AugmentedState {
    pub main: CumulantState,
    pub n_f: f64,
    /// ⟨a†f⟩
    pub af: C,
    /// ⟨b†f⟩
    pub bf: C,
    /// ⟨σ₁⁺f⟩
    pub sf: C,
}

impl AugmentedState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.main.to_vec();
        v.extend([
            self.n_f, self.af.re, self.af.im, self.bf.re, self.bf.im, self.sf.re, self.sf.im,
        ]);
        v
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let t = &y[STATE_DIM..];
        Self {
            main: CumulantState::from_slice(&y[..STATE_DIM]),
            n_f: t[0],
            af: C::new(t[1], t[2]),
            bf: C::new(t[3], t[4]),
            sf: C::new(t[5], t[6]),
        }
    }
}

/// Cumulant equations with the filter block and the β back-action terms.
pub fn augmented_field(p: &SystemParams, fp: &FilterParams) -> PolyField {
    let w = p.angular();
    let mut f = PolyField::new();
    let s = cumulant::build_into(&mut f, &w, p.b_inert());
    let nf = f.real();
    let af = f.complex();
    let bf = f.complex();
    let sf = f.complex();
    let i = C::i();
    let beta = TWO_PI * fp.beta;
    let kf = TWO_PI * fp.kappa_f;
    let delta = TWO_PI * fp.delta_f;
    let gam = w.gamma_total();

    f.lin(nf, af, 2.0 * i * beta);
    f.lin(nf, nf, C::new(-kf, 0.0));

    f.lin(af, bf, i * w.big_g);
    f.lin(af, af, C::new(-0.5 * (w.kappa_a + kf), w.delta_a - delta));
    f.lin(af, nf, i * beta);
    f.lin(af, s.na, -i * beta);
    f.lin(af, sf, i * w.n * w.g);

    f.lin(bf, bf, C::new(-0.5 * (w.kappa_b + kf), w.delta_b - delta));
    f.lin(bf, af, i * w.big_g);
    f.lin_conj(bf, s.ab, -i * beta);

    f.lin(sf, af, i * w.g);
    f.lin_conj(sf, s.x, -i * beta);
    f.lin(sf, sf, C::new(-0.5 * (gam + kf), -delta));
    f.prod(sf, s.pop, af, -2.0 * i * w.g);

    f.lin(s.na, af, -2.0 * i * beta);
    f.lin_conj(s.ab, bf, i * beta);
    f.lin_conj(s.x, sf, i * beta);

    if p.b_inert() {
        f.pin(bf, w.kappa_a);
    }
    f
}

/// Time derivative of the augmented state, rad/s units.
pub fn augmented_rhs(
    state: &AugmentedState,
    p: &SystemParams,
    fp: &FilterParams,
) -> Result<AugmentedState, FilterError> {
    let y = state.to_vec();
    if let Some(k) = y.iter().position(|v| !v.is_finite()) {
        return Err(CumulantError::NonFinite(AUG_NAMES[k]).into());
    }
    Ok(AugmentedState::from_slice(&augmented_field(p, fp).eval_vec(&y)))
}

const AUG_NAMES: [&str; AUG_DIM] = [
    "n_a", "n_b", "ab", "ab", "as_", "as_", "bs", "bs", "pop", "corr", "corr", "pair", "n_f", "af", "af", "bf",
    "bf", "sf", "sf",
];

fn filter_slots() -> std::ops::Range<usize> {
    STATE_DIM..AUG_DIM
}

/// Filter variables that solve their (linear) block with the main state held.
fn seed_filter(f: &PolyField, main: &CumulantState) -> Vec<f64> {
    let mut y = main.to_vec();
    y.extend([0.0; 7]);
    let f0 = f.eval_vec(&y);
    let jac = f.jacobian_mat(&y);
    let r = filter_slots();
    let a = DMatrix::from_fn(7, 7, |i, j| jac[(r.start + i, r.start + j)]);
    let b = DVector::from_iterator(7, r.clone().map(|i| -f0[i]));
    if let Some(x) = crate::ode::solve_scaled(&a, &b) {
        for (k, v) in x.iter().enumerate() {
            y[r.start + k] = *v;
        }
    }
    y
}

/// Steady state of the augmented system, seeded from a main-system steady
/// state.
pub fn filter_steady(
    p: &SystemParams,
    fp: &FilterParams,
    main: &CumulantState,
) -> Result<AugmentedState, FilterError> {
    let f = augmented_field(p, fp);
    let y0 = seed_filter(&f, main);
    let out = cumulant::solve_field(&f, &y0, &SteadyOptions::default())?;
    Ok(AugmentedState::from_slice(&out.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub delta_f: f64,
    pub n_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzFit {
    pub peak_freq: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// RMS misfit over the amplitude.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanFit {
    pub peak_freq: f64,
    pub fwhm_raw: f64,
    pub fwhm_deconvolved: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterScan {
    pub filter: FilterParams,
    pub rows: Vec<ScanRow>,
    pub fit: ScanFit,
}

fn lorentz(x: f64, q: &Vector4<f64>) -> f64 {
    let u = (x - q[0]) / q[1];
    q[2] / (1.0 + u * u) + q[3]
}

/// Least-squares fit of A / (1 + ((x − x0)/(w/2))²) + c by
/// Levenberg–Marquardt on normalised axes.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<LorentzFit, FilterError> {
    let n = x.len();
    if n < 5 || y.len() != n {
        return Err(FilterError::TooFew { need: 5, got: n.min(y.len()) });
    }
    let (xlo, xhi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let xm = 0.5 * (xlo + xhi);
    let xs = 0.5 * (xhi - xlo);
    let ys = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(xs > 0.0) || !(ys > 0.0) || !xs.is_finite() || !ys.is_finite() {
        return Err(FilterError::FitFailed("degenerate data".into()));
    }
    let u: Vec<f64> = x.iter().map(|v| (v - xm) / xs).collect();
    let v: Vec<f64> = y.iter().map(|w| w / ys).collect();

    let imax = (0..n).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp = v[imax] - vmin;
    let half = vmin + 0.5 * amp;
    let mut lo = imax;
    while lo > 0 && v[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < n && v[hi + 1] >= half {
        hi += 1;
    }
    let spacing = 2.0 / (n as f64 - 1.0);
    let hw0 = (0.5 * (u[hi] - u[lo])).max(spacing);
    let mut q = Vector4::new(u[imax], hw0, amp, vmin);

    let sse = |q: &Vector4<f64>| -> f64 { u.iter().zip(&v).map(|(a, b)| (lorentz(*a, q) - b).powi(2)).sum() };
    let mut cost = sse(&q);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (a, b) in u.iter().zip(&v) {
            let d = (a - q[0]) / q[1];
            let den = 1.0 + d * d;
            let r = q[2] / den + q[3] - b;
            let dl = q[2] * 2.0 * d / (den * den);
            let jr = Vector4::new(dl / q[1], dl * d / q[1], 1.0 / den, 1.0);
            jtj += jr * jr.transpose();
            jtr += jr * r;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for k in 0..4 {
                m[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = m.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = q + step;
            let c = sse(&trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                q = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15 && step.norm() > 1e-15 * q.norm();
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !q.iter().all(|v| v.is_finite()) || q[1] == 0.0 || q[2] <= 0.0 {
        return Err(FilterError::FitFailed("no peak in the data".into()));
    }
    let amplitude = q[2] * ys;
    let rms = (cost / n as f64).sqrt() * ys;
    Ok(LorentzFit {
        peak_freq: xm + q[0] * xs,
        fwhm: 2.0 * q[1].abs() * xs,
        amplitude,
        offset: q[3] * ys,
        residual: rms / amplitude,
    })
}

/// Linewidth and peak estimate from the regression spectrum, Hz.
pub fn estimate(p: &SystemParams, main: &CumulantState) -> (f64, f64) {
    let q = spectrum::decompose(spectrum::build_qrt(p, main));
    let lw = spectrum::linewidth_qrt(&q);
    let width = if lw.composite_fwhm.is_finite() && lw.composite_fwhm > 0.0 {
        lw.composite_fwhm
    } else {
        q.narrow_pole().1
    };
    (lw.peak_hz, width.max(KAPPA_F_MIN_HZ))
}

fn solve_rows(
    p: &SystemParams,
    base: &FilterParams,
    main: &CumulantState,
    grid: &[f64],
) -> Result<Vec<ScanRow>, FilterError> {
    grid.par_iter()
        .map(|&d| {
            let s = filter_steady(p, &base.at(d), main)?;
            Ok(ScanRow { delta_f: d, n_f: s.n_f })
        })
        .collect()
}

fn fit_rows(rows: Vec<ScanRow>, base: &FilterParams) -> Result<FilterScan, FilterError> {
    let x: Vec<f64> = rows.iter().map(|r| r.delta_f).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.n_f).collect();
    let fit = fit_lorentzian(&x, &y)?;
    if fit.residual > POOR_FIT_RATIO {
        return Err(FilterError::PoorFit {
            ratio: fit.residual,
            rows,
        });
    }
    Ok(FilterScan {
        filter: *base,
        rows,
        fit: ScanFit {
            peak_freq: fit.peak_freq,
            fwhm_raw: fit.fwhm,
            fwhm_deconvolved: fit.fwhm - base.kappa_f,
            amplitude: fit.amplitude,
            offset: fit.offset,
            fit_residual: fit.residual,
        },
    })
}

/// Scan a caller-supplied detuning grid (Hz).
pub fn spectrum_scan(p: &SystemParams, base: &FilterParams, grid: &[f64]) -> Result<FilterScan, FilterError> {
    p.validate()?;
    if grid.is_empty() {
        return Err(FilterError::EmptyGrid);
    }
    let main = cumulant::solve_steady(p, &SteadyOptions::default())?.state;
    let (_, width) = estimate(p, &main);
    base.validate(Some(width))?;
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 10.0 * width {
        return Err(FilterError::GridTooNarrow {
            span: hi - lo,
            needed: 10.0 * width,
        });
    }
    fit_rows(solve_rows(p, base, &main, grid)?, base)
}

fn linspace(c: f64, half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| c - half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

/// Two-pass scan centred on the regression estimate: a coarse bracketing
/// grid, then a fine grid around its maximum. With `base = None` the
/// filter is sized by [`FilterParams::for_linewidth`].
pub fn adaptive_scan(p: &SystemParams, base: Option<FilterParams>) -> Result<FilterScan, FilterError> {
    p.validate()?;
    let main = cumulant::solve_steady(p, &SteadyOptions::default())?.state;
    let (centre, width) = estimate(p, &main);
    let base = base.unwrap_or_else(|| FilterParams::for_linewidth(width));
    base.validate(Some(width))?;
    let coarse = linspace(centre, COARSE_HALF_SPAN * width, COARSE_POINTS);
    let rows = solve_rows(p, &base, &main, &coarse)?;
    let k = (0..rows.len()).max_by(|&a, &b| rows[a].n_f.total_cmp(&rows[b].n_f)).unwrap();
    if k == 0 || k + 1 == rows.len() {
        return Err(FilterError::NotBracketed {
            peak: rows[k].delta_f,
            lo: coarse[0],
            hi: coarse[coarse.len() - 1],
        });
    }
    let fine = linspace(rows[k].delta_f, FINE_HALF_SPAN * width, FINE_POINTS);
    let scan = fit_rows(solve_rows(p, &base, &main, &fine)?, &base)?;
    let (lo, hi) = (fine[0], fine[fine.len() - 1]);
    if !(lo..=hi).contains(&scan.fit.peak_freq) {
        return Err(FilterError::NotBracketed {
            peak: scan.fit.peak_freq,
            lo,
            hi,
        });
    }
    Ok(scan)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullRow {
    pub offset: f64,
    pub lasing: bool,
    pub peak_freq: Option<f64>,
    pub fwhm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pulling {
    /// ∂ωs/∂ωa from a least-squares line through the lasing rows.
    pub slope: f64,
    pub intercept: f64,
    pub rows: Vec<PullRow>,
}

/// Ordinary least-squares line, (slope, intercept).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Peak frequency of the filter scan against cavity-a detuning offsets (Hz).
/// Offsets that push the system out of the lasing window are reported and
/// left out of the fit.
pub fn pulling_factor(
    p: &SystemParams,
    base: Option<FilterParams>,
    offsets: &[f64],
) -> Result<Pulling, FilterError> {
    if offsets.len() < 3 {
        return Err(FilterError::TooFew {
            need: 3,
            got: offsets.len(),
        });
    }
    let mut rows = Vec::with_capacity(offsets.len());
    for &off in offsets {
        let q = SystemParams { delta_a: off, ..*p };
        let lasing = q.in_lasing_window();
        if !lasing {
            rows.push(PullRow {
                offset: off,
                lasing,
                peak_freq: None,
                fwhm: None,
                error: Some("outside the lasing window".into()),
            });
            continue;
        }
        match adaptive_scan(&q, base) {
            Ok(s) => rows.push(PullRow {
                offset: off,
                lasing,
                peak_freq: Some(s.fit.peak_freq),
                fwhm: Some(s.fit.fwhm_deconvolved),
                error: None,
            }),
            Err(e @ FilterError::NotBracketed { .. }) => return Err(e),
            Err(e) => rows.push(PullRow {
                offset: off,
                lasing,
                peak_freq: None,
                fwhm: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.peak_freq.map(|pk| (r.offset, pk)))
        .unzip();
    if x.len() < 2 {
        return Err(FilterError::NoLasingPoints);
    }
    let (slope, intercept) = line_fit(&x, &y);
    Ok(Pulling { slope, intercept, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomRow {
    pub atom_count: u64,
    pub lasing: bool,
    pub linewidth: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSweep {
    pub rows: Vec<AtomRow>,
    /// Half of the max − min linewidth over the good rows, Hz.
    pub spread: f64,
    /// Max − min, Hz.
    pub range: f64,
    /// Linewidth nonincreasing in N over the good rows.
    pub monotone: bool,
}

/// Filter-scan linewidth for each atom number.
pub fn linewidth_vs_atoms(
    p: &SystemParams,
    base: Option<FilterParams>,
    n_grid: &[u64],
) -> Result<AtomSweep, FilterError> {
    if n_grid.is_empty() {
        return Err(FilterError::EmptyGrid);
    }
    let rows: Vec<AtomRow> = n_grid
        .iter()
        .map(|&n| {
            let q = SystemParams { atom_count: n, ..*p };
            let lasing = q.in_lasing_window();
            if !lasing {
                return AtomRow {
                    atom_count: n,
                    lasing,
                    linewidth: None,
                    error: Some("outside the lasing window".into()),
                };
            }
            match adaptive_scan(&q, base) {
                Ok(s) => AtomRow {
                    atom_count: n,
                    lasing,
                    linewidth: Some(s.fit.fwhm_deconvolved),
                    error: None,
                },
                Err(e) => AtomRow {
                    atom_count: n,
                    lasing,
                    linewidth: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut good: Vec<(u64, f64)> = rows.iter().filter_map(|r| r.linewidth.map(|l| (r.atom_count, l))).collect();
    good.sort_by_key(|r| r.0);
    let (lo, hi) = good
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
    let range = if good.is_empty() { 0.0 } else { hi - lo };
    let monotone = good.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(AtomSweep {
        rows,
        spread: range / 2.0,
        range,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitter_recovers_synthetic_lorentzian() {
        let (x0, fw, a, c) = (3.2e-6, 1.7e-5, 0.37, 2e-3);
        let x: Vec<f64> = (0..61).map(|k| x0 - 7e-5 + 1.4e-4 * k as f64 / 60.0 + 1.1e-6).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| a / (1.0 + (2.0 * (v - x0) / fw).powi(2)) + c)
            .collect();
        let f = fit_lorentzian(&x, &y).unwrap();
        assert!(((f.peak_freq - x0) / fw).abs() < 1e-6);
        assert!((f.fwhm / fw - 1.0).abs() < 1e-6);
        assert!((f.amplitude / a - 1.0).abs() < 1e-6);
        assert!((f.offset / c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_beta_filter_stays_dark() {
        let p = SystemParams::ep(18.0);
        let main = cumulant::steady_state(&p, 1e-8).unwrap();
        let fp = FilterParams {
            delta_f: 0.0,
            beta: 0.0,
            kappa_f: 1e-6,
        };
        let f = augmented_field(&p, &fp);
        let y = seed_filter(&f, &main);
        assert!(y[STATE_DIM..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn back_action_is_small() {
        let p = SystemParams::ep(18.0);
        let main = cumulant::steady_state(&p, 1e-8).unwrap();
        let (centre, width) = estimate(&p, &main);
        let fp = FilterParams::for_linewidth(width).at(centre);
        let s = filter_steady(&p, &fp, &main).unwrap();
        assert!((s.main.n_a / main.n_a - 1.0).abs() < 1e-2);
        assert!(s.n_f > 0.0);
    }
}
