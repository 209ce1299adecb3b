//! Second-order cumulant equations for the two-cavity laser, their stiff
//! integration and steady states.

use crate::field::{PolyField, Slot};
use crate::model::{Angular, ParamError, SystemParams};
use crate::ode::{self, NewtonControl, OdeError, StepControl};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

/// Tolerated closure overshoot of physical bounds.
pub const EPS_BOUND: f64 = 1e-6;
pub const DEFAULT_STEADY_TOL: f64 = 1e-8;
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CumulantError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("non-finite state component `{0}`")]
    NonFinite(&'static str),
    #[error("steady state not found (final scaled residual {residual:.3e} 1/s)")]
    NoConvergence { residual: f64 },
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("`{field}` = {value:.6e} violates its physical bound")]
    Bounds { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CumulantState {
    pub n_a: f64,
    pub n_b: f64,
    pub ab: C,
    pub as_: C,
    pub bs: C,
    pub pop: f64,
    pub corr: C,
    pub pair: f64,
}

pub const STATE_DIM: usize = 12;

impl CumulantState {
    pub fn ground() -> Self {
        Self::default()
    }

    /// Every atom excited, fields empty.
    pub fn excited() -> Self {
        Self {
            pop: 1.0,
            pair: 1.0,
            ..Self::default()
        }
    }

    /// Half inversion without coherence.
    pub fn half() -> Self {
        Self {
            pop: 0.5,
            pair: 0.25,
            ..Self::default()
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.n_a,
            self.n_b,
            self.ab.re,
            self.ab.im,
            self.as_.re,
            self.as_.im,
            self.bs.re,
            self.bs.im,
            self.pop,
            self.corr.re,
            self.corr.im,
            self.pair,
        ]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            n_a: y[0],
            n_b: y[1],
            ab: C::new(y[2], y[3]),
            as_: C::new(y[4], y[5]),
            bs: C::new(y[6], y[7]),
            pop: y[8],
            corr: C::new(y[9], y[10]),
            pair: y[11],
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            ab: self.ab.conj(),
            as_: self.as_.conj(),
            bs: self.bs.conj(),
            corr: self.corr.conj(),
            ..*self
        }
    }

    pub fn check_finite(&self) -> Result<(), CumulantError> {
        let parts: [(&'static str, f64); 12] = [
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("ab", self.ab.re),
            ("ab", self.ab.im),
            ("as_", self.as_.re),
            ("as_", self.as_.im),
            ("bs", self.bs.re),
            ("bs", self.bs.im),
            ("pop", self.pop),
            ("corr", self.corr.re),
            ("corr", self.corr.im),
            ("pair", self.pair),
        ];
        for (name, v) in parts {
            if !v.is_finite() {
                return Err(CumulantError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn check_bounds(&self) -> Result<(), CumulantError> {
        let e = EPS_BOUND;
        let bad = |field, value| Err(CumulantError::Bounds { field, value });
        if self.n_a < -e {
            return bad("n_a", self.n_a);
        }
        if self.n_b < -e {
            return bad("n_b", self.n_b);
        }
        if !(-e..=1.0 + e).contains(&self.pop) {
            return bad("pop", self.pop);
        }
        if !(-e..=1.0 + e).contains(&self.pair) || self.pair > self.pop + e {
            return bad("pair", self.pair);
        }
        Ok(())
    }
}

/// Slots of the twelve real unknowns inside a [`PolyField`].
#[derive(Debug, Clone, Copy)]
pub struct Slots {
    pub na: Slot,
    pub nb: Slot,
    pub ab: Slot,
    pub x: Slot,
    pub bs: Slot,
    pub pop: Slot,
    pub corr: Slot,
    pub pair: Slot,
}

/// Append the cumulant equations to `f`. Conjugate partners appear as
/// `lin_conj` terms on the stored correlators.
pub fn build_into(f: &mut PolyField, w: &Angular, b_inert: bool) -> Slots {
    let s = Slots {
        na: f.real(),
        nb: f.real(),
        ab: f.complex(),
        x: f.complex(),
        bs: f.complex(),
        pop: f.real(),
        corr: f.complex(),
        pair: f.real(),
    };
    let i = C::i();
    let re = |v: f64| C::new(v, 0.0);
    let (g, gg, n) = (w.big_g, w.g, w.n);
    let gam_t = w.gamma_total();

    // ⟨a†a⟩: 2G Im⟨a†b⟩ + 2gN Im⟨a†σ⟩ − κa⟨a†a⟩
    f.lin(s.na, s.ab, -2.0 * i * g);
    f.lin(s.na, s.x, -2.0 * i * gg * n);
    f.lin(s.na, s.na, re(-w.kappa_a));

    // ⟨b†b⟩
    f.lin(s.nb, s.ab, 2.0 * i * g);
    f.lin(s.nb, s.nb, re(-w.kappa_b));

    // ⟨a†b⟩
    f.lin(s.ab, s.ab, C::new(-0.5 * (w.kappa_a + w.kappa_b), w.delta_a - w.delta_b));
    f.lin(s.ab, s.nb, i * g);
    f.lin(s.ab, s.na, -i * g);
    f.lin(s.ab, s.bs, i * n * gg);

    // ⟨a†σ⁻⟩
    f.lin(s.x, s.x, C::new(-0.5 * (gam_t + w.kappa_a), w.delta_a));
    f.lin(s.x, s.pop, i * gg);
    f.lin_conj(s.x, s.bs, i * g);
    f.lin(s.x, s.na, -i * gg);
    f.lin(s.x, s.corr, i * gg * (n - 1.0));
    f.prod(s.x, s.pop, s.na, 2.0 * i * gg);

    // ⟨bσ⁺⟩
    f.lin(s.bs, s.bs, C::new(-0.5 * (gam_t + w.kappa_b), -w.delta_b));
    f.lin(s.bs, s.ab, i * gg);
    f.lin_conj(s.bs, s.x, -i * g);
    f.prod(s.bs, s.pop, s.ab, -2.0 * i * gg);

    // ⟨σ⁺σ⁻⟩
    f.konst(s.pop, re(w.eta));
    f.lin(s.pop, s.pop, re(-(w.gamma + w.eta)));
    f.lin(s.pop, s.x, 2.0 * i * gg);

    // ⟨σ₁⁺σ₂⁻⟩: −Γ corr − 2g Im x + 4g pop Im x, the last two written as
    // combinations of x and conj(x) so they stay real.
    f.lin(s.corr, s.corr, re(-gam_t));
    f.lin(s.corr, s.x, i * gg);
    f.lin_conj(s.corr, s.x, -i * gg);
    f.prod(s.corr, s.pop, s.x, -2.0 * i * gg);
    f.prod_conj(s.corr, s.pop, s.x, 2.0 * i * gg);

    // ⟨σ₁⁺σ₁⁻σ₂⁺σ₂⁻⟩
    f.lin(s.pair, s.pair, re(-2.0 * w.gamma - 2.0 * w.eta));
    f.lin(s.pair, s.pop, re(2.0 * w.eta));
    f.prod(s.pair, s.pop, s.x, 4.0 * i * gg);

    if b_inert {
        for slot in [s.nb, s.ab, s.bs] {
            f.pin(slot, w.kappa_a);
        }
    }
    s
}

/// The cumulant system as a vector field over the layout of
/// [`CumulantState::to_vec`].
pub fn field(p: &SystemParams) -> PolyField {
    let mut f = PolyField::new();
    build_into(&mut f, &p.angular(), p.b_inert());
    f
}

/// Time derivative of the state, rad/s units. Written out directly from
/// the equations; the solver uses the equivalent [`field`].
pub fn rhs(state: &CumulantState, p: &SystemParams) -> Result<CumulantState, CumulantError> {
    state.check_finite()?;
    let w = p.angular();
    let i = C::i();
    let (g, gg, n) = (w.big_g, w.g, w.n);
    let gam = w.gamma_total();
    let CumulantState {
        n_a,
        n_b,
        ab,
        as_: x,
        bs,
        pop,
        corr,
        pair,
    } = *state;

    let mut d = CumulantState {
        n_a: 2.0 * g * ab.im + 2.0 * gg * n * x.im - w.kappa_a * n_a,
        n_b: -2.0 * g * ab.im - w.kappa_b * n_b,
        ab: -0.5 * (w.kappa_a + w.kappa_b) * ab + i * g * (n_b - n_a) + i * (w.delta_a - w.delta_b) * ab
            + i * n * gg * bs,
        as_: -0.5 * (gam + w.kappa_a) * x + i * w.delta_a * x + i * gg * pop + i * g * bs.conj()
            - i * gg * n_a
            + i * gg * (n - 1.0) * corr
            + 2.0 * i * gg * pop * n_a,
        bs: -0.5 * (gam + w.kappa_b) * bs + i * gg * ab - i * w.delta_b * bs - i * g * x.conj()
            - 2.0 * i * gg * pop * ab,
        pop: w.eta - (w.gamma + w.eta) * pop - 2.0 * gg * x.im,
        corr: -gam * corr - 2.0 * gg * x.im + 4.0 * gg * (pop * x).im,
        pair: -2.0 * w.gamma * pair + 2.0 * w.eta * (pop - pair) - 4.0 * gg * pop * x.im,
    };
    if p.b_inert() {
        d.n_b = -w.kappa_a * n_b;
        d.ab = -w.kappa_a * ab;
        d.bs = -w.kappa_a * bs;
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticSteady {
    pub pop: f64,
    pub corr: f64,
    pub valid: bool,
}

/// Closed-form pop and corr in the enhanced-radiance regime.
pub fn analytic_steady(p: &SystemParams) -> Result<AnalyticSteady, ParamError> {
    let d = p.derive()?;
    Ok(analytic_with_rate(p, p.n() * d.gamma_c))
}

/// Same formulas with NCγ supplied, so detuned and single-cavity systems can
/// reuse them through [`SystemParams::purcell_rate`].
pub fn analytic_with_rate(p: &SystemParams, ncg: f64) -> AnalyticSteady {
    let gam = p.gamma_total();
    let corr = (-(ncg + gam) * (p.eta + p.gamma) + 2.0 * ncg * p.eta) / (2.0 * ncg * ncg);
    let pop = (ncg + gam) / (2.0 * ncg);
    AnalyticSteady {
        pop,
        corr,
        valid: p.gamma < p.eta && p.eta < ncg,
    }
}

pub fn integrate(
    state0: &CumulantState,
    p: &SystemParams,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<(f64, CumulantState)>, CumulantError> {
    state0.check_finite()?;
    if !(t_end > 0.0) {
        return Err(ParamError::BadValue {
            field: "t_end".into(),
            msg: "must be positive".into(),
        }
        .into());
    }
    for (name, tol) in [("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(ParamError::BadValue {
                field: name.into(),
                msg: "must lie in (0, 1)".into(),
            }
            .into());
        }
    }
    let f = field(p);
    let ctl = StepControl {
        rel_tol,
        abs_tol,
        ..Default::default()
    };
    let tr = ode::integrate(&f, &state0.to_vec(), t_end, &ctl)?;
    Ok(tr
        .t
        .iter()
        .zip(&tr.y)
        .map(|(t, y)| (*t, CumulantState::from_slice(y)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Lasing seed when the analytic solution is valid, else the g = 0 point.
    #[default]
    Auto,
    Trivial,
    Lasing,
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Branch::Auto),
            "trivial" => Ok(Branch::Trivial),
            "lasing" => Ok(Branch::Lasing),
            other => Err(format!("unknown branch `{other}` (auto|trivial|lasing)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Integration,
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyOptions {
    pub tol: f64,
    pub branch: Branch,
    /// Longest time the fallback integration may cover, s.
    pub max_time: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_STEADY_TOL,
            branch: Branch::Auto,
            max_time: 1e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyReport {
    pub state: CumulantState,
    pub residual: f64,
    /// Collective correlation present (Re corr > 10⁻⁶).
    pub lasing: bool,
    /// Largest real part of the Jacobian spectrum, 1/s.
    pub max_growth: f64,
    pub stable: bool,
    pub method: Method,
    /// The residual sits above `tol` only because no representable state is
    /// closer to the root (see [`ode::NewtonOutcome::limited`]).
    pub precision_limited: bool,
}

/// The g = 0 fixed point: Bloch population, no fields, no correlations.
pub fn dark_seed(p: &SystemParams) -> CumulantState {
    let pop = if p.eta + p.gamma > 0.0 {
        p.eta / (p.eta + p.gamma)
    } else {
        0.0
    };
    CumulantState {
        pop,
        pair: pop * pop,
        ..Default::default()
    }
}

/// Bad-cavity estimate of the lasing state: pop and corr from the analytic
/// formulas, coherences from adiabatic elimination of both cavities, photon
/// numbers and ⟨a†b⟩ from their own linear equations.
pub fn lasing_seed(p: &SystemParams) -> CumulantState {
    let w = p.angular();
    let ncg = p.n() * p.purcell_rate();
    let an = analytic_with_rate(p, ncg);
    let i = C::i();
    let half_a = C::new(w.kappa_a / 2.0, -w.delta_a);
    let (x, bs) = if p.b_inert() {
        (i * w.g * (w.n - 1.0) * an.corr / half_a, C::new(0.0, 0.0))
    } else {
        let half_b = C::new(w.kappa_b / 2.0, -w.delta_b);
        let resp = half_a + w.big_g * w.big_g / half_b;
        let x = i * w.g * (w.n - 1.0) * an.corr / resp;
        (x, (i * w.big_g * x / half_b).conj())
    };
    let mut s = CumulantState {
        as_: x,
        bs,
        pop: an.pop,
        corr: C::new(an.corr, 0.0),
        pair: an.pop * an.pop,
        ..Default::default()
    };
    // n_a, n_b, ab solve a linear system given x and bs.
    let f = field(p);
    let y = s.to_vec();
    let f0 = f.eval_vec(&y);
    let jac = f.jacobian_mat(&y);
    let idx = [0usize, 1, 2, 3];
    let a = DMatrix::from_fn(4, 4, |r, c| jac[(idx[r], idx[c])]);
    let b = nalgebra::DVector::from_iterator(4, idx.iter().map(|&r| -f0[r]));
    if let Some(sol) = ode::solve_scaled(&a, &b) {
        s.n_a = sol[0];
        s.n_b = sol[1];
        s.ab = C::new(sol[2], sol[3]);
    }
    s
}

fn growth_rate(f: &PolyField, y: &[f64]) -> f64 {
    let jac = f.jacobian_mat(y);
    let sc = f.slot_scales(y, RESIDUAL_FLOOR);
    let n = jac.nrows();
    let bal = DMatrix::from_fn(n, n, |r, c| jac[(r, c)] * sc[c] / sc[r]);
    bal.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn report(f: &PolyField, out: ode::NewtonOutcome, method: Method) -> SteadyReport {
    let y = out.y;
    let residual = out.residual;
    let max_growth = growth_rate(f, &y);
    let state = CumulantState::from_slice(&y);
    SteadyReport {
        state,
        residual,
        lasing: state.corr.re > 1e-6,
        max_growth,
        stable: max_growth < 0.0,
        method,
        precision_limited: out.limited,
    }
}

/// Steady state with the default fallback chain and branch selection.
pub fn steady_state(p: &SystemParams, tol: f64) -> Result<CumulantState, CumulantError> {
    solve_steady(
        p,
        &SteadyOptions {
            tol,
            ..Default::default()
        },
    )
    .map(|r| r.state)
}

pub fn solve_steady(p: &SystemParams, opts: &SteadyOptions) -> Result<SteadyReport, CumulantError> {
    p.validate()?;
    let f = field(p);
    let lasing_ok = p.in_lasing_window();
    let seed = match opts.branch {
        Branch::Lasing => lasing_seed(p),
        Branch::Trivial => dark_seed(p),
        Branch::Auto if lasing_ok => lasing_seed(p),
        Branch::Auto => dark_seed(p),
    };
    solve_from_field(&f, &seed, opts)
}

/// Newton from `seed`, then integration from `seed` if Newton fails (or, in
/// automatic mode, lands on an unstable point).
pub fn solve_from(
    p: &SystemParams,
    seed: &CumulantState,
    opts: &SteadyOptions,
) -> Result<SteadyReport, CumulantError> {
    p.validate()?;
    solve_from_field(&field(p), seed, opts)
}

fn solve_from_field(
    f: &PolyField,
    seed: &CumulantState,
    opts: &SteadyOptions,
) -> Result<SteadyReport, CumulantError> {
    seed.check_finite()?;
    let y0 = seed.to_vec();
    let nctl = newton_control(opts);
    let first = ode::newton(f, &y0, &nctl);
    let mut last_res = first.residual;
    if first.converged {
        let r = report(f, first, Method::Newton);
        if r.stable || opts.branch != Branch::Auto {
            r.state.check_bounds()?;
            return Ok(r);
        }
    }
    let found = relax(f, &y0, opts, &mut last_res, |out| {
        let rep = report(f, out.clone(), Method::Integration);
        rep.stable.then_some(rep)
    })?;
    match found {
        Some(r) => {
            r.state.check_bounds()?;
            Ok(r)
        }
        None => Err(CumulantError::NoConvergence { residual: last_res }),
    }
}

fn newton_control(opts: &SteadyOptions) -> NewtonControl {
    NewtonControl {
        tol: opts.tol,
        floor: RESIDUAL_FLOOR,
        ..Default::default()
    }
}

/// Root of an arbitrary moment field by the same Newton and integration
/// chain, without the stability filter. Used for augmented systems.
pub fn solve_field(f: &PolyField, y0: &[f64], opts: &SteadyOptions) -> Result<ode::NewtonOutcome, CumulantError> {
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(CumulantError::NonFinite("seed"));
    }
    let first = ode::newton(f, y0, &newton_control(opts));
    if first.converged {
        return Ok(first);
    }
    let mut last_res = first.residual;
    relax(f, y0, opts, &mut last_res, |out| Some(out.clone()))?
        .ok_or(CumulantError::NoConvergence { residual: last_res })
}

/// Integrate towards the attractor, trying a Newton polish whenever the
/// residual has dropped enough to make it safe. `accept` turns a converged
/// polish into a result or rejects it.
fn relax<T, A: FnMut(&ode::NewtonOutcome) -> Option<T>>(
    f: &PolyField,
    y0: &[f64],
    opts: &SteadyOptions,
    last_res: &mut f64,
    mut accept: A,
) -> Result<Option<T>, CumulantError> {
    let nctl = newton_control(opts);
    let ctl = StepControl {
        rel_tol: 1e-8,
        abs_tol: 1e-14,
        max_steps: 2_000_000,
        record: false,
    };
    let mut found = None;
    let mut steps = 0usize;
    let mut next_try = 0.0;
    let res = ode::integrate_until(f, y0, opts.max_time, &ctl, |t, y| {
        steps += 1;
        if steps % 25 != 0 || t < next_try {
            return false;
        }
        let fy = f.eval_vec(y);
        let r = f.scaled_residual(y, &fy, nctl.floor);
        *last_res = r;
        if r > 1.0 {
            return false;
        }
        let out = ode::newton(f, y, &nctl);
        if out.converged {
            if let Some(v) = accept(&out) {
                found = Some(v);
                return true;
            }
        }
        next_try = t * 1.2;
        false
    });
    match res {
        Ok(_) => Ok(found),
        Err(e) if found.is_none() => Err(e.into()),
        Err(_) => Ok(found),
    }
}

/// Scaled residual of a state, 1/s.
pub fn residual(state: &CumulantState, p: &SystemParams) -> f64 {
    let f = field(p);
    let y = state.to_vec();
    let fy = f.eval_vec(&y);
    f.scaled_residual(&y, &fy, RESIDUAL_FLOOR)
}

/// Largest relative difference between two states, slot by slot with the
/// residual floor.
pub fn state_distance(a: &CumulantState, b: &CumulantState) -> f64 {
    let pairs = [
        (C::new(a.n_a, 0.0), C::new(b.n_a, 0.0)),
        (C::new(a.n_b, 0.0), C::new(b.n_b, 0.0)),
        (a.ab, b.ab),
        (a.as_, b.as_),
        (a.bs, b.bs),
        (C::new(a.pop, 0.0), C::new(b.pop, 0.0)),
        (a.corr, b.corr),
        (C::new(a.pair, 0.0), C::new(b.pair, 0.0)),
    ];
    pairs
        .iter()
        .map(|(u, v)| (u - v).norm() / u.norm().max(v.norm()).max(RESIDUAL_FLOOR))
        .fold(0.0, f64::max)
}
