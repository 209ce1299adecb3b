//! Stiff integration and damped Newton for [`PolyField`] systems.
//!
//! The integrator is a four-stage, fourth-order Rosenbrock method with an
//! embedded third-order error estimate and the exact Jacobian.

use crate::field::PolyField;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s); Jacobian rates span {slowest:.3e} to {fastest:.3e} 1/s")]
    Stiffness {
        t: f64,
        h: f64,
        slowest: f64,
        fastest: f64,
    },
    #[error("non-finite state at t = {0:.6e} s")]
    NonFinite(f64),
    #[error("step budget of {0} exhausted")]
    Budget(usize),
    #[error("singular linear system")]
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Keep every accepted step in the trajectory.
    pub record: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_steps: 5_000_000,
            record: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.t.last().unwrap(), self.y.last().unwrap())
    }
}

/// Row/column equilibrated LU solve of `a x = b`.
pub fn solve_scaled(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut r = vec![1.0; n];
    for i in 0..n {
        let mx = m.row(i).amax();
        if mx > 0.0 {
            r[i] = 1.0 / mx;
            m.row_mut(i).scale_mut(r[i]);
        }
    }
    let mut c = vec![1.0; n];
    for j in 0..n {
        let mx = m.column(j).amax();
        if mx > 0.0 {
            c[j] = 1.0 / mx;
            m.column_mut(j).scale_mut(c[j]);
        }
    }
    let rhs = DVector::from_iterator(n, b.iter().zip(&r).map(|(x, s)| x * s));
    let x = m.lu().solve(&rhs)?;
    let out = DVector::from_iterator(n, x.iter().zip(&c).map(|(x, s)| x * s));
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn rate_span(field: &PolyField, y: &[f64]) -> (f64, f64) {
    let ev = field.jacobian_mat(y).complex_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for l in ev.iter() {
        let m = l.norm();
        if m > 0.0 {
            lo = lo.min(m);
        }
        hi = hi.max(m);
    }
    (lo, hi)
}

pub fn integrate(
    field: &PolyField,
    y0: &[f64],
    t_end: f64,
    ctl: &StepControl,
) -> Result<Trajectory, OdeError> {
    integrate_until(field, y0, t_end, ctl, |_, _| false)
}

/// Integrate until `t_end` or until `stop(t, y)` returns true after a step.
pub fn integrate_until<F: FnMut(f64, &[f64]) -> bool>(
    field: &PolyField,
    y0: &[f64],
    t_end: f64,
    ctl: &StepControl,
    mut stop: F,
) -> Result<Trajectory, OdeError> {
    let n = field.dim();
    // Shampine's parameter set for the four-stage Kaps-Rentrop scheme.
    const GAM: f64 = 0.5;
    const A21: f64 = 2.0;
    const A31: f64 = 48.0 / 25.0;
    const A32: f64 = 6.0 / 25.0;
    const C21: f64 = -8.0;
    const C31: f64 = 372.0 / 25.0;
    const C32: f64 = 12.0 / 5.0;
    const C41: f64 = -112.0 / 125.0;
    const C42: f64 = -54.0 / 125.0;
    const C43: f64 = -2.0 / 5.0;
    const B: [f64; 4] = [19.0 / 9.0, 0.5, 25.0 / 108.0, 125.0 / 108.0];
    const E: [f64; 4] = [17.0 / 54.0, 7.0 / 36.0, 0.0, 125.0 / 108.0];

    let mut traj = Trajectory::default();
    let mut t = 0.0;
    let mut y = DVector::from_column_slice(y0);
    traj.t.push(t);
    traj.y.push(y0.to_vec());

    let mut f0 = DVector::from_vec(field.eval_vec(y.as_slice()));
    let mut jac = DMatrix::zeros(n, n);

    let scale: f64 = f0
        .iter()
        .zip(y.iter())
        .map(|(f, y)| f.abs() / (ctl.abs_tol + ctl.rel_tol * y.abs()))
        .fold(0.0, f64::max);
    let mut h = if scale > 0.0 {
        (ctl.rel_tol.powf(0.25) / scale * 0.1).max(1e-12 * t_end)
    } else {
        t_end * 1e-3
    }
    .min(t_end);

    let mut fbuf = vec![0.0; n];
    let eval = |v: &DVector<f64>, buf: &mut Vec<f64>| {
        field.eval(v.as_slice(), buf);
        DVector::from_column_slice(buf)
    };
    let mut fresh_jac = false;
    while t < t_end {
        if traj.steps >= ctl.max_steps {
            return Err(OdeError::Budget(ctl.max_steps));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if !fresh_jac {
            field.jacobian(y.as_slice(), &mut jac);
            fresh_jac = true;
        }
        let mut w = -&jac;
        for i in 0..n {
            w[(i, i)] += 1.0 / (GAM * h);
        }
        let lu = w.lu();
        let solve = |b: &DVector<f64>| lu.solve(b).ok_or(OdeError::Singular);
        let g1 = solve(&f0)?;
        let f2 = eval(&(&y + &g1 * A21), &mut fbuf);
        let g2 = solve(&(&f2 + &g1 * (C21 / h)))?;
        let f3 = eval(&(&y + &g1 * A31 + &g2 * A32), &mut fbuf);
        let g3 = solve(&(&f3 + (&g1 * C31 + &g2 * C32) / h))?;
        let g4 = solve(&(&f3 + (&g1 * C41 + &g2 * C42 + &g3 * C43) / h))?;
        let ynew = &y + &g1 * B[0] + &g2 * B[1] + &g3 * B[2] + &g4 * B[3];
        let err_vec = &g1 * E[0] + &g2 * E[1] + &g3 * E[2] + &g4 * E[3];

        let mut err: f64 = 0.0;
        for i in 0..n {
            let sc = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(ynew[i].abs());
            err = err.max(err_vec[i].abs() / sc);
        }
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            t += h;
            y = ynew;
            f0 = eval(&y, &mut fbuf);
            fresh_jac = false;
            traj.steps += 1;
            if ctl.record || t >= t_end {
                traj.t.push(t);
                traj.y.push(y.as_slice().to_vec());
            }
            if stop(t, y.as_slice()) {
                if !ctl.record {
                    traj.t.push(t);
                    traj.y.push(y.as_slice().to_vec());
                }
                break;
            }
        }
        let fac = if err == 0.0 {
            5.0
        } else if err.is_finite() {
            (0.9 * err.powf(-0.25)).clamp(0.2, 5.0)
        } else {
            0.1
        };
        h *= fac;
        if h < 1e-15 * t.max(t_end * 1e-9) {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite(t));
            }
            let (slowest, fastest) = rate_span(field, y.as_slice());
            return Err(OdeError::Stiffness {
                t,
                h,
                slowest,
                fastest,
            });
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonControl {
    pub tol: f64,
    pub floor: f64,
    pub max_iter: usize,
}

impl Default for NewtonControl {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            floor: 1e-12,
            max_iter: 80,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub y: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Converged because the full Newton correction fell below a few ulps in
    /// every component while the residual was still above `tol`: the state
    /// is as close to the root as doubles allow.
    pub limited: bool,
}

/// Below this many ulps per component a Newton correction is pure rounding.
const ULP_STEPS: f64 = 4.0;
/// The precision-limited exit is only taken when the residual is this small.
const LIMITED_MAX_RESIDUAL: f64 = 1e-2;

/// Damped Newton on f(y) = 0 with a backtracking line search on the
/// slot-weighted residual.
pub fn newton(field: &PolyField, y0: &[f64], ctl: &NewtonControl) -> NewtonOutcome {
    let n = field.dim();
    let mut y = y0.to_vec();
    let mut f = field.eval_vec(&y);
    let mut res = field.scaled_residual(&y, &f, ctl.floor);
    let mut jac = DMatrix::zeros(n, n);
    let merit = |w: &[f64], f: &[f64]| -> f64 {
        f.iter().zip(w).map(|(f, w)| (f / w).powi(2)).sum::<f64>().sqrt()
    };
    let mut stalls = 0;
    for it in 0..ctl.max_iter {
        if res < ctl.tol {
            // A couple of extra iterations are cheap and sharpen the root.
            if stalls >= 2 {
                return NewtonOutcome {
                    y,
                    residual: res,
                    iterations: it,
                    converged: true,
                    limited: false,
                };
            }
            stalls += 1;
        }
        field.jacobian(&y, &mut jac);
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let Some(step) = solve_scaled(&jac, &rhs) else {
            break;
        };
        let negligible = step
            .iter()
            .zip(&y)
            .all(|(d, v)| d.abs() <= ULP_STEPS * f64::EPSILON * v.abs() || d.abs() < 1e-300);
        if negligible && res >= ctl.tol && res < LIMITED_MAX_RESIDUAL {
            return NewtonOutcome {
                y,
                residual: res,
                iterations: it,
                converged: true,
                limited: true,
            };
        }
        let w = field.slot_scales(&y, ctl.floor);
        let m0 = merit(&w, &f);
        let mut lam = 1.0;
        let mut accepted = false;
        while lam > 1e-8 {
            let yt: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + lam * b).collect();
            let ft = field.eval_vec(&yt);
            let mt = merit(&w, &ft);
            if mt.is_finite() && (mt < (1.0 - 1e-4 * lam) * m0 || (lam == 1.0 && mt <= m0)) {
                y = yt;
                f = ft;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        let new_res = field.scaled_residual(&y, &f, ctl.floor);
        if !accepted {
            res = new_res;
            break;
        }
        res = new_res;
    }
    NewtonOutcome {
        converged: res < ctl.tol,
        y,
        residual: res,
        iterations: ctl.max_iter,
        limited: false,
    }
}
