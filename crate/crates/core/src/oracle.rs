//! Exact Lindblad dynamics for a handful of atoms in truncated Fock spaces.
//!
//! Every jump operator changes the total excitation number by a fixed amount
//! and the Hamiltonian conserves it, so a state that starts block-diagonal in
//! excitation number stays so. Only those blocks are stored: the unknowns are
//! ρ_ij with exc(i) = exc(j).

use crate::model::{ParamError, SystemParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

pub const MAX_ATOMS: u64 = 3;
pub const MAX_HILBERT_DIM: usize = 4096;
/// Largest block-diagonal unknown count handled by the dense steady solve.
pub const MAX_DENSE_UNKNOWNS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("oracle supports 1..={MAX_ATOMS} atoms, got {0}")]
    TooManyAtoms(u64),
    #[error("Hilbert dimension {0} exceeds {MAX_HILBERT_DIM}")]
    TooLarge(usize),
    #[error("{0} block unknowns exceed the dense steady-solve limit {MAX_DENSE_UNKNOWNS}")]
    TooManyUnknowns(usize),
    #[error("fock cutoffs must be positive")]
    BadCutoff,
    #[error("cavity {mode} holds {photons:.3} photons, within 2 of its cutoff {cutoff}; raise the cutoff")]
    CutoffSaturation { mode: char, photons: f64, cutoff: usize },
    #[error("steady-state linear solve failed")]
    Singular,
    #[error("time evolution failed: {0}")]
    Evolution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub params: SystemParams,
    pub fock_cutoff_a: usize,
    pub fock_cutoff_b: usize,
    /// s
    pub t_end: f64,
}

impl OracleConfig {
    /// Two atoms in the scaled-down EP configuration used as golden data.
    pub fn scaled_pair() -> Self {
        let params = SystemParams {
            delta_a: 0.0,
            delta_b: 0.0,
            coupling_big_g: 22.5,
            coupling_g: 1.0,
            atom_count: 2,
            kappa_a: 100.0,
            kappa_b: 10.0,
            gamma: 0.1,
            eta: 0.1,
            gamma_phi: 0.1,
            nu_sigma: crate::model::SR87_CLOCK_HZ,
        };
        Self {
            params,
            fock_cutoff_a: 4,
            fock_cutoff_b: 4,
            t_end: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub n_a: f64,
    pub n_b: f64,
    pub pop: f64,
    pub corr: C,
    /// ⟨a†σ₁⁻⟩
    pub as_: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSample {
    pub t: f64,
    pub obs: Observables,
    pub trace: f64,
    /// Expectation of a†a + b†b + Σσ⁺σ⁻.
    pub excitations: f64,
    pub min_eigenvalue: f64,
}

/// Single-entry operator: column k maps to `(row, value)` or to zero.
type Ladder = Vec<Option<(usize, f64)>>;

#[derive(Debug, Clone)]
pub struct Oracle {
    ca: usize,
    cb: usize,
    atoms: usize,
    dim: usize,
    exc: Vec<usize>,
    /// Unknown index of (i, j), if exc(i) = exc(j).
    slot: Vec<Option<usize>>,
    pairs: Vec<(usize, usize)>,
    /// Non-Hermitian effective Hamiltonian by column, rad/s.
    h_eff: Vec<Vec<(usize, C)>>,
    jumps: Vec<(f64, Ladder)>,
}

impl Oracle {
    pub fn new(cfg: &OracleConfig) -> Result<Self, OracleError> {
        cfg.params.validate()?;
        let n = cfg.params.atom_count;
        if n > MAX_ATOMS {
            return Err(OracleError::TooManyAtoms(n));
        }
        if cfg.fock_cutoff_a == 0 || cfg.fock_cutoff_b == 0 {
            return Err(OracleError::BadCutoff);
        }
        let atoms = n as usize;
        let (ca, cb) = (cfg.fock_cutoff_a, cfg.fock_cutoff_b);
        let dim = (ca + 1) * (cb + 1) * (1 << atoms);
        if dim > MAX_HILBERT_DIM {
            return Err(OracleError::TooLarge(dim));
        }
        let mut o = Self {
            ca,
            cb,
            atoms,
            dim,
            exc: Vec::new(),
            slot: Vec::new(),
            pairs: Vec::new(),
            h_eff: Vec::new(),
            jumps: Vec::new(),
        };
        o.exc = (0..dim)
            .map(|k| {
                let (na, nb, bits) = o.decode(k);
                na + nb + bits.count_ones() as usize
            })
            .collect();
        o.slot = vec![None; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                if o.exc[i] == o.exc[j] {
                    o.slot[i * dim + j] = Some(o.pairs.len());
                    o.pairs.push((i, j));
                }
            }
        }
        o.build(&cfg.params);
        Ok(o)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unknowns(&self) -> usize {
        self.pairs.len()
    }

    fn decode(&self, k: usize) -> (usize, usize, usize) {
        let na_ = 1 << self.atoms;
        let bits = k % na_;
        let rest = k / na_;
        (rest / (self.cb + 1), rest % (self.cb + 1), bits)
    }

    fn encode(&self, na: usize, nb: usize, bits: usize) -> usize {
        (na * (self.cb + 1) + nb) * (1 << self.atoms) + bits
    }

    fn ladder<F: Fn(usize, usize, usize) -> Option<(usize, usize, usize, f64)>>(&self, f: F) -> Ladder {
        (0..self.dim)
            .map(|k| {
                let (na, nb, bits) = self.decode(k);
                f(na, nb, bits).map(|(a, b, s, v)| (self.encode(a, b, s), v))
            })
            .collect()
    }

    pub fn lower_a(&self) -> Ladder {
        self.ladder(|na, nb, s| (na > 0).then(|| (na - 1, nb, s, (na as f64).sqrt())))
    }

    pub fn lower_b(&self) -> Ladder {
        self.ladder(|na, nb, s| (nb > 0).then(|| (na, nb - 1, s, (nb as f64).sqrt())))
    }

    pub fn raise_a(&self) -> Ladder {
        let c = self.ca;
        self.ladder(move |na, nb, s| (na < c).then(|| (na + 1, nb, s, ((na + 1) as f64).sqrt())))
    }

    pub fn raise_b(&self) -> Ladder {
        let c = self.cb;
        self.ladder(move |na, nb, s| (nb < c).then(|| (na, nb + 1, s, ((nb + 1) as f64).sqrt())))
    }

    pub fn sigma_minus(&self, j: usize) -> Ladder {
        self.ladder(move |na, nb, s| (s >> j & 1 == 1).then(|| (na, nb, s & !(1 << j), 1.0)))
    }

    pub fn sigma_plus(&self, j: usize) -> Ladder {
        self.ladder(move |na, nb, s| (s >> j & 1 == 0).then(|| (na, nb, s | (1 << j), 1.0)))
    }

    /// Product x·y of two single-entry operators.
    fn compose(x: &Ladder, y: &Ladder) -> Ladder {
        y.iter()
            .map(|e| e.and_then(|(m, v)| x[m].map(|(r, w)| (r, v * w))))
            .collect()
    }

    fn build(&mut self, p: &SystemParams) {
        let w = p.angular();
        let a = self.lower_a();
        let ad = self.raise_a();
        let b = self.lower_b();
        let bd = self.raise_b();
        let mut cols: Vec<Vec<(usize, C)>> = vec![Vec::new(); self.dim];
        let mut add = |op: &Ladder, c: C| {
            for (k, e) in op.iter().enumerate() {
                if let Some((r, v)) = e {
                    cols[k].push((*r, c * *v));
                }
            }
        };
        let re = |v: f64| C::new(v, 0.0);
        add(&Self::compose(&ad, &a), re(w.delta_a));
        add(&Self::compose(&bd, &b), re(w.delta_b));
        add(&Self::compose(&ad, &b), re(w.big_g));
        add(&Self::compose(&bd, &a), re(w.big_g));
        let mut jumps = vec![(w.kappa_a, a.clone()), (w.kappa_b, b.clone())];
        for j in 0..self.atoms {
            let sm = self.sigma_minus(j);
            let sp = self.sigma_plus(j);
            add(&Self::compose(&ad, &sm), re(w.g));
            add(&Self::compose(&sp, &a), re(w.g));
            let n_j = Self::compose(&sp, &sm);
            jumps.push((w.gamma, sm));
            jumps.push((w.eta, sp));
            jumps.push((w.gamma_phi, n_j));
        }
        // H_eff = H − (i/2) Σ r C†C; C†C is diagonal for single-entry C.
        for (r, c) in &jumps {
            for (k, e) in c.iter().enumerate() {
                if let Some((_, v)) = e {
                    cols[k].push((k, C::new(0.0, -0.5 * r * v * v)));
                }
            }
        }
        for col in cols.iter_mut() {
            col.sort_by_key(|e| e.0);
            col.dedup_by(|x, y| {
                if x.0 == y.0 {
                    y.1 += x.1;
                    true
                } else {
                    false
                }
            });
        }
        self.h_eff = cols;
        self.jumps = jumps.into_iter().filter(|(r, _)| *r != 0.0).collect();
    }

    /// Sparse Liouvillian on the block unknowns, as (row, col, value).
    pub fn liouvillian(&self) -> Vec<(usize, usize, C)> {
        let n = self.dim;
        let mut out = Vec::new();
        let i = C::i();
        for (u, &(k, l)) in self.pairs.iter().enumerate() {
            for &(r, h) in &self.h_eff[k] {
                if let Some(t) = self.slot[r * n + l] {
                    out.push((t, u, -i * h));
                }
            }
            for &(r, h) in &self.h_eff[l] {
                if let Some(t) = self.slot[k * n + r] {
                    out.push((t, u, i * h.conj()));
                }
            }
            for (rate, c) in &self.jumps {
                if let (Some((ri, v)), Some((rj, x))) = (c[k], c[l]) {
                    if let Some(t) = self.slot[ri * n + rj] {
                        out.push((t, u, C::new(rate * v * x, 0.0)));
                    }
                }
            }
        }
        out
    }

    fn apply(trips: &[(usize, usize, C)], x: &[C], y: &mut [C]) {
        y.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        for &(r, c, v) in trips {
            y[r] += v * x[c];
        }
    }

    pub fn ground(&self) -> Vec<C> {
        let mut x = vec![C::new(0.0, 0.0); self.unknowns()];
        x[self.slot[0].unwrap()] = C::new(1.0, 0.0);
        x
    }

    /// Pure Fock ⊗ atomic basis state; bit j of `atoms` excites atom j.
    pub fn basis_state(&self, na: usize, nb: usize, atoms: usize) -> Option<Vec<C>> {
        if na > self.ca || nb > self.cb || atoms >= 1 << self.atoms {
            return None;
        }
        let k = self.encode(na, nb, atoms);
        let mut x = vec![C::new(0.0, 0.0); self.unknowns()];
        x[self.slot[k * self.dim + k]?] = C::new(1.0, 0.0);
        Some(x)
    }

    /// Full density matrix from the block unknowns.
    pub fn density(&self, x: &[C]) -> DMatrix<C> {
        let mut rho = DMatrix::zeros(self.dim, self.dim);
        for (u, &(i, j)) in self.pairs.iter().enumerate() {
            rho[(i, j)] = x[u];
        }
        rho
    }

    pub fn trace(&self, x: &[C]) -> f64 {
        (0..self.dim).map(|k| x[self.slot[k * self.dim + k].unwrap()].re).sum()
    }

    /// ⟨O⟩ = Tr(O ρ) for a single-entry operator.
    fn expect(&self, op: &Ladder, x: &[C]) -> C {
        let n = self.dim;
        let mut s = C::new(0.0, 0.0);
        for (k, e) in op.iter().enumerate() {
            if let Some((r, v)) = e {
                // Tr(Oρ) = Σ O[r,k] ρ[k,r]
                if let Some(u) = self.slot[k * n + r] {
                    s += *v * x[u];
                }
            }
        }
        s
    }

    pub fn observables(&self, x: &[C]) -> Observables {
        let a = self.lower_a();
        let b = self.lower_b();
        let ad = self.raise_a();
        let bd = self.raise_b();
        let sm0 = self.sigma_minus(0);
        let sp0 = self.sigma_plus(0);
        let corr = if self.atoms > 1 {
            self.expect(&Self::compose(&sp0, &self.sigma_minus(1)), x)
        } else {
            C::new(0.0, 0.0)
        };
        Observables {
            n_a: self.expect(&Self::compose(&ad, &a), x).re,
            n_b: self.expect(&Self::compose(&bd, &b), x).re,
            pop: self.expect(&Self::compose(&sp0, &sm0), x).re,
            corr,
            as_: self.expect(&Self::compose(&ad, &sm0), x),
        }
    }

    pub fn excitations(&self, x: &[C]) -> f64 {
        (0..self.dim)
            .map(|k| self.exc[k] as f64 * x[self.slot[k * self.dim + k].unwrap()].re)
            .sum()
    }

    /// Smallest eigenvalue of the (Hermitian part of the) density matrix.
    pub fn min_eigenvalue(&self, x: &[C]) -> f64 {
        let rho = self.density(x);
        let h = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Steady state by a direct solve with one population equation replaced
    /// by the trace condition.
    pub fn steady(&self) -> Result<Vec<C>, OracleError> {
        let m = self.unknowns();
        if m > MAX_DENSE_UNKNOWNS {
            return Err(OracleError::TooManyUnknowns(m));
        }
        let mut a = DMatrix::<C>::zeros(m, m);
        for (r, c, v) in self.liouvillian() {
            a[(r, c)] += v;
        }
        let row = self.slot[0].unwrap();
        a.row_mut(row).fill(C::new(0.0, 0.0));
        for k in 0..self.dim {
            a[(row, self.slot[k * self.dim + k].unwrap())] = C::new(1.0, 0.0);
        }
        let mut rhs = DVector::<C>::zeros(m);
        rhs[row] = C::new(1.0, 0.0);
        let x = a.lu().solve(&rhs).ok_or(OracleError::Singular)?;
        if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(OracleError::Singular);
        }
        Ok(x.iter().cloned().collect())
    }

    pub fn check_cutoffs(&self, obs: &Observables) -> Result<(), OracleError> {
        for (mode, photons, cutoff) in [('a', obs.n_a, self.ca), ('b', obs.n_b, self.cb)] {
            if photons > cutoff as f64 - 2.0 {
                return Err(OracleError::CutoffSaturation { mode, photons, cutoff });
            }
        }
        Ok(())
    }

    /// Dormand–Prince integration from `x0`, sampled at `times` (increasing).
    pub fn evolve_from(&self, x0: &[C], times: &[f64], rtol: f64, atol: f64) -> Result<Vec<OracleSample>, OracleError> {
        let trips = self.liouvillian();
        let n = x0.len();
        let f = |x: &[C], y: &mut [C]| Self::apply(&trips, x, y);
        let mut x = x0.to_vec();
        let mut t = 0.0;
        let mut h: f64 = 1e-4;
        let mut out = Vec::with_capacity(times.len());
        let mut k: Vec<Vec<C>> = vec![vec![C::new(0.0, 0.0); n]; 7];
        let mut tmp = vec![C::new(0.0, 0.0); n];
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut steps = 0usize;
        for &target in times {
            while t < target {
                steps += 1;
                if steps > 50_000_000 {
                    return Err(OracleError::Evolution("step budget exhausted".into()));
                }
                let hh = h.min(target - t);
                f(&x, &mut k[0]);
                for s in 0..6 {
                    for q in 0..n {
                        let mut acc = x[q];
                        for (r, a) in A[s].iter().enumerate().take(s + 1) {
                            acc += k[r][q] * (hh * a);
                        }
                        tmp[q] = acc;
                    }
                    f(&tmp, &mut k[s + 1]);
                }
                // tmp holds the 5th-order solution, k[6] its derivative.
                let mut err: f64 = 0.0;
                for q in 0..n {
                    let mut e = C::new(0.0, 0.0);
                    for (r, c) in E.iter().enumerate() {
                        e += k[r][q] * (hh * c);
                    }
                    let sc = atol + rtol * x[q].norm().max(tmp[q].norm());
                    err = err.max(e.norm() / sc);
                }
                if !err.is_finite() {
                    return Err(OracleError::Evolution("non-finite state".into()));
                }
                if err <= 1.0 {
                    t += hh;
                    x.copy_from_slice(&tmp);
                    if hh < h && t >= target {
                        // A step clipped to land on the sample does not
                        // inform the next step size.
                        continue;
                    }
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = hh * fac;
                if h < 1e-14 * t.max(1.0) {
                    return Err(OracleError::Evolution(format!("step size underflow at t = {t:.3e} s")));
                }
            }
            out.push(OracleSample {
                t,
                obs: self.observables(&x),
                trace: self.trace(&x),
                excitations: self.excitations(&x),
                min_eigenvalue: self.min_eigenvalue(&x),
            });
        }
        Ok(out)
    }
}

/// Time series from the ground state with `samples` evenly spaced points in
/// (0, t_end].
pub fn evolve_exact(cfg: &OracleConfig, samples: usize) -> Result<Vec<OracleSample>, OracleError> {
    let o = Oracle::new(cfg)?;
    let samples = samples.max(1);
    let times: Vec<f64> = (1..=samples).map(|k| cfg.t_end * k as f64 / samples as f64).collect();
    o.evolve_from(&o.ground(), &times, 1e-10, 1e-13)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSteady {
    pub obs: Observables,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

/// Exact steady state, checked against the Fock cutoffs.
pub fn steady_exact(cfg: &OracleConfig) -> Result<OracleSteady, OracleError> {
    let o = Oracle::new(cfg)?;
    let x = o.steady()?;
    let obs = o.observables(&x);
    o.check_cutoffs(&obs)?;
    Ok(OracleSteady {
        obs,
        trace: o.trace(&x),
        min_eigenvalue: o.min_eigenvalue(&x),
    })
}
