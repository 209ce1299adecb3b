//! Quadratic vector fields over real and complex slots.
//!
//! The moment equations are sums of constant, linear and (real × any)
//! bilinear terms. Writing them once as a term list gives both the
//! right-hand side and an exact Jacobian.

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub idx: usize,
    pub complex: bool,
}

#[derive(Debug, Clone, Copy)]
struct Operand {
    slot: Slot,
    conj: bool,
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Const { t: Slot, c: C },
    Lin { t: Slot, s: Operand, c: C },
    /// c · y[r] · s, with r a real slot.
    Prod { t: Slot, r: Slot, s: Operand, c: C },
}

/// Unevaluated sum hi + lo.
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn scale(self, b: f64) -> Dd {
        let mut p = Dd::prod(self.hi, b);
        p.lo += self.lo * b;
        p
    }

    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    fn add_dd(&mut self, x: Dd) {
        self.add(x.hi);
        self.lo += x.lo;
    }

    fn add_prod(&mut self, a: f64, b: f64) {
        self.add_dd(Dd::prod(a, b));
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Debug, Clone, Default)]
pub struct PolyField {
    slots: Vec<Slot>,
    dim: usize,
    terms: Vec<Term>,
}

impl PolyField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn real(&mut self) -> Slot {
        let s = Slot {
            idx: self.dim,
            complex: false,
        };
        self.dim += 1;
        self.slots.push(s);
        s
    }

    pub fn complex(&mut self) -> Slot {
        let s = Slot {
            idx: self.dim,
            complex: true,
        };
        self.dim += 2;
        self.slots.push(s);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// d t += c. For a real target only Re c counts.
    pub fn konst(&mut self, t: Slot, c: C) {
        self.terms.push(Term::Const { t, c });
    }

    /// d t += c · s
    pub fn lin(&mut self, t: Slot, s: Slot, c: C) {
        self.terms.push(Term::Lin {
            t,
            s: Operand { slot: s, conj: false },
            c,
        });
    }

    /// d t += c · conj(s)
    pub fn lin_conj(&mut self, t: Slot, s: Slot, c: C) {
        self.terms.push(Term::Lin {
            t,
            s: Operand { slot: s, conj: true },
            c,
        });
    }

    /// d t += c · r · s, r real.
    pub fn prod(&mut self, t: Slot, r: Slot, s: Slot, c: C) {
        assert!(!r.complex, "first factor of a product term must be real");
        self.terms.push(Term::Prod {
            t,
            r,
            s: Operand { slot: s, conj: false },
            c,
        });
    }

    /// d t += c · r · conj(s), r real.
    pub fn prod_conj(&mut self, t: Slot, r: Slot, s: Slot, c: C) {
        assert!(!r.complex, "first factor of a product term must be real");
        self.terms.push(Term::Prod {
            t,
            r,
            s: Operand { slot: s, conj: true },
            c,
        });
    }

    /// Drop every term targeting `t` and replace it by pure decay.
    pub fn pin(&mut self, t: Slot, rate: f64) {
        self.terms.retain(|term| match term {
            Term::Const { t: x, .. } | Term::Lin { t: x, .. } | Term::Prod { t: x, .. } => *x != t,
        });
        self.lin(t, t, C::new(-rate, 0.0));
    }

    fn value(y: &[f64], op: Operand) -> C {
        let z = if op.slot.complex {
            C::new(y[op.slot.idx], y[op.slot.idx + 1])
        } else {
            C::new(y[op.slot.idx], 0.0)
        };
        if op.conj {
            z.conj()
        } else {
            z
        }
    }

    /// Evaluation uses error-free products and double-double accumulation, so
    /// heavy cancellation between large terms still resolves tiny slots.
    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        let mut acc = vec![Dd::default(); self.dim];
        for term in &self.terms {
            match *term {
                Term::Const { t, c } => {
                    acc[t.idx].add(c.re);
                    if t.complex {
                        acc[t.idx + 1].add(c.im);
                    }
                }
                Term::Lin { t, s, c } => {
                    let z = Self::value(y, s);
                    acc[t.idx].add_prod(c.re, z.re);
                    acc[t.idx].add_prod(-c.im, z.im);
                    if t.complex {
                        acc[t.idx + 1].add_prod(c.re, z.im);
                        acc[t.idx + 1].add_prod(c.im, z.re);
                    }
                }
                Term::Prod { t, r, s, c } => {
                    let z = Self::value(y, s);
                    let yr = y[r.idx];
                    let kre = Dd::prod(c.re, yr);
                    let kim = Dd::prod(c.im, yr);
                    acc[t.idx].add_dd(kre.scale(z.re));
                    acc[t.idx].add_dd(kim.scale(-z.im));
                    if t.complex {
                        acc[t.idx + 1].add_dd(kre.scale(z.im));
                        acc[t.idx + 1].add_dd(kim.scale(z.re));
                    }
                }
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.value();
        }
    }

    pub fn eval_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(y, &mut out);
        out
    }

    fn add_jac(jac: &mut DMatrix<f64>, t: Slot, col: usize, d: C) {
        jac[(t.idx, col)] += d.re;
        if t.complex {
            jac[(t.idx + 1, col)] += d.im;
        }
    }

    fn add_operand(jac: &mut DMatrix<f64>, t: Slot, s: Operand, c: C) {
        Self::add_jac(jac, t, s.slot.idx, c);
        if s.slot.complex {
            let di = if s.conj { -C::i() } else { C::i() };
            Self::add_jac(jac, t, s.slot.idx + 1, c * di);
        }
    }

    pub fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for term in &self.terms {
            match *term {
                Term::Const { .. } => {}
                Term::Lin { t, s, c } => Self::add_operand(jac, t, s, c),
                Term::Prod { t, r, s, c } => {
                    Self::add_operand(jac, t, s, c * y[r.idx]);
                    Self::add_jac(jac, t, r.idx, c * Self::value(y, s));
                }
            }
        }
    }

    pub fn jacobian_mat(&self, y: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        self.jacobian(y, &mut j);
        j
    }

    /// Per-slot magnitudes max(|y_slot|, floor); complex slots use the modulus.
    pub fn slot_scales(&self, y: &[f64], floor: f64) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for slot in &self.slots {
            let m = if slot.complex {
                y[slot.idx].hypot(y[slot.idx + 1])
            } else {
                y[slot.idx].abs()
            };
            s[slot.idx] = m.max(floor);
            if slot.complex {
                s[slot.idx + 1] = m.max(floor);
            }
        }
        s
    }

    /// max over slots of |f_slot| / max(|y_slot|, floor), in 1/s.
    pub fn scaled_residual(&self, y: &[f64], f: &[f64], floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for slot in &self.slots {
            let (fm, ym) = if slot.complex {
                (
                    f[slot.idx].hypot(f[slot.idx + 1]),
                    y[slot.idx].hypot(y[slot.idx + 1]),
                )
            } else {
                (f[slot.idx].abs(), y[slot.idx].abs())
            };
            let r = fm / ym.max(floor);
            if !r.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
        worst
    }
}
