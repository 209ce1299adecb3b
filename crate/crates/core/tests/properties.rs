use num_complex::Complex64 as C;
use proptest::prelude::*;
use superlase::clock::{self, ClockSpec};
use superlase::collective;
use superlase::cumulant::{self, SteadyOptions};
use superlase::model::SystemParams;
use superlase::ptsym::{self, Phase};
use superlase::spectrum;
use superlase::sweep::{run_sweep, RunOptions, Scale, SweepSpec};

fn cheap() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

fn solver_cases() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

prop_compose! {
    fn any_params()(
        ka in 1e3f64..1e6,
        kb in 1e1f64..1e4,
        big_g in 0.0f64..2e5,
        g in 0.1f64..10.0,
        n in 1u64..100_000_000,
        gamma in 1e-4f64..1e-2,
        eta in 1e-4f64..1e2,
        gphi in 0.0f64..1e-2,
        da in -1e4f64..1e4,
        db in -1e4f64..1e4,
    ) -> SystemParams {
        SystemParams {
            delta_a: da,
            delta_b: db,
            coupling_big_g: big_g,
            coupling_g: g,
            atom_count: n,
            kappa_a: ka,
            kappa_b: kb,
            gamma,
            eta,
            gamma_phi: gphi,
            nu_sigma: 4.29e14,
        }
    }
}

prop_compose! {
    /// Resonant points inside the superradiant window near the reference
    /// cavities.
    fn lasing_params()(
        ka in 8e4f64..3.2e5,
        kb in 5e2f64..2e3,
        g_frac in prop_oneof![Just(1.0), 0.05f64..0.9, 1.02f64..1.2],
        g in 1.5f64..3.5,
        n in 2_000_000u64..20_000_000,
        u in 0.0f64..1.0,
    ) -> SystemParams {
        let mut p = SystemParams { kappa_a: ka, kappa_b: kb, coupling_g: g, atom_count: n, ..SystemParams::ep(1.0) };
        p.coupling_big_g = g_frac * p.g_pt();
        let eta_max = p.derive().unwrap().eta_max;
        let (lo, hi) = (3.0 * p.gamma, 0.8 * eta_max);
        p.eta = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
        p
    }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn angular_round_trip(p in any_params()) {
        let back = p.angular().to_cyclic(p.nu_sigma);
        for (k, v) in p.to_key_values() {
            let w = back.get(k).unwrap();
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1e-300), "{k}: {v} vs {w}");
        }
    }

    #[test]
    fn derived_rates_scale(p in any_params(), s in 1e-3f64..1e3) {
        let a = p.derive().unwrap();
        let b = p.scaled(s).derive().unwrap();
        for (x, y) in [
            (a.chi_gauge, b.chi_gauge), (a.g_ep, b.g_ep), (a.kappa_eff, b.kappa_eff),
            (a.gamma_c, b.gamma_c), (a.gamma_total, b.gamma_total), (a.eta_max, b.eta_max),
        ] {
            prop_assert!((y - s * x).abs() <= 1e-10 * (s * x).abs().max(1e-300));
        }
        prop_assert!((a.cooperativity - b.cooperativity).abs() <= 1e-10 * a.cooperativity);
    }

    #[test]
    fn eta_max_falls_with_tunneling(p in any_params(), g1 in 0.0f64..1e5, dg in 1.0f64..1e5) {
        let lo = SystemParams { coupling_big_g: g1, ..p }.derive().unwrap().eta_max;
        let hi = SystemParams { coupling_big_g: g1 + dg, ..p }.derive().unwrap().eta_max;
        prop_assert!(hi < lo);
    }

    #[test]
    fn eigenvalue_sum_is_trace(p in any_params()) {
        let h = ptsym::hamiltonian(&p);
        let e = ptsym::eigensystem(&p);
        let tr = h[0][0] + h[1][1];
        let sum = e.lambda_plus + e.lambda_minus;
        prop_assert!((sum - tr).norm() <= 1e-9 * tr.norm().max(p.coupling_big_g).max(1.0));
    }

    #[test]
    fn closed_form_vectors_are_orthogonal(
        ka in 1e3f64..1e6, kb_frac in 1e-3f64..0.99, g_frac in prop_oneof![0.05f64..0.95, 1.05f64..5.0]
    ) {
        let kb = ka * kb_frac;
        let mut p = SystemParams { kappa_a: ka, kappa_b: kb, ..SystemParams::ep(1.0) };
        p.coupling_big_g = g_frac * p.g_pt();
        let e = ptsym::eigensystem(&p);
        prop_assert!(matches!(e.phase, Some(Phase::PTSymmetric | Phase::PTBroken)));
        prop_assert!(!e.defective);
        let ip = ptsym::c_product(&e.vec_plus, &e.vec_minus);
        prop_assert!(ip.norm() < 1e-12, "{ip}");
    }

    #[test]
    fn qpn_scalings(
        chi in 0.5f64..2.0, tc in 0.1f64..10.0, tau in 0.1f64..100.0,
        lw in 1e-7f64..1e-2, nu in 1e13f64..1e15, n in 1_000u64..100_000_000,
    ) {
        let s = ClockSpec { chi_shape: chi, t_cycle: tc, tau, linewidth: lw, nu_clock: nu, atom_count: n };
        let base = clock::qpn_instability(&s).unwrap();
        let dn = clock::qpn_instability(&ClockSpec { atom_count: 2 * n, ..s }).unwrap();
        let dt = clock::qpn_instability(&ClockSpec { tau: 2.0 * tau, ..s }).unwrap();
        let dl = clock::qpn_instability(&ClockSpec { linewidth: 2.0 * lw, ..s }).unwrap();
        prop_assert!((dn * 2f64.sqrt() / base - 1.0).abs() < 1e-12);
        prop_assert!((dt * 2f64.sqrt() / base - 1.0).abs() < 1e-12);
        prop_assert!((dl / (2.0 * base) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn allan_ignores_constant_offset(
        series in prop::collection::vec(-1.0f64..1.0, 2..50), offset in -1e3f64..1e3
    ) {
        let nu = 1e14;
        let a = clock::allan_deviation(&series, nu).unwrap();
        let shifted: Vec<f64> = series.iter().map(|x| x + offset).collect();
        let b = clock::allan_deviation(&shifted, nu).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-30) + 1e-28);
    }

    #[test]
    fn power_is_linear(n in 0.0f64..1e6) {
        let p = SystemParams::ep(18.0);
        let one = clock::emission_power(&p, n, Default::default()).unwrap();
        let two = clock::emission_power(&p, 2.0 * n, Default::default()).unwrap();
        prop_assert!((two - 2.0 * one).abs() <= 1e-12 * two.max(1e-300));
    }

    #[test]
    fn bright_dark_matches_closed_form(eta in 1e-5f64..5e-4, t in 0.5f64..20.0) {
        let p = SystemParams::ep(eta);
        let r = collective::bright_dark(&p, t, 1).unwrap();
        let (lb, ld) = collective::mode_rates(&p).unwrap();
        let (lb, ld) = (2.0 * std::f64::consts::PI * lb, 2.0 * std::f64::consts::PI * ld);
        let w = 2.0 * std::f64::consts::PI;
        // dn_b = lb n_b + w η ; dn_d = ld n_d + w γφ n_b + w (N-1) η, from zero.
        let eb = (lb * t).exp();
        let nb = w * p.eta / lb * (eb - 1.0);
        let c = w * p.eta / lb;
        let src = w * (p.n() - 1.0) * p.eta - w * p.gamma_phi * c;
        let ed = (ld * t).exp();
        let nd = w * p.gamma_phi * c / (lb - ld) * (eb - ed) + src / ld * (ed - 1.0);
        prop_assert!((r.samples[0].bright / nb - 1.0).abs() < 1e-7, "{} {}", r.samples[0].bright, nb);
        prop_assert!((r.samples[0].dark / nd - 1.0).abs() < 1e-7, "{} {}", r.samples[0].dark, nd);
    }

    #[test]
    fn log_grids_are_ordered(a in 1e-6f64..1.0, ratio in 1.5f64..1e6, n in 2usize..200) {
        let s = SweepSpec::new("eta", Scale::Log, a, a * ratio, n, SystemParams::ep(1.0));
        let g = s.grid();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g[0], a);
        prop_assert_eq!(g[n - 1], a * ratio);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}

proptest! {
    #![proptest_config(solver_cases())]

    #[test]
    fn steady_state_invariants(p in lasing_params()) {
        let r = cumulant::solve_steady(&p, &SteadyOptions::default()).unwrap();
        let s = r.state;
        prop_assert!(r.residual < 1e-8 || r.precision_limited);
        prop_assert!(r.lasing && r.stable);
        // Realness at resonance.
        prop_assert!(s.corr.im.abs() < 1e-8 * s.corr.re.abs());
        // Bounds.
        prop_assert!(s.n_a >= -1e-6 && s.n_b >= -1e-6);
        prop_assert!(s.pair <= s.pop + 1e-6);
        // Weight sum and pole stability.
        let q = spectrum::decompose(spectrum::build_qrt(&p, &s));
        prop_assert!(q.eigenvalues.iter().all(|l| l.re < 0.0));
        if !q.defective {
            let sum: C = q.weights.iter().sum();
            prop_assert!((sum - C::new(s.n_a, 0.0)).norm() <= 1e-8 * s.n_a);
        }
        // Analytic forms coincide.
        let an = spectrum::linewidth_analytic(&p, &s);
        prop_assert!((an.expanded / an.compact - 1.0).abs() < 1e-9);
        if let Some(e) = an.ep_form {
            prop_assert!((e / an.compact - 1.0).abs() < 1e-9);
        }
        let lw = spectrum::linewidth_qrt(&q);
        prop_assert!((an.compact / lw.composite_fwhm - 1.0).abs() < 0.2);
        // Dicke containment.
        let d = collective::dicke_coordinates(&s, p.atom_count).unwrap();
        let slack = 1e-6 * p.n();
        prop_assert!(d.m.abs() <= d.j_eff + slack);
        prop_assert!(d.j_eff <= p.n() / 2.0 + slack);
        // Determinism.
        let again = cumulant::solve_steady(&p, &SteadyOptions::default()).unwrap();
        prop_assert_eq!(again.state.to_vec(), s.to_vec());
    }
}

#[test]
fn linewidth_has_one_interior_minimum() {
    let p = SystemParams::ep(1.0);
    let eta_max = p.derive().unwrap().eta_max;
    let spec = SweepSpec::new("eta", Scale::Log, p.gamma * 1.05, eta_max * 0.98, 40, p).with_outputs(&["linewidth_qrt"]);
    let t = run_sweep(&spec, &RunOptions::default()).unwrap().complete().unwrap();
    let w: Vec<f64> = t.column("linewidth_qrt").unwrap().into_iter().map(Option::unwrap).collect();
    let k = (0..w.len()).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    assert!(k > 0 && k + 1 < w.len());
    assert!(w[..=k].windows(2).all(|x| x[1] <= x[0]));
    assert!(w[k..].windows(2).all(|x| x[1] >= x[0]));
}

#[test]
fn reference_grid_dicke_containment() {
    for p in [SystemParams::ep(1.0), SystemParams::ptbp(1.0)] {
        let spec = SweepSpec::new("eta", Scale::Log, 1e-4, 1e3, 30, p).with_outputs(&["jz", "j_eff"]);
        let t = run_sweep(&spec, &RunOptions::default()).unwrap().complete().unwrap();
        let jz = t.column("jz").unwrap();
        let j = t.column("j_eff").unwrap();
        let slack = 1e-6 * p.n();
        for (m, j) in jz.iter().zip(&j) {
            let (m, j) = (m.unwrap(), j.unwrap());
            assert!(m.abs() <= j + slack && j <= p.n() / 2.0 + slack);
        }
    }
}
