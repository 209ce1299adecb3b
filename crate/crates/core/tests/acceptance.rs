//! Acceptance criteria 1-11: one PASS/FAIL line each, nonzero exit on any
//! failure.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};
use superlase::clock::{self, ClockSpec};
use superlase::collective;
use superlase::cumulant::{self, CumulantState, SteadyOptions};
use superlase::filtercav;
use superlase::oracle::{self, OracleConfig};
use superlase::ptsym;
use superlase::spectrum;
use superlase::sweep::{run_sweep, RunOptions, Scale, SweepSpec};
use superlase::SystemParams;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within_factor(x: f64, target: f64, k: f64) -> bool {
    x >= target / k && x <= target * k
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn ac1() -> Verdict {
    let p = SystemParams::ep(18.0);
    let t = Instant::now();
    let d = p.derive().unwrap();
    let dt = t.elapsed();
    let err = (d.g_ep - 39_750.0).abs();
    verdict(
        err <= 2.0 * f64::EPSILON * 39_750.0 && dt < Duration::from_millis(1),
        format!("G_PT = {:.15e} Hz (|err| = {err:.1e}), {dt:?}", d.g_ep),
    )
}

fn ac2() -> Verdict {
    let p = SystemParams::ep(18.0);
    let t = Instant::now();
    let grid: Vec<f64> = (0..=320).map(|k| 250.0 * k as f64).collect();
    let rows = ptsym::phase_diagram(&p, &grid).unwrap();
    let g_pt = p.g_pt();
    let mut shape_ok = true;
    let mut ep_row = None;
    for r in &rows {
        let re = r.re_plus.abs().max(r.re_minus.abs());
        let im = r.im_plus.abs().max(r.im_minus.abs());
        if r.g_hz < g_pt {
            shape_ok &= re < 1e-6 && im > 0.0;
        } else if r.g_hz > g_pt {
            shape_ok &= im < 1e-6 && re > 0.0;
        } else {
            ep_row = Some((re, im));
        }
    }
    let ep_ok = matches!(ep_row, Some((re, im)) if re < 1e-6 && im < 1e-6);
    // Splitting against distance from the EP on a log grid within 1%.
    let d = log_grid(1e-6, 1e-2, 25);
    let gs: Vec<f64> = d.iter().map(|x| g_pt * (1.0 + x)).collect();
    let near = ptsym::phase_diagram(&p, &gs).unwrap();
    let lx: Vec<f64> = gs.iter().map(|g| (g - g_pt).ln()).collect();
    let ly: Vec<f64> = near
        .iter()
        .map(|r| (C::new(r.re_plus - r.re_minus, r.im_plus - r.im_minus)).norm().ln())
        .collect();
    let (slope, _) = filtercav::line_fit(&lx, &ly);
    let dt = t.elapsed();
    verdict(
        shape_ok && ep_ok && (slope - 0.5).abs() <= 0.05 && dt < Duration::from_secs(1),
        format!(
            "imag below / real above: {shape_ok}, EP row {ep_row:?}, exponent {slope:.4}, {dt:?}"
        ),
    )
}

fn ac3() -> Verdict {
    let p = SystemParams::ep(18.0);
    let t = Instant::now();
    let spec = SweepSpec::new("eta", Scale::Log, 1e-4, 1e3, 60, p).with_outputs(&[
        "corr",
        "pop",
        "analytic_pop",
        "analytic_corr",
    ]);
    let table = run_sweep(&spec, &RunOptions::default()).unwrap().complete().unwrap();
    let dt = t.elapsed();
    let eta: Vec<f64> = table.rows.iter().map(|r| r.coords[0]).collect();
    let corr: Vec<f64> = table.column("corr").unwrap().into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let pop: Vec<f64> = table.column("pop").unwrap().into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let apop = table.column("analytic_pop").unwrap();
    let acorr = table.column("analytic_corr").unwrap();
    let step = eta[1] / eta[0];
    let gamma = p.gamma;
    let crossing = (1..eta.len()).find(|&k| corr[k - 1] <= 0.0 && corr[k] > 0.0);
    let cross_ok = match crossing {
        Some(k) => eta[k - 1] <= gamma * step && eta[k] >= gamma / step,
        None => false,
    };
    let eta_max = p.derive().unwrap().eta_max;
    let collapse_ok = eta
        .iter()
        .zip(&corr)
        .filter(|(e, _)| **e > eta_max)
        .all(|(_, c)| c.abs() < 1e-3);
    let mut worst: f64 = 0.0;
    for k in 0..eta.len() {
        if (0.1..=30.0).contains(&eta[k]) {
            worst = worst
                .max(rel(pop[k], apop[k].unwrap()))
                .max(rel(corr[k], acorr[k].unwrap()));
        }
    }
    let pass = cross_ok && collapse_ok && worst <= 0.05 && dt < Duration::from_secs(60);
    verdict(
        pass,
        format!(
            "crossing between {:?}, collapse above {eta_max:.4} Hz: {collapse_ok}, worst analytic deviation {:.2}%, {dt:?}",
            crossing.map(|k| (eta[k - 1], eta[k])),
            100.0 * worst
        ),
    )
}

fn ac4() -> Verdict {
    let t = Instant::now();
    let ep = cumulant::solve_steady(&SystemParams::ep(18.0), &SteadyOptions::default()).unwrap();
    let t_ep = t.elapsed();
    let t = Instant::now();
    let bp = cumulant::solve_steady(&SystemParams::ptbp(18.0), &SteadyOptions::default()).unwrap();
    let t_bp = t.elapsed();
    let pass = within_factor(ep.state.n_a, 10.0, 3.0)
        && within_factor(bp.state.n_a, 1e3, 3.0)
        && t_ep.max(t_bp) < Duration::from_secs(1);
    verdict(
        pass,
        format!("n_a EP {:.4} (~10), PTBP {:.4} (~1e3), {t_ep:?} / {t_bp:?}", ep.state.n_a, bp.state.n_a),
    )
}

fn min_linewidth(p: SystemParams) -> (f64, f64) {
    let spec = SweepSpec::new("eta", Scale::Log, 1e-4, 1e3, 60, p).with_outputs(&["linewidth_qrt", "lasing"]);
    let table = run_sweep(&spec, &RunOptions::default()).unwrap().complete().unwrap();
    let lw = table.column("linewidth_qrt").unwrap();
    table
        .rows
        .iter()
        .zip(lw)
        .filter_map(|(r, w)| w.map(|w| (r.coords[0], w)))
        .fold((f64::NAN, f64::INFINITY), |acc, (e, w)| if w < acc.1 { (e, w) } else { acc })
}

fn ac5() -> Verdict {
    let t = Instant::now();
    let (e_ep, lw_ep) = min_linewidth(SystemParams::ep(18.0));
    let (e_bp, lw_bp) = min_linewidth(SystemParams::ptbp(18.0));
    let dt = t.elapsed();
    // Reported widths are cyclic: 2π×10⁻⁶ rad/s is 10⁻⁶ Hz.
    let ratio = lw_bp / lw_ep;
    let pass = within_factor(lw_ep, 1e-6, 3.0)
        && within_factor(lw_bp, 1e-4, 3.0)
        && ratio >= 100.0
        && dt < Duration::from_secs(60);
    verdict(
        pass,
        format!(
            "min FWHM EP {lw_ep:.4e} Hz at eta {e_ep:.3e} (target 1e-6 x/÷3), PTBP {lw_bp:.4e} Hz at eta {e_bp:.3e} (target 1e-4 x/÷3), ratio {ratio:.1} (need >= 100), {dt:?}"
        ),
    )
}

fn ac6() -> Verdict {
    let base = SystemParams::ep(18.0);
    let eta_max = base.derive().unwrap().eta_max;
    let etas = log_grid(10.0 * base.gamma, 0.9 * eta_max, 10);
    let t = Instant::now();
    let res: Vec<Result<(f64, f64, f64, f64), String>> = etas
        .par_iter()
        .map(|&eta| {
            let p = SystemParams { eta, ..base };
            let s = cumulant::solve_steady(&p, &SteadyOptions::default()).map_err(|e| e.to_string())?;
            let an = spectrum::linewidth_analytic(&p, &s.state).compact;
            let qrt = spectrum::linewidth_qrt(&spectrum::decompose(spectrum::build_qrt(&p, &s.state))).composite_fwhm;
            let fil = filtercav::adaptive_scan(&p, None).map_err(|e| e.to_string())?.fit.fwhm_deconvolved;
            Ok((eta, an, qrt, fil))
        })
        .collect();
    let dt = t.elapsed();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for r in &res {
        match r {
            Ok((_, a, q, f)) => {
                let hi = a.max(*q).max(*f);
                let lo = a.min(*q).min(*f);
                worst = worst.max(hi / lo - 1.0);
            }
            Err(e) => failures.push(e.clone()),
        }
    }
    verdict(
        failures.is_empty() && worst <= 0.2 && dt < Duration::from_secs(600),
        format!(
            "10 points eta in [{:.3e}, {:.3e}] Hz, worst pairwise spread {:.3}%, failures {failures:?}, {dt:?}",
            etas[0],
            etas[9],
            100.0 * worst
        ),
    )
}

fn ac7() -> Verdict {
    let offsets = [1e2, 1e3, 1e4, 1e5, 1e6];
    let t = Instant::now();
    let ep = filtercav::pulling_factor(&SystemParams::ep(18.0), None, &offsets).unwrap();
    let no = filtercav::pulling_factor(&SystemParams::no_ep(18.0), None, &offsets).unwrap();
    let dt = t.elapsed();
    let pass = rel(ep.slope, 2.84e-6) <= 0.5
        && rel(no.slope, 1.08e-4) <= 0.5
        && no.slope >= 10.0 * ep.slope
        && dt < Duration::from_secs(600);
    verdict(
        pass,
        format!(
            "slope EP {:.4e} (2.84e-6 ±50%), no-EP {:.4e} (1.08e-4 ±50%), ratio {:.1}, {dt:?}",
            ep.slope,
            no.slope,
            no.slope / ep.slope
        ),
    )
}

fn ac8() -> Verdict {
    let grid: Vec<u64> = (0..5).map(|k| 8_000_000 + 1_000_000 * k).collect();
    let t = Instant::now();
    let r = filtercav::linewidth_vs_atoms(&SystemParams::ep(18.0), None, &grid).unwrap();
    let dt = t.elapsed();
    let all_good = r.rows.iter().all(|x| x.linewidth.is_some());
    verdict(
        all_good && within_factor(r.spread, 3.2e-6, 2.0) && r.monotone && dt < Duration::from_secs(300),
        format!(
            "spread {:.4e} Hz (3.2e-6 x/÷2), range {:.4e}, monotone {}, {dt:?}",
            r.spread, r.range, r.monotone
        ),
    )
}

fn ac9() -> Verdict {
    let a = ClockSpec {
        chi_shape: 1.0,
        t_cycle: 1.0,
        tau: 1.0,
        linewidth: 1e-6,
        nu_clock: 1e14,
        atom_count: 10_000_000,
    };
    let b = ClockSpec {
        linewidth: 1e-3,
        atom_count: 1_000_000,
        ..a
    };
    let t = Instant::now();
    let sa = clock::qpn_instability(&a).unwrap();
    let sb = clock::qpn_instability(&b).unwrap();
    let dt = t.elapsed();
    verdict(
        rel(sa, 1.0e-24) <= 0.1 && rel(sb, 3.2e-21) <= 0.1 && dt < Duration::from_millis(1),
        format!("sigma {sa:.4e} (1.0e-24 ±10%), {sb:.4e} (~3.2e-21), {dt:?}"),
    )
}

fn ac10() -> Verdict {
    let cfg = OracleConfig::scaled_pair();
    let t = Instant::now();
    let exact = oracle::steady_exact(&cfg).unwrap();
    let mf = cumulant::solve_steady(&cfg.params, &SteadyOptions::default()).unwrap().state;
    let series = oracle::evolve_exact(&cfg, 5).unwrap();
    let dt = t.elapsed();
    let d_na = rel(mf.n_a, exact.obs.n_a);
    let d_pop = rel(mf.pop, exact.obs.pop);
    let trace_err = series
        .iter()
        .map(|s| (s.trace - 1.0).abs())
        .fold((exact.trace - 1.0).abs(), f64::max);
    verdict(
        d_na <= 0.05 && d_pop <= 0.05 && trace_err <= 1e-8 && dt < Duration::from_secs(60),
        format!(
            "n_a {:.5e} vs exact {:.5e} ({:.2}%), pop {:.5} vs {:.5} ({:.3}%), max |tr-1| {trace_err:.1e}, {dt:?}",
            mf.n_a,
            exact.obs.n_a,
            100.0 * d_na,
            mf.pop,
            exact.obs.pop,
            100.0 * d_pop
        ),
    )
}

/// Random points inside the superradiant window around the reference
/// configuration.
fn corpus(n: usize, seed: u64) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let log_u = |rng: &mut ChaCha8Rng, a: f64, b: f64| (rng.gen_range(a.ln()..b.ln())).exp();
    while out.len() < n {
        let mut p = SystemParams::ep(1.0);
        p.kappa_a = log_u(&mut rng, 8e4, 3.2e5);
        p.kappa_b = log_u(&mut rng, 5e2, 2e3);
        p.coupling_g = rng.gen_range(1.5..3.5);
        p.atom_count = log_u(&mut rng, 2e6, 2e7).round() as u64;
        p.gamma = 1e-3 * rng.gen_range(0.5..2.0);
        p.gamma_phi = p.gamma * rng.gen_range(0.5..2.0);
        p.coupling_big_g = p.g_pt()
            * match rng.gen_range(0..3) {
                0 => 1.0,
                1 => rng.gen_range(0.05..0.9),
                _ => rng.gen_range(1.02..1.2),
            };
        let Ok(d) = p.derive() else { continue };
        let lo = (3.0 * p.gamma).max(0.05);
        let hi = 0.8 * d.eta_max;
        if hi <= 2.0 * lo {
            continue;
        }
        p.eta = log_u(&mut rng, lo, hi);
        out.push(p);
    }
    out
}

const STEADY_TOL: f64 = 1e-8;

fn check_point(p: &SystemParams) -> Result<(), String> {
    let opts = SteadyOptions::default();
    let r = cumulant::solve_steady(p, &opts).map_err(|e| e.to_string())?;
    let s = r.state;
    // Conjugation symmetry: real correlations at resonance, and mirrored
    // detunings give the conjugate state up to the gauge a -> -a.
    let im_ok = s.corr.im.abs() < 1e-8 * s.corr.re.abs() || (s.corr.re.abs() < 1e-12 && s.corr.im.abs() < 1e-12);
    if !im_ok {
        return Err(format!("Im corr {:.3e} vs Re {:.3e}", s.corr.im, s.corr.re));
    }
    let det = 0.01 * p.kappa_b;
    let plus = SystemParams { delta_a: det, delta_b: -0.5 * det, ..*p };
    let minus = SystemParams { delta_a: -det, delta_b: 0.5 * det, ..*p };
    let sp = cumulant::solve_steady(&plus, &opts).map_err(|e| e.to_string())?.state;
    let sm = cumulant::solve_steady(&minus, &opts).map_err(|e| e.to_string())?.state;
    let mirrored = CumulantState {
        as_: -sm.as_.conj(),
        ab: -sm.ab.conj(),
        ..sm.conj()
    };
    let dconj = cumulant::state_distance(&sp, &mirrored);
    if dconj > 1e-6 {
        return Err(format!("mirror detuning distance {dconj:.3e}"));
    }
    // Weight sum.
    let q = spectrum::decompose(spectrum::build_qrt(p, &s));
    if !q.defective {
        let sum: C = q.weights.iter().sum();
        let e = (sum - C::new(s.n_a, 0.0)).norm() / s.n_a;
        if e > 1e-8 {
            return Err(format!("weight sum off by {e:.3e}"));
        }
    }
    // Dicke containment.
    let dk = collective::dicke_coordinates(&s, p.atom_count).map_err(|e| e.to_string())?;
    let slack = 1e-6 * p.n();
    if dk.m.abs() > dk.j_eff + slack || dk.j_eff > p.n() / 2.0 + slack {
        return Err(format!("Dicke point M {:.6e} J {:.6e} N/2 {:.6e}", dk.m, dk.j_eff, p.n() / 2.0));
    }
    // Fixed point reached from three seeds.
    // Long enough for the slowest Jacobian mode to decay by e^-40.
    let t_end = 40.0 / (-r.max_growth);
    for seed in [CumulantState::ground(), CumulantState::half(), CumulantState::excited()] {
        let tr = cumulant::integrate(&seed, p, t_end, 1e-10, 1e-14).map_err(|e| e.to_string())?;
        let d = cumulant::state_distance(&tr.last().unwrap().1, &s);
        if d > 10.0 * STEADY_TOL {
            return Err(format!("seed pop {} ends {d:.3e} from the steady state", seed.pop));
        }
    }
    // Determinism.
    let again = cumulant::solve_steady(p, &opts).map_err(|e| e.to_string())?;
    if again.state.to_vec() != s.to_vec() {
        return Err("repeat solve differs".into());
    }
    Ok(())
}

fn ac11() -> Verdict {
    let pts = corpus(50, 0x5eed);
    let t = Instant::now();
    let results: Vec<Result<(), String>> = pts.par_iter().map(check_point).collect();
    // Sweep output is independent of worker count.
    let spec = SweepSpec::new("eta", Scale::Log, 0.01, 30.0, 12, SystemParams::ep(1.0)).with_outputs(&[
        "pop",
        "corr",
        "n_a",
        "linewidth_qrt",
    ]);
    let one = run_sweep(&spec, &RunOptions { jobs: Some(1), ..Default::default() }).unwrap().complete().unwrap();
    let many = run_sweep(&spec, &RunOptions { jobs: Some(4), ..Default::default() }).unwrap().complete().unwrap();
    let det_ok = one.to_csv("check", &[]) == many.to_csv("check", &[]);
    let dt = t.elapsed();
    let bad: Vec<String> = results
        .iter()
        .zip(&pts)
        .filter_map(|(r, p)| r.as_ref().err().map(|e| format!("eta={:.4e} G={:.4e}: {e}", p.eta, p.coupling_big_g)))
        .collect();
    verdict(
        bad.is_empty() && det_ok && dt < Duration::from_secs(300),
        format!(
            "{}/{} corpus points pass, sweep determinism across workers {det_ok}, {dt:?}{}",
            pts.len() - bad.len(),
            pts.len(),
            if bad.is_empty() { String::new() } else { format!("; first failure {}", bad[0]) }
        ),
    )
}

fn main() {
    let checks: [(&str, fn() -> Verdict); 11] = [
        ("EP location", ac1),
        ("eigenstructure", ac2),
        ("threshold structure", ac3),
        ("photon numbers", ac4),
        ("linewidth magnitudes", ac5),
        ("cross-method linewidths", ac6),
        ("cavity pulling", ac7),
        ("atom-number sensitivity", ac8),
        ("clock metrics", ac9),
        ("oracle equivalence", ac10),
        ("property suite", ac11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in checks.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("{} AC{:<2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
    }
    println!("{} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
