//! `superlase` command-line front end.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};
use std::path::PathBuf;
use superlase::clock::{self, ClockSpec, PowerRate};
use superlase::collective;
use superlase::cumulant::{self, Branch, SteadyOptions};
use superlase::filtercav::{self, FilterParams};
use superlase::oracle::{self, OracleConfig};
use superlase::ptsym;
use superlase::spectrum;
use superlase::sweep::{
    self, fmt_num, header_block, run_2d_sweep, run_sweep, Outcome, RunOptions, Scale, SweepSpec, SweepTable, Value,
};
use superlase::SystemParams;

#[derive(Parser, Debug)]
#[command(name = "superlase", version, about = "Collective lasing in coupled PT-symmetric cavities")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Flat TOML table of parameters (Hz); missing keys keep the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Parameter override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Starting parameter set before config and overrides.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Ep)]
    preset: Preset,
    /// Steady-state branch selection.
    #[arg(long, global = true, default_value = "auto")]
    branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Ep,
    Ptbp,
    NoEp,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    stop: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    scale: Option<Scale>,
    /// Comma-separated observable names (see `--list-outputs`).
    #[arg(long, value_delimiter = ',')]
    outputs: Vec<String>,
    /// Print the known observables and exit.
    #[arg(long)]
    list_outputs: bool,
    /// Reset G to G_PT at every point.
    #[arg(long)]
    ep_lock: bool,
    /// Progress journal; an interrupted run resumes from it.
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Evaluate at most this many new points, then stop.
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Eigenvalues of the two-mode matrix across a G grid.
    PhaseDiagram {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        g_start: f64,
        #[arg(long, default_value_t = 80e3)]
        g_stop: f64,
        #[arg(long, default_value_t = 321)]
        points: usize,
    },
    /// Steady state, derived parameters and the closed-form solution.
    Steady,
    /// Sweep the pump rate (log grid 1e-4..1e3 Hz by default).
    SweepEta(GridArgs),
    /// Sweep the tunneling rate G.
    #[command(name = "sweep-G")]
    SweepG(GridArgs),
    /// Regression-theorem emission spectrum of cavity a.
    Spectrum {
        /// Half span in Hz around the peak; default 20 composite widths.
        #[arg(long)]
        half_span: Option<f64>,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Analytic, regression and (optionally) filter-cavity linewidths.
    Linewidth {
        #[arg(long)]
        filter: bool,
    },
    /// Filter-cavity detuning scan with a Lorentzian fit.
    FilterScan(FilterArgs),
    /// Lasing peak against cavity-a detuning offsets.
    Pulling {
        #[command(flatten)]
        filter: FilterArgs,
        /// Offsets in Hz.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "100,1000,10000,100000,1000000")]
        offsets: Vec<f64>,
    },
    /// Filter-cavity linewidth against atom number.
    LinewidthVsN {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value_t = 8e6)]
        n_min: f64,
        #[arg(long, default_value_t = 1.2e7)]
        n_max: f64,
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
    /// Dicke-ladder coordinates along a sweep axis.
    DickeMap {
        #[arg(long, default_value = "eta")]
        axis: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Low-excitation bright/dark-mode populations in time.
    BrightDark {
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Cumulant steady state against the exact master equation (few atoms).
    OracleCheck {
        #[arg(long, default_value_t = 4)]
        cutoff_a: usize,
        #[arg(long, default_value_t = 4)]
        cutoff_b: usize,
        /// Also integrate from the ground state with this many samples.
        #[arg(long)]
        evolve: Option<usize>,
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
    },
    /// Projection-noise-limited fractional instability.
    Qpn {
        #[arg(long, default_value_t = 1.0)]
        chi: f64,
        #[arg(long, default_value_t = 1.0)]
        t_cycle: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Hz
        #[arg(long, default_value_t = 1e-6)]
        linewidth: f64,
        /// Hz
        #[arg(long, default_value_t = 1e14)]
        nu_clock: f64,
        #[arg(long, default_value_t = 10_000_000)]
        atoms: u64,
    },
    /// Fractional Allan deviation of a one-column frequency file (Hz).
    Allan {
        /// File path, or `-` for stdin.
        input: PathBuf,
        /// Hz; defaults to nu_sigma.
        #[arg(long)]
        nu_clock: Option<f64>,
    },
    /// Emitted power through cavity a.
    Power {
        /// Photon number; the steady value when absent.
        #[arg(long)]
        n_a: Option<f64>,
        #[arg(long, default_value = "kappa_a")]
        rate: PowerRate,
    },
    /// Two-parameter map, e.g. `--x eta:0.1:40:30:log --y atom_count:1e6:2e7:20`.
    Map2d {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, value_delimiter = ',', default_value = "linewidth_analytic,power,lasing")]
        outputs: Vec<String>,
        #[arg(long)]
        ep_lock: bool,
        #[arg(long)]
        journal: Option<PathBuf>,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
}

#[derive(Args, Debug, Clone)]
struct FilterArgs {
    /// Filter linewidth, Hz.
    #[arg(long)]
    kappa_f: Option<f64>,
    /// Filter coupling, Hz.
    #[arg(long)]
    beta: Option<f64>,
    /// Explicit detuning grid `start:stop:points` (Hz) instead of the adaptive scan.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
}

/// What a subcommand produced.
enum Report {
    Table {
        columns: Vec<String>,
        rows: Vec<Vec<Value>>,
        extra: Vec<(&'static str, String)>,
    },
    Sweep(SweepTable),
    Scalar(Json),
    /// A staged sweep stopped early.
    Partial { done: usize, total: usize },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn resolve_params(g: &Global) -> Result<SystemParams> {
    let mut p = match g.preset {
        Preset::Ep => SystemParams::ep(18.0),
        Preset::Ptbp => SystemParams::ptbp(18.0),
        Preset::NoEp => SystemParams::no_ep(18.0),
    };
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = p;
        p = SystemParams::from_toml_str(&text)?;
        // Keys absent from the file keep the preset rather than the EP default.
        let table: std::collections::BTreeSet<String> = text
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, _)| k.trim().to_string()))
            .collect();
        for (k, v) in base.to_key_values() {
            let alias = match k {
                "coupling_G" => "G",
                "coupling_g" => "g",
                "atom_count" => "N",
                other => other,
            };
            if !table.contains(k) && !table.contains(alias) {
                p.set(k, v)?;
            }
        }
    }
    for kv in &g.set {
        p.apply_override(kv)?;
    }
    let v = p.validate()?;
    for a in &v.advisories {
        eprintln!("warning: {a}");
    }
    Ok(p)
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global.clone();
    let p = resolve_params(&g)?;
    let name = command_name(&cli.cmd);
    let report = dispatch(cli.cmd, &g, p)?;
    let default_format = match report {
        Report::Scalar(_) => Format::Json,
        _ => Format::Csv,
    };
    let format = g.format.unwrap_or(default_format);
    let text = match report {
        Report::Partial { done, total } => {
            eprintln!("stopped after {done} of {total} points; rerun with the same journal to resume");
            return Ok(());
        }
        Report::Sweep(t) => match format {
            Format::Csv => t.to_csv(name, &[]),
            Format::Json => pretty(&t.to_json(name))?,
        },
        Report::Table { columns, rows, extra } => match format {
            Format::Csv => table_csv(name, &p, &columns, &rows, &extra),
            Format::Json => pretty(&table_json(name, &p, &columns, &rows, &extra))?,
        },
        Report::Scalar(v) => {
            let doc = json!({
                "tool": sweep::TOOL_NAME,
                "version": sweep::TOOL_VERSION,
                "command": name,
                "params": params_json(&p),
                "result": v,
            });
            match format {
                Format::Json => pretty(&doc)?,
                Format::Csv => scalar_csv(name, &p, &v),
            }
        }
    };
    sweep::write_text(g.out.as_deref(), &text).context("writing output")?;
    Ok(())
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::PhaseDiagram { .. } => "phase-diagram",
        Cmd::Steady => "steady",
        Cmd::SweepEta(_) => "sweep-eta",
        Cmd::SweepG(_) => "sweep-G",
        Cmd::Spectrum { .. } => "spectrum",
        Cmd::Linewidth { .. } => "linewidth",
        Cmd::FilterScan(_) => "filter-scan",
        Cmd::Pulling { .. } => "pulling",
        Cmd::LinewidthVsN { .. } => "linewidth-vs-n",
        Cmd::DickeMap { .. } => "dicke-map",
        Cmd::BrightDark { .. } => "bright-dark",
        Cmd::OracleCheck { .. } => "oracle-check",
        Cmd::Qpn { .. } => "qpn",
        Cmd::Allan { .. } => "allan",
        Cmd::Power { .. } => "power",
        Cmd::Map2d { .. } => "map2d",
    }
}

fn pretty(v: &Json) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn params_json(p: &SystemParams) -> Json {
    let m: serde_json::Map<String, Json> = p.to_key_values().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    Json::Object(m)
}

fn table_csv(
    name: &str,
    p: &SystemParams,
    columns: &[String],
    rows: &[Vec<Value>],
    extra: &[(&'static str, String)],
) -> String {
    let mut s = header_block(name, p, extra);
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| sweep::csv_cell(&v.csv())).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn table_json(
    name: &str,
    p: &SystemParams,
    columns: &[String],
    rows: &[Vec<Value>],
    extra: &[(&'static str, String)],
) -> Json {
    let extra: serde_json::Map<String, Json> = extra.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    json!({
        "tool": sweep::TOOL_NAME,
        "version": sweep::TOOL_VERSION,
        "command": name,
        "params": params_json(p),
        "notes": extra,
        "columns": columns,
        "rows": rows,
    })
}

fn scalar_csv(name: &str, p: &SystemParams, v: &Json) -> String {
    let mut s = header_block(name, p, &[]);
    s.push_str("key,value\n");
    let mut flat = Vec::new();
    flatten("", v, &mut flat);
    for (k, v) in flat {
        s.push_str(&format!("{},{}\n", sweep::csv_cell(&k), sweep::csv_cell(&v)));
    }
    s
}

fn flatten(prefix: &str, v: &Json, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Json::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Json::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Json::Number(n) => out.push((prefix.to_string(), n.as_f64().map(fmt_num).unwrap_or_else(|| n.to_string()))),
        Json::Null => out.push((prefix.to_string(), String::new())),
        Json::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Json::String(s) => out.push((prefix.to_string(), s.clone())),
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn num(v: f64) -> Value {
    Value::Num(v)
}

fn opt(v: Option<f64>) -> Value {
    v.map(Value::Num).unwrap_or(Value::Missing)
}

fn dispatch(cmd: Cmd, g: &Global, p: SystemParams) -> Result<Report> {
    match cmd {
        Cmd::PhaseDiagram { g_start, g_stop, points } => {
            if points < 2 || !(g_start < g_stop) {
                bail!("need points >= 2 and g_start < g_stop");
            }
            let grid: Vec<f64> = (0..points)
                .map(|k| g_start + (g_stop - g_start) * k as f64 / (points - 1) as f64)
                .collect();
            let rows = ptsym::phase_diagram(&p, &grid)?;
            let g_pt = p.g_pt();
            Ok(Report::Table {
                columns: cols(&["G", "re_plus", "im_plus", "re_minus", "im_minus", "phase"]),
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            num(r.g_hz),
                            num(r.re_plus),
                            num(r.im_plus),
                            num(r.re_minus),
                            num(r.im_minus),
                            r.phase.map(|ph| Value::Text(ph.as_str().into())).unwrap_or(Value::Missing),
                        ]
                    })
                    .collect(),
                extra: vec![("G_PT", fmt_num(g_pt))],
            })
        }
        Cmd::Steady => {
            let r = cumulant::solve_steady(&p, &steady_opts(g))?;
            let derived = p.derive().ok();
            let analytic = cumulant::analytic_steady(&p).ok();
            let phase = ptsym::classify(&p, ptsym::DEFAULT_TOL_REL).ok().map(|ph| ph.as_str());
            Ok(Report::Scalar(json!({
                "steady": r,
                "derived": derived,
                "analytic": analytic,
                "phase": phase,
            })))
        }
        Cmd::SweepEta(a) => grid_sweep(g, p, "eta", a, (1e-4, 1e3, 60, Scale::Log), &[
            "pop",
            "corr",
            "n_a",
            "linewidth_analytic",
            "linewidth_qrt",
            "lasing",
        ]),
        Cmd::SweepG(a) => grid_sweep(g, p, "coupling_G", a, (0.0, 80e3, 81, Scale::Linear), &[
            "corr",
            "n_a",
            "linewidth_analytic",
            "linewidth_qrt",
            "phase",
        ]),
        Cmd::DickeMap { axis, grid } => grid_sweep(g, p, &axis, grid, (1e-3, 40.0, 60, Scale::Log), &[
            "pop", "corr", "jz", "j_len", "j_eff", "excited",
        ]),
        Cmd::Spectrum { half_span, points } => {
            if points < 3 {
                bail!("need at least 3 points");
            }
            let s = cumulant::solve_steady(&p, &steady_opts(g))?.state;
            let q = spectrum::decompose(spectrum::build_qrt(&p, &s));
            let lw = spectrum::linewidth_qrt(&q);
            let half = half_span.unwrap_or(20.0 * lw.composite_fwhm);
            if !(half > 0.0 && half.is_finite()) {
                bail!("half span must be positive, got {half}");
            }
            let grid: Vec<f64> = (0..points)
                .map(|k| lw.peak_hz - half + 2.0 * half * k as f64 / (points - 1) as f64)
                .collect();
            let dens = spectrum::spectrum_curve(&q, &grid)?;
            Ok(Report::Table {
                columns: cols(&["nu", "density"]),
                rows: grid.iter().zip(&dens).map(|(x, y)| vec![num(*x), num(*y)]).collect(),
                extra: vec![
                    ("composite_fwhm", fmt_num(lw.composite_fwhm)),
                    ("peak", fmt_num(lw.peak_hz)),
                    ("defective", q.defective.to_string()),
                ],
            })
        }
        Cmd::Linewidth { filter } => {
            let r = cumulant::solve_steady(&p, &steady_opts(g))?;
            let an = spectrum::linewidth_analytic(&p, &r.state);
            let q = spectrum::decompose(spectrum::build_qrt(&p, &r.state));
            let lw = spectrum::linewidth_qrt(&q);
            let scan = if filter {
                Some(filtercav::adaptive_scan(&p, None)?)
            } else {
                None
            };
            Ok(Report::Scalar(json!({
                "lasing": r.lasing,
                "analytic": an,
                "qrt": lw,
                "narrow_pole": q.narrow_pole().1,
                "filter": scan.map(|s| json!({"filter": s.filter, "fit": s.fit})),
            })))
        }
        Cmd::FilterScan(fa) => {
            let base = filter_base(&p, &fa)?;
            let scan = match &fa.grid {
                Some(spec) => {
                    let grid = parse_linear_grid(spec)?;
                    let base = base.unwrap_or_else(|| default_filter(&p).expect("steady solved above"));
                    filtercav::spectrum_scan(&p, &base, &grid)?
                }
                None => filtercav::adaptive_scan(&p, base)?,
            };
            let f = scan.fit;
            Ok(Report::Table {
                columns: cols(&["delta_f", "n_f"]),
                rows: scan.rows.iter().map(|r| vec![num(r.delta_f), num(r.n_f)]).collect(),
                extra: vec![
                    ("kappa_f", fmt_num(scan.filter.kappa_f)),
                    ("beta", fmt_num(scan.filter.beta)),
                    ("peak_freq", fmt_num(f.peak_freq)),
                    ("fwhm_raw", fmt_num(f.fwhm_raw)),
                    ("fwhm_deconvolved", fmt_num(f.fwhm_deconvolved)),
                    ("fit_residual", fmt_num(f.fit_residual)),
                ],
            })
        }
        Cmd::Pulling { filter, offsets } => {
            let base = filter_base(&p, &filter)?;
            let r = filtercav::pulling_factor(&p, base, &offsets)?;
            Ok(Report::Table {
                columns: cols(&["offset", "lasing", "peak_freq", "fwhm", "error"]),
                rows: r
                    .rows
                    .iter()
                    .map(|x| {
                        vec![
                            num(x.offset),
                            Value::Bool(x.lasing),
                            opt(x.peak_freq),
                            opt(x.fwhm),
                            Value::Text(x.error.clone().unwrap_or_default()),
                        ]
                    })
                    .collect(),
                extra: vec![("slope", fmt_num(r.slope)), ("intercept", fmt_num(r.intercept))],
            })
        }
        Cmd::LinewidthVsN { filter, n_min, n_max, points } => {
            if points < 2 || !(n_min >= 1.0 && n_min < n_max) {
                bail!("need points >= 2 and 1 <= n_min < n_max");
            }
            let grid: Vec<u64> = (0..points)
                .map(|k| (n_min + (n_max - n_min) * k as f64 / (points - 1) as f64).round() as u64)
                .collect();
            let base = filter_base(&p, &filter)?;
            let r = filtercav::linewidth_vs_atoms(&p, base, &grid)?;
            Ok(Report::Table {
                columns: cols(&["atom_count", "lasing", "linewidth", "error"]),
                rows: r
                    .rows
                    .iter()
                    .map(|x| {
                        vec![
                            num(x.atom_count as f64),
                            Value::Bool(x.lasing),
                            opt(x.linewidth),
                            Value::Text(x.error.clone().unwrap_or_default()),
                        ]
                    })
                    .collect(),
                extra: vec![
                    ("spread", fmt_num(r.spread)),
                    ("range", fmt_num(r.range)),
                    ("monotone", r.monotone.to_string()),
                ],
            })
        }
        Cmd::BrightDark { t_end, samples } => {
            let r = collective::bright_dark(&p, t_end, samples)?;
            Ok(Report::Table {
                columns: cols(&["t", "bright", "dark"]),
                rows: r.samples.iter().map(|s| vec![num(s.t), num(s.bright), num(s.dark)]).collect(),
                extra: vec![
                    ("kappa_ato", fmt_num(r.kappa_ato)),
                    ("bright_diverges", r.bright_diverges.to_string()),
                    ("dark_diverges", r.dark_diverges.to_string()),
                ],
            })
        }
        Cmd::OracleCheck { cutoff_a, cutoff_b, evolve, t_end } => {
            // The preset is far too large for the exact solver: start from the
            // scaled two-atom point and apply only explicit overrides.
            let mut params = OracleConfig::scaled_pair().params;
            for kv in &g.set {
                params.apply_override(kv)?;
            }
            let cfg = OracleConfig {
                params,
                fock_cutoff_a: cutoff_a,
                fock_cutoff_b: cutoff_b,
                t_end,
            };
            let exact = oracle::steady_exact(&cfg)?;
            let mf = cumulant::solve_steady(&params, &steady_opts(g))?;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            let series = match evolve {
                Some(n) => Some(oracle::evolve_exact(&cfg, n)?),
                None => None,
            };
            Ok(Report::Scalar(json!({
                "config": cfg,
                "exact": exact,
                "cumulant": mf.state,
                "rel_diff": {
                    "n_a": rel(mf.state.n_a, exact.obs.n_a),
                    "n_b": rel(mf.state.n_b, exact.obs.n_b),
                    "pop": rel(mf.state.pop, exact.obs.pop),
                    "corr": rel(mf.state.corr.re, exact.obs.corr.re),
                },
                "trace_error": (exact.trace - 1.0).abs(),
                "evolution": series,
            })))
        }
        Cmd::Qpn { chi, t_cycle, tau, linewidth, nu_clock, atoms } => {
            let spec = ClockSpec {
                chi_shape: chi,
                t_cycle,
                tau,
                linewidth,
                nu_clock,
                atom_count: atoms,
            };
            let s = clock::qpn_instability(&spec)?;
            Ok(Report::Scalar(json!({"spec": spec, "sigma": s})))
        }
        Cmd::Allan { input, nu_clock } => {
            let text = if input.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())?
            } else {
                std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?
            };
            let series = parse_series(&text)?;
            let nu = nu_clock.unwrap_or(p.nu_sigma);
            let s = clock::allan_deviation(&series, nu)?;
            Ok(Report::Scalar(json!({"points": series.len(), "nu_clock": nu, "sigma": s})))
        }
        Cmd::Power { n_a, rate } => {
            let n = match n_a {
                Some(n) => n,
                None => cumulant::solve_steady(&p, &steady_opts(g))?.state.n_a,
            };
            let w = clock::emission_power(&p, n, rate)?;
            Ok(Report::Scalar(json!({"n_a": n, "rate": rate, "power_w": w})))
        }
        Cmd::Map2d { x, y, outputs, ep_lock, journal, stop_after } => {
            let mut sx = parse_axis(&x, p)?;
            let sy = parse_axis(&y, p)?;
            sx.outputs = outputs;
            sx.ep_lock = ep_lock;
            sx.branch = g.branch;
            let opts = RunOptions {
                jobs: g.jobs,
                journal,
                stop_after,
            };
            Ok(outcome(run_2d_sweep(&sx, &sy, &opts)?))
        }
    }
}

fn steady_opts(g: &Global) -> SteadyOptions {
    SteadyOptions {
        branch: g.branch,
        ..Default::default()
    }
}

fn outcome(o: Outcome) -> Report {
    match o {
        Outcome::Complete(t) => Report::Sweep(t),
        Outcome::Partial { done, total } => Report::Partial { done, total },
    }
}

fn grid_sweep(
    g: &Global,
    p: SystemParams,
    axis: &str,
    a: GridArgs,
    (start, stop, points, scale): (f64, f64, usize, Scale),
    default_outputs: &[&str],
) -> Result<Report> {
    if a.list_outputs {
        let mut s = String::new();
        for o in sweep::Observable::ALL {
            s.push_str(&format!("{:<20} {}\n", o.name(), o.describe()));
        }
        sweep::write_text(None, &s)?;
        std::process::exit(0);
    }
    let mut spec = SweepSpec::new(
        axis,
        a.scale.unwrap_or(scale),
        a.start.unwrap_or(start),
        a.stop.unwrap_or(stop),
        a.points.unwrap_or(points),
        p,
    );
    spec.outputs = if a.outputs.is_empty() {
        default_outputs.iter().map(|s| s.to_string()).collect()
    } else {
        a.outputs
    };
    spec.ep_lock = a.ep_lock;
    spec.branch = g.branch;
    let opts = RunOptions {
        jobs: g.jobs,
        journal: a.journal,
        stop_after: a.stop_after,
    };
    Ok(outcome(run_sweep(&spec, &opts)?))
}

/// `name:start:stop:points[:log|linear]`
fn parse_axis(s: &str, p: SystemParams) -> Result<SweepSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        bail!("axis `{s}` should be name:start:stop:points[:log|linear]");
    }
    let f = |t: &str| t.trim().parse::<f64>().map_err(|_| anyhow!("bad number `{t}` in axis `{s}`"));
    let points: usize = parts[3].trim().parse().map_err(|_| anyhow!("bad point count in axis `{s}`"))?;
    let scale = match parts.get(4) {
        Some(t) => t.parse::<Scale>().map_err(|e| anyhow!(e))?,
        None => Scale::Linear,
    };
    Ok(SweepSpec::new(parts[0].trim(), scale, f(parts[1])?, f(parts[2])?, points, p))
}

/// `start:stop:points`, linear.
fn parse_linear_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("grid `{s}` should be start:stop:points");
    }
    let a: f64 = parts[0].trim().parse()?;
    let b: f64 = parts[1].trim().parse()?;
    let n: usize = parts[2].trim().parse()?;
    if n < 2 || !(a < b) {
        bail!("grid needs start < stop and at least 2 points");
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn estimated_width(p: &SystemParams) -> Result<f64> {
    let s = cumulant::solve_steady(p, &SteadyOptions::default())?.state;
    Ok(filtercav::estimate(p, &s).1)
}

fn default_filter(p: &SystemParams) -> Result<FilterParams> {
    Ok(FilterParams::for_linewidth(estimated_width(p)?))
}

/// Filter parameters from explicit flags, or `None` for the automatic choice.
/// With only `--kappa-f`, β keeps the default probe fraction for that κf.
fn filter_base(p: &SystemParams, fa: &FilterArgs) -> Result<Option<FilterParams>> {
    if fa.kappa_f.is_none() && fa.beta.is_none() {
        return Ok(None);
    }
    let width = estimated_width(p)?;
    let mut f = FilterParams::for_linewidth(width);
    if let Some(k) = fa.kappa_f {
        f.kappa_f = k;
        f.beta = (filtercav::PROBE_FRACTION * k * (width + k) / 4.0).sqrt();
    }
    if let Some(b) = fa.beta {
        f.beta = b;
    }
    for note in f.validate(Some(width))? {
        eprintln!("warning: {note}");
    }
    Ok(Some(f))
}

fn parse_series(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| {
            let first = l.split([',', ' ', '\t']).find(|t| !t.is_empty()).unwrap_or("");
            first
                .parse::<f64>()
                .with_context(|| format!("line {}: cannot parse `{}` as a frequency", i + 1, l.trim()))
        })
        .collect()
}
