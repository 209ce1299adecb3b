//! Parameter sweeps: grids over one or two parameters, per-point
//! observables, ordered parallel evaluation, a resumable journal and
//! CSV/JSON emission.

use crate::clock::{self, PowerRate};
use crate::collective;
use crate::cumulant::{self, Branch, SteadyOptions, SteadyReport};
use crate::filtercav;
use crate::model::{ParamError, SystemParams, FIELD_NAMES};
use crate::ptsym;
use crate::spectrum;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::Path;
use std::sync::Mutex;
use thiserror::Error;

pub const TOOL_NAME: &str = "superlase";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("unknown observable `{0}`; known: {1}")]
    UnknownObservable(String, String),
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("journal: {0}")]
    Journal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" | "lin" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            o => Err(format!("unknown scale `{o}` (linear|log)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: String,
    pub scale: Scale,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub fixed: SystemParams,
    pub outputs: Vec<String>,
    /// Reset G to |κa − κb|/4 at every point.
    pub ep_lock: bool,
    #[serde(skip)]
    pub branch: Branch,
}

impl SweepSpec {
    pub fn new(axis: &str, scale: Scale, start: f64, stop: f64, points: usize, fixed: SystemParams) -> Self {
        Self {
            axis: axis.to_string(),
            scale,
            start,
            stop,
            points,
            fixed,
            outputs: Vec::new(),
            ep_lock: false,
            branch: Branch::Auto,
        }
    }

    pub fn with_outputs(mut self, outputs: &[&str]) -> Self {
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !FIELD_NAMES.contains(&self.axis.as_str()) && !["G", "g", "N"].contains(&self.axis.as_str()) {
            return Err(SweepError::UnknownAxis(self.axis.clone()));
        }
        for o in &self.outputs {
            Observable::parse(o)?;
        }
        if self.points < 2 {
            return Err(SweepError::Invalid(format!("points = {} < 2", self.points)));
        }
        if !(self.start < self.stop) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(SweepError::Invalid(format!("need start < stop, got {} .. {}", self.start, self.stop)));
        }
        if self.scale == Scale::Log && !(self.start > 0.0) {
            return Err(SweepError::Invalid("log scale needs start > 0".into()));
        }
        self.fixed.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let u = k as f64 / (n - 1) as f64;
                let v = match self.scale {
                    Scale::Linear => self.start + (self.stop - self.start) * u,
                    Scale::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * u).exp(),
                };
                if k == n - 1 {
                    self.stop
                } else if k == 0 {
                    self.start
                } else {
                    v
                }
            })
            .map(|v| if is_count(&self.axis) { v.round() } else { v })
            .collect()
    }
}

fn is_count(axis: &str) -> bool {
    axis == "atom_count" || axis == "N"
}

macro_rules! observables {
    ($($v:ident => $name:literal : $doc:literal,)*) => {
        /// Per-point quantities a sweep can emit.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
        pub enum Observable { $($v,)* }

        impl Observable {
            pub const ALL: &'static [Observable] = &[$(Observable::$v,)*];

            pub fn name(&self) -> &'static str {
                match self { $(Observable::$v => $name,)* }
            }

            pub fn describe(&self) -> &'static str {
                match self { $(Observable::$v => $doc,)* }
            }
        }
    };
}

observables! {
    NA => "n_a": "steady <a+a>",
    NB => "n_b": "steady <b+b>",
    AbRe => "ab_re": "Re <a+b>",
    AbIm => "ab_im": "Im <a+b>",
    AsRe => "as_re": "Re <a+ s1->",
    AsIm => "as_im": "Im <a+ s1->",
    BsRe => "bs_re": "Re <b s1+>",
    BsIm => "bs_im": "Im <b s1+>",
    Pop => "pop": "<s1+ s1->",
    Corr => "corr": "Re <s1+ s2->",
    CorrIm => "corr_im": "Im <s1+ s2->",
    Pair => "pair": "<s1+ s1- s2+ s2->",
    Residual => "residual": "scaled steady residual, 1/s",
    Lasing => "lasing": "Re corr > 1e-6",
    Stable => "stable": "Jacobian spectrum in the left half plane",
    Limited => "precision_limited": "residual limited by double precision",
    Cooperativity => "cooperativity": "C",
    GammaC => "gamma_c": "Purcell rate, Hz",
    EtaMax => "eta_max": "upper threshold, Hz",
    KappaEff => "kappa_eff": "effective cavity loss, Hz",
    GEp => "g_ep": "EP tunneling, Hz",
    ChiGauge => "chi_gauge": "gauge rate, Hz",
    GammaTotal => "gamma_total": "eta + gamma + gamma_phi, Hz",
    Phase => "phase": "PT phase of the cavity pair",
    AnalyticPop => "analytic_pop": "closed-form pop",
    AnalyticCorr => "analytic_corr": "closed-form corr",
    AnalyticValid => "analytic_valid": "gamma < eta < N Gamma_c",
    LinewidthAnalytic => "linewidth_analytic": "analytic linewidth, Hz",
    LinewidthExpanded => "linewidth_expanded": "expanded analytic linewidth, Hz",
    LinewidthEp => "linewidth_ep": "EP-specialised analytic linewidth, Hz",
    LinewidthQrt => "linewidth_qrt": "composite FWHM of the regression spectrum, Hz",
    LinewidthPole => "linewidth_pole": "narrowest weighted pole width, Hz",
    PeakQrt => "peak_qrt": "spectrum peak offset, Hz",
    LinewidthFilter => "linewidth_filter": "deconvolved filter-cavity FWHM, Hz",
    PeakFilter => "peak_filter": "filter-cavity peak offset, Hz",
    Jz => "jz": "<Jz>/hbar",
    JLen => "j_len": "sqrt<J^2>/hbar",
    JEff => "j_eff": "J from J(J+1)",
    Excited => "excited": "M + N/2",
    Power => "power": "emitted power through kappa_a, W",
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self, SweepError> {
        Self::ALL.iter().copied().find(|o| o.name() == s).ok_or_else(|| {
            SweepError::UnknownObservable(
                s.to_string(),
                Self::ALL.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
            )
        })
    }

    fn needs_steady(&self) -> bool {
        !matches!(
            self,
            Self::Cooperativity
                | Self::GammaC
                | Self::EtaMax
                | Self::KappaEff
                | Self::GEp
                | Self::ChiGauge
                | Self::GammaTotal
                | Self::Phase
                | Self::AnalyticPop
                | Self::AnalyticCorr
                | Self::AnalyticValid
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Value {
    pub fn csv(&self) -> String {
        match self {
            Value::Num(v) => fmt_num(*v),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Lossless text form for the journal.
    fn encode(&self) -> String {
        match self {
            Value::Num(v) => format!("n{v:?}"),
            Value::Bool(b) => format!("b{b}"),
            Value::Text(s) => format!("t{s}"),
            Value::Missing => "m".into(),
        }
    }

    fn decode(s: &str) -> Option<Self> {
        let (tag, rest) = s.split_at(s.char_indices().nth(1).map(|x| x.0).unwrap_or(s.len()));
        match tag {
            "n" => rest.parse().ok().map(Value::Num),
            "b" => rest.parse().ok().map(Value::Bool),
            "t" => Some(Value::Text(rest.to_string())),
            "m" => Some(Value::Missing),
            _ => None,
        }
    }
}

/// Twelve significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Evaluate the requested observables at one parameter point.
pub fn evaluate(p: &SystemParams, outputs: &[Observable], branch: Branch) -> Result<Vec<Value>, String> {
    p.validate().map_err(|e| e.to_string())?;
    let derived = p.derive().ok();
    let steady: Option<SteadyReport> = if outputs.iter().any(|o| o.needs_steady()) {
        Some(
            cumulant::solve_steady(
                p,
                &SteadyOptions {
                    branch,
                    ..Default::default()
                },
            )
            .map_err(|e| e.to_string())?,
        )
    } else {
        None
    };
    let mut qrt = None;
    let mut filter = None;
    let mut out = Vec::with_capacity(outputs.len());
    let num = |v: f64| Value::Num(v);
    let der = |f: fn(&crate::model::DerivedParams) -> f64| derived.as_ref().map(|d| num(f(d))).unwrap_or(Value::Missing);
    for o in outputs {
        let s = steady.as_ref().map(|r| r.state);
        let v = match o {
            Observable::NA => num(s.unwrap().n_a),
            Observable::NB => num(s.unwrap().n_b),
            Observable::AbRe => num(s.unwrap().ab.re),
            Observable::AbIm => num(s.unwrap().ab.im),
            Observable::AsRe => num(s.unwrap().as_.re),
            Observable::AsIm => num(s.unwrap().as_.im),
            Observable::BsRe => num(s.unwrap().bs.re),
            Observable::BsIm => num(s.unwrap().bs.im),
            Observable::Pop => num(s.unwrap().pop),
            Observable::Corr => num(s.unwrap().corr.re),
            Observable::CorrIm => num(s.unwrap().corr.im),
            Observable::Pair => num(s.unwrap().pair),
            Observable::Residual => num(steady.as_ref().unwrap().residual),
            Observable::Lasing => Value::Bool(steady.as_ref().unwrap().lasing),
            Observable::Stable => Value::Bool(steady.as_ref().unwrap().stable),
            Observable::Limited => Value::Bool(steady.as_ref().unwrap().precision_limited),
            Observable::Cooperativity => der(|d| d.cooperativity),
            Observable::GammaC => der(|d| d.gamma_c),
            Observable::EtaMax => der(|d| d.eta_max),
            Observable::KappaEff => der(|d| d.kappa_eff),
            Observable::GEp => der(|d| d.g_ep),
            Observable::ChiGauge => der(|d| d.chi_gauge),
            Observable::GammaTotal => num(p.gamma_total()),
            Observable::Phase => match ptsym::classify(p, ptsym::DEFAULT_TOL_REL) {
                Ok(ph) => Value::Text(ph.as_str().to_string()),
                Err(_) => Value::Missing,
            },
            Observable::AnalyticPop | Observable::AnalyticCorr | Observable::AnalyticValid => {
                match cumulant::analytic_steady(p) {
                    Ok(a) => match o {
                        Observable::AnalyticPop => num(a.pop),
                        Observable::AnalyticCorr => num(a.corr),
                        _ => Value::Bool(a.valid),
                    },
                    Err(_) => Value::Missing,
                }
            }
            Observable::LinewidthAnalytic | Observable::LinewidthExpanded | Observable::LinewidthEp => {
                let a = spectrum::linewidth_analytic(p, &s.unwrap());
                match o {
                    Observable::LinewidthAnalytic => num(a.compact),
                    Observable::LinewidthExpanded => num(a.expanded),
                    _ => a.ep_form.map(num).unwrap_or(Value::Missing),
                }
            }
            Observable::LinewidthQrt | Observable::LinewidthPole | Observable::PeakQrt => {
                let (q, lw) = qrt.get_or_insert_with(|| {
                    let q = spectrum::decompose(spectrum::build_qrt(p, &s.unwrap()));
                    let lw = spectrum::linewidth_qrt(&q);
                    (q, lw)
                });
                match o {
                    Observable::LinewidthQrt => num(lw.composite_fwhm),
                    Observable::LinewidthPole => num(q.narrow_pole().1),
                    _ => num(lw.peak_hz),
                }
            }
            Observable::LinewidthFilter | Observable::PeakFilter => {
                let r = filter.get_or_insert_with(|| filtercav::adaptive_scan(p, None).map_err(|e| e.to_string()));
                match r {
                    Ok(scan) if *o == Observable::LinewidthFilter => num(scan.fit.fwhm_deconvolved),
                    Ok(scan) => num(scan.fit.peak_freq),
                    Err(e) => return Err(e.clone()),
                }
            }
            Observable::Jz | Observable::JLen | Observable::JEff | Observable::Excited => {
                let d = collective::dicke_coordinates(&s.unwrap(), p.atom_count).map_err(|e| e.to_string())?;
                match o {
                    Observable::Jz => num(d.jz),
                    Observable::JLen => num(d.j_len),
                    Observable::JEff => num(d.j_eff),
                    _ => num(d.m + p.n() / 2.0),
                }
            }
            Observable::Power => {
                num(clock::emission_power(p, s.unwrap().n_a.max(0.0), PowerRate::KappaA).map_err(|e| e.to_string())?)
            }
        };
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Axis values of this point (one or two).
    pub coords: Vec<f64>,
    pub values: Vec<Value>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub columns: Vec<String>,
    pub fixed: SystemParams,
    pub rows: Vec<SweepRow>,
}

/// One grid point: the parameters and their axis coordinates.
#[derive(Debug, Clone, Copy)]
struct Point {
    params: SystemParams,
    coords: [f64; 2],
}

fn points_1d(spec: &SweepSpec) -> Result<Vec<Point>, SweepError> {
    spec.grid()
        .into_iter()
        .map(|x| {
            let mut p = spec.fixed;
            p.set(&spec.axis, x)?;
            if spec.ep_lock {
                p.coupling_big_g = p.g_pt();
            }
            Ok(Point {
                params: p,
                coords: [x, f64::NAN],
            })
        })
        .collect()
}

fn points_2d(x: &SweepSpec, y: &SweepSpec) -> Result<Vec<Point>, SweepError> {
    let gy = y.grid();
    let mut out = Vec::new();
    for xv in x.grid() {
        for &yv in &gy {
            let mut p = x.fixed;
            p.set(&x.axis, xv)?;
            p.set(&y.axis, yv)?;
            if x.ep_lock || y.ep_lock {
                p.coupling_big_g = p.g_pt();
            }
            out.push(Point {
                params: p,
                coords: [xv, yv],
            });
        }
    }
    Ok(out)
}

/// Evaluation controls shared by 1-D and 2-D sweeps.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Progress journal for resumable runs.
    pub journal: Option<std::path::PathBuf>,
    /// Evaluate at most this many new points, then stop (for tests and
    /// staged runs).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Complete(SweepTable),
    /// Stopped early; `done` of `total` points are in the journal.
    Partial { done: usize, total: usize },
}

impl Outcome {
    pub fn complete(self) -> Option<SweepTable> {
        match self {
            Outcome::Complete(t) => Some(t),
            Outcome::Partial { .. } => None,
        }
    }
}

fn journal_line(index: usize, row: &SweepRow) -> String {
    let mut s = format!("{index}");
    let _ = write!(s, "\t{}", row.error.as_deref().map(|e| format!("e{}", e.replace(['\t', '\n'], " "))).unwrap_or_else(|| "ok".into()));
    for v in &row.values {
        let _ = write!(s, "\t{}", v.encode().replace(['\t', '\n'], " "));
    }
    s
}

fn parse_journal_line(line: &str, coords: [f64; 2], dims: usize) -> Option<(usize, SweepRow)> {
    let mut parts = line.split('\t');
    let index: usize = parts.next()?.parse().ok()?;
    let status = parts.next()?;
    let error = if status == "ok" {
        None
    } else {
        Some(status.strip_prefix('e')?.to_string())
    };
    let values = parts.map(Value::decode).collect::<Option<Vec<_>>>()?;
    Some((
        index,
        SweepRow {
            coords: coords[..dims].to_vec(),
            values,
            error,
        },
    ))
}

fn run_points(
    points: &[Point],
    dims: usize,
    outputs: &[Observable],
    branch: Branch,
    opts: &RunOptions,
) -> Result<(Vec<Option<SweepRow>>, usize), SweepError> {
    let mut done: Vec<Option<SweepRow>> = vec![None; points.len()];
    if let Some(path) = &opts.journal {
        if path.exists() {
            let f = std::io::BufReader::new(std::fs::File::open(path)?);
            for line in f.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn final line from an interrupted write is ignored.
                if let Some((i, row)) = points
                    .first()
                    .and_then(|_| line.split('\t').next()?.parse::<usize>().ok())
                    .filter(|i| *i < points.len())
                    .and_then(|i| parse_journal_line(&line, points[i].coords, dims))
                {
                    if row.values.len() == outputs.len() {
                        done[i] = Some(row);
                    }
                }
            }
        }
    }
    let mut pending: Vec<usize> = (0..points.len()).filter(|&i| done[i].is_none()).collect();
    if let Some(k) = opts.stop_after {
        pending.truncate(k);
    }
    let journal = match &opts.journal {
        Some(p) => Some(Mutex::new(
            std::fs::OpenOptions::new().create(true).append(true).open(p)?,
        )),
        None => None,
    };
    let work = |i: usize| -> Result<(usize, SweepRow), SweepError> {
        let pt = &points[i];
        let row = match evaluate(&pt.params, outputs, branch) {
            Ok(values) => SweepRow {
                coords: pt.coords[..dims].to_vec(),
                values,
                error: None,
            },
            Err(e) => SweepRow {
                coords: pt.coords[..dims].to_vec(),
                values: vec![Value::Missing; outputs.len()],
                error: Some(e),
            },
        };
        if let Some(j) = &journal {
            let mut f = j.lock().map_err(|_| SweepError::Journal("poisoned lock".into()))?;
            writeln!(f, "{}", journal_line(i, &row))?;
            f.flush()?;
        }
        Ok((i, row))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| SweepError::Invalid(e.to_string()))?;
    let results: Vec<Result<(usize, SweepRow), SweepError>> =
        pool.install(|| pending.par_iter().map(|&i| work(i)).collect());
    let fresh = results.len();
    for r in results {
        let (i, row) = r?;
        done[i] = Some(row);
    }
    Ok((done, fresh))
}

fn finish(
    done: Vec<Option<SweepRow>>,
    axes: Vec<String>,
    outputs: &[Observable],
    fixed: SystemParams,
) -> Outcome {
    let total = done.len();
    let have = done.iter().filter(|r| r.is_some()).count();
    if have < total {
        return Outcome::Partial { done: have, total };
    }
    Outcome::Complete(SweepTable {
        axes,
        columns: outputs.iter().map(|o| o.name().to_string()).collect(),
        fixed,
        rows: done.into_iter().map(|r| r.expect("complete")).collect(),
    })
}

fn parse_outputs(names: &[String]) -> Result<Vec<Observable>, SweepError> {
    names.iter().map(|s| Observable::parse(s)).collect()
}

pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<Outcome, SweepError> {
    spec.validate()?;
    let outputs = parse_outputs(&spec.outputs)?;
    let points = points_1d(spec)?;
    let (done, _) = run_points(&points, 1, &outputs, spec.branch, opts)?;
    Ok(finish(done, vec![spec.axis.clone()], &outputs, spec.fixed))
}

/// Product grid of two axes, x outer and y inner. Fixed parameters, outputs
/// and branch come from `x`.
pub fn run_2d_sweep(x: &SweepSpec, y: &SweepSpec, opts: &RunOptions) -> Result<Outcome, SweepError> {
    x.validate()?;
    let y_only = SweepSpec {
        outputs: Vec::new(),
        fixed: x.fixed,
        ..y.clone()
    };
    y_only.validate()?;
    if x.axis == y.axis {
        return Err(SweepError::Invalid("both axes name the same parameter".into()));
    }
    let outputs = parse_outputs(&x.outputs)?;
    let points = points_2d(x, y)?;
    let (done, _) = run_points(&points, 2, &outputs, x.branch, opts)?;
    Ok(finish(done, vec![x.axis.clone(), y.axis.clone()], &outputs, x.fixed))
}

/// Header block: tool, version, command and every resolved parameter.
pub fn header_block(command: &str, params: &SystemParams, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {TOOL_NAME} {TOOL_VERSION}");
    let _ = writeln!(s, "# command: {command}");
    let _ = writeln!(s, "# units: frequencies and rates in Hz (cyclic), time in s, power in W");
    for (k, v) in params.to_key_values() {
        let _ = writeln!(s, "# {k} = {}", fmt_num(v));
    }
    for (k, v) in extra {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

impl SweepTable {
    pub fn to_csv(&self, command: &str, extra: &[(&str, String)]) -> String {
        let mut s = header_block(command, &self.fixed, extra);
        let mut head: Vec<String> = self.axes.clone();
        head.extend(self.columns.iter().cloned());
        head.push("error".into());
        let _ = writeln!(s, "{}", head.join(","));
        for r in &self.rows {
            let mut cells: Vec<String> = r.coords.iter().map(|v| fmt_num(*v)).collect();
            cells.extend(r.values.iter().map(|v| csv_cell(&v.csv())));
            cells.push(csv_cell(r.error.as_deref().unwrap_or("")));
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_json(&self, command: &str) -> serde_json::Value {
        let mut params = BTreeMap::new();
        for (k, v) in self.fixed.to_key_values() {
            params.insert(k, v);
        }
        serde_json::json!({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": command,
            "params": params,
            "axes": self.axes,
            "columns": self.columns,
            "rows": self.rows,
        })
    }

    /// Column values as numbers, `None` where missing.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values.get(k).and_then(Value::as_f64)).collect())
    }
}

/// Quote a CSV cell when it holds a separator or quote.
pub fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
