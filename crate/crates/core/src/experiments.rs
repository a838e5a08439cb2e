// SPDX-License-Identifier: Apache-2.0

//! End-to-end pipelines behind the command-line tool: build a target filter
//! and a channel, simulate a probe ensemble, compute analytical and SDP
//! bounds, and tabulate the results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{analytical_bounds, BoundsReport};
use crate::error::{Error, Result};
use crate::filters::{filter_fidelity, mixture_channel, ppbs_from_intensity, random_filter_with, FilterJson, QuantumFilter};
use crate::probe::{reduce_record, run_ensemble, MeasurementRecord, ProbeChoice, ProbeEnsemble, RecordJson};
use crate::quantum::{process_fidelity, ChoiMatrix};
use crate::sdp::{assemble_constraints, solve_bounds, SdpSolution, SdpSolutionJson, SdpStatus};

/// Environment variable capping the worker count of parallel experiments.
pub const THREADS_ENV: &str = "FILTER_BOUNDS_THREADS";

/// Default target transmittances of the second scan.
pub const FIG2_TARGETS: [f64; 4] = [0.1, 0.25, 0.5, 0.75];

/// Formats like C's `%.12g`.
pub fn format_g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses `start:stop:step` or a comma-separated list. Grid points are
/// rounded to 12 significant digits so that e.g. `0.5` is hit exactly.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::Schema(format!("grid '{spec}': {msg}"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let mut out: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else { return Err(bad("expected start:stop:step")) };
        let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(parse).collect::<Result<_>>()?
    };
    for x in &mut out {
        *x = format_g12(*x).parse().expect("formatted float parses");
    }
    if out.is_empty() {
        return Err(bad("empty"));
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("points must be strictly increasing"));
    }
    Ok(out)
}

fn check_transmittances(grid: &[f64], allow_zero: bool) -> Result<()> {
    for &t in grid {
        let ok = if allow_zero { (0.0..=1.0).contains(&t) } else { t > 0.0 && t <= 1.0 };
        if !ok {
            return Err(Error::OutOfRange { name: "transmittance", value: t });
        }
    }
    Ok(())
}

/// One line of a scan. Columns that do not apply to an experiment are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Channel index for the random benchmark, actual `T_V` otherwise.
    pub x: f64,
    pub target_tv: Option<f64>,
    pub p: Option<f64>,
    pub true_fidelity: f64,
    pub lower: f64,
    pub upper_e: f64,
    pub upper_f: f64,
    pub correction: f64,
    pub sdp_lower: Option<f64>,
    pub sdp_upper: Option<f64>,
    pub sdp_lower_status: Option<SdpStatus>,
    pub sdp_upper_status: Option<SdpStatus>,
}

impl ScanRow {
    fn from_bounds(x: f64, truth: f64, b: &BoundsReport<f64>) -> Self {
        Self {
            x,
            target_tv: None,
            p: None,
            true_fidelity: truth,
            lower: b.lower,
            upper_e: b.upper_e,
            upper_f: b.upper_f,
            correction: b.correction,
            sdp_lower: None,
            sdp_upper: None,
            sdp_lower_status: None,
            sdp_upper_status: None,
        }
    }

    /// `lower <= sdp_lower <= truth <= sdp_upper <= min(upper_e, upper_f)` within `tol`.
    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let (Some(lo), Some(hi)) = (self.sdp_lower, self.sdp_upper) else { return false };
        self.lower <= lo + tol
            && lo <= self.true_fidelity + tol
            && self.true_fidelity <= hi + tol
            && hi <= self.upper_e.min(self.upper_f) + tol
    }
}

fn status_name(s: Option<SdpStatus>) -> &'static str {
    match s {
        Some(SdpStatus::Optimal) => "optimal",
        Some(SdpStatus::MaxIter) => "max-iter",
        Some(SdpStatus::Infeasible) => "infeasible",
        None => "",
    }
}

/// Column layout of a CSV table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Fig1,
    Fig2,
    Fig3,
}

impl Layout {
    fn header(self) -> &'static str {
        match self {
            Layout::Fig1 => "tv,lower,upper_e,upper_f,correction,true_fidelity",
            Layout::Fig2 => "target_tv,tv,lower,upper_e,upper_f,true_fidelity",
            Layout::Fig3 => {
                "index,p,true_fidelity,lower,upper_e,upper_f,sdp_lower,sdp_upper,sdp_lower_status,sdp_upper_status"
            }
        }
    }
}

pub fn to_csv(layout: Layout, rows: &[ScanRow]) -> String {
    let g = |x: f64| format_g12(x);
    let og = |x: Option<f64>| x.map(format_g12).unwrap_or_default();
    let mut out = String::new();
    out.push_str(layout.header());
    out.push('\n');
    for r in rows {
        let line = match layout {
            Layout::Fig1 => [g(r.x), g(r.lower), g(r.upper_e), g(r.upper_f), g(r.correction), g(r.true_fidelity)].join(","),
            Layout::Fig2 => [og(r.target_tv), g(r.x), g(r.lower), g(r.upper_e), g(r.upper_f), g(r.true_fidelity)].join(","),
            Layout::Fig3 => [
                format!("{}", r.x as usize),
                og(r.p),
                g(r.true_fidelity),
                g(r.lower),
                g(r.upper_e),
                g(r.upper_f),
                og(r.sdp_lower),
                og(r.sdp_upper),
                status_name(r.sdp_lower_status).to_string(),
                status_name(r.sdp_upper_status).to_string(),
            ]
            .join(","),
        };
        let _ = writeln!(out, "{line}");
    }
    out
}

fn exact_bounds(k: &QuantumFilter<f64>, chi: &ChoiMatrix<f64>, choice: ProbeChoice) -> Result<(MeasurementRecord<f64>, BoundsReport<f64>)> {
    let ens = ProbeEnsemble::build(choice, k)?;
    let record = run_ensemble(chi, &ens, None, 0)?;
    let bounds = analytical_bounds(k, &reduce_record(&record, k)?)?;
    Ok((record, bounds))
}

/// Ideal PPBS channel against itself with product probes, per `T_V`.
pub fn run_fig1(grid: &[f64]) -> Result<Vec<ScanRow>> {
    check_transmittances(grid, false)?;
    grid.iter()
        .map(|&tv| {
            let k = ppbs_from_intensity(tv)?;
            let (_, b) = exact_bounds(&k, &k.choi(), ProbeChoice::Product)?;
            Ok(ScanRow::from_bounds(tv, 1.0, &b))
        })
        .collect()
}

/// Ideal PPBS at each actual `T_V` scored against each target `T_V`.
pub fn run_fig2(targets: &[f64], grid: &[f64]) -> Result<Vec<ScanRow>> {
    check_transmittances(targets, false)?;
    check_transmittances(grid, true)?;
    let mut rows = Vec::with_capacity(targets.len() * grid.len());
    for &target in targets {
        let k = ppbs_from_intensity(target)?;
        for &tv in grid {
            let actual = ppbs_from_intensity(tv)?;
            let (_, b) = exact_bounds(&k, &actual.choi(), ProbeChoice::Product)?;
            let truth = filter_fidelity(&k, &actual)?;
            let mut row = ScanRow::from_bounds(tv, truth, &b);
            row.target_tv = Some(target);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Parameters of the random-mixture benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Config {
    pub count: usize,
    pub probes: ProbeChoice,
    pub target_tv: f64,
    pub seed: u64,
    /// Overrides the uniformly drawn mixing weight of every channel.
    #[serde(default)]
    pub force_p: Option<f64>,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self { count: 1000, probes: ProbeChoice::Product, target_tv: 0.5, seed: 0, force_p: None }
    }
}

/// Channel `index` of the benchmark: `p` uniform on `[0, 1]` and a Ginibre
/// perturbing filter, both drawn from ChaCha stream `index` of `seed`.
pub fn fig3_channel(k: &QuantumFilter<f64>, cfg: &Fig3Config, index: usize) -> Result<(f64, ChoiMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let drawn: f64 = rng.random();
    let p = cfg.force_p.unwrap_or(drawn);
    let other = random_filter_with(k.dim(), &mut rng)?;
    Ok((p, mixture_channel(k, &other, p)?.choi))
}

fn fig3_row(k: &QuantumFilter<f64>, cfg: &Fig3Config, index: usize) -> Result<ScanRow> {
    let (p, chi) = fig3_channel(k, cfg, index)?;
    let (record, b) = exact_bounds(k, &chi, cfg.probes)?;
    let truth = process_fidelity(&chi, &k.choi())?;
    let mut row = ScanRow::from_bounds(index as f64, truth, &b);
    row.p = Some(p);
    let set = assemble_constraints(std::slice::from_ref(&record))?;
    let (lo, hi) = solve_bounds(&set, k, 0.0)?;
    row.sdp_lower = Some(lo.value);
    row.sdp_upper = Some(hi.value);
    row.sdp_lower_status = Some(lo.status);
    row.sdp_upper_status = Some(hi.status);
    Ok(row)
}

/// Worker count from [`THREADS_ENV`], or all cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Random mixtures `p K + (1 - p) K'` around a PPBS target, rows sorted by
/// true fidelity (ties by index).
pub fn run_fig3(cfg: &Fig3Config) -> Result<Vec<ScanRow>> {
    if cfg.count == 0 {
        return Err(Error::Schema("count must be at least 1".into()));
    }
    check_transmittances(&[cfg.target_tv], false)?;
    if let Some(p) = cfg.force_p {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { name: "p", value: p });
        }
    }
    let k = ppbs_from_intensity(cfg.target_tv)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Schema(format!("thread pool: {e}")))?;
    let mut rows = pool.install(|| {
        (0..cfg.count)
            .into_par_iter()
            .map(|i| fig3_row(&k, cfg, i))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| a.true_fidelity.total_cmp(&b.true_fidelity).then(a.x.total_cmp(&b.x)));
    Ok(rows)
}

/// Target filter of a custom run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// PPBS filter at this intensity transmittance.
    Tv(f64),
    /// Path to a filter JSON file, relative to the config file.
    FilterFile(PathBuf),
    Filter(FilterJson),
}

/// Implemented channel of a custom run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// The target itself.
    Ideal,
    /// A single-Kraus channel.
    Filter {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        matrix: Option<FilterJson>,
    },
    /// `p K + (1 - p) K'` with a Ginibre `K'` drawn from `seed`.
    Mixture { p: f64, seed: u64 },
    /// Measured data; no channel is simulated.
    Record { path: PathBuf },
}

/// Input of `custom`. The same pipeline as the figure scans with every
/// stage configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub channel: ChannelSpec,
    #[serde(default = "default_probes")]
    pub probes: ProbeChoice,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_probes() -> ProbeChoice {
    ProbeChoice::Product
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomReport {
    pub d: usize,
    pub probes: Option<ProbeChoice>,
    pub shots: Option<u64>,
    pub true_fidelity: Option<f64>,
    pub bounds: Option<BoundsReport<f64>>,
    /// Why analytical bounds are missing, if they are.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds_error: Option<String>,
    pub constraints: usize,
    pub sdp_lower: SdpSolutionJson,
    pub sdp_upper: SdpSolutionJson,
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn load_filter(base: &Path, path: Option<&PathBuf>, inline: Option<&FilterJson>) -> Result<QuantumFilter<f64>> {
    match (path, inline) {
        (Some(p), None) => QuantumFilter::from_json(&read_json(&base.join(p))?),
        (None, Some(m)) => QuantumFilter::from_json(m),
        _ => Err(Error::Schema("filter channel needs exactly one of 'path' or 'matrix'".into())),
    }
}

/// Runs a custom configuration; relative paths resolve against `base`.
pub fn run_custom(cfg: &ExperimentConfig, base: &Path) -> Result<CustomReport> {
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::OutOfRange { name: "epsilon", value: cfg.epsilon });
    }
    let k = match &cfg.target {
        TargetSpec::Tv(tv) => ppbs_from_intensity(*tv)?,
        TargetSpec::FilterFile(p) => load_filter(base, Some(p), None)?,
        TargetSpec::Filter(m) => load_filter(base, None, Some(m))?,
    };
    let chi = match &cfg.channel {
        ChannelSpec::Ideal => Some(k.choi()),
        ChannelSpec::Filter { path, matrix } => Some(load_filter(base, path.as_ref(), matrix.as_ref())?.choi()),
        ChannelSpec::Mixture { p, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let other = random_filter_with(k.dim(), &mut rng)?;
            Some(mixture_channel(&k, &other, *p)?.choi)
        }
        ChannelSpec::Record { .. } => None,
    };
    let (record, probes) = match (&cfg.channel, &chi) {
        (ChannelSpec::Record { path }, _) => {
            let json: RecordJson = read_json(&base.join(path))?;
            (MeasurementRecord::from_json(&json)?, None)
        }
        (_, Some(chi)) => {
            let ens = ProbeEnsemble::build(cfg.probes, &k)?;
            (run_ensemble(chi, &ens, cfg.shots, cfg.seed)?, Some(cfg.probes))
        }
        (_, None) => unreachable!("only record channels lack a Choi matrix"),
    };
    if record.dim() != Some(k.dim()) {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: record.dim().unwrap_or(0) });
    }
    let (bounds, bounds_error) = match reduce_record(&record, &k).and_then(|s| analytical_bounds(&k, &s)) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let set = assemble_constraints(std::slice::from_ref(&record))?;
    let (lo, hi): (SdpSolution<f64>, SdpSolution<f64>) = solve_bounds(&set, &k, cfg.epsilon)?;
    let true_fidelity = chi.as_ref().map(|c| process_fidelity(c, &k.choi())).transpose()?;
    let shots = match record.mode {
        crate::probe::Mode::Sampled(n) => Some(n),
        crate::probe::Mode::Exact => None,
    };
    Ok(CustomReport {
        d: k.dim(),
        probes,
        shots,
        true_fidelity,
        bounds,
        bounds_error,
        constraints: set.len(),
        sdp_lower: lo.to_json(),
        sdp_upper: hi.to_json(),
    })
}
