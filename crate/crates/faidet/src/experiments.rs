//! Monte-Carlo sweeps.
//!
//! Trial `k` uses the seed `trial_seed(master_seed, k)` for every swept
//! value and every series, so all curves see the same channel draws (common
//! random numbers). Channels for fewer ports are prefixes of those for more
//! ports, so an `N` sweep compares selections over nested port sets.
//!
//! Trials run on a rayon pool; results are keyed by `(value, trial)` and
//! assembled in that order, so the output does not depend on scheduling.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use faidet_core::sysmodel::{db_to_linear, realized_weighted_eh};
use faidet_core::{generate_mimo_scenario, generate_scenario, optimize, optimize_mimo, trial_seed, AoStatus, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Port count.
    N,
    /// SINR target of every DR, dB.
    GammaDb,
    /// Antenna size of every receiver, wavelengths.
    W,
    /// CSI accuracy of every receiver.
    Rho,
    /// Estimation stride.
    L,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "N" => Self::N,
            "gamma_db" => Self::GammaDb,
            "W" => Self::W,
            "rho" => Self::Rho,
            "L" => Self::L,
            _ => return Err(format!("unknown sweep parameter `{s}` (expected N, gamma_db, W, rho or L)")),
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::GammaDb => "gamma_db",
            Self::W => "W",
            Self::Rho => "rho",
            Self::L => "L",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig, String> {
        let count = |v: f64| -> Result<usize, String> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(format!("{} = {v} must be a positive integer", self.name()))
            }
        };
        let mut cfg = base.clone();
        match self {
            Self::N => cfg.ports = count(value)?,
            Self::L => cfg.port_stride = count(value)?,
            Self::GammaDb => cfg.data_receivers.iter_mut().for_each(|r| r.sinr_threshold = db_to_linear(value)),
            Self::W => cfg = cfg.with_antenna_size(value),
            Self::Rho => cfg = cfg.with_csi_accuracy(value),
        }
        cfg.validate().map_err(|e| format!("{} = {value}: {e}", self.name()))?;
        Ok(cfg)
    }

    /// Whether the MIMO benchmark depends on this parameter.
    fn affects_baseline(self) -> bool {
        !matches!(self, Self::N | Self::L)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub run_baseline: bool,
    /// Record wall-clock time per trial. Off by default because it makes
    /// the CSV differ between runs.
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Converged,
    MaxIterations,
    Infeasible,
    /// The solver failed for a reason other than infeasibility.
    Error,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iterations",
            Self::Infeasible => "infeasible",
            Self::Error => "error",
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Self::Converged | Self::MaxIterations)
    }

    fn from_ao(status: AoStatus) -> Self {
        match status {
            AoStatus::Converged => Self::Converged,
            AoStatus::MaxIterations => Self::MaxIterations,
            AoStatus::Infeasible { .. } => Self::Infeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub param_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub iterations: usize,
    pub eh_estimated_w: Option<f64>,
    pub eh_realized_w: Option<f64>,
    pub baseline_eh_w: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, std_err: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { count: n, mean, std_err }
    }
}

/// Statistics of one swept value over its feasible trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub param_value: f64,
    pub trials: usize,
    pub infeasible_rate: f64,
    pub estimated: Stats,
    pub realized: Stats,
    pub baseline: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub param: SweepParam,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<PointSummary>,
}

impl SweepResult {
    /// Records of one swept value, in trial order.
    pub fn records_at(&self, param_value: f64) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.param_value == param_value)
    }
}

struct FaOutcome {
    status: TrialStatus,
    iterations: usize,
    estimated: Option<f64>,
    realized: Option<f64>,
    wall_ms: Option<f64>,
}

fn run_fa(cfg: &SystemConfig, seed: u64, timing: bool) -> FaOutcome {
    let start = Instant::now();
    let outcome = generate_scenario(seed, cfg).map_err(|_| ()).and_then(|ch| {
        let res = optimize(&ch, cfg).map_err(|_| ())?;
        let realized = if res.is_feasible() { realized_weighted_eh(&res.solution, &res.ports, &ch, cfg).ok() } else { None };
        Ok((res, realized))
    });
    let wall_ms = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    match outcome {
        Ok((res, realized)) => {
            let status = TrialStatus::from_ao(res.status);
            FaOutcome {
                status,
                iterations: res.iterations,
                estimated: status.is_feasible().then(|| res.objective()),
                realized,
                wall_ms,
            }
        }
        Err(()) => FaOutcome { status: TrialStatus::Error, iterations: 0, estimated: None, realized: None, wall_ms },
    }
}

fn run_baseline(cfg: &SystemConfig, seed: u64) -> Option<f64> {
    let scenario = generate_mimo_scenario(seed, cfg).ok()?;
    let res = optimize_mimo(&scenario, cfg).ok()?;
    res.is_feasible().then(|| res.objective())
}

enum Job {
    Fa { value: usize, trial: usize },
    Baseline { value: usize, trial: usize },
}

enum JobOutput {
    Fa(FaOutcome),
    Baseline(Option<f64>),
}

/// Runs every `(value, trial)` of `spec`; `workers = 0` uses all cores.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult, String> {
    let configs = spec.values.iter().map(|&v| spec.param.apply(&spec.base, v)).collect::<Result<Vec<_>, _>>()?;
    let seeds: Vec<u64> = (0..spec.trials).map(|k| trial_seed(spec.master_seed, k as u64)).collect();
    let nv = configs.len();

    let mut jobs = Vec::new();
    for value in 0..nv {
        for trial in 0..spec.trials {
            jobs.push(Job::Fa { value, trial });
        }
    }
    if spec.run_baseline {
        let baseline_values = if spec.param.affects_baseline() { nv } else { 1 };
        for value in 0..baseline_values {
            for trial in 0..spec.trials {
                jobs.push(Job::Baseline { value, trial });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| e.to_string())?;
    let outputs: Vec<JobOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match *job {
                Job::Fa { value, trial } => JobOutput::Fa(run_fa(&configs[value], seeds[trial], spec.timing)),
                Job::Baseline { value, trial } => JobOutput::Baseline(run_baseline(&configs[value], seeds[trial])),
            })
            .collect()
    });

    let mut fa = Vec::with_capacity(nv * spec.trials);
    let mut baseline = Vec::new();
    for out in outputs {
        match out {
            JobOutput::Fa(o) => fa.push(o),
            JobOutput::Baseline(b) => baseline.push(b),
        }
    }
    let baseline_at = |value: usize, trial: usize| -> Option<f64> {
        if !spec.run_baseline {
            return None;
        }
        let row = if spec.param.affects_baseline() { value } else { 0 };
        baseline[row * spec.trials + trial]
    };

    let mut records = Vec::with_capacity(fa.len());
    for (idx, o) in fa.into_iter().enumerate() {
        let (value, trial) = (idx / spec.trials, idx % spec.trials);
        records.push(TrialRecord {
            param_value: spec.values[value],
            trial,
            seed: seeds[trial],
            status: o.status,
            iterations: o.iterations,
            eh_estimated_w: o.estimated,
            eh_realized_w: o.realized,
            baseline_eh_w: baseline_at(value, trial),
            wall_ms: o.wall_ms,
        });
    }
    let summaries = spec
        .values
        .iter()
        .enumerate()
        .map(|(v, &param_value)| summarize(param_value, &records[v * spec.trials..(v + 1) * spec.trials]))
        .collect();
    Ok(SweepResult { name: spec.name.clone(), param: spec.param, records, summaries })
}

/// Aggregates the rows of one swept value.
pub fn summarize(param_value: f64, rows: &[TrialRecord]) -> PointSummary {
    let feasible = rows.iter().filter(|r| r.status.is_feasible()).count();
    PointSummary {
        param_value,
        trials: rows.len(),
        infeasible_rate: if rows.is_empty() { 0.0 } else { 1.0 - feasible as f64 / rows.len() as f64 },
        estimated: Stats::of(rows.iter().filter_map(|r| r.eh_estimated_w)),
        realized: Stats::of(rows.iter().filter_map(|r| r.eh_realized_w)),
        baseline: Stats::of(rows.iter().filter_map(|r| r.baseline_eh_w)),
    }
}

/// One CSV line. Aggregate lines have `trial = -1`, no seed, status `mean`
/// or `std_err`, and the number of feasible trials in `iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sweep_param: String,
    pub param_value: f64,
    pub trial: i64,
    pub seed: Option<u64>,
    pub status: String,
    pub iterations: usize,
    pub eh_estimated_w: Option<f64>,
    pub eh_realized_w: Option<f64>,
    pub baseline_eh_w: Option<f64>,
    pub wall_ms: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn csv_rows(result: &SweepResult) -> Vec<CsvRow> {
    let param = result.param.name().to_string();
    let mut rows: Vec<CsvRow> = result
        .records
        .iter()
        .map(|r| CsvRow {
            sweep_param: param.clone(),
            param_value: r.param_value,
            trial: r.trial as i64,
            seed: Some(r.seed),
            status: r.status.as_str().to_string(),
            iterations: r.iterations,
            eh_estimated_w: r.eh_estimated_w,
            eh_realized_w: r.eh_realized_w,
            baseline_eh_w: r.baseline_eh_w,
            wall_ms: r.wall_ms,
        })
        .collect();
    for s in &result.summaries {
        let aggregate = |status: &str, pick: fn(&Stats) -> f64| CsvRow {
            sweep_param: param.clone(),
            param_value: s.param_value,
            trial: -1,
            seed: None,
            status: status.to_string(),
            iterations: s.estimated.count,
            eh_estimated_w: finite(pick(&s.estimated)),
            eh_realized_w: finite(pick(&s.realized)),
            baseline_eh_w: finite(pick(&s.baseline)),
            wall_ms: None,
        };
        rows.push(aggregate("mean", |st| st.mean));
        rows.push(aggregate("std_err", |st| st.std_err));
    }
    rows
}

/// Writes the per-trial rows followed by the aggregate rows.
pub fn emit_csv<W: Write>(result: &SweepResult, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in csv_rows(result) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "param_value",
    "trial",
    "seed",
    "status",
    "iterations",
    "eh_estimated_w",
    "eh_realized_w",
    "baseline_eh_w",
    "wall_ms",
];

pub fn write_csv(result: &SweepResult, path: &Path) -> csv::Result<()> {
    emit_csv(result, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_csv(path: &Path) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
