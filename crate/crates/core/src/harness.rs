//! Monte Carlo experiment runner and figure-data writers.
//!
//! An experiment crosses a list of variants with the values of one swept
//! configuration field and a number of fading trials. Trials run on a
//! rayon pool; results are merged in (variant, value, trial) order so the
//! CSV outputs are bit-identical across runs and thread counts. Wall-clock
//! timings only go to the JSON manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{materialize_variant, ArchitectureVariant};
use crate::config::{ConfigFile, load_config};
use crate::error::{Error, Result};
use crate::metrics::{
    beampattern_of, effective_channels, secrecy_rate_from_snr, snr_pair, SteeringGrid,
};
use crate::scenario::{generate_channels, DesiredBeampattern, SystemConfig};
use crate::solver::{solve, SolveReport};

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "ISAC_THREADS";

/// One swept configuration field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Experiment description, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Base config file, relative to the spec file.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Keys applied on top of the base config.
    #[serde(default)]
    pub overrides: ConfigFile,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    pub variants: Vec<ArchitectureVariant>,
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Base config (file, if any, resolved against `spec_dir`) with the
    /// inline overrides applied.
    pub fn base_config(&self, spec_dir: &Path) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(&spec_dir.join(p))?,
            None => SystemConfig::default(),
        };
        self.overrides.apply(&mut cfg)?;
        Ok(cfg)
    }

    /// `(value, config)` for every sweep point, or one unswept point.
    pub fn points(&self, base: &SystemConfig) -> Result<Vec<(Option<f64>, SystemConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, base.clone())]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| {
                    let mut cfg = base.clone();
                    cfg.set_param(&s.parameter, v)?;
                    cfg.validate()?;
                    Ok((Some(v), cfg))
                })
                .collect(),
        }
    }

    pub fn validate(&self, base: &SystemConfig) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants listed".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("bad experiment name `{}`", self.name)));
        }
        if let Some(s) = &self.sweep {
            if !SystemConfig::SWEEPABLE.contains(&s.parameter.as_str()) {
                return Err(Error::Config(format!(
                    "`{}` is not a sweepable configuration field",
                    s.parameter
                )));
            }
            if s.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
        }
        for (_, cfg) in self.points(base)? {
            for &v in &self.variants {
                materialize_variant(v, &cfg)?;
            }
        }
        Ok(())
    }
}

/// Worker count: `ISAC_THREADS` if set, else `cli`, else all cores.
pub fn resolve_threads(cli: Option<usize>) -> Result<usize> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
            Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))
        })?),
        Err(_) => None,
    };
    let n = from_env
        .or(cli)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// Metrics of one (variant, value, trial) solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    #[serde(skip)]
    pub variant: ArchitectureVariant,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub secrecy_rate: f64,
    pub secrecy_gap: f64,
    pub beampattern_mse: f64,
    pub snr_b: f64,
    pub snr_e: f64,
    pub iterations_inner: usize,
    pub iterations_outer: usize,
    pub final_violation: f64,
    pub converged: bool,
    /// Empty unless the solve failed.
    pub error: String,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Mean and standard error over the valid trials of one (variant, value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub variant: ArchitectureVariant,
    pub sweep_value: Option<f64>,
    pub trials: usize,
    pub valid: usize,
    pub converged: usize,
    pub mean_secrecy_rate: f64,
    pub se_secrecy_rate: f64,
    pub mean_secrecy_gap: f64,
    pub se_secrecy_gap: f64,
    pub mean_beampattern_mse: f64,
    pub se_beampattern_mse: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    /// Sorted by (variant order in the spec, sweep value order, trial).
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub wall_time: f64,
}

impl ExperimentResult {
    pub fn aggregate(&self, v: ArchitectureVariant, value: Option<f64>) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.variant == v && a.sweep_value == value)
    }
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn run_trial(
    v: ArchitectureVariant,
    value: Option<f64>,
    cfg: &SystemConfig,
    trial: usize,
    seed: u64,
) -> TrialRecord {
    let started = Instant::now();
    let outcome = (|| -> Result<(SolveReport, f64, f64)> {
        let ch = generate_channels(cfg, seed)?;
        let (vcfg, mode) = materialize_variant(v, cfg)?;
        let report = solve(&ch, &vcfg, mode, seed)?;
        let ch_used = if mode.no_irs { ch.without_irs() } else { ch };
        let eff = effective_channels(&ch_used, &report.state.phi)?;
        let (b, e) = snr_pair(&eff, &report.state.fw());
        Ok((report, b, e))
    })();
    let wall_time = started.elapsed().as_secs_f64();
    match outcome {
        Ok((r, b, e)) => TrialRecord {
            variant: v,
            sweep_value: value,
            trial,
            seed,
            secrecy_rate: r.metrics.secrecy_rate,
            secrecy_gap: r.metrics.secrecy_gap,
            beampattern_mse: r.metrics.beampattern_mse,
            snr_b: b,
            snr_e: e,
            iterations_inner: r.metrics.iterations_inner_total,
            iterations_outer: r.metrics.iterations_outer,
            final_violation: r.metrics.final_violation,
            converged: r.converged,
            error: String::new(),
            wall_time,
        },
        Err(err) => TrialRecord {
            variant: v,
            sweep_value: value,
            trial,
            seed,
            secrecy_rate: f64::NAN,
            secrecy_gap: f64::NAN,
            beampattern_mse: f64::NAN,
            snr_b: f64::NAN,
            snr_e: f64::NAN,
            iterations_inner: 0,
            iterations_outer: 0,
            final_violation: f64::NAN,
            converged: false,
            error: err.to_string(),
            wall_time,
        },
    }
}

fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    for chunk in records.chunk_by(|a, b| a.variant == b.variant && a.sweep_value == b.sweep_value) {
        let valid: Vec<&TrialRecord> = chunk.iter().filter(|r| r.error.is_empty()).collect();
        let col = |f: fn(&TrialRecord) -> f64| -> Vec<f64> { valid.iter().map(|r| f(r)).collect() };
        let (mr, sr) = mean_se(&col(|r| r.secrecy_rate));
        let (mg, sg) = mean_se(&col(|r| r.secrecy_gap));
        let (mm, sm) = mean_se(&col(|r| r.beampattern_mse));
        out.push(Aggregate {
            variant: chunk[0].variant,
            sweep_value: chunk[0].sweep_value,
            trials: chunk.len(),
            valid: valid.len(),
            converged: chunk.iter().filter(|r| r.converged).count(),
            mean_secrecy_rate: mr,
            se_secrecy_rate: sr,
            mean_secrecy_gap: mg,
            se_secrecy_gap: sg,
            mean_beampattern_mse: mm,
            se_beampattern_mse: sm,
        });
    }
    out
}

#[derive(Serialize)]
struct Timings {
    total_seconds: f64,
    solve_seconds_by_variant: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    software_version: &'static str,
    spec: &'a ExperimentSpec,
    base_config: &'a SystemConfig,
    seeds: Vec<u64>,
    threads: usize,
    files: &'a [String],
    failed_trials: usize,
    timings: Timings,
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Runs every (variant, value, trial) combination. When `out_dir` is given,
/// writes `<name>__<variant>.csv` per variant, `<name>__summary.csv` and
/// `manifest.json` there.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base: &SystemConfig,
    threads: usize,
    out_dir: Option<&Path>,
) -> Result<ExperimentResult> {
    spec.validate(base)?;
    let started = Instant::now();
    let points = spec.points(base)?;
    let mut jobs = Vec::new();
    for &v in &spec.variants {
        for (value, cfg) in &points {
            for trial in 0..spec.trials {
                jobs.push((v, *value, cfg, trial, spec.seed_base + trial as u64));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, value, cfg, trial, seed)| run_trial(v, value, cfg, trial, seed))
            .collect()
    });
    let aggregates = aggregate(&trials);

    let mut result = ExperimentResult {
        name: spec.name.clone(),
        trials,
        aggregates,
        files: Vec::new(),
        wall_time: 0.0,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        for &v in &spec.variants {
            let file = format!("{}__{}.csv", spec.name, v.name());
            let mut w = csv::Writer::from_writer(create_file(&dir.join(&file))?);
            for rec in result.trials.iter().filter(|r| r.variant == v) {
                w.serialize(rec)?;
            }
            w.flush().map_err(|e| Error::io(file.clone(), e))?;
            result.files.push(file);
        }
        let file = format!("{}__summary.csv", spec.name);
        let mut w = csv::Writer::from_writer(create_file(&dir.join(&file))?);
        for agg in &result.aggregates {
            w.serialize(agg)?;
        }
        w.flush().map_err(|e| Error::io(file.clone(), e))?;
        result.files.push(file);
    }
    result.wall_time = started.elapsed().as_secs_f64();

    if let Some(dir) = out_dir {
        let mut by_variant = BTreeMap::new();
        for rec in &result.trials {
            *by_variant.entry(rec.variant.name().to_string()).or_insert(0.0) += rec.wall_time;
        }
        let manifest = Manifest {
            experiment: &spec.name,
            software_version: env!("CARGO_PKG_VERSION"),
            spec,
            base_config: base,
            seeds: (0..spec.trials).map(|t| spec.seed_base + t as u64).collect(),
            threads,
            files: &result.files,
            failed_trials: result.trials.iter().filter(|r| !r.error.is_empty()).count(),
            timings: Timings {
                total_seconds: result.wall_time,
                solve_seconds_by_variant: by_variant,
            },
        };
        let path = dir.join("manifest.json");
        let mut f = create_file(&path)?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        writeln!(f).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(result)
}

/// One row of a beampattern file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeampatternRow {
    pub theta_deg: f64,
    pub p_b: f64,
    pub delta_p_d: f64,
}

/// Pattern of the hybrid precoder `FW` next to the scaled target.
pub fn beampattern_rows(
    report: &SolveReport,
    grid: &SteeringGrid,
    desired: &DesiredBeampattern,
) -> Result<Vec<BeampatternRow>> {
    if desired.values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "desired pattern has {} samples, grid has {}",
            desired.values.len(),
            grid.len()
        )));
    }
    let p = beampattern_of(&report.state.fw(), grid);
    Ok(grid
        .angles
        .iter()
        .zip(p)
        .zip(&desired.values)
        .map(|((theta, p_b), d)| BeampatternRow {
            theta_deg: (theta.to_degrees() * 1e9).round() / 1e9,
            p_b,
            delta_p_d: report.state.delta * d,
        })
        .collect())
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn emit_beampattern(
    report: &SolveReport,
    grid: &SteeringGrid,
    desired: &DesiredBeampattern,
    path: &Path,
) -> Result<()> {
    write_rows(&beampattern_rows(report, grid, desired)?, path)
}

/// A family of (SNR_b, SNR_e) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweep {
    pub id: usize,
    pub points: Vec<(f64, f64)>,
}

/// The three reference families: SNR_e fixed at 1 with SNR_b from 1 to 100;
/// SNR_b fixed at 100 with SNR_e from 100 down to 1; and both growing with
/// Bob twice as fast.
pub fn default_fig3_sweeps() -> Vec<SnrSweep> {
    let steps = 100;
    let t = |i: usize| i as f64 / (steps - 1) as f64;
    vec![
        SnrSweep {
            id: 0,
            points: (0..steps).map(|i| (1.0 + 99.0 * t(i), 1.0)).collect(),
        },
        SnrSweep {
            id: 1,
            points: (0..steps).map(|i| (100.0, 100.0 - 99.0 * t(i))).collect(),
        },
        SnrSweep {
            id: 2,
            points: (0..steps)
                .map(|i| (1.0 + 99.0 * t(i), 1.0 + 49.5 * t(i)))
                .collect(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Row {
    pub sweep_id: usize,
    pub snr_b: f64,
    pub snr_e: f64,
    pub gap: f64,
    pub rate: f64,
}

pub fn fig3_rows(sweeps: &[SnrSweep]) -> Vec<Fig3Row> {
    sweeps
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |&(b, e)| Fig3Row {
                sweep_id: s.id,
                snr_b: b,
                snr_e: e,
                gap: (b - e).max(0.0),
                rate: secrecy_rate_from_snr(b, e),
            })
        })
        .collect()
}

pub fn emit_fig3_sweep(sweeps: &[SnrSweep], path: &Path) -> Result<()> {
    write_rows(&fig3_rows(sweeps), path)
}
