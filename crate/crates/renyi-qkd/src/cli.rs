//! Batch execution: single pipeline runs and axis sweeps, CSV emission,
//! JSON run logs, and exit-code policy.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::json;

use crate::config::{AlphaChoice, Protocol, RunConfig};
use crate::error::{Error, Result};
use crate::finitesize::{
    optimize_alpha, run_point, FiniteSizeParams, KeyRateReport, PipelineOptions, SecurityParams,
};
use crate::protocol::{bb84_pm_instance_with, Bb84Options, ProtocolInstance};

/// Pinned column order; consumers may rely on it.
pub const CSV_HEADER: &str = "alpha,beta,N,p_gen,depol,loss,min_f,lambda_EC,g_alpha,key_length,\
                              key_rate,fw_iters,fw_gap,dual_residual";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ZERO_RATE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_FAILURE: i32 = 4;

/// Worker-count override for scan fan-out.
pub const WORKERS_ENV: &str = "RENYI_QKD_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Alpha,
    Loss,
    Blocksize,
}

impl FromStr for ScanAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "loss" => Ok(Self::Loss),
            "blocksize" => Ok(Self::Blocksize),
            other => Err(Error::Config(format!(
                "axis must be alpha, loss, or blocksize, got \"{other}\""
            ))),
        }
    }
}

fn build_instance(cfg: &RunConfig) -> Result<ProtocolInstance> {
    match cfg.protocol {
        Protocol::Bb84Pm => bb84_pm_instance_with(
            cfg.depol_p,
            cfg.loss,
            &Bb84Options {
                z_basis_prob: cfg.z_basis_prob,
                include_no_click: cfg.include_no_click,
            },
        ),
    }
}

fn security_params(cfg: &RunConfig) -> SecurityParams {
    SecurityParams {
        eps_pa: cfg.eps_pa,
        eps_ev: cfg.eps_ev,
        eps_pe: cfg.eps_pe,
    }
}

fn pipeline_options(cfg: &RunConfig) -> PipelineOptions {
    PipelineOptions {
        eps_perturb: cfg.eps_perturb,
        fw: cfg.fw_config(),
        t_ball: cfg.t_ball,
    }
}

pub fn csv_row(report: &KeyRateReport, depol: f64, loss: f64) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        report.alpha,
        report.beta,
        report.n_total,
        report.p_gen,
        depol,
        loss,
        report.min_f_certified,
        report.lambda_ec,
        report.g_alpha,
        report.key_length,
        report.key_rate,
        report.diagnostics.fw_iterations,
        report.diagnostics.fw_gap,
        report.diagnostics.dual_residual
    )
}

fn failed_row(alpha: f64, n_total: u64, p_gen: f64, depol: f64, loss: f64) -> String {
    format!("{alpha},NaN,{n_total},{p_gen},{depol},{loss},NaN,NaN,NaN,NaN,NaN,0,NaN,NaN")
}

/// Exit code implied by a finished report.
pub fn exit_code(report: &KeyRateReport) -> i32 {
    if !report.diagnostics.fw_converged || !report.diagnostics.certified {
        EXIT_FAILURE
    } else if report.key_length <= 0.0 {
        EXIT_ZERO_RATE
    } else {
        EXIT_OK
    }
}

/// Exit code for a hard error.
pub fn exit_code_for_error(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_FAILURE,
    }
}

pub struct RunOutput {
    pub report: KeyRateReport,
    /// Header plus one row.
    pub csv: String,
    pub runlog: serde_json::Value,
    pub exit: i32,
}

/// One pipeline pass per the config; `alpha = "scan"` optimizes over the
/// grid and reports the best point.
pub fn run_single(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let instance = build_instance(cfg)?;
    let fp = FiniteSizeParams::new(cfg.n_total, cfg.p_gen, cfg.f_ec)?;
    let sp = security_params(cfg);
    let opts = pipeline_options(cfg);

    let (report, runlog) = match cfg.alpha {
        AlphaChoice::Fixed(alpha) => {
            let outcome = run_point(&instance, &fp, &sp, alpha, &opts, None)?;
            let log = json!({
                "mode": "single",
                "config": cfg,
                "report": outcome.report,
                "iterations": outcome.fw.iterations,
                "bound": outcome.bound,
            });
            (outcome.report, log)
        }
        AlphaChoice::Scan => {
            let grid = cfg.alpha_grid.build();
            let scan = optimize_alpha(&instance, &fp, &sp, &grid, &opts)?;
            let log = json!({
                "mode": "alpha-scan",
                "config": cfg,
                "alpha_star": scan.alpha_star,
                "zero_rate": scan.zero_rate,
                "points": scan.points,
                "report": scan.best,
            });
            (scan.best.clone(), log)
        }
    };

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    csv.push_str(&csv_row(&report, cfg.depol_p, cfg.loss));
    csv.push('\n');
    let exit = exit_code(&report);
    Ok(RunOutput {
        report,
        csv,
        runlog,
        exit,
    })
}

pub struct ScanOutput {
    /// Header plus one row per value, in input order.
    pub csv: String,
    pub reports: Vec<Option<KeyRateReport>>,
    pub failures: usize,
    pub exit: i32,
}

/// Sweeps one axis, fanning points across the worker pool. Per-point
/// failures become NaN rows and the sweep continues.
pub fn run_scan(cfg: &RunConfig, axis: ScanAxis, values: &[f64]) -> Result<ScanOutput> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Config("scan requires at least one value".into()));
    }
    if axis == ScanAxis::Alpha {
        for &v in values {
            if !(v > 1.0 && v <= 2.0) {
                return Err(Error::Config(format!(
                    "alpha scan values must lie in (1, 2], got {v}"
                )));
            }
        }
    }

    let pool = worker_pool()?;
    let results: Vec<Result<KeyRateReport>> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| scan_point(cfg, axis, v))
            .collect()
    });

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut reports = Vec::with_capacity(values.len());
    let mut failures = 0;
    for (&v, res) in values.iter().zip(results) {
        match res {
            Ok(report) => {
                let (depol, loss) = match axis {
                    ScanAxis::Loss => (cfg.depol_p, v),
                    _ => (cfg.depol_p, cfg.loss),
                };
                csv.push_str(&csv_row(&report, depol, loss));
                csv.push('\n');
                reports.push(Some(report));
            }
            Err(err) => {
                failures += 1;
                let (alpha, n_total, loss) = match axis {
                    ScanAxis::Alpha => (v, cfg.n_total, cfg.loss),
                    ScanAxis::Loss => (f64::NAN, cfg.n_total, v),
                    ScanAxis::Blocksize => (f64::NAN, v as u64, cfg.loss),
                };
                eprintln!("{}", json!({"scan_point": v, "error": err.to_string()}));
                csv.push_str(&failed_row(alpha, n_total, cfg.p_gen, cfg.depol_p, loss));
                csv.push('\n');
                reports.push(None);
            }
        }
    }
    Ok(ScanOutput {
        csv,
        reports,
        failures,
        exit: EXIT_OK,
    })
}

fn scan_point(cfg: &RunConfig, axis: ScanAxis, value: f64) -> Result<KeyRateReport> {
    let mut point_cfg = cfg.clone();
    match axis {
        ScanAxis::Alpha => point_cfg.alpha = AlphaChoice::Fixed(value),
        ScanAxis::Loss => {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::Config(format!("loss value {value} out of [0, 1)")));
            }
            point_cfg.loss = value;
        }
        ScanAxis::Blocksize => {
            if !(value.is_finite() && value >= 2.0) {
                return Err(Error::Config(format!("blocksize value {value} invalid")));
            }
            point_cfg.n_total = value.round() as u64;
        }
    }
    point_cfg.validate()?;

    let instance = build_instance(&point_cfg)?;
    let fp = FiniteSizeParams::new(point_cfg.n_total, point_cfg.p_gen, point_cfg.f_ec)?;
    let sp = security_params(&point_cfg);
    let opts = pipeline_options(&point_cfg);
    match point_cfg.alpha {
        AlphaChoice::Fixed(alpha) => Ok(run_point(&instance, &fp, &sp, alpha, &opts, None)?.report),
        AlphaChoice::Scan => {
            let grid = point_cfg.alpha_grid.build();
            Ok(optimize_alpha(&instance, &fp, &sp, &grid, &opts)?.best)
        }
    }
}

/// Thread pool sized by the worker env var, or rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let n: usize = raw.parse().map_err(|_| {
            Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got \"{raw}\""
            ))
        })?;
        if n == 0 {
            return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Appends CSV content to `path` (writing the header only when the file is
/// new), or prints to stdout when no path is given.
pub fn write_csv(path: Option<&Path>, csv_with_header: &str) -> Result<()> {
    match path {
        None => {
            print!("{csv_with_header}");
            Ok(())
        }
        Some(p) => {
            let existing = p.exists() && std::fs::metadata(p)?.len() > 0;
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)?;
            let content = if existing {
                csv_with_header
                    .split_once('\n')
                    .map(|(_, rest)| rest)
                    .unwrap_or("")
            } else {
                csv_with_header
            };
            file.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_runlog(path: &Path, log: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(log)
        .map_err(|e| Error::Config(format!("runlog serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}
