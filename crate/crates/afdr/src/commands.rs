//! Subcommand implementations. Each writes its human-readable output to
//! `out` and returns a value the caller maps to an exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use afdr_core::lft::{beta_star as compute_beta_star, build_afdr_lft, SmallGainCertificate};
use afdr_core::lti::induced_linf_norm;
use afdr_core::sim::{monte_carlo_run, run_scenario, MonteCarloConfig, MonteCarloSummary, RunSummary, SimResult};
use afdr_core::uncertainty::{random_delta, UncertaintySpec};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{AppError, Result};
use crate::experiment::{BetaSetting, Experiment, NoisePolicyParam, AUTO_BETA_FRACTION};
use crate::report::{
    ensure_dir, write_json, write_runs_file, write_trace_file, AggregateJson, CertificateJson, RunSummaryJson,
};
use crate::system_file::{load_system, SystemFile};

pub const DEFAULT_OUT_DIR: &str = "out";

fn io_err(e: std::io::Error) -> AppError {
    AppError::io("<stdout>", e)
}

/// Which true plant a single run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UncertainChoice {
    #[default]
    None,
    /// The experiment's `model_error`.
    Specific,
    Random(u64),
}

impl FromStr for UncertainChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "paper" => Ok(Self::Specific),
            other => other
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(Self::Random)
                .ok_or_else(|| format!("expected none, paper or random:<seed>, got {other:?}")),
        }
    }
}

impl UncertainChoice {
    fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::Specific => "paper".into(),
            Self::Random(s) => format!("random:{s}"),
        }
    }
}

pub fn certificate(exp: &Experiment, delta: f64) -> Result<SmallGainCertificate> {
    let p = build_afdr_lft(&exp.plant, &exp.controller, delta)?;
    Ok(compute_beta_star(&p, exp.file.analysis.rel_tol)?)
}

/// Resolves the gain bound for a run; with the safety filter on, β must be
/// certified (`β < β*`) unless `allow_uncertified`.
pub fn resolve_beta(
    exp: &Experiment,
    setting: BetaSetting,
    safety: bool,
    allow_uncertified: bool,
) -> Result<Option<f64>> {
    let needs_certificate = safety || setting == BetaSetting::Auto;
    if !needs_certificate {
        return Ok(match setting {
            BetaSetting::Value(b) => Some(b),
            _ => None,
        });
    }
    if setting == BetaSetting::Unconstrained {
        return Err(AppError::Config("the safety filter needs a numeric beta or \"auto\"".into()));
    }
    let cert = certificate(exp, exp.file.analysis.delta)?;
    if !cert.feasible && !allow_uncertified {
        return Err(AppError::Infeasible(
            "small-gain condition infeasible: no beta can be certified".into(),
        ));
    }
    match setting {
        BetaSetting::Auto if cert.beta_star.is_finite() && cert.feasible => {
            Ok(Some(AUTO_BETA_FRACTION * cert.beta_star))
        }
        BetaSetting::Auto => Err(AppError::Config(
            "beta \"auto\" needs a finite, feasible beta*; give beta explicitly".into(),
        )),
        BetaSetting::Value(b) => {
            if safety && !(b < cert.beta_star) && !allow_uncertified {
                return Err(AppError::Infeasible(format!(
                    "beta = {b} is not below beta* = {}; pass --allow-uncertified to run anyway",
                    cert.beta_star
                )));
            }
            Ok(Some(b))
        }
        BetaSetting::Unconstrained => unreachable!(),
    }
}

pub fn norm(path: &Path, rel_tol: f64, out: &mut impl Write) -> Result<f64> {
    let g = load_system(path)?;
    let value = induced_linf_norm(&g, rel_tol)?;
    writeln!(out, "{value}").map_err(io_err)?;
    Ok(value)
}

pub fn beta_star(
    exp: &Experiment,
    delta: Option<f64>,
    out_dir: Option<&Path>,
    out: &mut impl Write,
) -> Result<CertificateJson> {
    let delta = delta.unwrap_or(exp.file.analysis.delta);
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(AppError::Config("delta must be nonnegative".into()));
    }
    let cert = CertificateJson::from(&certificate(exp, delta)?);
    let text = serde_json::to_string_pretty(&cert).expect("certificates serialize");
    writeln!(out, "{text}").map_err(io_err)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("certificate.json"), &cert)?;
    }
    Ok(cert)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub uncertain: UncertainChoice,
    pub safety: Option<bool>,
    pub seed: Option<u64>,
    pub beta: Option<BetaSetting>,
    pub allow_uncertified: bool,
    pub out_dir: Option<PathBuf>,
}

pub fn output_dir(exp: &Experiment, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| exp.file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn simulate(exp: &Experiment, opts: &SimulateOptions, out: &mut impl Write) -> Result<(SimResult, RunSummaryJson)> {
    let safety = opts.safety.unwrap_or(exp.file.scenario.safety_filter);
    let setting = opts.beta.unwrap_or(exp.file.scenario.beta);
    let beta = resolve_beta(exp, setting, safety, opts.allow_uncertified)?;
    let mut cfg = exp.scenario(beta);
    cfg.safety_filter = safety;
    if let Some(seed) = opts.seed {
        cfg.noise_seed = seed;
    }
    cfg = match opts.uncertain {
        UncertainChoice::None => cfg,
        UncertainChoice::Specific => cfg.with_uncertainty(&exp.model_error)?,
        UncertainChoice::Random(seed) => {
            let spec = UncertaintySpec::new(exp.file.analysis.delta, exp.file.monte_carlo.order, seed, exp.ts())?;
            cfg.with_uncertainty(&random_delta(&spec)?)?
        }
    };
    let result = run_scenario(&cfg)?;
    let hash = exp.hash(&json!({
        "command": "simulate",
        "uncertain": opts.uncertain.label(),
        "safety": safety,
        "beta": beta,
        "noise_seed": cfg.noise_seed,
    }))?;
    let summary = RunSummaryJson::new(&result, hash);
    let dir = output_dir(exp, opts.out_dir.as_deref());
    ensure_dir(&dir)?;
    write_trace_file(&dir.join("trace.csv"), &result.trace)?;
    write_json(&dir.join("summary.json"), &summary)?;
    let text = serde_json::to_string_pretty(&summary).expect("summaries serialize");
    writeln!(out, "{text}").map_err(io_err)?;
    Ok((result, summary))
}

#[derive(Debug, Clone, Default)]
pub struct MonteCarloOptions {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub safety: Option<bool>,
    pub beta: Option<BetaSetting>,
    pub noise_seed: Option<u64>,
    pub noise_policy: Option<NoisePolicyParam>,
    pub delta: Option<f64>,
    pub allow_uncertified: bool,
    pub out_dir: Option<PathBuf>,
    /// Write one trace CSV per run under `traces/`.
    pub traces: bool,
    /// Write each sampled uncertainty under `deltas/`.
    pub export_deltas: bool,
}

pub fn monte_carlo(
    exp: &Experiment,
    opts: &MonteCarloOptions,
    out: &mut impl Write,
) -> Result<(MonteCarloSummary, AggregateJson)> {
    let params = &exp.file.monte_carlo;
    let safety = opts.safety.unwrap_or(exp.file.scenario.safety_filter);
    let setting = opts.beta.unwrap_or(exp.file.scenario.beta);
    let beta = resolve_beta(exp, setting, safety, opts.allow_uncertified)?;
    let mut cfg = exp.scenario(beta);
    cfg.safety_filter = safety;
    if let Some(seed) = opts.noise_seed {
        cfg.noise_seed = seed;
    }
    let mc = MonteCarloConfig {
        runs: opts.runs.unwrap_or(params.runs),
        base_seed: opts.seed.unwrap_or(params.seed),
        delta: opts.delta.unwrap_or(exp.file.analysis.delta),
        order: params.order,
        noise: opts.noise_policy.unwrap_or(params.noise_seed_policy).into(),
    };
    if mc.runs == 0 {
        return Err(AppError::Config("need at least one run".into()));
    }
    cfg.validate()?;

    let dir = output_dir(exp, opts.out_dir.as_deref());
    ensure_dir(&dir)?;
    let traces_dir = dir.join("traces");
    let deltas_dir = dir.join("deltas");
    if opts.traces {
        ensure_dir(&traces_dir)?;
    }
    if opts.export_deltas {
        ensure_dir(&deltas_dir)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunSummary> = pool.install(|| {
        (0..mc.runs)
            .into_par_iter()
            .map(|i| -> Result<RunSummary> {
                let (delta, result) = monte_carlo_run(&cfg, &mc, i)?;
                if opts.traces {
                    write_trace_file(&traces_dir.join(format!("run_{i:04}.csv")), &result.trace)?;
                }
                if opts.export_deltas {
                    SystemFile::from_state_space(&delta).write(&deltas_dir.join(format!("delta_{i:04}.json")))?;
                }
                Ok(RunSummary::new(i, mc.delta_seed(i), &result))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = MonteCarloSummary::from_runs(runs);
    let hash = exp.hash(&json!({
        "command": "monte-carlo",
        "runs": mc.runs,
        "base_seed": mc.base_seed,
        "delta": mc.delta,
        "order": mc.order,
        "noise_policy": format!("{:?}", mc.noise),
        "noise_seed": cfg.noise_seed,
        "safety": safety,
        "beta": beta,
    }))?;
    let aggregate = AggregateJson::new(&summary, mc.base_seed, mc.delta, hash);
    write_runs_file(&dir.join("runs.csv"), &summary.runs)?;
    write_json(&dir.join("aggregate.json"), &aggregate)?;
    let text = serde_json::to_string_pretty(&aggregate).expect("aggregates serialize");
    writeln!(out, "{text}").map_err(io_err)?;
    Ok((summary, aggregate))
}
