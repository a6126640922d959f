//! Experiment files: systems, scenario, analysis and Monte-Carlo parameters.
//!
//! Systems are either inline (the `system_file` format) or `{"file": "path"}`
//! references resolved relative to the experiment file. Every section other
//! than `plant` and `controller` may be omitted.

use std::fs;
use std::path::{Path, PathBuf};

use afdr_core::lti::StateSpace;
use afdr_core::sim::{
    DisturbanceModel, NoiseSeedPolicy, RlsConfig, ScenarioConfig, Sinusoid, DEFAULT_INSTABILITY_THRESHOLD,
};
use afdr_core::uncertainty;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};
use crate::system_file::SystemFile;

/// The built-in benchmark experiment.
pub const BENCHMARK_EXPERIMENT: &str = include_str!("../configs/paper.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    File { file: PathBuf },
    Inline(SystemFile),
}

/// Gain bound of the safe set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum BetaSetting {
    Value(f64),
    /// `0.6 β*`.
    Auto,
    Unconstrained,
}

pub const AUTO_BETA_FRACTION: f64 = 0.6;

impl TryFrom<Value> for BetaSetting {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match v {
            Value::Null => Ok(Self::Unconstrained),
            Value::Number(n) => n
                .as_f64()
                .filter(|b| *b >= 0.0 && b.is_finite())
                .map(Self::Value)
                .ok_or_else(|| "beta must be a nonnegative number".into()),
            Value::String(s) => s.parse(),
            _ => Err("beta must be a number, \"auto\" or \"unconstrained\"".into()),
        }
    }
}

impl From<BetaSetting> for Value {
    fn from(b: BetaSetting) -> Value {
        match b {
            BetaSetting::Value(x) => Value::from(x),
            BetaSetting::Auto => Value::from("auto"),
            BetaSetting::Unconstrained => Value::Null,
        }
    }
}

impl std::str::FromStr for BetaSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "unconstrained" | "none" => Ok(Self::Unconstrained),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|b| *b >= 0.0 && b.is_finite())
                .map(Self::Value)
                .ok_or_else(|| format!("invalid beta {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub delta: f64,
    pub rel_tol: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            delta: 3e-4,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidParams {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceParams {
    pub sinusoids: Vec<SinusoidParams>,
    pub noise_std: f64,
}

impl Default for DisturbanceParams {
    fn default() -> Self {
        let m = DisturbanceModel::default();
        Self {
            sinusoids: m
                .sinusoids
                .iter()
                .map(|s| SinusoidParams {
                    amplitude: s.amplitude,
                    frequency: s.frequency,
                    phase: s.phase,
                })
                .collect(),
            noise_std: m.noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlsParams {
    pub lambda_init: f64,
    pub forgetting: f64,
    pub learn_before_on: bool,
}

impl Default for RlsParams {
    fn default() -> Self {
        let r = RlsConfig::default();
        Self {
            lambda_init: r.lambda_init,
            forgetting: r.forgetting,
            learn_before_on: r.learn_before_on,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub duration: f64,
    pub afdr_on: f64,
    pub afdr_enabled: bool,
    pub fir_len: usize,
    pub beta: BetaSetting,
    pub safety_filter: bool,
    pub disturbance: DisturbanceParams,
    pub noise_seed: u64,
    pub rls: RlsParams,
    pub instability_threshold: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            duration: 20.0,
            afdr_on: 10.0,
            afdr_enabled: true,
            fir_len: 8,
            beta: BetaSetting::Value(2.8),
            safety_filter: false,
            disturbance: DisturbanceParams::default(),
            noise_seed: 0,
            rls: RlsParams::default(),
            instability_threshold: DEFAULT_INSTABILITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePolicyParam {
    #[default]
    Fixed,
    PerRun,
}

impl From<NoisePolicyParam> for NoiseSeedPolicy {
    fn from(p: NoisePolicyParam) -> Self {
        match p {
            NoisePolicyParam::Fixed => NoiseSeedPolicy::Fixed,
            NoisePolicyParam::PerRun => NoiseSeedPolicy::PerRun,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloParams {
    pub runs: usize,
    pub seed: u64,
    pub order: usize,
    pub noise_seed_policy: NoisePolicyParam,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 0,
            order: 2,
            noise_seed_policy: NoisePolicyParam::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub plant: SystemSource,
    pub controller: SystemSource,
    /// Specific uncertainty used by `--uncertain paper`; defaults to the
    /// benchmark model error.
    #[serde(default)]
    pub model_error: Option<SystemSource>,
    #[serde(default)]
    pub analysis: AnalysisParams,
    #[serde(default)]
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub monte_carlo: MonteCarloParams,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// An experiment with every system loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub file: ExperimentFile,
    pub plant: StateSpace,
    pub controller: StateSpace,
    pub model_error: StateSpace,
    /// Directory that relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

fn resolve(source: &SystemSource, base: &Path) -> Result<(SystemFile, StateSpace)> {
    let file = match source {
        SystemSource::Inline(f) => f.clone(),
        SystemSource::File { file } => SystemFile::read(&base.join(file))?,
    };
    let g = file.to_state_space()?;
    Ok((file, g))
}

impl Experiment {
    pub fn parse(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let file: ExperimentFile = serde_json::from_str(text).map_err(|source| AppError::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        Self::from_file(file, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, path)
    }

    pub fn benchmark() -> Self {
        Self::parse(BENCHMARK_EXPERIMENT, Path::new("."), Path::new("<built-in>"))
            .expect("built-in experiment is valid")
    }

    pub fn from_file(file: ExperimentFile, base_dir: &Path) -> Result<Self> {
        let (_, plant) = resolve(&file.plant, base_dir)?;
        let (_, controller) = resolve(&file.controller, base_dir)?;
        let model_error = match &file.model_error {
            Some(src) => resolve(src, base_dir)?.1,
            None => uncertainty::reference_delta(),
        };
        if !plant.is_siso() || !controller.is_siso() || !model_error.is_siso() {
            return Err(AppError::Config("plant, controller and model error must be SISO".into()));
        }
        let a = &file.analysis;
        if !(a.delta >= 0.0 && a.delta.is_finite()) {
            return Err(AppError::Config("analysis.delta must be nonnegative".into()));
        }
        if !(a.rel_tol > 0.0) {
            return Err(AppError::Config("analysis.rel_tol must be positive".into()));
        }
        Ok(Self {
            file,
            plant,
            controller,
            model_error,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn ts(&self) -> f64 {
        self.plant.ts()
    }

    /// Scenario on the nominal plant; `beta` is the already resolved gain bound.
    pub fn scenario(&self, beta: Option<f64>) -> ScenarioConfig {
        let s = &self.file.scenario;
        ScenarioConfig {
            nominal_plant: self.plant.clone(),
            controller: self.controller.clone(),
            true_plant: self.plant.clone(),
            duration: s.duration,
            afdr_on: s.afdr_on,
            afdr_enabled: s.afdr_enabled,
            fir_len: s.fir_len,
            beta,
            safety_filter: s.safety_filter,
            disturbance: DisturbanceModel {
                sinusoids: s
                    .disturbance
                    .sinusoids
                    .iter()
                    .map(|p| Sinusoid {
                        amplitude: p.amplitude,
                        frequency: p.frequency,
                        phase: p.phase,
                    })
                    .collect(),
                noise_std: s.disturbance.noise_std,
            },
            noise_seed: s.noise_seed,
            rls: RlsConfig {
                lambda_init: s.rls.lambda_init,
                forgetting: s.rls.forgetting,
                learn_before_on: s.rls.learn_before_on,
            },
            instability_threshold: s.instability_threshold,
        }
    }

    /// The file with every system inlined, as canonical JSON.
    pub fn canonical_json(&self) -> Result<Value> {
        let mut file = self.file.clone();
        file.plant = SystemSource::Inline(resolve(&file.plant, &self.base_dir)?.0);
        file.controller = SystemSource::Inline(resolve(&file.controller, &self.base_dir)?.0);
        file.model_error = Some(SystemSource::Inline(match &file.model_error {
            Some(src) => resolve(src, &self.base_dir)?.0,
            None => SystemFile::from_state_space(&self.model_error),
        }));
        file.output_dir = None;
        Ok(serde_json::to_value(&file).expect("experiment files always serialize"))
    }

    /// SHA-256 of the canonical experiment plus the run-specific `extra` settings.
    pub fn hash(&self, extra: &Value) -> Result<String> {
        let doc = serde_json::json!({ "experiment": self.canonical_json()?, "run": extra });
        let digest = Sha256::digest(serde_json::to_vec(&doc).expect("values serialize"));
        Ok(format!("{digest:x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_experiment_matches_benchmark() {
        let e = Experiment::benchmark();
        assert_eq!(e.ts(), 0.01);
        assert_eq!(e.file.analysis.delta, 3e-4);
        assert_eq!(e.file.scenario.fir_len, 8);
        assert_eq!(e.file.scenario.beta, BetaSetting::Value(2.8));
        let bench = afdr_core::benchmark::plant();
        assert_eq!(e.plant, bench);
        assert_eq!(e.model_error, afdr_core::uncertainty::reference_delta());
    }

    #[test]
    fn beta_settings_parse() {
        let parse = |s: &str| serde_json::from_str::<BetaSetting>(s);
        assert_eq!(parse("2.5").unwrap(), BetaSetting::Value(2.5));
        assert_eq!(parse("\"auto\"").unwrap(), BetaSetting::Auto);
        assert_eq!(parse("null").unwrap(), BetaSetting::Unconstrained);
        assert!(parse("-1").is_err());
        assert!(parse("\"fast\"").is_err());
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let text = r#"{
            "plant": {"type": "tf", "num": [0.1], "den": [1.0, -0.5], "ts": 0.01},
            "controller": {"type": "tf", "num": [1.0], "den": [1.0], "ts": 0.01}
        }"#;
        let e = Experiment::parse(text, Path::new("."), Path::new("x")).unwrap();
        assert_eq!(e.file.scenario, ScenarioParams::default());
        assert_eq!(e.file.monte_carlo.runs, 100);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{
            "plant": {"type": "tf", "num": [0.1], "den": [1.0, -0.5], "ts": 0.01},
            "controller": {"type": "tf", "num": [1.0], "den": [1.0], "ts": 0.01},
            "scenario": {"horizon": 5}
        }"#;
        assert!(Experiment::parse(text, Path::new("."), Path::new("x")).is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let e = Experiment::benchmark();
        let a = e.hash(&serde_json::json!({"seed": 0})).unwrap();
        let b = e.hash(&serde_json::json!({"seed": 1})).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, e.hash(&serde_json::json!({"seed": 0})).unwrap());
        assert_eq!(a.len(), 64);
    }
}
