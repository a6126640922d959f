//! Closed-loop simulation of the inner PID loop, the adaptive FIR outer loop
//! and the safety filter, plus Monte-Carlo orchestration over random
//! uncertainties.
//!
//! Sample ordering within step `k`: the plant output `y_k` is formed from the
//! plant state (the plant is strictly proper) and `d_k`; the estimator yields
//! `ŵ_k`; the RLS solution and FIR command are refreshed; the safety filter
//! produces `r_k`; finally `e_k = r_k - y_k` drives the controller and the
//! plant state advances.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::afdr::AdaptiveFir;
use crate::benchmark;
use crate::error::{Error, Result};
use crate::lti::{feedback_unity, parallel, series, LtiState, StateSpace};
use crate::safety::{matrix_inf_norm, safety_filter_clip, safety_filter_solve};
use crate::uncertainty::{random_delta, UncertaintySpec};

/// `amplitude · sin(frequency · t + phase)`, frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Output disturbance: a sum of sinusoids plus white Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    pub sinusoids: Vec<Sinusoid>,
    pub noise_std: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            sinusoids: alloc::vec![
                Sinusoid {
                    amplitude: 1.4,
                    frequency: 3.0,
                    phase: 0.0,
                },
                Sinusoid {
                    amplitude: 0.9,
                    frequency: 5.0,
                    phase: 0.4,
                },
            ],
            noise_std: 0.05,
        }
    }
}

impl DisturbanceModel {
    /// Noise-free part at continuous time `t` seconds.
    pub fn harmonic(&self, t: f64) -> f64 {
        self.sinusoids
            .iter()
            .map(|s| s.amplitude * libm::sin(s.frequency * t + s.phase))
            .sum()
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_std = 0.0;
        self
    }
}

/// One disturbance sample and its noise component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSample {
    pub d: f64,
    pub n: f64,
}

/// Seeded disturbance stream; sample `k` is taken at `t = k Ts`.
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    model: DisturbanceModel,
    ts: f64,
    rng: ChaCha8Rng,
    next: usize,
}

impl DisturbanceSource {
    pub fn new(model: DisturbanceModel, ts: f64, seed: u64) -> Self {
        Self {
            model,
            ts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
        }
    }

    /// Next sample of the stream (samples `0, 1, 2, ...`).
    pub fn next_sample(&mut self) -> DisturbanceSample {
        let k = self.next;
        self.next += 1;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let n = self.model.noise_std * z;
        DisturbanceSample {
            d: disturbance_sample(&self.model, k, self.ts, n),
            n,
        }
    }
}

/// `d_k` for a given noise value `n_k`.
pub fn disturbance_sample(model: &DisturbanceModel, k: usize, ts: f64, noise: f64) -> f64 {
    model.harmonic(k as f64 * ts) + noise
}

/// RLS settings of the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsConfig {
    pub lambda_init: f64,
    pub forgetting: f64,
    /// Run the RLS update from `t = 0` (command held at zero until the
    /// adaptive loop switches on); otherwise start updating at switch-on.
    pub learn_before_on: bool,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            lambda_init: 1e6,
            forgetting: 1.0,
            learn_before_on: true,
        }
    }
}

pub const DEFAULT_INSTABILITY_THRESHOLD: f64 = 1e6;

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Model used by the estimator and the regressor.
    pub nominal_plant: StateSpace,
    pub controller: StateSpace,
    /// Plant that actually evolves the loop; must be strictly proper.
    pub true_plant: StateSpace,
    pub duration: f64,
    /// Time at which the adaptive loop starts commanding `r`.
    pub afdr_on: f64,
    /// When false the outer loop never commands anything.
    pub afdr_enabled: bool,
    pub fir_len: usize,
    pub beta: Option<f64>,
    pub safety_filter: bool,
    pub disturbance: DisturbanceModel,
    pub noise_seed: u64,
    pub rls: RlsConfig,
    pub instability_threshold: f64,
}

impl ScenarioConfig {
    /// Nominal benchmark loop, 20 s with adaptation from 10 s, safety filter off.
    pub fn benchmark() -> Self {
        let plant = benchmark::plant();
        Self {
            nominal_plant: plant.clone(),
            controller: benchmark::controller(),
            true_plant: plant,
            duration: 20.0,
            afdr_on: 10.0,
            afdr_enabled: true,
            fir_len: benchmark::FIR_LEN,
            beta: Some(benchmark::BETA),
            safety_filter: false,
            disturbance: DisturbanceModel::default(),
            noise_seed: 0,
            rls: RlsConfig::default(),
            instability_threshold: DEFAULT_INSTABILITY_THRESHOLD,
        }
    }

    pub fn ts(&self) -> f64 {
        self.nominal_plant.ts()
    }

    /// `duration / Ts + 1`.
    pub fn sample_count(&self) -> usize {
        libm::round(self.duration / self.ts()) as usize + 1
    }

    /// First sample index with the adaptive loop on.
    pub fn on_index(&self) -> usize {
        libm::ceil(self.afdr_on / self.ts() - 1e-9) as usize
    }

    /// True plant `Ĝ + Δ`.
    pub fn with_uncertainty(mut self, delta: &StateSpace) -> Result<Self> {
        self.true_plant = parallel(&self.nominal_plant, delta)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ts = self.ts();
        for g in [&self.controller, &self.true_plant] {
            if g.ts() != ts {
                return Err(Error::SampleTimeMismatch {
                    left: ts,
                    right: g.ts(),
                });
            }
        }
        for g in [&self.nominal_plant, &self.controller, &self.true_plant] {
            if !g.is_siso() {
                return Err(Error::DimensionMismatch("scenario systems must be SISO"));
            }
        }
        if !self.true_plant.is_strictly_proper() || !self.nominal_plant.is_strictly_proper() {
            return Err(Error::AlgebraicLoop);
        }
        if !(self.duration > self.afdr_on && self.afdr_on > 0.0) {
            return Err(Error::InvalidParameter("need duration > afdr_on > 0"));
        }
        if self.fir_len == 0 {
            return Err(Error::InvalidParameter("FIR length must be positive"));
        }
        if self.safety_filter {
            match self.beta {
                Some(b) if b >= 0.0 && b.is_finite() => {}
                _ => return Err(Error::InvalidParameter("safety filter needs a finite beta >= 0")),
            }
        }
        if !(self.instability_threshold > 0.0) {
            return Err(Error::InvalidParameter("instability threshold must be positive"));
        }
        if !(self.disturbance.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise standard deviation must be nonnegative"));
        }
        Ok(())
    }
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub t: f64,
    pub d: f64,
    pub n: f64,
    pub w_hat: f64,
    pub r_circ: f64,
    pub r: f64,
    pub y: f64,
    pub saturated: bool,
    pub theta_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trace: Vec<TraceRow>,
    /// Population standard deviation of `y` before switch-on.
    pub std_pre: f64,
    /// Population standard deviation of `y` from switch-on to the end;
    /// infinite for a diverged run.
    pub std_post: f64,
    pub stable: bool,
    pub diverged_at: Option<usize>,
    pub on_index: usize,
}

impl SimResult {
    pub fn outputs(&self) -> impl Iterator<Item = f64> + '_ {
        self.trace.iter().map(|r| r.y)
    }
}

/// Population standard deviation (zero for fewer than one sample).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimResult> {
    cfg.validate()?;
    let ts = cfg.ts();
    let loop_gain = series(&cfg.controller, &cfg.nominal_plant)?;
    let (sensitivity, comp_sensitivity) = feedback_unity(&loop_gain)?;
    if !sensitivity.is_stable() {
        return Err(Error::Unstable {
            spectral_radius: sensitivity.spectral_radius(),
        });
    }
    let mut afdr = AdaptiveFir::new(
        comp_sensitivity,
        cfg.fir_len,
        cfg.rls.lambda_init,
        cfg.rls.forgetting,
    )?;
    let mut plant = LtiState::new(cfg.true_plant.clone());
    let mut controller = LtiState::new(cfg.controller.clone());
    let mut source = DisturbanceSource::new(cfg.disturbance.clone(), ts, cfg.noise_seed);

    let samples = cfg.sample_count();
    let on_index = cfg.on_index();
    let beta = cfg.beta.unwrap_or(f64::INFINITY);
    let mut trace = Vec::with_capacity(samples);
    let mut diverged_at = None;
    let mut y_vec = DVector::zeros(1);
    let mut r_vec = DVector::zeros(1);

    for k in 0..samples {
        let DisturbanceSample { d, n } = source.next_sample();
        let y = plant.free_output_scalar() + d;
        let active = cfg.afdr_enabled && k >= on_index;
        let learn = cfg.afdr_enabled && (cfg.rls.learn_before_on || active);

        y_vec[0] = y;
        let w_hat = afdr.observe(&y_vec, learn)?[0];
        let (r_circ, r, saturated, theta_norm) = if !active {
            (0.0, 0.0, false, 0.0)
        } else {
            let r_circ = afdr.command()[0];
            if cfg.safety_filter {
                let window = afdr.fir().window().as_slice();
                let clipped = safety_filter_clip(&[r_circ], window, beta)?;
                let optimal = safety_filter_solve(&[r_circ], window, beta)?;
                (
                    r_circ,
                    clipped.r[0],
                    clipped.saturated[0],
                    matrix_inf_norm(&optimal.theta),
                )
            } else {
                (r_circ, r_circ, false, afdr.fir().theta_norm())
            }
        };

        r_vec[0] = r;
        afdr.apply(&r_vec)?;
        let u = controller.step_scalar(r - y);
        plant.advance_scalar(u);

        trace.push(TraceRow {
            k,
            t: k as f64 * ts,
            d,
            n,
            w_hat,
            r_circ,
            r,
            y,
            saturated,
            theta_norm,
        });
        if !y.is_finite() || y.abs() > cfg.instability_threshold {
            diverged_at = Some(k);
            break;
        }
    }

    let ys: Vec<f64> = trace.iter().map(|row| row.y).collect();
    let pre_end = on_index.min(ys.len());
    let (std_pre, std_post) = match diverged_at {
        Some(k) if k < on_index => (f64::INFINITY, f64::INFINITY),
        Some(_) => (population_std(&ys[..pre_end]), f64::INFINITY),
        None => (
            population_std(&ys[..pre_end]),
            population_std(&ys[pre_end..]),
        ),
    };
    Ok(SimResult {
        trace,
        std_pre,
        std_post,
        stable: diverged_at.is_none(),
        diverged_at,
        on_index,
    })
}

/// How the disturbance noise seed is chosen across Monte-Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSeedPolicy {
    /// Every run sees the configured noise realization.
    #[default]
    Fixed,
    /// Run `i` uses `noise_seed + i`.
    PerRun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub runs: usize,
    /// Run `i` draws its uncertainty with seed `base_seed + i`.
    pub base_seed: u64,
    pub delta: f64,
    pub order: usize,
    pub noise: NoiseSeedPolicy,
}

/// Per-run statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub delta_seed: u64,
    pub std_pre: f64,
    pub std_post: f64,
    pub stable: bool,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl WindowStats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let mut count = 0usize;
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (count > 0).then(|| Self {
            mean: sum / count as f64,
            min,
            max,
        })
    }
}

/// Aggregate over runs. Window statistics only include stable runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: Vec<RunSummary>,
    pub pre: Option<WindowStats>,
    pub post: Option<WindowStats>,
    pub unstable: usize,
}

impl MonteCarloSummary {
    /// Order of `runs` does not matter; they are sorted by index first.
    pub fn from_runs(mut runs: Vec<RunSummary>) -> Self {
        runs.sort_by_key(|r| r.index);
        let stable = || runs.iter().filter(|r| r.stable);
        let pre = WindowStats::of(stable().map(|r| r.std_pre));
        let post = WindowStats::of(stable().map(|r| r.std_post));
        let unstable = runs.iter().filter(|r| !r.stable).count();
        Self {
            runs,
            pre,
            post,
            unstable,
        }
    }
}

impl MonteCarloConfig {
    pub fn delta_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    /// The uncertainty of run `index`.
    pub fn uncertainty(&self, index: usize, ts: f64) -> Result<StateSpace> {
        random_delta(&UncertaintySpec::new(
            self.delta,
            self.order,
            self.delta_seed(index),
            ts,
        )?)
    }
}

/// Runs scenario `index` of a Monte-Carlo batch; returns its uncertainty and result.
pub fn monte_carlo_run(
    cfg: &ScenarioConfig,
    mc: &MonteCarloConfig,
    index: usize,
) -> Result<(StateSpace, SimResult)> {
    let delta = mc.uncertainty(index, cfg.ts())?;
    let mut run_cfg = cfg.clone().with_uncertainty(&delta)?;
    if mc.noise == NoiseSeedPolicy::PerRun {
        run_cfg.noise_seed = cfg.noise_seed.wrapping_add(index as u64);
    }
    let result = run_scenario(&run_cfg)?;
    Ok((delta, result))
}

impl RunSummary {
    pub fn new(index: usize, delta_seed: u64, result: &SimResult) -> Self {
        Self {
            index,
            delta_seed,
            std_pre: result.std_pre,
            std_post: result.std_post,
            stable: result.stable,
            diverged_at: result.diverged_at,
        }
    }
}

/// Sequential Monte-Carlo batch.
pub fn monte_carlo(cfg: &ScenarioConfig, mc: &MonteCarloConfig) -> Result<MonteCarloSummary> {
    if mc.runs == 0 {
        return Err(Error::InvalidParameter("need at least one Monte-Carlo run"));
    }
    let mut runs = Vec::with_capacity(mc.runs);
    for i in 0..mc.runs {
        let (_, result) = monte_carlo_run(cfg, mc, i)?;
        runs.push(RunSummary::new(i, mc.delta_seed(i), &result));
    }
    Ok(MonteCarloSummary::from_runs(runs))
}
