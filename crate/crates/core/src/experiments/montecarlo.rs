use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{draw_nuisance, observe, trial_seed, Quantization, Scenario};
use crate::crb::{
    averaged_crb, unquantized_crb_reference, AveragedScenario, AveragingGrid, BoundTarget,
};
use crate::dsp::{rmse_bpm, FilterSpec, RatePipeline, RateSearchSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{
    add_interference_schedule, hz_to_bpm, hz_to_rad, quantize, synthesize_received_power,
    SinusoidParams,
};

/// Monte Carlo check of estimator variance against the averaged bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub scenario: Scenario,
    pub noise_sigma: f64,
    pub quantization: Quantization,
    pub target: BoundTarget,
    pub trials: usize,
    pub seed: u64,
    pub filter: FilterSpec,
    pub search: RateSearchSpec,
    pub grid: AveragingGrid,
}

impl McSpec {
    pub fn new(scenario: Scenario, noise_sigma: f64, quantization: Quantization, trials: usize) -> Self {
        Self {
            scenario,
            noise_sigma,
            quantization,
            target: BoundTarget::Frequency,
            trials,
            seed: 0,
            filter: FilterSpec::default(),
            search: RateSearchSpec::default(),
            grid: AveragingGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub target: BoundTarget,
    /// Sample variance of the estimates ((rad/s)² or dB²).
    pub empirical_variance: f64,
    /// Standard error of `empirical_variance` from the fourth central moment.
    pub variance_se: f64,
    pub bound: f64,
    /// `empirical_variance / bound`.
    pub ratio: f64,
    pub mean_estimate: f64,
    pub trials: usize,
    pub degenerate_trials: usize,
    pub inconclusive: bool,
    pub pass: bool,
}

fn central_moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, m2, m4)
}

/// Runs the estimator over fresh `(φ, B, noise)` draws and compares the
/// variance of ω̂ (or Â) with the bound averaged over the same nuisance
/// distribution. Degenerate trials are left out; more than half degenerate
/// makes the result inconclusive.
pub fn monte_carlo_bound_check(spec: &McSpec) -> Result<BoundCheck> {
    if spec.trials < 100 {
        return Err(Error::Precondition(format!(
            "bound check needs at least 100 trials, got {}",
            spec.trials
        )));
    }
    let sc = &spec.scenario;
    sc.validate()?;
    if !(spec.noise_sigma.is_finite() && spec.noise_sigma > 0.0) {
        return Err(Error::invalid("noise_sigma", "must be finite and > 0"));
    }
    let acq = sc.acquisition()?;
    let quant = spec.quantization.spec(sc.step)?;
    let pipe = RatePipeline::new(&spec.filter, &spec.search, acq.sample_rate, acq.num_samples)?;

    let results = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(spec.seed, &[rng::TAG_TRIAL, t as u64, rng::TAG_NUISANCE]);
            let (phase, offset) = draw_nuisance(&mut r, sc.step);
            let noise_seed = trial_seed(spec.seed, &[rng::TAG_TRIAL, t as u64, rng::TAG_NOISE]);
            let trace = observe(sc, &acq, phase, offset, spec.noise_sigma, quant.as_ref(), noise_seed)?;
            Ok(pipe.run(&trace.samples))
        })
        .collect::<Result<Vec<_>>>()?;

    let degenerate_trials = results.iter().filter(|e| e.degenerate).count();
    let estimates: Vec<f64> = results
        .iter()
        .filter(|e| !e.degenerate)
        .map(|e| match spec.target {
            BoundTarget::Frequency => hz_to_rad(e.f_hat),
            BoundTarget::Amplitude => e.amplitude_hat,
        })
        .collect();

    let bound = match quant {
        None => unquantized_crb_reference(sc.amplitude, spec.noise_sigma, &acq)?,
        Some(q) => {
            // the bound is averaged over Δ-wide offsets even for one-bit data
            let q = crate::signal::QuantizerSpec { step: sc.step, ..q };
            averaged_crb(
                &AveragedScenario {
                    amplitude: sc.amplitude,
                    omega: sc.omega(),
                    noise_sigma: spec.noise_sigma,
                },
                &q,
                &acq,
                &spec.grid,
            )?
        }
    };
    let bound = match spec.target {
        BoundTarget::Frequency => bound.crb_frequency,
        BoundTarget::Amplitude => bound.crb_amplitude,
    };

    let inconclusive = 2 * degenerate_trials > spec.trials || estimates.len() < 2;
    let (mean, var, se) = if estimates.len() >= 2 {
        let n = estimates.len() as f64;
        let (mean, m2, m4) = central_moments(&estimates);
        let var = m2 * n / (n - 1.0);
        (mean, var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(BoundCheck {
        target: spec.target,
        empirical_variance: var,
        variance_se: se,
        bound,
        ratio: var / bound,
        mean_estimate: mean,
        trials: spec.trials,
        degenerate_trials,
        inconclusive,
        pass: !inconclusive && var >= bound - 3.0 * se,
    })
}

/// How the DC offset of each staircase replicate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OffsetDraw {
    /// Jittered strata of `[-Δ/2, Δ/2]`, one per replicate.
    Stratified,
    Fixed { offset: f64 },
}

/// Simulated helpful-interference staircase: consecutive segments with rising
/// total noise, rate estimated on sliding windows inside each segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSpec {
    pub scenario: Scenario,
    pub quantization: Quantization,
    /// Total pre-quantization noise std of each segment (dB).
    pub levels: Vec<f64>,
    /// Noise present without interference; levels below it are clamped up.
    pub base_sigma: f64,
    pub segment_seconds: f64,
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub replicates: usize,
    pub offset: OffsetDraw,
    pub filter: FilterSpec,
    pub search: RateSearchSpec,
    pub seed: u64,
}

impl Default for StaircaseSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            quantization: Quantization::Uniform,
            levels: vec![0.0, 0.1, 0.225, 0.45, 0.9],
            base_sigma: 0.01,
            segment_seconds: 151.0,
            window_seconds: 30.0,
            hop_seconds: 1.0,
            replicates: 40,
            offset: OffsetDraw::Stratified,
            filter: FilterSpec::default(),
            search: RateSearchSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRmse {
    pub level: f64,
    pub effective_sigma: f64,
    pub windows: usize,
    pub degenerate_windows: usize,
    pub rmse_bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseResult {
    pub segments: Vec<SegmentRmse>,
    pub truth_bpm: f64,
    pub seed: u64,
}

/// Per-segment RMSE. A degenerate window (no threshold crossings survive)
/// is scored as a uniform guess over the search band, drawn from its own
/// seeded stream: the attacker still has to report a rate.
pub fn hi_staircase_sim(spec: &StaircaseSpec) -> Result<StaircaseResult> {
    let sc = &spec.scenario;
    sc.validate()?;
    if spec.levels.is_empty() {
        return Err(Error::invalid("levels", "staircase needs at least one level"));
    }
    if spec.levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("levels", "noise levels must be finite and >= 0"));
    }
    if !(spec.base_sigma.is_finite() && spec.base_sigma >= 0.0) {
        return Err(Error::invalid("base_sigma", "must be finite and >= 0"));
    }
    if spec.replicates == 0 {
        return Err(Error::invalid("replicates", "must be >= 1"));
    }
    if !(spec.hop_seconds > 0.0 && spec.window_seconds > 0.0) {
        return Err(Error::invalid("hop_seconds", "window and hop must be > 0"));
    }
    let fs = sc.sample_rate;
    let seg_len = (spec.segment_seconds * fs).round() as usize;
    let win_len = (spec.window_seconds * fs).round() as usize;
    let hop = ((spec.hop_seconds * fs).round() as usize).max(1);
    if win_len < 2 || win_len > seg_len {
        return Err(Error::invalid(
            "window_seconds",
            "window must hold >= 2 samples and fit inside a segment",
        ));
    }
    let windows_per_segment = (seg_len - win_len) / hop + 1;
    let quant = spec.quantization.spec(sc.step)?;
    let pipe = RatePipeline::new(&spec.filter, &spec.search, fs, win_len)?;
    let total = seg_len * spec.levels.len();
    let acq = crate::signal::AcquisitionSpec::new(fs, total)?;
    let effective: Vec<f64> = spec.levels.iter().map(|l| l.max(spec.base_sigma)).collect();
    let schedule: Vec<(usize, f64)> = effective
        .iter()
        .map(|e| (seg_len, (e * e - spec.base_sigma * spec.base_sigma).max(0.0).sqrt()))
        .collect();

    // per replicate: per segment, (estimates, degenerate count)
    let per_rep = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut nuis = rng::stream(spec.seed, &[rng::TAG_TRIAL, r as u64, rng::TAG_NUISANCE]);
            let phase = nuis.random_range(0.0..std::f64::consts::TAU);
            let offset = match spec.offset {
                OffsetDraw::Fixed { offset } => offset,
                OffsetDraw::Stratified => {
                    let u: f64 = nuis.random();
                    sc.step * ((r as f64 + u) / spec.replicates as f64 - 0.5)
                }
            };
            let p = SinusoidParams::new(sc.amplitude, offset, sc.omega(), phase, spec.base_sigma)?;
            let noise_seed = trial_seed(spec.seed, &[rng::TAG_TRIAL, r as u64, rng::TAG_NOISE]);
            let clean = synthesize_received_power(&p, &acq, noise_seed)?;
            let hi_seed = trial_seed(spec.seed, &[rng::TAG_TRIAL, r as u64, rng::TAG_INTERFERENCE]);
            let noisy = add_interference_schedule(&clean, &schedule, hi_seed)?;
            let obs = match &quant {
                Some(q) => quantize(&noisy, q)?,
                None => noisy,
            };
            let mut out = Vec::with_capacity(spec.levels.len());
            for s in 0..spec.levels.len() {
                let mut guess = rng::stream(spec.seed, &[rng::TAG_GUESS, r as u64, s as u64]);
                let mut est = Vec::with_capacity(windows_per_segment);
                let mut degenerate = 0;
                for w in 0..windows_per_segment {
                    let start = s * seg_len + w * hop;
                    let e = pipe.run(&obs.samples[start..start + win_len]);
                    if e.degenerate {
                        degenerate += 1;
                        let f = guess.random_range(spec.search.f_min..=spec.search.f_max);
                        est.push(hz_to_bpm(f));
                    } else {
                        est.push(e.rate_bpm);
                    }
                }
                out.push((est, degenerate));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let truth = hz_to_bpm(sc.rate_hz);
    let mut segments = Vec::with_capacity(spec.levels.len());
    for (s, &level) in spec.levels.iter().enumerate() {
        let all: Vec<f64> = per_rep.iter().flat_map(|rep| rep[s].0.iter().copied()).collect();
        let degenerate_windows = per_rep.iter().map(|rep| rep[s].1).sum();
        segments.push(SegmentRmse {
            level,
            effective_sigma: effective[s],
            windows: all.len(),
            degenerate_windows,
            rmse_bpm: rmse_bpm(&all, truth)?,
        });
    }
    Ok(StaircaseResult {
        segments,
        truth_bpm: truth,
        seed: spec.seed,
    })
}
