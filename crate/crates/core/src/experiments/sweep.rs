use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{draw_nuisance, observe, trial_seed, Quantization, Scenario};
use crate::crb::{
    averaged_crb, find_optimal_noise, unquantized_crb_reference, AveragedScenario, AveragingGrid,
    BoundTarget, NoiseSearch,
};
use crate::dsp::{rmse_bpm, FilterSpec, RateSearchSpec, RatePipeline};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{hz_to_bpm, QuantizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    NoiseSigma,
    StepDelta,
    SampleRate,
    Amplitude,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::NoiseSigma => "noise_sigma",
            SweepAxis::StepDelta => "step_delta",
            SweepAxis::SampleRate => "sample_rate",
            SweepAxis::Amplitude => "amplitude",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            SweepAxis::SampleRate => "Hz",
            _ => "dB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub scenario: Scenario,
    /// σ used by every row whose σ is not swept or optimized.
    pub noise_sigma: f64,
    pub grid: AveragingGrid,
    /// Monte Carlo rate-estimation trials per row; 0 skips the simulation.
    pub trials: usize,
    pub quantization: Quantization,
    pub filter: FilterSpec,
    pub search: RateSearchSpec,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, scenario: Scenario) -> Self {
        Self {
            axis,
            values,
            scenario,
            noise_sigma: 0.7,
            grid: AveragingGrid::default(),
            trials: 0,
            quantization: Quantization::Uniform,
            filter: FilterSpec::default(),
            search: RateSearchSpec::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.grid.validate()?;
        if self.values.is_empty() {
            return Err(Error::invalid("values", "sweep needs at least one value"));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("values", "sweep values must be finite and > 0"));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("values", "sweep values must be strictly increasing"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(Error::invalid("noise_sigma", "must be finite and > 0"));
        }
        Ok(())
    }

    fn require(&self, axis: SweepAxis) -> Result<()> {
        if self.axis != axis {
            return Err(Error::invalid(
                "axis",
                format!("expected a {} sweep, got {}", axis.name(), self.axis.name()),
            ));
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    /// σ the frequency bound was evaluated at (dB).
    pub sigma: f64,
    /// σ the amplitude bound was evaluated at, when optimized separately.
    pub sigma_amplitude: f64,
    pub std_amplitude_db: f64,
    pub std_rate_bpm: f64,
    pub unquantized_std_amplitude_db: f64,
    pub unquantized_std_rate_bpm: f64,
    pub mc_rmse_bpm: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Lowest order first.
    pub coefficients: [f64; 3],
    pub degree: usize,
    pub r_squared: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients[..=self.degree]
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }
}

/// Least-squares polynomial fit of degree 1 or 2 (SVD solve).
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    if !(1..=2).contains(&degree) {
        return Err(Error::invalid("degree", "only degree 1 or 2 is supported"));
    }
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::Precondition(format!(
            "fit of degree {degree} needs more than {degree} points, got {}",
            x.len()
        )));
    }
    let v = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let yv = DVector::from_column_slice(y);
    let sol = v
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-14)
        .map_err(|e| Error::Precondition(format!("least squares failed: {e}")))?;
    let mut coefficients = [0.0; 3];
    coefficients[..=degree].copy_from_slice(sol.as_slice());
    let resid = &yv - &v * &sol;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = resid.norm_squared();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PolyFit {
        coefficients,
        degree,
        r_squared,
    })
}

/// Model fits for a step-size sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFits {
    pub frequency_linear: PolyFit,
    pub amplitude_quadratic: PolyFit,
    /// Slope of `σ_opt = c·Δ` by least squares through the origin.
    pub sigma_slope: f64,
    /// Largest `|σ_opt/(c·Δ) - 1|` over the sweep.
    pub sigma_max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub scenario: Scenario,
    pub rows: Vec<SweepRow>,
    pub fits: Option<StepFits>,
    pub seed: u64,
}

impl SweepResult {
    /// Row with the smallest frequency std.
    pub fn min_rate_row(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.std_rate_bpm.total_cmp(&b.std_rate_bpm))
    }
}

struct RowInput {
    scenario: Scenario,
    sigma_rate: f64,
    sigma_amplitude: f64,
}

fn bound_row(spec: &SweepSpec, index: usize, axis_value: f64, input: RowInput) -> Result<SweepRow> {
    let sc = input.scenario;
    let acq = sc.acquisition()?;
    let quant = QuantizerSpec::uniform(sc.step, 0.0)?;
    let at = |sigma: f64| {
        averaged_crb(
            &AveragedScenario {
                amplitude: sc.amplitude,
                omega: sc.omega(),
                noise_sigma: sigma,
            },
            &quant,
            &acq,
            &spec.grid,
        )
    };
    let rate = at(input.sigma_rate)?;
    let amp = if input.sigma_amplitude == input.sigma_rate {
        rate.clone()
    } else {
        at(input.sigma_amplitude)?
    };
    let reference = unquantized_crb_reference(sc.amplitude, input.sigma_rate, &acq)?;
    let row_seed = trial_seed(spec.seed, &[index as u64]);
    let mc_rmse_bpm = if spec.trials > 0 {
        Some(simulate_rate_rmse(
            &sc,
            input.sigma_rate,
            spec.quantization,
            &spec.filter,
            &spec.search,
            spec.trials,
            row_seed,
        )?)
    } else {
        None
    };
    Ok(SweepRow {
        axis_value,
        sigma: input.sigma_rate,
        sigma_amplitude: input.sigma_amplitude,
        std_amplitude_db: amp.std_amplitude_db,
        std_rate_bpm: rate.std_rate_bpm,
        unquantized_std_amplitude_db: reference.std_amplitude_db,
        unquantized_std_rate_bpm: reference.std_rate_bpm,
        mc_rmse_bpm,
        trials: spec.trials,
        seed: row_seed,
    })
}

/// RMSE (bpm) of the rate estimator over random `(φ, B, noise)` draws.
/// Degenerate windows count with their `f_min` estimate.
pub(crate) fn simulate_rate_rmse(
    sc: &Scenario,
    sigma: f64,
    quantization: Quantization,
    filter: &FilterSpec,
    search: &RateSearchSpec,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let acq = sc.acquisition()?;
    let quant = quantization.spec(sc.step)?;
    let pipe = RatePipeline::new(filter, search, acq.sample_rate, acq.num_samples)?;
    let estimates = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, &[rng::TAG_TRIAL, t as u64, rng::TAG_NUISANCE]);
            let (phase, offset) = draw_nuisance(&mut r, sc.step);
            let noise_seed = trial_seed(seed, &[rng::TAG_TRIAL, t as u64, rng::TAG_NOISE]);
            let trace = observe(sc, &acq, phase, offset, sigma, quant.as_ref(), noise_seed)?;
            Ok(pipe.run(&trace.samples).rate_bpm)
        })
        .collect::<Result<Vec<f64>>>()?;
    rmse_bpm(&estimates, hz_to_bpm(sc.rate_hz))
}

fn optimal(sc: &Scenario, grid: &AveragingGrid, target: BoundTarget) -> Result<f64> {
    let s = NoiseSearch::new(sc.amplitude, sc.omega(), sc.step, target);
    Ok(find_optimal_noise(&s, &sc.acquisition()?, grid)?.sigma_opt)
}

fn collect_rows(
    spec: &SweepSpec,
    make: impl Fn(f64) -> Result<RowInput> + Sync,
) -> Result<Vec<SweepRow>> {
    spec.values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| bound_row(spec, i, v, make(v)?))
        .collect()
}

/// Averaged bounds against σ, with the unquantized reference alongside.
pub fn sweep_noise(spec: &SweepSpec) -> Result<SweepResult> {
    spec.require(SweepAxis::NoiseSigma)?;
    let rows = collect_rows(spec, |sigma| {
        Ok(RowInput {
            scenario: spec.scenario,
            sigma_rate: sigma,
            sigma_amplitude: sigma,
        })
    })?;
    Ok(finish(spec, rows, None))
}

/// Min-over-σ bounds against Δ, each parameter at its own σ_opt, with a
/// linear fit to the frequency std and a quadratic fit to the amplitude std.
pub fn sweep_step_size(spec: &SweepSpec) -> Result<SweepResult> {
    spec.require(SweepAxis::StepDelta)?;
    let rows = collect_rows(spec, |step| {
        let sc = Scenario { step, ..spec.scenario };
        Ok(RowInput {
            scenario: sc,
            sigma_rate: optimal(&sc, &spec.grid, BoundTarget::Frequency)?,
            sigma_amplitude: optimal(&sc, &spec.grid, BoundTarget::Amplitude)?,
        })
    })?;
    let fits = if rows.len() >= 3 {
        let x: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.std_rate_bpm).collect();
        let a: Vec<f64> = rows.iter().map(|r| r.std_amplitude_db).collect();
        let s: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
        let slope = x.iter().zip(&s).map(|(x, s)| x * s).sum::<f64>()
            / x.iter().map(|x| x * x).sum::<f64>();
        let dev = x
            .iter()
            .zip(&s)
            .map(|(x, s)| (s / (slope * x) - 1.0).abs())
            .fold(0.0, f64::max);
        Some(StepFits {
            frequency_linear: fit_polynomial(&x, &f, 1)?,
            amplitude_quadratic: fit_polynomial(&x, &a, 2)?,
            sigma_slope: slope,
            sigma_max_deviation: dev,
        })
    } else {
        None
    };
    Ok(finish(spec, rows, fits))
}

/// Bounds against fs at fixed σ and fixed duration (N grows with fs).
pub fn sweep_sampling_rate(spec: &SweepSpec) -> Result<SweepResult> {
    spec.require(SweepAxis::SampleRate)?;
    let rows = collect_rows(spec, |fs| {
        Ok(RowInput {
            scenario: Scenario {
                sample_rate: fs,
                ..spec.scenario
            },
            sigma_rate: spec.noise_sigma,
            sigma_amplitude: spec.noise_sigma,
        })
    })?;
    Ok(finish(spec, rows, None))
}

/// Bounds against the breathing amplitude at fixed σ.
pub fn sweep_amplitude(spec: &SweepSpec) -> Result<SweepResult> {
    spec.require(SweepAxis::Amplitude)?;
    let rows = collect_rows(spec, |amplitude| {
        Ok(RowInput {
            scenario: Scenario {
                amplitude,
                ..spec.scenario
            },
            sigma_rate: spec.noise_sigma,
            sigma_amplitude: spec.noise_sigma,
        })
    })?;
    Ok(finish(spec, rows, None))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    match spec.axis {
        SweepAxis::NoiseSigma => sweep_noise(spec),
        SweepAxis::StepDelta => sweep_step_size(spec),
        SweepAxis::SampleRate => sweep_sampling_rate(spec),
        SweepAxis::Amplitude => sweep_amplitude(spec),
    }
}

fn finish(spec: &SweepSpec, rows: Vec<SweepRow>, fits: Option<StepFits>) -> SweepResult {
    SweepResult {
        axis: spec.axis,
        scenario: spec.scenario,
        rows,
        fits,
        seed: spec.seed,
    }
}
