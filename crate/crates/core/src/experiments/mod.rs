//! Numerical studies built on the bound engine and the estimator pipeline.

mod contour;
mod mitigation;
mod montecarlo;
mod sweep;

pub use contour::{contour_grid, extract_contours, Contour, ContourField, ContourSpec};
pub use mitigation::{
    best_offset, evaluate_mitigation, simulate_reselection, MitigationPolicy, MitigationReport,
    OperatingPoint, ReselectionStats,
};
pub use montecarlo::{
    hi_staircase_sim, monte_carlo_bound_check, BoundCheck, McSpec, OffsetDraw, SegmentRmse,
    StaircaseResult, StaircaseSpec,
};
pub use sweep::{
    fit_polynomial, run_sweep, sweep_amplitude, sweep_noise, sweep_sampling_rate,
    sweep_step_size, PolyFit, StepFits, SweepAxis, SweepResult, SweepRow, SweepSpec,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng::{self, StreamRng};
use crate::signal::{
    hz_to_rad, quantize, synthesize_received_power, AcquisitionSpec, QuantizerSpec, RssTrace,
    SinusoidParams,
};

/// Fixed part of a study: breathing amplitude and rate, RSS step and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub amplitude: f64,
    pub rate_hz: f64,
    pub step: f64,
    pub sample_rate: f64,
    pub duration: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            rate_hz: 0.25,
            step: 1.0,
            sample_rate: 10.0,
            duration: 30.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("rate_hz", self.rate_hz),
            ("step", self.step),
            ("sample_rate", self.sample_rate),
            ("duration", self.duration),
        ] {
            ensure_finite(name, v)?;
        }
        if self.amplitude < 0.0 {
            return Err(Error::invalid("amplitude", "must be >= 0"));
        }
        if self.rate_hz <= 0.0 {
            return Err(Error::invalid("rate_hz", "must be > 0"));
        }
        if self.step <= 0.0 {
            return Err(Error::invalid("step", "must be > 0"));
        }
        self.acquisition().map(|_| ())
    }

    pub fn omega(&self) -> f64 {
        hz_to_rad(self.rate_hz)
    }

    pub fn acquisition(&self) -> Result<AcquisitionSpec> {
        AcquisitionSpec::from_duration(self.sample_rate, self.duration)
    }

    pub fn with_sampling(&self, sample_rate: f64, step: f64) -> Self {
        Self {
            sample_rate,
            step,
            ..*self
        }
    }
}

/// What the attacker observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantization {
    Unquantized,
    OneBit,
    Uniform,
}

impl Quantization {
    pub(crate) fn spec(&self, step: f64) -> Result<Option<QuantizerSpec>> {
        Ok(match self {
            Quantization::Unquantized => None,
            Quantization::OneBit => Some(QuantizerSpec::one_bit(0.0)),
            Quantization::Uniform => Some(QuantizerSpec::uniform(step, 0.0)?),
        })
    }
}

/// One random draw of `φ ~ U[0, 2π)` and `B ~ U[-Δ/2, Δ/2]`.
pub(crate) fn draw_nuisance(rng: &mut StreamRng, step: f64) -> (f64, f64) {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let offset = rng.random_range(-0.5 * step..0.5 * step);
    (phase, offset)
}

/// Synthesize and quantize one observation of `scenario`.
pub(crate) fn observe(
    scenario: &Scenario,
    acq: &AcquisitionSpec,
    phase: f64,
    offset: f64,
    sigma: f64,
    quant: Option<&QuantizerSpec>,
    seed: u64,
) -> Result<RssTrace> {
    let p = SinusoidParams::new(scenario.amplitude, offset, scenario.omega(), phase, sigma)?;
    let t = synthesize_received_power(&p, acq, seed)?;
    match quant {
        Some(q) => quantize(&t, q),
        None => Ok(t),
    }
}

pub(crate) fn trial_seed(seed: u64, tags: &[u64]) -> u64 {
    rng::derive_seed(seed, tags)
}
