//! TOML run configuration.
//!
//! Every section is optional; missing keys take the defaults of the 30 s,
//! 10 Hz, A = 0.1 dB, Δ = 1 dB operating point. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crb::{AveragingGrid, BoundTarget, OffsetSet};
use crate::dsp::{FilterSpec, RateSearchSpec};
use crate::error::{Error, Result};
use crate::experiments::{
    ContourSpec, MitigationPolicy, OffsetDraw, Quantization, Scenario, StaircaseSpec, SweepAxis,
    SweepSpec,
};
use crate::signal::{
    bpm_to_hz, AcquisitionSpec, QuantizerMode, QuantizerSpec, SinusoidParams,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    acquisition: RawAcquisition,
    #[serde(default)]
    quantizer: RawQuantizer,
    #[serde(default)]
    filter: RawFilter,
    #[serde(default)]
    search: RawSearch,
    #[serde(default)]
    averaging: RawAveraging,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    contour: RawContour,
    #[serde(default)]
    staircase: RawStaircase,
    #[serde(default)]
    montecarlo: RawMonteCarlo,
    mitigation: Option<MitigationPolicy>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    amplitude: Option<f64>,
    rate_hz: Option<f64>,
    rate_bpm: Option<f64>,
    dc_offset: Option<f64>,
    phase: Option<f64>,
    noise_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAcquisition {
    sample_rate: Option<f64>,
    duration: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    mode: Option<QuantizerMode>,
    step: Option<f64>,
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    order: Option<usize>,
    cutoff_hz: Option<f64>,
    window_seconds: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    f_min: Option<f64>,
    f_max: Option<f64>,
    grid_resolution: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAveraging {
    phases: Option<usize>,
    offsets: Option<usize>,
    min_offset_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    noise_values: Option<Vec<f64>>,
    step_values: Option<Vec<f64>>,
    sample_rate_values: Option<Vec<f64>>,
    amplitude_values: Option<Vec<f64>>,
    noise_sigma: Option<f64>,
    trials: Option<usize>,
    quantization: Option<Quantization>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContour {
    sample_rates: Option<Vec<f64>>,
    steps: Option<Vec<f64>>,
    levels_bpm: Option<Vec<f64>>,
    levels_db: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStaircase {
    levels: Option<Vec<f64>>,
    base_sigma: Option<f64>,
    segment_seconds: Option<f64>,
    window_seconds: Option<f64>,
    hop_seconds: Option<f64>,
    replicates: Option<usize>,
    quantization: Option<Quantization>,
    fixed_offset: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonteCarlo {
    trials: Option<usize>,
    noise_sigma: Option<f64>,
    quantization: Option<Quantization>,
    target: Option<BoundTarget>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub noise_values: Vec<f64>,
    pub step_values: Vec<f64>,
    pub sample_rate_values: Vec<f64>,
    pub amplitude_values: Vec<f64>,
    pub noise_sigma: f64,
    pub trials: usize,
    pub quantization: Quantization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSection {
    pub trials: usize,
    pub noise_sigma: f64,
    pub quantization: Quantization,
    pub target: BoundTarget,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub params: SinusoidParams,
    pub duration: f64,
    pub acquisition: AcquisitionSpec,
    pub quantizer: QuantizerSpec,
    pub filter: FilterSpec,
    pub search: RateSearchSpec,
    pub averaging: AveragingGrid,
    pub sweep: SweepSection,
    pub contour: ContourSpec,
    pub staircase: StaircaseSpec,
    pub montecarlo: MonteCarloSection,
    pub mitigation: MitigationPolicy,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    finite(key, v)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    finite(key, v)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be >= 0, got {v}")))
    }
}

fn increasing(key: &str, v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(cfg_err(key, "must not be empty"));
    }
    for x in &v {
        positive(key, *x)?;
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err(key, "values must be strictly increasing"));
    }
    Ok(v)
}

/// Re-tag a library validation error with the config key it came from.
fn keyed<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => cfg_err(&format!("{section}.{name}"), reason),
        other => other,
    })
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl RunConfig {
    /// Parse and validate a TOML document. `origin` only labels errors.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let s = raw.scenario;
        let rate_hz = match (s.rate_hz, s.rate_bpm) {
            (Some(_), Some(_)) => {
                return Err(cfg_err("scenario.rate_bpm", "give rate_hz or rate_bpm, not both"))
            }
            (Some(h), None) => positive("scenario.rate_hz", h)?,
            (None, Some(b)) => bpm_to_hz(positive("scenario.rate_bpm", b)?),
            (None, None) => 0.25,
        };
        let amplitude = non_negative("scenario.amplitude", s.amplitude.unwrap_or(0.1))?;
        let params = keyed(
            "scenario",
            SinusoidParams::with_rate_hz(
                amplitude,
                finite("scenario.dc_offset", s.dc_offset.unwrap_or(0.0))?,
                rate_hz,
                finite("scenario.phase", s.phase.unwrap_or(0.0))?,
                non_negative("scenario.noise_sigma", s.noise_sigma.unwrap_or(0.25))?,
            ),
        )?;

        let a = raw.acquisition;
        let sample_rate = positive("acquisition.sample_rate", a.sample_rate.unwrap_or(10.0))?;
        let duration = positive("acquisition.duration", a.duration.unwrap_or(30.0))?;
        let acquisition = keyed("acquisition", AcquisitionSpec::from_duration(sample_rate, duration))?;

        let q = raw.quantizer;
        let step = positive("quantizer.step", q.step.unwrap_or(1.0))?;
        let quantizer = QuantizerSpec {
            step,
            threshold: finite("quantizer.threshold", q.threshold.unwrap_or(0.0))?,
            mode: q.mode.unwrap_or(QuantizerMode::Uniform),
        };

        let f = raw.filter;
        let filter = FilterSpec {
            order: f.order.unwrap_or(4),
            cutoff_hz: f.cutoff_hz.unwrap_or(0.5),
            window_seconds: f.window_seconds.unwrap_or(30.0),
        };
        keyed("filter", filter.validate(sample_rate))?;

        let r = raw.search;
        let d = RateSearchSpec::default();
        let search = RateSearchSpec {
            f_min: r.f_min.unwrap_or(d.f_min),
            f_max: r.f_max.unwrap_or(d.f_max),
            grid_resolution: r.grid_resolution.unwrap_or(d.grid_resolution),
        };
        keyed("search", search.validate(sample_rate))?;

        let g = raw.averaging;
        let averaging = AveragingGrid {
            phases: g.phases.unwrap_or(16),
            offsets: g.offsets.unwrap_or(33),
            offset_set: match g.min_offset_fraction {
                None => OffsetSet::Full,
                Some(min_fraction) => OffsetSet::AtLeast { min_fraction },
            },
        };
        if averaging.phases == 0 {
            return Err(cfg_err("averaging.phases", "must be >= 1"));
        }
        if averaging.offsets == 0 {
            return Err(cfg_err("averaging.offsets", "must be >= 1"));
        }
        keyed("averaging", averaging.validate())?;

        let w = raw.sweep;
        let sweep = SweepSection {
            noise_values: increasing(
                "sweep.noise_values",
                w.noise_values.unwrap_or_else(|| logspace(0.02, 2.0, 25)),
            )?,
            step_values: increasing(
                "sweep.step_values",
                w.step_values.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]),
            )?,
            sample_rate_values: increasing(
                "sweep.sample_rate_values",
                w.sample_rate_values
                    .unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0]),
            )?,
            amplitude_values: increasing(
                "sweep.amplitude_values",
                w.amplitude_values
                    .unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4, 0.8]),
            )?,
            noise_sigma: positive("sweep.noise_sigma", w.noise_sigma.unwrap_or(0.7))?,
            trials: w.trials.unwrap_or(0),
            quantization: w.quantization.unwrap_or(Quantization::Uniform),
        };

        let c = raw.contour;
        let cd = ContourSpec::default();
        let contour = ContourSpec {
            sample_rates: increasing("contour.sample_rates", c.sample_rates.unwrap_or(cd.sample_rates))?,
            steps: increasing("contour.steps", c.steps.unwrap_or(cd.steps))?,
            scenario: Scenario::default(),
            grid: averaging,
            levels_bpm: c.levels_bpm.unwrap_or(cd.levels_bpm),
            levels_db: c.levels_db.unwrap_or(cd.levels_db),
        };

        let st = raw.staircase;
        let sd = StaircaseSpec::default();
        let staircase = StaircaseSpec {
            levels: st.levels.unwrap_or(sd.levels),
            base_sigma: non_negative("staircase.base_sigma", st.base_sigma.unwrap_or(sd.base_sigma))?,
            segment_seconds: positive(
                "staircase.segment_seconds",
                st.segment_seconds.unwrap_or(sd.segment_seconds),
            )?,
            window_seconds: positive(
                "staircase.window_seconds",
                st.window_seconds.unwrap_or(sd.window_seconds),
            )?,
            hop_seconds: positive("staircase.hop_seconds", st.hop_seconds.unwrap_or(sd.hop_seconds))?,
            replicates: st.replicates.unwrap_or(sd.replicates),
            quantization: st.quantization.unwrap_or(sd.quantization),
            offset: match st.fixed_offset {
                Some(b) => OffsetDraw::Fixed {
                    offset: finite("staircase.fixed_offset", b)?,
                },
                None => OffsetDraw::Stratified,
            },
            ..sd
        };
        for l in &staircase.levels {
            non_negative("staircase.levels", *l)?;
        }
        if staircase.replicates == 0 {
            return Err(cfg_err("staircase.replicates", "must be >= 1"));
        }
        if staircase.window_seconds > staircase.segment_seconds {
            return Err(cfg_err("staircase.window_seconds", "must not exceed segment_seconds"));
        }

        let m = raw.montecarlo;
        let montecarlo = MonteCarloSection {
            trials: m.trials.unwrap_or(200),
            noise_sigma: positive("montecarlo.noise_sigma", m.noise_sigma.unwrap_or(0.25))?,
            quantization: m.quantization.unwrap_or(Quantization::OneBit),
            target: m.target.unwrap_or(BoundTarget::Frequency),
        };
        if montecarlo.trials < 100 {
            return Err(cfg_err("montecarlo.trials", "must be >= 100"));
        }

        let mitigation = raw.mitigation.unwrap_or(MitigationPolicy::NeverBoth {
            points: vec![[4.0, 2.0], [20.0, 8.0]],
        });
        keyed("mitigation", mitigation.validate())?;

        let mut cfg = Self {
            seed: raw.seed.unwrap_or(0),
            params,
            duration,
            acquisition,
            quantizer,
            filter,
            search,
            averaging,
            sweep,
            contour,
            staircase,
            montecarlo,
            mitigation,
            output_dir: raw.output.dir,
        };
        cfg.sync();
        Ok(cfg)
    }

    /// Propagate scenario, seed and shared blocks into the study specs.
    fn sync(&mut self) {
        let sc = self.scenario();
        self.contour.scenario = sc;
        self.contour.grid = self.averaging;
        self.staircase.scenario = sc;
        self.staircase.filter = self.filter;
        self.staircase.search = self.search;
        self.staircase.seed = self.seed;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync();
        self
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            amplitude: self.params.amplitude,
            rate_hz: self.params.rate_hz(),
            step: self.quantizer.step,
            sample_rate: self.acquisition.sample_rate,
            duration: self.duration,
        }
    }

    pub fn sweep_spec(&self, axis: SweepAxis) -> SweepSpec {
        let values = match axis {
            SweepAxis::NoiseSigma => &self.sweep.noise_values,
            SweepAxis::StepDelta => &self.sweep.step_values,
            SweepAxis::SampleRate => &self.sweep.sample_rate_values,
            SweepAxis::Amplitude => &self.sweep.amplitude_values,
        };
        SweepSpec {
            axis,
            values: values.clone(),
            scenario: self.scenario(),
            noise_sigma: self.sweep.noise_sigma,
            grid: self.averaging,
            trials: self.sweep.trials,
            quantization: self.sweep.quantization,
            filter: self.filter,
            search: self.search,
            seed: self.seed,
        }
    }

    /// Hex SHA-256 of the canonical TOML rendering of the resolved config.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("resolved config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::resolve(RawConfig::default()).expect("defaults are valid")
    }
}
