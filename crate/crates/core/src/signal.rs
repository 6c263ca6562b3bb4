//! Breathing-modulated received power, interference, and RSS quantization.
//!
//! All values live in the dB domain: the breathing component is an additive
//! sinusoid on top of the mean received power.

use std::f64::consts::{PI, TAU};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng;

/// Angular frequency (rad/s) for a rate in Hz.
pub fn hz_to_rad(hz: f64) -> f64 {
    TAU * hz
}

pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn bpm_to_hz(bpm: f64) -> f64 {
    bpm / 60.0
}

pub fn hz_to_bpm(hz: f64) -> f64 {
    60.0 * hz
}

/// Breathing sinusoid `A·cos(ω·t + φ) + B` observed in Gaussian noise of std `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    /// Breathing-induced swing (dB).
    pub amplitude: f64,
    /// Distance from the mean power to the nearest quantization threshold (dB).
    pub dc_offset: f64,
    /// Angular breathing frequency (rad/s).
    pub omega: f64,
    /// Initial phase, kept in `[0, 2π)`.
    pub phase: f64,
    /// Std of the white Gaussian noise before quantization (dB).
    pub noise_sigma: f64,
}

impl SinusoidParams {
    pub fn new(
        amplitude: f64,
        dc_offset: f64,
        omega: f64,
        phase: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        ensure_finite("amplitude", amplitude)?;
        ensure_finite("dc_offset", dc_offset)?;
        ensure_finite("omega", omega)?;
        ensure_finite("phase", phase)?;
        ensure_finite("noise_sigma", noise_sigma)?;
        if amplitude < 0.0 {
            return Err(Error::invalid("amplitude", "must be >= 0"));
        }
        if noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma", "must be >= 0"));
        }
        Ok(Self {
            amplitude,
            dc_offset,
            omega,
            phase: normalize_phase(phase),
            noise_sigma,
        })
    }

    /// Same as [`SinusoidParams::new`] with the rate given in Hz.
    pub fn with_rate_hz(
        amplitude: f64,
        dc_offset: f64,
        rate_hz: f64,
        phase: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        Self::new(amplitude, dc_offset, hz_to_rad(rate_hz), phase, noise_sigma)
    }

    pub fn rate_hz(&self) -> f64 {
        rad_to_hz(self.omega)
    }

    pub fn rate_bpm(&self) -> f64 {
        hz_to_bpm(self.rate_hz())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(
            self.amplitude,
            self.dc_offset,
            self.omega,
            self.phase,
            self.noise_sigma,
        )
        .map(|_| ())
    }
}

pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Sampling of the received power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub sample_rate: f64,
    pub num_samples: usize,
}

impl AcquisitionSpec {
    pub fn new(sample_rate: f64, num_samples: usize) -> Result<Self> {
        ensure_finite("sample_rate", sample_rate)?;
        if sample_rate <= 0.0 {
            return Err(Error::invalid("sample_rate", "must be > 0"));
        }
        if num_samples < 2 {
            return Err(Error::invalid("num_samples", "must be >= 2"));
        }
        Ok(Self {
            sample_rate,
            num_samples,
        })
    }

    /// `N = round(fs · duration)`.
    pub fn from_duration(sample_rate: f64, duration_s: f64) -> Result<Self> {
        ensure_finite("duration", duration_s)?;
        ensure_finite("sample_rate", sample_rate)?;
        if duration_s <= 0.0 {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        Self::new(sample_rate, (sample_rate * duration_s).round() as usize)
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.num_samples as f64 * self.sample_period()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }

    fn with_len(&self, num_samples: usize) -> Self {
        Self {
            sample_rate: self.sample_rate,
            num_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizerMode {
    OneBit,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub step: f64,
    pub threshold: f64,
    pub mode: QuantizerMode,
}

impl QuantizerSpec {
    /// One-bit quantizer; `step` is unused and left at 0.
    pub fn one_bit(threshold: f64) -> Self {
        Self {
            step: 0.0,
            threshold,
            mode: QuantizerMode::OneBit,
        }
    }

    pub fn uniform(step: f64, threshold: f64) -> Result<Self> {
        let q = Self {
            step,
            threshold,
            mode: QuantizerMode::Uniform,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("threshold", self.threshold)?;
        if self.mode == QuantizerMode::Uniform && !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("step", "uniform quantizer needs a step > 0"));
        }
        Ok(())
    }

    /// Quantize one value.
    ///
    /// One-bit: `+1` iff `x >= ζ`. Uniform: mid-rise bins of width Δ anchored at
    /// ζ, represented by their centers.
    pub fn apply(&self, x: f64) -> f64 {
        match self.mode {
            QuantizerMode::OneBit => {
                if x >= self.threshold {
                    1.0
                } else {
                    -1.0
                }
            }
            QuantizerMode::Uniform => {
                let d = self.step;
                d * ((x - self.threshold) / d).floor() + self.threshold + 0.5 * d
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TraceKind {
    ContinuousPower,
    OneBit,
    UniformQuantized { step: f64 },
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::ContinuousPower => "continuous-power",
            TraceKind::OneBit => "one-bit",
            TraceKind::UniformQuantized { .. } => "uniform-quantized",
        }
    }
}

/// A sampled signal and its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RssTrace {
    pub samples: Vec<f64>,
    pub acquisition: AcquisitionSpec,
    pub kind: TraceKind,
    pub seed: Option<u64>,
    /// Total pre-quantization noise variance (dB²), when known.
    pub noise_variance: Option<f64>,
}

impl RssTrace {
    /// Wrap recorded or hand-made samples; validates the alphabet for `kind`.
    pub fn new(samples: Vec<f64>, sample_rate: f64, kind: TraceKind) -> Result<Self> {
        let acquisition = AcquisitionSpec::new(sample_rate, samples.len())?;
        let trace = Self {
            samples,
            acquisition,
            kind,
            seed: None,
            noise_variance: None,
        };
        trace.check_alphabet()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn check_alphabet(&self) -> Result<()> {
        if let Some(bad) = self.samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", format!("non-finite sample {bad}")));
        }
        if self.kind == TraceKind::OneBit {
            if let Some(bad) = self.samples.iter().find(|&&v| v != 1.0 && v != -1.0) {
                return Err(Error::invalid(
                    "samples",
                    format!("one-bit trace contains {bad}, expected -1 or +1"),
                ));
            }
        }
        Ok(())
    }

    fn require_continuous(&self) -> Result<()> {
        if self.kind != TraceKind::ContinuousPower {
            return Err(Error::KindMismatch {
                expected: "continuous-power",
                found: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Contiguous sub-trace `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len < 2 || start + len > self.samples.len() {
            return Err(Error::Precondition(format!(
                "slice [{start}, {}) outside trace of {} samples",
                start + len,
                self.samples.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..start + len].to_vec(),
            acquisition: self.acquisition.with_len(len),
            kind: self.kind,
            seed: self.seed,
            noise_variance: self.noise_variance,
        })
    }
}

/// `x[k] = A·cos(ω·Ts·k + φ) + B + v[k]`, `v[k] ~ N(0, σ²)` i.i.d.
pub fn synthesize_received_power(
    params: &SinusoidParams,
    acq: &AcquisitionSpec,
    seed: u64,
) -> Result<RssTrace> {
    params.validate()?;
    AcquisitionSpec::new(acq.sample_rate, acq.num_samples)?;
    let ts = acq.sample_period();
    let mut rng = rng::stream(seed, &[rng::TAG_NOISE]);
    let noise = Normal::new(0.0, params.noise_sigma)
        .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    let samples = (0..acq.num_samples)
        .map(|k| {
            let clean =
                params.amplitude * (params.omega * ts * k as f64 + params.phase).cos() + params.dc_offset;
            if params.noise_sigma > 0.0 {
                clean + noise.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();
    Ok(RssTrace {
        samples,
        acquisition: *acq,
        kind: TraceKind::ContinuousPower,
        seed: Some(seed),
        noise_variance: Some(params.noise_sigma * params.noise_sigma),
    })
}

pub fn quantize(trace: &RssTrace, quant: &QuantizerSpec) -> Result<RssTrace> {
    trace.require_continuous()?;
    quant.validate()?;
    let kind = match quant.mode {
        QuantizerMode::OneBit => TraceKind::OneBit,
        QuantizerMode::Uniform => TraceKind::UniformQuantized { step: quant.step },
    };
    Ok(RssTrace {
        samples: trace.samples.iter().map(|&x| quant.apply(x)).collect(),
        acquisition: trace.acquisition,
        kind,
        seed: trace.seed,
        noise_variance: trace.noise_variance,
    })
}

/// Add independent `N(0, extra_sigma²)` to every sample.
pub fn add_interference(trace: &RssTrace, extra_sigma: f64, seed: u64) -> Result<RssTrace> {
    let n = trace.len();
    add_interference_schedule(trace, &[(n, extra_sigma)], seed)
}

/// Piecewise interference: each `(len, extra_sigma)` segment gets its own
/// noise level, in order. Segment lengths must add up to the trace length.
pub fn add_interference_schedule(
    trace: &RssTrace,
    schedule: &[(usize, f64)],
    seed: u64,
) -> Result<RssTrace> {
    trace.require_continuous()?;
    let total: usize = schedule.iter().map(|s| s.0).sum();
    if total != trace.len() {
        return Err(Error::Precondition(format!(
            "interference schedule covers {total} samples, trace has {}",
            trace.len()
        )));
    }
    for &(_, s) in schedule {
        ensure_finite("extra_sigma", s)?;
        if s < 0.0 {
            return Err(Error::invalid("extra_sigma", "must be >= 0"));
        }
    }

    let mut out = trace.samples.clone();
    let mut start = 0;
    for (segment, &(len, sigma)) in schedule.iter().enumerate() {
        if sigma > 0.0 {
            let mut rng = rng::stream(seed, &[rng::TAG_INTERFERENCE, segment as u64]);
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            for x in &mut out[start..start + len] {
                *x += normal.sample(&mut rng);
            }
        }
        start += len;
    }

    // Effective variance only has a single value for a uniform schedule.
    let base = trace.noise_variance.unwrap_or(0.0);
    let noise_variance = match schedule {
        [(_, s)] => Some(base + s * s),
        _ if schedule.windows(2).all(|w| w[0].1 == w[1].1) && !schedule.is_empty() => {
            Some(base + schedule[0].1 * schedule[0].1)
        }
        _ => None,
    };
    Ok(RssTrace {
        samples: out,
        acquisition: trace.acquisition,
        kind: trace.kind,
        seed: trace.seed,
        noise_variance,
    })
}

/// Number of full breathing cycles covered by a trace.
pub fn cycles_in(acq: &AcquisitionSpec, omega: f64) -> f64 {
    acq.duration() * omega / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn acq(fs: f64, n: usize) -> AcquisitionSpec {
        AcquisitionSpec::new(fs, n).unwrap()
    }

    #[test]
    fn constant_signal_without_breathing() {
        let p = SinusoidParams::new(0.0, -54.0, 1.0, 0.3, 0.0).unwrap();
        let t = synthesize_received_power(&p, &acq(10.0, 50), 1).unwrap();
        assert!(t.samples.iter().all(|&x| x == -54.0));
    }

    #[test]
    fn nyquist_tone_alternates() {
        let fs = 10.0;
        let omega = PI * fs; // ω·Ts = π
        let p = SinusoidParams::new(1.0, 0.0, omega, 0.0, 0.0).unwrap();
        let t = synthesize_received_power(&p, &acq(fs, 8), 1).unwrap();
        for (k, x) in t.samples.iter().enumerate() {
            let want = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((x - want).abs() < 1e-12, "k={k} x={x}");
        }
    }

    #[test]
    fn breathing_trace_shape() {
        let p = SinusoidParams::with_rate_hz(0.1, 0.0, 0.25, 0.0, 0.0).unwrap();
        let a = acq(10.0, 300);
        let t = synthesize_received_power(&p, &a, 3).unwrap();
        let max = t.samples.iter().cloned().fold(f64::MIN, f64::max);
        let min = t.samples.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min - 0.2).abs() < 1e-12);
        assert!((cycles_in(&a, p.omega) - 7.5).abs() < 1e-12);
        assert!((a.duration() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SinusoidParams::new(f64::NAN, 0.0, 1.0, 0.0, 0.1).is_err());
        assert!(SinusoidParams::new(0.1, 0.0, f64::INFINITY, 0.0, 0.1).is_err());
        assert!(SinusoidParams::new(-0.1, 0.0, 1.0, 0.0, 0.1).is_err());
        assert!(AcquisitionSpec::new(0.0, 10).is_err());
        assert!(AcquisitionSpec::new(10.0, 1).is_err());
    }

    #[test]
    fn phase_is_normalized() {
        let p = SinusoidParams::new(0.1, 0.0, 1.0, -0.5, 0.1).unwrap();
        assert!((p.phase - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(normalize_phase(TAU), 0.0);
        assert!(normalize_phase(-1e-300) < TAU);
    }

    #[test]
    fn one_bit_quantizer() {
        let t = RssTrace::new(vec![0.3, -0.2, 0.0], 1.0, TraceKind::ContinuousPower).unwrap();
        let q = quantize(&t, &QuantizerSpec::one_bit(0.0)).unwrap();
        assert_eq!(q.samples, vec![1.0, -1.0, 1.0]);
        assert_eq!(q.kind, TraceKind::OneBit);
    }

    #[test]
    fn uniform_quantizer_bins() {
        let q = QuantizerSpec::uniform(1.0, 0.0).unwrap();
        assert_eq!(q.apply(-53.7), q.apply(-53.2));
        assert_eq!(q.apply(-53.7), -53.5);
        assert_eq!(q.apply(-52.9), -52.5);
        assert_eq!(q.apply(-52.9) - q.apply(-53.7), 1.0);
        // the one-bit quantizer is two adjacent uniform bins around ζ
        assert_eq!(q.apply(0.2) - q.apply(-0.2), 1.0);
    }

    #[test]
    fn quantize_requires_continuous_input() {
        let t = RssTrace::new(vec![1.0, -1.0], 1.0, TraceKind::OneBit).unwrap();
        let err = quantize(&t, &QuantizerSpec::one_bit(0.0)).unwrap_err();
        assert!(matches!(err, Error::KindMismatch { .. }));
    }

    #[test]
    fn one_bit_alphabet_is_enforced() {
        assert!(RssTrace::new(vec![1.0, 0.5], 1.0, TraceKind::OneBit).is_err());
    }

    #[test]
    fn zero_interference_is_identity() {
        let p = SinusoidParams::new(0.1, 0.2, 1.5, 0.0, 0.3).unwrap();
        let t = synthesize_received_power(&p, &acq(10.0, 100), 9).unwrap();
        let u = add_interference(&t, 0.0, 4).unwrap();
        assert_eq!(t.samples, u.samples);
        assert_eq!(u.noise_variance, Some(0.09));
    }

    #[test]
    fn interference_variance() {
        let n = 100_000;
        let t = RssTrace::new(vec![-54.0; n], 10.0, TraceKind::ContinuousPower).unwrap();
        let u = add_interference(&t, 0.5, 11).unwrap();
        let mean = u.samples.iter().sum::<f64>() / n as f64;
        let var = u.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // SE of the sample variance is 0.25·sqrt(2/n) ≈ 0.0011
        assert!((var - 0.25).abs() < 0.005, "var={var}");
        assert_eq!(u.noise_variance, Some(0.25));
    }

    #[test]
    fn staircase_schedule_matches_segment_variances() {
        let seg = 1510;
        let levels = [0.0, 0.1, 0.3, 0.6, 1.2];
        let n = seg * levels.len();
        let t = RssTrace::new(vec![0.0; n], 10.0, TraceKind::ContinuousPower).unwrap();
        let schedule: Vec<_> = levels.iter().map(|&s| (seg, s)).collect();
        let u = add_interference_schedule(&t, &schedule, 5).unwrap();
        for (i, &s) in levels.iter().enumerate() {
            let part = &u.samples[i * seg..(i + 1) * seg];
            let mean = part.iter().sum::<f64>() / seg as f64;
            let var = part.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seg - 1) as f64;
            if s == 0.0 {
                assert_eq!(var, 0.0);
            } else {
                assert!((var / (s * s) - 1.0).abs() < 0.10, "segment {i}: var={var}");
            }
        }
        assert_eq!(u.noise_variance, None);
    }

    #[test]
    fn schedule_length_must_match() {
        let t = RssTrace::new(vec![0.0; 10], 10.0, TraceKind::ContinuousPower).unwrap();
        assert!(add_interference_schedule(&t, &[(5, 0.1)], 1).is_err());
        assert!(add_interference(&t, f64::NAN, 1).is_err());
        assert!(add_interference(&t, -0.1, 1).is_err());
    }

    #[test]
    fn uniform_quantization_error_std() {
        use rand::Rng;
        let mut rng = rng::stream(21, &[]);
        let q = QuantizerSpec::uniform(1.0, 0.0).unwrap();
        let n = 1_000_000;
        let sse: f64 = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-50.0..50.0);
                (q.apply(x) - x).powi(2)
            })
            .sum();
        let std = (sse / n as f64).sqrt();
        let want = 1.0 / 12f64.sqrt();
        assert!((std / want - 1.0).abs() < 0.05, "std={std}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn phase_lands_in_unit_turn(phase in -1e6f64..1e6) {
            let p = normalize_phase(phase);
            prop_assert!((0.0..TAU).contains(&p));
            prop_assert!(((p - phase) / TAU - ((p - phase) / TAU).round()).abs() < 1e-9);
        }

        #[test]
        fn quantizers_respect_their_alphabets(
            xs in proptest::collection::vec(-80.0f64..-20.0, 2..64),
            zeta in -60.0f64..-40.0,
            step in 0.1f64..8.0,
        ) {
            let t = RssTrace::new(xs.clone(), 10.0, TraceKind::ContinuousPower).unwrap();
            let one = quantize(&t, &QuantizerSpec::one_bit(zeta)).unwrap();
            prop_assert!(one.samples.iter().all(|&v| v == 1.0 || v == -1.0));
            let uni = quantize(&t, &QuantizerSpec::uniform(step, zeta).unwrap()).unwrap();
            for (x, y) in xs.iter().zip(&uni.samples) {
                prop_assert!((x - y).abs() <= 0.5 * step * (1.0 + 1e-12));
            }
            prop_assert_eq!(uni.len(), t.len());
        }

        #[test]
        fn duration_is_n_times_period(fs in 0.5f64..100.0, n in 2usize..5000) {
            let a = AcquisitionSpec::new(fs, n).unwrap();
            prop_assert!((a.duration() - n as f64 * a.sample_period()).abs() <= 1e-12 * a.duration());
        }
    }
}
