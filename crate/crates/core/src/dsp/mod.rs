//! Attacker-side estimation: DC removal, lowpass, periodogram peak search.

mod butterworth;
mod periodogram;

pub use butterworth::{Biquad, ButterworthLowpass};
pub use periodogram::{periodogram, PeriodogramPlan, Psd, RateSearchSpec};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::signal::{hz_to_bpm, RssTrace, TraceKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    /// Length of the non-overlapping DC-removal windows (s).
    pub window_seconds: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 4,
            cutoff_hz: 0.5,
            window_seconds: 30.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        ensure_finite("window_seconds", self.window_seconds)?;
        if self.window_seconds <= 0.0 {
            return Err(Error::invalid("window_seconds", "must be > 0"));
        }
        ButterworthLowpass::new(self.order, self.cutoff_hz, sample_rate).map(|_| ())
    }

    fn window_len(&self, sample_rate: f64) -> usize {
        ((self.window_seconds * sample_rate).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub f_hat: f64,
    pub rate_bpm: f64,
    /// `2·sqrt(P(f̂)/N)`; in symbol units for one-bit input.
    pub amplitude_hat: f64,
    pub psd_peak_value: f64,
    /// Post-filter trace was identically zero; `f_hat` is then `f_min`.
    pub degenerate: bool,
}

fn subtract_window_means(samples: &mut [f64], window: usize) {
    for chunk in samples.chunks_mut(window) {
        // shift by the first sample so a constant window gives exact zeros
        let x0 = chunk[0];
        let mean = x0 + chunk.iter().map(|v| v - x0).sum::<f64>() / chunk.len() as f64;
        for v in chunk.iter_mut() {
            *v -= mean;
        }
    }
}

fn numeric_kind(kind: TraceKind) -> TraceKind {
    match kind {
        // filtered data is no longer on the ±1 alphabet
        TraceKind::OneBit => TraceKind::ContinuousPower,
        k => k,
    }
}

/// Subtract the mean of each non-overlapping `window_seconds` window. A final
/// partial window is treated on its own; a window longer than the trace
/// covers the whole trace.
pub fn remove_dc(trace: &RssTrace, spec: &FilterSpec) -> Result<RssTrace> {
    ensure_finite("window_seconds", spec.window_seconds)?;
    if spec.window_seconds <= 0.0 {
        return Err(Error::invalid("window_seconds", "must be > 0"));
    }
    let mut out = trace.clone();
    subtract_window_means(&mut out.samples, spec.window_len(trace.acquisition.sample_rate));
    out.kind = numeric_kind(trace.kind);
    Ok(out)
}

pub fn lowpass(trace: &RssTrace, spec: &FilterSpec) -> Result<RssTrace> {
    let filter = ButterworthLowpass::new(spec.order, spec.cutoff_hz, trace.acquisition.sample_rate)?;
    let mut out = trace.clone();
    out.samples = filter.filter(&trace.samples);
    out.kind = numeric_kind(trace.kind);
    Ok(out)
}

pub fn trace_periodogram(trace: &RssTrace, search: &RateSearchSpec) -> Result<Psd> {
    periodogram(&trace.samples, trace.acquisition.sample_rate, search)
}

/// The full estimation chain for a fixed trace length, with filter
/// coefficients and DTFT tables built once.
#[derive(Debug, Clone)]
pub struct RatePipeline {
    filter: ButterworthLowpass,
    window: usize,
    plan: PeriodogramPlan,
    search: RateSearchSpec,
}

impl RatePipeline {
    pub fn new(
        filt: &FilterSpec,
        search: &RateSearchSpec,
        sample_rate: f64,
        len: usize,
    ) -> Result<Self> {
        filt.validate(sample_rate)?;
        Ok(Self {
            filter: ButterworthLowpass::new(filt.order, filt.cutoff_hz, sample_rate)?,
            window: filt.window_len(sample_rate),
            plan: PeriodogramPlan::new(search, sample_rate, len)?,
            search: *search,
        })
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    pub fn run(&self, samples: &[f64]) -> EstimateResult {
        let mut x = samples.to_vec();
        subtract_window_means(&mut x, self.window);
        let y = self.filter.filter(&x);
        if y.iter().all(|&v| v == 0.0) {
            return EstimateResult {
                f_hat: self.search.f_min,
                rate_bpm: hz_to_bpm(self.search.f_min),
                amplitude_hat: 0.0,
                psd_peak_value: 0.0,
                degenerate: true,
            };
        }
        let psd = self.plan.evaluate(&y);
        let (i, peak) = psd.argmax();
        let f_hat = psd.freqs[i];
        EstimateResult {
            f_hat,
            rate_bpm: hz_to_bpm(f_hat),
            amplitude_hat: 2.0 * (peak / y.len() as f64).sqrt(),
            psd_peak_value: peak,
            degenerate: false,
        }
    }
}

/// remove_dc → lowpass → periodogram → argmax.
pub fn estimate_rate(
    trace: &RssTrace,
    filt: &FilterSpec,
    search: &RateSearchSpec,
) -> Result<EstimateResult> {
    let p = RatePipeline::new(filt, search, trace.acquisition.sample_rate, trace.len())?;
    Ok(p.run(&trace.samples))
}

/// Same pipeline as [`estimate_rate`]; the amplitude comes from the PSD peak.
/// Biased for quantized input, where it is not in dB.
pub fn estimate_amplitude(
    trace: &RssTrace,
    filt: &FilterSpec,
    search: &RateSearchSpec,
) -> Result<EstimateResult> {
    estimate_rate(trace, filt, search)
}

pub fn rmse_bpm(estimates: &[f64], truth_bpm: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Precondition("rmse of an empty sequence".into()));
    }
    let mse = estimates.iter().map(|e| (e - truth_bpm).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mse.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{
        quantize, synthesize_received_power, AcquisitionSpec, QuantizerSpec, SinusoidParams,
    };
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn breathing(a: f64, b: f64, hz: f64, phase: f64, sigma: f64, n: usize, seed: u64) -> RssTrace {
        let p = SinusoidParams::with_rate_hz(a, b, hz, phase, sigma).unwrap();
        synthesize_received_power(&p, &AcquisitionSpec::new(10.0, n).unwrap(), seed).unwrap()
    }

    fn window_means(x: &[f64], w: usize) -> Vec<f64> {
        x.chunks(w).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }

    #[test]
    fn remove_dc_constant() {
        let t = RssTrace::new(vec![-54.3; 700], 10.0, TraceKind::ContinuousPower).unwrap();
        let y = remove_dc(&t, &FilterSpec::default()).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn remove_dc_zero_mean_sinusoid_unchanged() {
        // 0.2 Hz: 6 full cycles per 30 s window
        let t = breathing(1.0, 0.0, 0.2, 0.4, 0.0, 900, 0);
        let y = remove_dc(&t, &FilterSpec::default()).unwrap();
        for (a, b) in t.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn remove_dc_offset() {
        let t = breathing(0.3, 5.0, 0.25, 1.0, 0.0, 1000, 0);
        let y = remove_dc(&t, &FilterSpec::default()).unwrap();
        for m in window_means(&y.samples, 300) {
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn remove_dc_long_window_covers_whole_trace() {
        let t = breathing(0.3, 5.0, 0.13, 1.0, 0.0, 100, 0);
        let spec = FilterSpec {
            window_seconds: 1000.0,
            ..FilterSpec::default()
        };
        let y = remove_dc(&t, &spec).unwrap();
        let m = y.samples.iter().sum::<f64>() / 100.0;
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn lowpass_trace_rejects_cutoff_above_nyquist() {
        let t = breathing(0.1, 0.0, 0.25, 0.0, 0.0, 100, 0);
        let spec = FilterSpec {
            cutoff_hz: 6.0,
            ..FilterSpec::default()
        };
        assert!(lowpass(&t, &spec).is_err());
        assert!(lowpass(&t, &FilterSpec::default()).is_ok());
    }

    #[test]
    fn clean_breathing_rate() {
        let t = breathing(0.1, 0.0, 0.25, 0.7, 0.0, 300, 0);
        let r = estimate_rate(&t, &FilterSpec::default(), &RateSearchSpec::default()).unwrap();
        assert!(!r.degenerate);
        assert!((r.rate_bpm - 15.0).abs() <= 0.5);
        assert_eq!(r.rate_bpm, 60.0 * r.f_hat);
    }

    #[test]
    fn one_bit_without_crossings_is_degenerate() {
        let t = breathing(0.1, 0.5, 0.25, 0.0, 0.0, 300, 0);
        let q = quantize(&t, &QuantizerSpec::one_bit(0.0)).unwrap();
        assert!(q.samples.iter().all(|&v| v == 1.0));
        let r = estimate_rate(&q, &FilterSpec::default(), &RateSearchSpec::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.f_hat, 0.1);
    }

    #[test]
    fn amplitude_of_clean_tone() {
        // The zero-state start-up transient of the causal filter eats about
        // 3.5% of a 30 s trace's peak power, so use a 120 s trace here.
        for phase in [0.0, 0.7, 1.5, 3.0] {
            let t = breathing(0.1, 0.0, 0.25, phase, 0.0, 1200, 0);
            let r = estimate_amplitude(&t, &FilterSpec::default(), &RateSearchSpec::default())
                .unwrap();
            assert!((r.amplitude_hat / 0.1 - 1.0).abs() < 0.02, "{}", r.amplitude_hat);
        }
        let t = breathing(0.1, 0.0, 0.25, 0.0, 0.0, 300, 0);
        let r = estimate_amplitude(&t, &FilterSpec::default(), &RateSearchSpec::default()).unwrap();
        assert!((r.amplitude_hat / 0.1 - 1.0).abs() < 0.05, "{}", r.amplitude_hat);
    }

    #[test]
    fn amplitude_of_zero_trace() {
        let t = RssTrace::new(vec![0.0; 300], 10.0, TraceKind::ContinuousPower).unwrap();
        let r = estimate_amplitude(&t, &FilterSpec::default(), &RateSearchSpec::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.amplitude_hat, 0.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse_bpm(&[15.0, 15.0, 15.0], 15.0).unwrap(), 0.0);
        assert_eq!(rmse_bpm(&[13.0, 17.0], 15.0).unwrap(), 2.0);
        assert!((rmse_bpm(&[15.0, 15.0, 21.0], 15.0).unwrap() - 12f64.sqrt()).abs() < 1e-12);
        assert!(rmse_bpm(&[], 15.0).is_err());
    }

    #[test]
    fn pipeline_matches_trace_functions() {
        let t = breathing(0.1, 0.3, 0.31, 1.1, 0.2, 300, 4);
        let f = FilterSpec::default();
        let s = RateSearchSpec::default();
        let y = lowpass(&remove_dc(&t, &f).unwrap(), &f).unwrap();
        let psd = trace_periodogram(&y, &s).unwrap();
        let (i, p) = psd.argmax();
        let r = estimate_rate(&t, &f, &s).unwrap();
        assert_eq!(r.f_hat, psd.freqs[i]);
        assert_eq!(r.psd_peak_value, p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn phase_rotation_keeps_peak(phase in 0.0..TAU, hz in 0.15f64..0.6) {
            let s = RateSearchSpec::default();
            let f = FilterSpec::default();
            let a = estimate_rate(&breathing(0.1, 0.0, hz, 0.0, 0.0, 600, 0), &f, &s).unwrap();
            let b = estimate_rate(&breathing(0.1, 0.0, hz, phase, 0.0, 600, 0), &f, &s).unwrap();
            // a 60 s trace has a main lobe of ±1/60 Hz; allow the peak to move within it
            prop_assert!((a.f_hat - b.f_hat).abs() <= 2.0 * s.grid_resolution + 1.0 / 60.0);
            prop_assert!((b.f_hat - hz).abs() <= 1.0 / 60.0);
        }
    }
}
