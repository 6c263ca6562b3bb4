use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Frequency band and grid for the PSD peak search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSearchSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub grid_resolution: f64,
}

impl Default for RateSearchSpec {
    /// 6 to 40 breaths per minute on a 0.001 Hz grid.
    fn default() -> Self {
        Self {
            f_min: 0.1,
            f_max: 0.67,
            grid_resolution: 0.001,
        }
    }
}

impl RateSearchSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        ensure_finite("f_min", self.f_min)?;
        ensure_finite("f_max", self.f_max)?;
        ensure_finite("grid_resolution", self.grid_resolution)?;
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(Error::invalid("f_min", "need 0 < f_min < f_max"));
        }
        if self.f_max >= 0.5 * sample_rate {
            return Err(Error::invalid(
                "f_max",
                format!("must be below Nyquist ({} Hz)", 0.5 * sample_rate),
            ));
        }
        if self.grid_resolution <= 0.0 {
            return Err(Error::invalid("grid_resolution", "must be > 0"));
        }
        Ok(())
    }

    /// `f_min + i·resolution` for every point not above `f_max`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.f_max - self.f_min) / self.grid_resolution + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| self.f_min + i as f64 * self.grid_resolution)
            .collect()
    }
}

/// Sampled periodogram `|Σ x[k]·e^{-j2πfk/fs}|² / N` over the search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    /// Index and value of the first global maximum.
    pub fn argmax(&self) -> (usize, f64) {
        self.power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            })
    }

    /// Indices of interior strict local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        (1..self.power.len().saturating_sub(1))
            .filter(|&i| self.power[i] > self.power[i - 1] && self.power[i] > self.power[i + 1])
            .collect()
    }
}

/// Precomputed DTFT kernels for one (sample rate, length, grid) triple, so
/// Monte Carlo loops evaluate many traces without recomputing sines.
#[derive(Debug, Clone)]
pub struct PeriodogramPlan {
    freqs: Vec<f64>,
    len: usize,
    // row-major [freq][k]
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl PeriodogramPlan {
    pub fn new(search: &RateSearchSpec, sample_rate: f64, len: usize) -> Result<Self> {
        search.validate(sample_rate)?;
        if len < 2 {
            return Err(Error::invalid("num_samples", "periodogram needs >= 2 samples"));
        }
        let freqs = search.grid();
        if freqs.is_empty() {
            return Err(Error::invalid("grid_resolution", "empty frequency grid"));
        }
        let mut cos = Vec::with_capacity(freqs.len() * len);
        let mut sin = Vec::with_capacity(freqs.len() * len);
        for &f in &freqs {
            let w = TAU * f / sample_rate;
            for k in 0..len {
                let (s, c) = (w * k as f64).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Ok(Self {
            freqs,
            len,
            cos,
            sin,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn evaluate(&self, x: &[f64]) -> Psd {
        assert_eq!(x.len(), self.len, "trace length does not match plan");
        let n = self.len as f64;
        let power = (0..self.freqs.len())
            .map(|i| {
                let row = i * self.len;
                let c = &self.cos[row..row + self.len];
                let s = &self.sin[row..row + self.len];
                let (mut re, mut im) = (0.0, 0.0);
                for k in 0..self.len {
                    re += x[k] * c[k];
                    im += x[k] * s[k];
                }
                (re * re + im * im) / n
            })
            .collect();
        Psd {
            freqs: self.freqs.clone(),
            power,
        }
    }
}

pub fn periodogram(samples: &[f64], sample_rate: f64, search: &RateSearchSpec) -> Result<Psd> {
    Ok(PeriodogramPlan::new(search, sample_rate, samples.len())?.evaluate(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dtft_power(x: &[f64], f: f64, fs: f64) -> f64 {
        // direct complex sum, independent of the plan tables
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let a = -TAU * f * k as f64 / fs;
            re += v * a.cos();
            im += v * a.sin();
        }
        (re * re + im * im) / x.len() as f64
    }

    #[test]
    fn grid_spacing() {
        let s = RateSearchSpec::default();
        let g = s.grid();
        assert_eq!(g.len(), 571);
        assert!((g[1] - g[0] - 0.001).abs() < 1e-12);
        assert!((g.last().unwrap() - 0.67).abs() < 1e-9);
    }

    #[test]
    fn single_tone_peak() {
        let fs = 10.0;
        let x: Vec<f64> = (0..300).map(|k| (TAU * 0.25 * k as f64 / fs).cos()).collect();
        let s = RateSearchSpec::default();
        let psd = periodogram(&x, fs, &s).unwrap();
        let (i, _) = psd.argmax();
        assert!((psd.freqs[i] - 0.25).abs() <= 1.5 * s.grid_resolution);
    }

    #[test]
    fn zero_trace_zero_psd() {
        let psd = periodogram(&[0.0; 64], 10.0, &RateSearchSpec::default()).unwrap();
        assert!(psd.power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn two_tones() {
        let fs = 10.0;
        let x: Vec<f64> = (0..300)
            .map(|k| {
                let t = k as f64 / fs;
                (TAU * 0.2 * t).cos() + 0.3 * (TAU * 0.4 * t).cos()
            })
            .collect();
        let s = RateSearchSpec::default();
        let psd = periodogram(&x, fs, &s).unwrap();
        let (i, p) = psd.argmax();
        assert!((psd.freqs[i] - 0.2).abs() <= 1.5 * s.grid_resolution);

        // the two largest local maxima sit on the tones; the weaker one is
        // pulled by a few mHz through the stronger tone's sidelobes
        let mut maxima = psd.local_maxima();
        maxima.sort_by(|&a, &b| psd.power[b].total_cmp(&psd.power[a]));
        assert_eq!(maxima[0], i);
        assert!((psd.freqs[maxima[1]] - 0.4).abs() < 0.01);
        assert!(psd.power[maxima[1]] < p);

        for f in [0.2, 0.4] {
            let j = ((f - s.f_min) / s.grid_resolution).round() as usize;
            let want = dtft_power(&x, psd.freqs[j], fs);
            assert!((psd.power[j] / want - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_search_specs() {
        let s = RateSearchSpec {
            f_min: 0.5,
            f_max: 0.2,
            grid_resolution: 0.01,
        };
        assert!(s.validate(10.0).is_err());
        let s = RateSearchSpec {
            f_max: 6.0,
            ..RateSearchSpec::default()
        };
        assert!(s.validate(10.0).is_err());
        let s = RateSearchSpec {
            grid_resolution: 0.0,
            ..RateSearchSpec::default()
        };
        assert!(s.validate(10.0).is_err());
    }
}
