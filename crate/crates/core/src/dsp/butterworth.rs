//! Even-order Butterworth lowpass as cascaded biquads.
//!
//! Each analog pole pair of the order-`n` prototype has quality factor
//! `Q_k = 1 / (2·cos(π(2k+1)/(2n)))`. Sections are mapped to z with the
//! bilinear transform, cutoff pre-warped so `|H(fc)| = 1/√2` exactly.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn lowpass(k: f64, q: f64) -> Self {
        let k2 = k * k;
        let norm = 1.0 / (1.0 + k / q + k2);
        let b0 = k2 * norm;
        Self {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k2 - 1.0) * norm,
            a2: (1.0 - k / q + k2) * norm,
        }
    }

    /// `|H(e^{jθ})|²` at normalized angular frequency `theta` (rad/sample).
    fn power_response(&self, theta: f64) -> f64 {
        let (c1, s1) = (theta.cos(), theta.sin());
        let (c2, s2) = ((2.0 * theta).cos(), (2.0 * theta).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = -(self.b1 * s1 + self.b2 * s2);
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = -(self.a1 * s1 + self.a2 * s2);
        (nr * nr + ni * ni) / (dr * dr + di * di)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthLowpass {
    sections: Vec<Biquad>,
    sample_rate: f64,
}

impl ButterworthLowpass {
    pub fn new(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::invalid("order", format!("must be even and >= 2, got {order}")));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", "must be > 0"));
        }
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate) {
            return Err(Error::invalid(
                "cutoff_hz",
                format!("must lie in (0, {}) Hz, got {cutoff_hz}", 0.5 * sample_rate),
            ));
        }
        let k = (PI * cutoff_hz / sample_rate).tan();
        let sections = (0..order / 2)
            .map(|i| {
                let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
                Biquad::lowpass(k, 1.0 / (2.0 * theta.cos()))
            })
            .collect();
        Ok(Self {
            sections,
            sample_rate,
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Magnitude response in dB at `freq_hz`.
    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        let theta = 2.0 * PI * freq_hz / self.sample_rate;
        let p: f64 = self.sections.iter().map(|s| s.power_response(theta)).product();
        10.0 * p.log10()
    }

    /// Single forward pass from zero state (transposed direct form II).
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let xin = *x;
                let y = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * y + z2;
                z2 = s.b2 * xin - s.a2 * y;
                *x = y;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| (2.0 * PI * freq * k as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        for &(order, fc, fs) in &[(4, 0.5, 10.0), (2, 1.0, 50.0), (6, 0.3, 5.0)] {
            let f = ButterworthLowpass::new(order, fc, fs).unwrap();
            let db = f.magnitude_db(fc);
            assert!((db + 3.0103).abs() < 1e-3, "order {order}: {db} dB");
        }
    }

    #[test]
    fn rms_at_cutoff_is_halved_in_power() {
        let (fc, fs) = (0.5, 10.0);
        let f = ButterworthLowpass::new(4, fc, fs).unwrap();
        let x = tone(fc, fs, 4000);
        let y = f.filter(&x);
        let skip = (2.0 / fc * fs) as usize;
        let ratio = rms(&y[skip..]) / rms(&x[skip..]);
        assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.02, "ratio={ratio}");
    }

    #[test]
    fn stopband_attenuation_at_ten_times_cutoff() {
        let (fc, fs) = (0.5, 100.0);
        let f = ButterworthLowpass::new(4, fc, fs).unwrap();
        assert!(f.magnitude_db(10.0 * fc) <= -75.0);
        let x = tone(10.0 * fc, fs, 20_000);
        let y = f.filter(&x);
        // the start-up transient rings at the cutoff and needs ~10 s to fall below -80 dB
        let skip = 5_000;
        let att = 20.0 * (rms(&y[skip..]) / rms(&x[skip..])).log10();
        assert!(att <= -75.0, "attenuation {att} dB");
    }

    #[test]
    fn unity_dc_gain() {
        let f = ButterworthLowpass::new(4, 0.5, 10.0).unwrap();
        let y = f.filter(&vec![3.0; 2000]);
        assert!((y[1999] / 3.0 - 1.0).abs() < 1e-3);
        assert!(f.magnitude_db(0.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(ButterworthLowpass::new(3, 0.5, 10.0).is_err());
        assert!(ButterworthLowpass::new(0, 0.5, 10.0).is_err());
        assert!(ButterworthLowpass::new(4, 5.0, 10.0).is_err());
        assert!(ButterworthLowpass::new(4, 0.0, 10.0).is_err());
        assert!(ButterworthLowpass::new(4, 0.5, 0.0).is_err());
    }
}
