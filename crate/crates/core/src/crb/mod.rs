//! Cramér-Rao bounds for a sinusoid observed through a one-bit quantizer.
//!
//! With `u_k = (A·C_k + B)/σ` the per-sample pmf is
//! `f(q) = ½·erfc(-q·u_k/√2)` and every partial derivative is
//! `q·ϕ(u_k)/σ · g_k` where `ϕ` is the standard normal density and
//! `g_k = [C_k, 1, -A·k·Ts·S_k, -A·S_k]`. Summing over both symbols gives
//! `I = (2/(πσ²))·Σ_k w(u_k)·g_k·g_kᵀ` with
//! `w(u) = exp(-u²)/(1 - erf²(u/√2))`.

mod average;
mod fisher;

pub use average::{
    averaged_crb, find_optimal_noise, unquantized_crb_reference, AveragedScenario,
    AveragingGrid, AveragingSummary, BoundTarget, GridPointCrb, NoiseSearch, OffsetSet,
    OptimalNoise,
};
pub use fisher::{FisherMatrix, CONDITION_LIMIT, PARAMS};

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{AcquisitionSpec, SinusoidParams};
use crate::special::{erfc, inverse_erfcx_product};

/// `C_k = cos(ω·Ts·k + φ)` and `S_k = sin(ω·Ts·k + φ)` for `k = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBasis {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub sample_period: f64,
}

impl PhaseBasis {
    pub fn new(omega: f64, phase: f64, acq: &AcquisitionSpec) -> Self {
        let ts = acq.sample_period();
        let (sin, cos) = (0..acq.num_samples)
            .map(|k| (omega * ts * k as f64 + phase).sin_cos())
            .unzip();
        Self {
            cos,
            sin,
            sample_period: ts,
        }
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    /// `g_k = [C_k, 1, -A·k·Ts·S_k, -A·S_k]`.
    fn gradient(&self, k: usize, amplitude: f64) -> [f64; 4] {
        let s = self.sin[k];
        [
            self.cos[k],
            1.0,
            -amplitude * k as f64 * self.sample_period * s,
            -amplitude * s,
        ]
    }
}

fn check_sigma(params: &SinusoidParams) -> Result<()> {
    params.validate()?;
    if params.noise_sigma <= 0.0 {
        return Err(Error::invalid(
            "noise_sigma",
            "one-bit likelihood needs noise_sigma > 0",
        ));
    }
    Ok(())
}

fn check_symbol(q: f64) -> Result<()> {
    if q == 1.0 || q == -1.0 {
        Ok(())
    } else {
        Err(Error::invalid("q", format!("symbol must be -1 or +1, got {q}")))
    }
}

fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / TAU.sqrt()
}

fn phase_at(params: &SinusoidParams, acq: &AcquisitionSpec, k: usize) -> (f64, f64) {
    (params.omega * acq.sample_period() * k as f64 + params.phase).sin_cos()
}

/// `P(y[k] = q)` for `q ∈ {-1, +1}`.
pub fn sample_pmf(q: f64, k: usize, params: &SinusoidParams, acq: &AcquisitionSpec) -> Result<f64> {
    check_symbol(q)?;
    check_sigma(params)?;
    let (_, c) = phase_at(params, acq, k);
    let u = (params.amplitude * c + params.dc_offset) / params.noise_sigma;
    Ok(0.5 * erfc(-q * u * FRAC_1_SQRT_2))
}

/// Gradient of [`sample_pmf`] over `[A, B, ω, φ]`.
pub fn pmf_partials(
    q: f64,
    k: usize,
    params: &SinusoidParams,
    acq: &AcquisitionSpec,
) -> Result<[f64; 4]> {
    check_symbol(q)?;
    check_sigma(params)?;
    let (s, c) = phase_at(params, acq, k);
    let a = params.amplitude;
    let sigma = params.noise_sigma;
    let u = (a * c + params.dc_offset) / sigma;
    let common = q * normal_pdf(u) / sigma;
    let kts = k as f64 * acq.sample_period();
    Ok([
        common * c,
        common,
        -common * a * kts * s,
        -common * a * s,
    ])
}

/// Sum `term(k)` for `k in lo..hi` by pairwise halving, so the rounding
/// pattern is fixed by `N` alone.
fn pairwise_sum(lo: usize, hi: usize, term: &impl Fn(usize) -> [f64; 10]) -> [f64; 10] {
    const LEAF: usize = 16;
    if hi - lo <= LEAF {
        let mut acc = [0.0; 10];
        for k in lo..hi {
            let t = term(k);
            for (a, v) in acc.iter_mut().zip(t) {
                *a += v;
            }
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let mut l = pairwise_sum(lo, mid, term);
    let r = pairwise_sum(mid, hi, term);
    for (a, v) in l.iter_mut().zip(r) {
        *a += v;
    }
    l
}

fn outer_upper(w: f64, a: &[f64; 4], b: &[f64; 4]) -> [f64; 10] {
    let mut out = [0.0; 10];
    let mut idx = 0;
    for i in 0..4 {
        for j in i..4 {
            out[idx] = w * a[i] * b[j];
            idx += 1;
        }
    }
    out
}

/// FIM as the literal double sum `Σ_k Σ_q (1/f)·∂_i f·∂_j f`.
pub fn fim_generic(params: &SinusoidParams, acq: &AcquisitionSpec) -> Result<FisherMatrix> {
    check_sigma(params)?;
    let term = |k: usize| {
        let mut acc = [0.0; 10];
        for q in [-1.0, 1.0] {
            let f = sample_pmf(q, k, params, acq).expect("validated");
            if f == 0.0 {
                // the partials vanish faster than f; the limit is 0
                continue;
            }
            let d = pmf_partials(q, k, params, acq).expect("validated");
            for (a, v) in acc.iter_mut().zip(outer_upper(1.0 / f, &d, &d)) {
                *a += v;
            }
        }
        acc
    };
    Ok(FisherMatrix::from_upper(&pairwise_sum(0, acq.num_samples, &term)))
}

pub(crate) fn fim_from_basis(basis: &PhaseBasis, amplitude: f64, offset: f64, sigma: f64) -> FisherMatrix {
    let scale = 2.0 / (PI * sigma * sigma);
    let term = |k: usize| {
        let v = (amplitude * basis.cos[k] + offset) / sigma * FRAC_1_SQRT_2;
        let g = basis.gradient(k, amplitude);
        outer_upper(inverse_erfcx_product(v), &g, &g)
    };
    let mut u = pairwise_sum(0, basis.len(), &term);
    for v in u.iter_mut() {
        *v *= scale;
    }
    FisherMatrix::from_upper(&u)
}

/// Closed-form FIM `(2/(πσ²))·Σ_k w_k·g_k·g_kᵀ` with the weight evaluated as
/// `1/(erfcx(v)·erfcx(-v))`, `v = u/√2`.
pub fn fim_closed_form(params: &SinusoidParams, acq: &AcquisitionSpec) -> Result<FisherMatrix> {
    check_sigma(params)?;
    let basis = PhaseBasis::new(params.omega, params.phase, acq);
    Ok(fim_from_basis(
        &basis,
        params.amplitude,
        params.dc_offset,
        params.noise_sigma,
    ))
}

/// `w(u) = exp(-u²)/(1 - erf²(u/√2))` in overflow-free form.
pub fn fim_weight(u: f64) -> f64 {
    inverse_erfcx_product(u * FRAC_1_SQRT_2)
}

/// Bounds extracted from an inverted FIM, or averaged over nuisance values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    /// `{I⁻¹}₁₁` (dB²), `∞` when unbounded.
    pub crb_amplitude: f64,
    /// `{I⁻¹}₃₃` ((rad/s)²), `∞` when unbounded.
    pub crb_frequency: f64,
    pub std_amplitude_db: f64,
    pub std_rate_bpm: f64,
    pub bounded: bool,
    /// Equilibrated condition number; NaN for averaged reports.
    pub condition: f64,
    pub fim: Option<FisherMatrix>,
    pub averaging: Option<AveragingSummary>,
}

/// bpm std for a frequency variance in (rad/s)².
pub fn rate_std_bpm(crb_frequency: f64) -> f64 {
    60.0 / TAU * crb_frequency.sqrt()
}

impl CrbReport {
    pub(crate) fn from_variances(crb_amplitude: f64, crb_frequency: f64) -> Self {
        Self {
            crb_amplitude,
            crb_frequency,
            std_amplitude_db: crb_amplitude.sqrt(),
            std_rate_bpm: rate_std_bpm(crb_frequency),
            bounded: crb_amplitude.is_finite() && crb_frequency.is_finite(),
            condition: f64::NAN,
            fim: None,
            averaging: None,
        }
    }

    pub fn from_fim(fim: FisherMatrix) -> Self {
        let condition = fim.condition();
        let (a, w) = match fim.inverse() {
            // a diagonal entry of an inverse PD matrix is positive; rounding
            // can break that only when the matrix is unusable anyway
            Some(inv) if inv[0][0] > 0.0 && inv[2][2] > 0.0 => (inv[0][0], inv[2][2]),
            _ => (f64::INFINITY, f64::INFINITY),
        };
        Self {
            condition,
            fim: Some(fim),
            ..Self::from_variances(a, w)
        }
    }

    pub fn averaged(&self) -> bool {
        self.averaging.is_some()
    }
}

/// Unaveraged bound at a single `(φ, B)`. Singular or ill-conditioned
/// information yields an unbounded report, not an error.
pub fn crb_at(params: &SinusoidParams, acq: &AcquisitionSpec) -> Result<CrbReport> {
    Ok(CrbReport::from_fim(fim_closed_form(params, acq)?))
}
