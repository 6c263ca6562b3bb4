use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fim_from_basis, CrbReport, PhaseBasis};
use crate::error::{ensure_finite, Error, Result};
use crate::signal::{AcquisitionSpec, QuantizerSpec};

/// Which DC offsets the average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OffsetSet {
    /// `B ∈ [-Δ/2, Δ/2]`.
    Full,
    /// `|B| ∈ [min_fraction·Δ, Δ/2]`, both signs.
    AtLeast { min_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingGrid {
    pub phases: usize,
    pub offsets: usize,
    pub offset_set: OffsetSet,
}

impl Default for AveragingGrid {
    fn default() -> Self {
        Self {
            phases: 16,
            offsets: 33,
            offset_set: OffsetSet::Full,
        }
    }
}

impl AveragingGrid {
    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 || self.offsets == 0 {
            return Err(Error::invalid("averaging", "grid needs at least one phase and one offset"));
        }
        if let OffsetSet::AtLeast { min_fraction } = self.offset_set {
            if !(min_fraction.is_finite() && (0.0..0.5).contains(&min_fraction)) {
                return Err(Error::invalid("min_fraction", "must lie in [0, 0.5)"));
            }
        }
        Ok(())
    }

    /// `2π·i/phases`, endpoint excluded.
    pub fn phase_values(&self) -> Vec<f64> {
        (0..self.phases).map(|i| TAU * i as f64 / self.phases as f64).collect()
    }

    /// Midpoint rule over the offset set for step `delta`.
    pub fn offset_values(&self, delta: f64) -> Vec<f64> {
        let n = self.offsets as f64;
        match self.offset_set {
            OffsetSet::Full => (0..self.offsets)
                .map(|j| -0.5 * delta + (j as f64 + 0.5) * delta / n)
                .collect(),
            OffsetSet::AtLeast { min_fraction } => {
                let lo = min_fraction * delta;
                let hi = 0.5 * delta;
                // midpoints of [-1, 1] folded onto ±[lo, hi]
                (0..self.offsets)
                    .map(|j| {
                        let s = -1.0 + (j as f64 + 0.5) * 2.0 / n;
                        let mag = lo + (hi - lo) * s.abs();
                        if s < 0.0 {
                            -mag
                        } else {
                            mag
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn doubled(&self) -> Self {
        Self {
            phases: 2 * self.phases,
            offsets: 2 * self.offsets,
            offset_set: self.offset_set,
        }
    }
}

/// Parameters held fixed while `φ` and `B` are averaged out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedScenario {
    pub amplitude: f64,
    pub omega: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPointCrb {
    pub phase: f64,
    pub offset: f64,
    pub crb_amplitude: f64,
    pub crb_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingSummary {
    pub grid: AveragingGrid,
    pub step: f64,
    pub unbounded_points: usize,
    pub median_crb_amplitude: f64,
    pub median_crb_frequency: f64,
    pub points: Vec<GridPointCrb>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check_scenario(s: &AveragedScenario) -> Result<()> {
    ensure_finite("amplitude", s.amplitude)?;
    ensure_finite("omega", s.omega)?;
    ensure_finite("noise_sigma", s.noise_sigma)?;
    if s.amplitude < 0.0 {
        return Err(Error::invalid("amplitude", "must be >= 0"));
    }
    if s.noise_sigma <= 0.0 {
        return Err(Error::invalid("noise_sigma", "one-bit likelihood needs noise_sigma > 0"));
    }
    Ok(())
}

/// Mean CRB over a phase × offset grid with `B` spread over one RSS step Δ
/// (`quant.step`). Any unbounded grid point makes the mean unbounded; the
/// median and per-point values are kept for diagnosis.
pub fn averaged_crb(
    scenario: &AveragedScenario,
    quant: &QuantizerSpec,
    acq: &AcquisitionSpec,
    grid: &AveragingGrid,
) -> Result<CrbReport> {
    check_scenario(scenario)?;
    grid.validate()?;
    if !(quant.step.is_finite() && quant.step > 0.0) {
        return Err(Error::invalid("step", "offset averaging needs the RSS step Δ > 0"));
    }
    let offsets = grid.offset_values(quant.step);
    let points: Vec<GridPointCrb> = grid
        .phase_values()
        .into_par_iter()
        .flat_map_iter(|phase| {
            let basis = PhaseBasis::new(scenario.omega, phase, acq);
            offsets
                .iter()
                .map(|&offset| {
                    let fim = fim_from_basis(&basis, scenario.amplitude, offset, scenario.noise_sigma);
                    let r = CrbReport::from_fim(fim);
                    GridPointCrb {
                        phase,
                        offset,
                        crb_amplitude: r.crb_amplitude,
                        crb_frequency: r.crb_frequency,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let n = points.len() as f64;
    let unbounded_points = points
        .iter()
        .filter(|p| !(p.crb_amplitude.is_finite() && p.crb_frequency.is_finite()))
        .count();
    let mean_a = points.iter().map(|p| p.crb_amplitude).sum::<f64>() / n;
    let mean_w = points.iter().map(|p| p.crb_frequency).sum::<f64>() / n;
    let summary = AveragingSummary {
        grid: *grid,
        step: quant.step,
        unbounded_points,
        median_crb_amplitude: median(points.iter().map(|p| p.crb_amplitude).collect()),
        median_crb_frequency: median(points.iter().map(|p| p.crb_frequency).collect()),
        points,
    };
    Ok(CrbReport {
        averaging: Some(summary),
        ..CrbReport::from_variances(mean_a, mean_w)
    })
}

/// Unquantized reference: `var(A) >= 2σ²/N` and the standard single-tone
/// bound `var(ω) >= 12σ²/(A²·Ts²·N(N²-1))`.
pub fn unquantized_crb_reference(
    amplitude: f64,
    noise_sigma: f64,
    acq: &AcquisitionSpec,
) -> Result<CrbReport> {
    ensure_finite("amplitude", amplitude)?;
    ensure_finite("noise_sigma", noise_sigma)?;
    if noise_sigma < 0.0 {
        return Err(Error::invalid("noise_sigma", "must be >= 0"));
    }
    let n = acq.num_samples as f64;
    let var = noise_sigma * noise_sigma;
    let crb_a = 2.0 * var / n;
    let ts = acq.sample_period();
    let crb_w = if var == 0.0 {
        0.0
    } else {
        12.0 * var / (amplitude * amplitude * ts * ts * n * (n * n - 1.0))
    };
    Ok(CrbReport::from_variances(crb_a, crb_w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundTarget {
    Amplitude,
    Frequency,
}

impl BoundTarget {
    /// Averaged std in dB (amplitude) or bpm (frequency).
    pub fn std_of(&self, r: &CrbReport) -> f64 {
        match self {
            BoundTarget::Amplitude => r.std_amplitude_db,
            BoundTarget::Frequency => r.std_rate_bpm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSearch {
    pub amplitude: f64,
    pub omega: f64,
    pub step: f64,
    pub target: BoundTarget,
    /// Bracket in σ; `None` means `[Δ/50, 2Δ]`.
    pub bracket: Option<(f64, f64)>,
    /// Relative tolerance in σ.
    pub tolerance: f64,
}

impl NoiseSearch {
    pub fn new(amplitude: f64, omega: f64, step: f64, target: BoundTarget) -> Self {
        Self {
            amplitude,
            omega,
            step,
            target,
            bracket: None,
            tolerance: 0.01,
        }
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket.unwrap_or((self.step / 50.0, 2.0 * self.step))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalNoise {
    pub sigma_opt: f64,
    pub min_std: f64,
    /// Minimum landed within tolerance of a bracket end.
    pub at_boundary: bool,
    pub evaluations: usize,
}

/// Golden-section search over `ln σ` for the σ minimizing the averaged std.
pub fn find_optimal_noise(
    search: &NoiseSearch,
    acq: &AcquisitionSpec,
    grid: &AveragingGrid,
) -> Result<OptimalNoise> {
    let (lo, hi) = search.bracket();
    ensure_finite("bracket", lo)?;
    ensure_finite("bracket", hi)?;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid("bracket", "need 0 < sigma_lo < sigma_hi"));
    }
    if !(search.tolerance > 0.0) {
        return Err(Error::invalid("tolerance", "must be > 0"));
    }
    let quant = QuantizerSpec::uniform(search.step, 0.0)?;
    let mut evaluations = 0;
    let mut eval = |ln_sigma: f64| -> Result<f64> {
        evaluations += 1;
        let s = AveragedScenario {
            amplitude: search.amplitude,
            omega: search.omega,
            noise_sigma: ln_sigma.exp(),
        };
        Ok(search.target.std_of(&averaged_crb(&s, &quant, acq, grid)?))
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let tol = search.tolerance.ln_1p();
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        // ties (including both unbounded) move toward larger σ, where the
        // bound is finite
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
    let at_boundary = x - lo.ln() <= 2.0 * tol || hi.ln() - x <= 2.0 * tol;
    Ok(OptimalNoise {
        sigma_opt: x.exp(),
        min_std: fx,
        at_boundary,
        evaluations,
    })
}
