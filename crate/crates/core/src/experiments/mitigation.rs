use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::crb::{
    averaged_crb, find_optimal_noise, AveragedScenario, AveragingGrid, BoundTarget, NoiseSearch,
    OffsetSet,
};
use crate::error::{ensure_finite, Error, Result};
use crate::rng;
use crate::signal::QuantizerSpec;

/// Transceiver-side restriction on what RSS an eavesdropper can obtain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MitigationPolicy {
    /// A single coarse operating point.
    LessInfo { sample_rate: f64, step: f64 },
    /// Several `[fs, Δ]` points are offered, never fine rate and fine step
    /// together; the attacker picks the best one.
    NeverBoth { points: Vec<[f64; 2]> },
    /// RSS is reported at `low_rate` except while the link is active.
    AdaptiveRate {
        low_rate: f64,
        high_rate: f64,
        step: f64,
    },
    /// Two threshold grids shifted by `shift_fraction·Δ`; the one leaving the
    /// mean power furthest from a threshold is re-selected every
    /// `reselect_seconds`.
    AdaptiveQuantization {
        sample_rate: f64,
        step: f64,
        shift_fraction: f64,
        reselect_seconds: f64,
        selections: usize,
    },
}

impl MitigationPolicy {
    pub fn kind(&self) -> &'static str {
        match self {
            MitigationPolicy::LessInfo { .. } => "less-info",
            MitigationPolicy::NeverBoth { .. } => "never-both",
            MitigationPolicy::AdaptiveRate { .. } => "adaptive-rate",
            MitigationPolicy::AdaptiveQuantization { .. } => "adaptive-quantization",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            ensure_finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(name, "must be > 0"));
            }
            Ok(())
        };
        match self {
            MitigationPolicy::LessInfo { sample_rate, step } => {
                positive("sample_rate", *sample_rate)?;
                positive("step", *step)
            }
            MitigationPolicy::NeverBoth { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("points", "never-both needs at least one point"));
                }
                for p in points {
                    positive("sample_rate", p[0])?;
                    positive("step", p[1])?;
                }
                Ok(())
            }
            MitigationPolicy::AdaptiveRate {
                low_rate,
                high_rate,
                step,
            } => {
                positive("low_rate", *low_rate)?;
                positive("high_rate", *high_rate)?;
                positive("step", *step)?;
                if low_rate >= high_rate {
                    return Err(Error::invalid("low_rate", "must be below high_rate"));
                }
                Ok(())
            }
            MitigationPolicy::AdaptiveQuantization {
                sample_rate,
                step,
                shift_fraction,
                reselect_seconds,
                selections,
            } => {
                positive("sample_rate", *sample_rate)?;
                positive("step", *step)?;
                positive("reselect_seconds", *reselect_seconds)?;
                if !(*shift_fraction > 0.0 && *shift_fraction < 1.0) {
                    return Err(Error::invalid("shift_fraction", "must lie in (0, 1)"));
                }
                if *selections == 0 {
                    return Err(Error::invalid("selections", "must be >= 1"));
                }
                Ok(())
            }
        }
    }
}

/// Attacker's best bounds at one `(fs, Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub sample_rate: f64,
    pub step: f64,
    pub sigma_opt_rate: f64,
    pub std_rate_bpm: f64,
    pub sigma_opt_amplitude: f64,
    pub std_amplitude_db: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReselectionStats {
    pub selections: usize,
    /// Smallest `|B|` seen after re-selection.
    pub min_offset: f64,
    pub mean_offset: f64,
    /// `min(s, 1-s)·Δ/2` for grids shifted by `s·Δ`.
    pub guaranteed_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub policy: MitigationPolicy,
    pub points: Vec<OperatingPoint>,
    /// Index into `points` of the attacker-best (lowest frequency std).
    pub best_point: usize,
    pub attacker_min_std_bpm: f64,
    pub attacker_min_std_db: f64,
    pub reselection: Option<ReselectionStats>,
    /// Adaptive quantization only: full-offset-range std at the static σ_opt.
    pub static_std_bpm: Option<f64>,
    /// Adaptive quantization only: restricted-offset std at the same σ.
    pub restricted_std_bpm: Option<f64>,
    pub notes: Vec<String>,
}

fn operating_point(base: &Scenario, fs: f64, step: f64, grid: &AveragingGrid) -> Result<OperatingPoint> {
    let sc = base.with_sampling(fs, step);
    sc.validate()?;
    let acq = sc.acquisition()?;
    let run = |target| {
        find_optimal_noise(&NoiseSearch::new(sc.amplitude, sc.omega(), step, target), &acq, grid)
    };
    let f = run(BoundTarget::Frequency)?;
    let a = run(BoundTarget::Amplitude)?;
    Ok(OperatingPoint {
        sample_rate: fs,
        step,
        sigma_opt_rate: f.sigma_opt,
        std_rate_bpm: f.min_std,
        sigma_opt_amplitude: a.sigma_opt,
        std_amplitude_db: a.min_std,
        bounded: f.min_std.is_finite() && a.min_std.is_finite(),
    })
}

/// Grid choice and resulting `|B|` for mean power `mean` with two threshold
/// grids at `0` and `shift·Δ` (mod Δ).
pub fn best_offset(mean: f64, step: f64, shift_fraction: f64) -> (usize, f64) {
    let dist = |origin: f64| {
        let r = (mean - origin).rem_euclid(step);
        r.min(step - r)
    };
    let d0 = dist(0.0);
    let d1 = dist(shift_fraction * step);
    if d1 > d0 {
        (1, d1)
    } else {
        (0, d0)
    }
}

/// Re-selection against a drifting mean power: at every selection instant the
/// mean takes a fresh value spread over many steps.
pub fn simulate_reselection(step: f64, shift_fraction: f64, selections: usize, seed: u64) -> ReselectionStats {
    let mut r = rng::stream(seed, &[rng::TAG_NUISANCE]);
    let mut min_offset = f64::INFINITY;
    let mut sum = 0.0;
    for _ in 0..selections {
        let mean = r.random_range(-60.0 * step..-40.0 * step);
        let (_, d) = best_offset(mean, step, shift_fraction);
        min_offset = min_offset.min(d);
        sum += d;
    }
    ReselectionStats {
        selections,
        min_offset,
        mean_offset: sum / selections as f64,
        guaranteed_offset: shift_fraction.min(1.0 - shift_fraction) * step / 2.0,
    }
}

pub fn evaluate_mitigation(
    policy: &MitigationPolicy,
    scenario: &Scenario,
    grid: &AveragingGrid,
    seed: u64,
) -> Result<MitigationReport> {
    policy.validate()?;
    let mut notes = Vec::new();
    let mut reselection = None;
    let mut static_std_bpm = None;
    let mut restricted_std_bpm = None;

    let points = match policy {
        MitigationPolicy::LessInfo { sample_rate, step } => {
            vec![operating_point(scenario, *sample_rate, *step, grid)?]
        }
        MitigationPolicy::NeverBoth { points } => points
            .iter()
            .map(|p| operating_point(scenario, p[0], p[1], grid))
            .collect::<Result<_>>()?,
        MitigationPolicy::AdaptiveRate {
            low_rate,
            high_rate,
            step,
        } => {
            let p = operating_point(scenario, *low_rate, *step, grid)?;
            if 2.0 * scenario.rate_hz >= *low_rate {
                notes.push(format!(
                    "breathing at {} Hz is aliased at {} Hz reporting",
                    scenario.rate_hz, low_rate
                ));
            }
            notes.push(format!(
                "RSS reported at {high_rate} Hz only while the link carries traffic"
            ));
            vec![p]
        }
        MitigationPolicy::AdaptiveQuantization {
            sample_rate,
            step,
            shift_fraction,
            reselect_seconds,
            selections,
        } => {
            let stats = simulate_reselection(*step, *shift_fraction, *selections, seed);
            if stats.min_offset < stats.guaranteed_offset * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "re-selection left |B| = {} below the guaranteed {}",
                    stats.min_offset, stats.guaranteed_offset
                )));
            }
            let restricted = AveragingGrid {
                offset_set: OffsetSet::AtLeast {
                    min_fraction: stats.guaranteed_offset / step,
                },
                ..*grid
            };
            let full = operating_point(scenario, *sample_rate, *step, grid)?;
            let sc = scenario.with_sampling(*sample_rate, *step);
            let acq = sc.acquisition()?;
            let at_static = averaged_crb(
                &AveragedScenario {
                    amplitude: sc.amplitude,
                    omega: sc.omega(),
                    noise_sigma: full.sigma_opt_rate,
                },
                &QuantizerSpec::uniform(*step, 0.0)?,
                &acq,
                &restricted,
            )?;
            static_std_bpm = Some(full.std_rate_bpm);
            restricted_std_bpm = Some(at_static.std_rate_bpm);
            reselection = Some(stats);
            notes.push(format!(
                "threshold grid re-selected every {reselect_seconds} s; attacker re-optimizes σ for |B| >= {}",
                stats.guaranteed_offset
            ));
            vec![operating_point(scenario, *sample_rate, *step, &restricted)?]
        }
    };

    let best_point = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.std_rate_bpm.total_cmp(&b.1.std_rate_bpm))
        .map(|(i, _)| i)
        .expect("at least one point");
    let attacker_min_std_db = points
        .iter()
        .map(|p| p.std_amplitude_db)
        .fold(f64::INFINITY, f64::min);
    Ok(MitigationReport {
        policy: policy.clone(),
        best_point,
        attacker_min_std_bpm: points[best_point].std_rate_bpm,
        attacker_min_std_db,
        points,
        reselection,
        static_std_bpm,
        restricted_std_bpm,
        notes,
    })
}
