use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::crb::{find_optimal_noise, AveragingGrid, BoundTarget, NoiseSearch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub sample_rates: Vec<f64>,
    pub steps: Vec<f64>,
    /// Amplitude, rate and duration; its `step` and `sample_rate` are replaced
    /// per cell.
    pub scenario: Scenario,
    pub grid: AveragingGrid,
    pub levels_bpm: Vec<f64>,
    pub levels_db: Vec<f64>,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            sample_rates: vec![1.0, 2.0, 4.0, 5.0, 10.0, 20.0, 50.0],
            steps: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            scenario: Scenario::default(),
            grid: AveragingGrid::default(),
            levels_bpm: vec![0.5, 1.0, 2.0],
            levels_db: vec![0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub quantity: String,
    pub level: f64,
    /// Each polyline is a list of `[fs (Hz), Δ (dB)]` points.
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Min-over-σ bounds on an `fs × Δ` grid; `[i][j]` indexes
/// `(sample_rates[i], steps[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourField {
    pub sample_rates: Vec<f64>,
    pub steps: Vec<f64>,
    pub rate_std_bpm: Vec<Vec<f64>>,
    pub amplitude_std_db: Vec<Vec<f64>>,
    pub sigma_opt_rate: Vec<Vec<f64>>,
    pub sigma_opt_amplitude: Vec<Vec<f64>>,
    pub contours: Vec<Contour>,
}

impl ContourField {
    /// Field index of an exact grid point.
    pub fn index_of(&self, fs: f64, step: f64) -> Option<(usize, usize)> {
        let i = self.sample_rates.iter().position(|&v| v == fs)?;
        let j = self.steps.iter().position(|&v| v == step)?;
        Some((i, j))
    }
}

fn strictly_increasing(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::invalid(name, "needs finite positive values"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

pub fn contour_grid(spec: &ContourSpec) -> Result<ContourField> {
    strictly_increasing("sample_rates", &spec.sample_rates)?;
    strictly_increasing("steps", &spec.steps)?;
    spec.grid.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.sample_rates.len())
        .flat_map(|i| (0..spec.steps.len()).map(move |j| (i, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let sc = spec.scenario.with_sampling(spec.sample_rates[i], spec.steps[j]);
            sc.validate()?;
            let acq = sc.acquisition()?;
            let run = |target| {
                let s = NoiseSearch::new(sc.amplitude, sc.omega(), sc.step, target);
                find_optimal_noise(&s, &acq, &spec.grid)
            };
            Ok((run(BoundTarget::Frequency)?, run(BoundTarget::Amplitude)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let (n, m) = (spec.sample_rates.len(), spec.steps.len());
    let mut rate = vec![vec![0.0; m]; n];
    let mut amp = vec![vec![0.0; m]; n];
    let mut s_rate = vec![vec![0.0; m]; n];
    let mut s_amp = vec![vec![0.0; m]; n];
    for (&(i, j), (f, a)) in cells.iter().zip(values) {
        rate[i][j] = f.min_std;
        s_rate[i][j] = f.sigma_opt;
        amp[i][j] = a.min_std;
        s_amp[i][j] = a.sigma_opt;
    }

    let mut contours = Vec::new();
    for &level in &spec.levels_bpm {
        contours.push(Contour {
            quantity: "rate_std_bpm".into(),
            level,
            polylines: extract_contours(&spec.sample_rates, &spec.steps, &rate, level),
        });
    }
    for &level in &spec.levels_db {
        contours.push(Contour {
            quantity: "amplitude_std_db".into(),
            level,
            polylines: extract_contours(&spec.sample_rates, &spec.steps, &amp, level),
        });
    }
    Ok(ContourField {
        sample_rates: spec.sample_rates.clone(),
        steps: spec.steps.clone(),
        rate_std_bpm: rate,
        amplitude_std_db: amp,
        sigma_opt_rate: s_rate,
        sigma_opt_amplitude: s_amp,
        contours,
    })
}

/// Grid edge: `(i, j, horizontal)`; horizontal edges join `(i, j)-(i+1, j)`,
/// vertical ones `(i, j)-(i, j+1)`.
type EdgeId = (usize, usize, bool);

fn crossing(x: &[f64], y: &[f64], z: &[Vec<f64>], e: EdgeId, level: f64) -> [f64; 2] {
    let (i, j, horizontal) = e;
    let (i2, j2) = if horizontal { (i + 1, j) } else { (i, j + 1) };
    let (za, zb) = (z[i][j], z[i2][j2]);
    let t = if za.is_finite() && zb.is_finite() && za != zb {
        ((level - za) / (zb - za)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    [x[i] + t * (x[i2] - x[i]), y[j] + t * (y[j2] - y[j])]
}

/// Marching squares on a rectilinear grid. Saddle cells are resolved with the
/// cell-center average; segments are stitched into polylines through their
/// shared grid edges.
pub fn extract_contours(x: &[f64], y: &[f64], z: &[Vec<f64>], level: f64) -> Vec<Vec<[f64; 2]>> {
    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for i in 0..x.len().saturating_sub(1) {
        for j in 0..y.len().saturating_sub(1) {
            let c = [z[i][j], z[i + 1][j], z[i + 1][j + 1], z[i][j + 1]];
            let above: Vec<bool> = c.iter().map(|&v| v >= level).collect();
            // edges in corner order: bottom, right, top, left
            let edges = [(i, j, true), (i + 1, j, false), (i, j + 1, true), (i, j, false)];
            let cut: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match cut.len() {
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    let center = c.iter().sum::<f64>() / 4.0;
                    if (center >= level) == above[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[0], edges[3]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut order: Vec<usize> = (0..segments.len()).collect();
    // open chains first so they are walked from an end
    order.sort_by_key(|&s| {
        let (a, b) = segments[s];
        (by_edge[&a].len() == 2 && by_edge[&b].len() == 2) as u8
    });

    let mut lines = Vec::new();
    for start in order {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let (mut chain, mut tail) = if by_edge[&a].len() == 1 { (vec![a, b], b) } else { (vec![b, a], a) };
        loop {
            let next = by_edge[&tail].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (p, q) = segments[s];
            tail = if p == tail { q } else { p };
            chain.push(tail);
        }
        lines.push(chain.into_iter().map(|e| crossing(x, y, z, e, level)).collect());
    }
    lines
}
