//! Numerical self-checks of the Fisher information code: analytic pmf
//! partials against central differences, and the generic double sum against
//! the closed form.

use std::f64::consts::TAU;

use rand::Rng;

use crate::crb::{fim_closed_form, fim_generic, pmf_partials, sample_pmf, FisherMatrix};
use crate::rng;
use crate::signal::{AcquisitionSpec, SinusoidParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Largest error seen, in the metric the check uses.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn central_difference(q: f64, k: usize, p: &SinusoidParams, a: &AcquisitionSpec) -> [f64; 4] {
    let h = 1e-6;
    let f = |i: usize, d: f64| {
        let mut t = *p;
        match i {
            0 => t.amplitude += d,
            1 => t.dc_offset += d,
            2 => t.omega += d,
            _ => t.phase += d,
        }
        sample_pmf(q, k, &t, a).expect("valid draw")
    };
    std::array::from_fn(|i| (f(i, h) - f(i, -h)) / (2.0 * h))
}

/// Partials at `draws` random points with `|u| <= 4`. Entries whose
/// chain-rule factor is below 1e-3 are judged by absolute error.
pub fn check_partials(seed: u64, draws: usize) -> CheckOutcome {
    let tolerance = 1e-5;
    let mut r = rng::stream(seed, &[]);
    let acq = AcquisitionSpec::new(10.0, 60).expect("fixed acquisition");
    let ts = acq.sample_period();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut tested = 0;
    while tested < draws {
        let sigma = r.random_range(0.2..1.5);
        let a = r.random_range(0.05..1.0);
        let b = r.random_range(-1.0..1.0);
        let p = SinusoidParams::with_rate_hz(a, b, r.random_range(0.1..0.6), r.random_range(0.0..TAU), sigma)
            .expect("valid draw");
        let k = r.random_range(0..acq.num_samples);
        let (s, c) = (p.omega * ts * k as f64 + p.phase).sin_cos();
        if ((a * c + b) / sigma).abs() > 4.0 {
            continue;
        }
        let q = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let an = pmf_partials(q, k, &p, &acq).expect("valid draw");
        let fd = central_difference(q, k, &p, &acq);
        for i in 0..4 {
            let factor = match i {
                0 => c.abs(),
                2 => a * k as f64 * ts * s.abs(),
                3 => a * s.abs(),
                _ => 1.0,
            };
            if factor < 1e-3 {
                pass &= (an[i] - fd[i]).abs() < 1e-8;
            } else {
                let e = rel(an[i], fd[i]);
                worst = worst.max(e);
                pass &= e < tolerance;
            }
        }
        tested += 1;
    }
    CheckOutcome {
        name: "pmf partials vs central differences",
        cases: draws,
        worst,
        tolerance,
        pass,
    }
}

/// Entrywise error scaled by `sqrt(I_ii·I_jj)`.
pub fn fim_entry_error(g: &FisherMatrix, c: &FisherMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let scale = (g.get(i, i) * g.get(j, j)).sqrt();
            worst = worst.max((g.get(i, j) - c.get(i, j)).abs() / scale);
        }
    }
    worst
}

pub fn check_cross_form(seed: u64, draws: usize) -> CheckOutcome {
    let tolerance = 1e-10;
    let mut r = rng::stream(seed, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let p = SinusoidParams::with_rate_hz(
            r.random_range(0.02..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(0.1..0.6),
            r.random_range(0.0..TAU),
            r.random_range(0.2..1.5),
        )
        .expect("valid draw");
        let acq = AcquisitionSpec::new(10.0, r.random_range(20..120)).expect("valid draw");
        let g = fim_generic(&p, &acq).expect("valid draw");
        let c = fim_closed_form(&p, &acq).expect("valid draw");
        worst = worst.max(fim_entry_error(&g, &c));
    }
    CheckOutcome {
        name: "generic vs closed-form information",
        cases: draws,
        worst,
        tolerance,
        pass: worst < tolerance,
    }
}

pub fn run_selftest(seed: u64) -> Vec<CheckOutcome> {
    vec![check_partials(seed, 1000), check_cross_form(seed, 500)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for o in run_selftest(3) {
            assert!(o.pass, "{o:?}");
        }
    }
}
