//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid input.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::crb::{averaged_crb, crb_at, find_optimal_noise, AveragedScenario, BoundTarget, NoiseSearch};
use crate::dsp::estimate_rate;
use crate::error::{Error, Result};
use crate::experiments::{
    contour_grid, evaluate_mitigation, hi_staircase_sim, monte_carlo_bound_check, run_sweep, McSpec,
    SweepAxis,
};
use crate::io::{
    bound_check_table, contour_field_table, contour_lines_table, crb_table, estimate_table,
    export_trace, import_trace, mitigation_table, staircase_table, sweep_table, CsvTable, Provenance,
    RunConfig,
};
use crate::selftest::run_selftest;
use crate::signal::{quantize, synthesize_received_power};

pub const OUTPUT_DIR_ENV: &str = "RSSBOUND_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "rssbound", version, about = "Breathing-rate bounds and estimators for quantized RSS")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [env: RSSBOUND_OUTPUT_DIR, default: .]
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Noise,
    Step,
    Rate,
    Amplitude,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Noise => SweepAxis::NoiseSigma,
            AxisArg::Step => SweepAxis::StepDelta,
            AxisArg::Rate => SweepAxis::SampleRate,
            AxisArg::Amplitude => SweepAxis::Amplitude,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one RSS trace from the scenario and quantizer sections.
    Simulate {
        /// Skip quantization.
        #[arg(long)]
        continuous: bool,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Estimate breathing rate and amplitude from a trace file.
    Estimate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "estimate.csv")]
        out: PathBuf,
    },
    /// Averaged bound at the configured noise level.
    Crb {
        /// Search σ for the smallest rate and amplitude bounds instead.
        #[arg(long)]
        optimize: bool,
        /// Bound at the exact scenario offset and phase, without averaging.
        #[arg(long, conflicts_with = "optimize")]
        pointwise: bool,
        /// Also run the Monte Carlo check from the [montecarlo] section.
        #[arg(long)]
        check: bool,
    },
    /// Bound and optional Monte Carlo RMSE along one axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
    },
    /// Min-over-σ bounds on the sampling-rate × step grid.
    Contour,
    /// Rate RMSE while interference steps up the noise.
    Staircase,
    /// Evaluate the configured mitigation policy.
    Mitigate,
    /// Check analytic derivatives and the closed-form information.
    Selftest,
}

struct Ctx {
    cfg: RunConfig,
    prov: Provenance,
    out_dir: PathBuf,
}

impl Ctx {
    fn write(&self, file: &str, table: &CsvTable) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let path = self.out_dir.join(file);
        table.write(&path, &self.prov)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                3
            } else {
                1
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out_dir = cli
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        prov: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
        cfg,
        out_dir,
    };
    let cfg = &ctx.cfg;

    match cli.command {
        Command::Simulate { continuous, out } => {
            let raw = synthesize_received_power(&cfg.params, &cfg.acquisition, cfg.seed)?;
            let trace = if continuous { raw } else { quantize(&raw, &cfg.quantizer)? };
            std::fs::create_dir_all(&ctx.out_dir).map_err(|e| Error::io(&ctx.out_dir, e))?;
            let path = ctx.resolve(&out);
            export_trace(&trace, &path)?;
            println!("wrote {} ({} samples, {})", path.display(), trace.len(), trace.kind.name());
        }
        Command::Estimate { trace, out } => {
            let t = import_trace(&trace)?;
            let r = estimate_rate(&t, &cfg.filter, &cfg.search)?;
            println!(
                "rate {:.4} Hz ({:.3} bpm), amplitude {:.4}{}",
                r.f_hat,
                r.rate_bpm,
                r.amplitude_hat,
                if r.degenerate { " [degenerate trace]" } else { "" }
            );
            ctx.write(&out.to_string_lossy(), &estimate_table(&r))?;
        }
        Command::Crb {
            optimize,
            pointwise,
            check,
        } => {
            let sc = cfg.scenario();
            if optimize {
                let mut t = CsvTable::new(
                    "optimal noise",
                    &[("target", ""), ("sigma_opt", "dB"), ("min_std", ""), ("at_boundary", "")],
                );
                for (name, target) in [("rate_bpm", BoundTarget::Frequency), ("amplitude_db", BoundTarget::Amplitude)] {
                    let o = find_optimal_noise(
                        &NoiseSearch::new(sc.amplitude, sc.omega(), sc.step, target),
                        &cfg.acquisition,
                        &cfg.averaging,
                    )?;
                    println!("{name}: sigma_opt {:.4} dB, min std {:.6}", o.sigma_opt, o.min_std);
                    t.push(vec![name.into(), o.sigma_opt.into(), o.min_std.into(), o.at_boundary.into()]);
                }
                ctx.write("crb_optimal.csv", &t)?;
            } else {
                let sigma = cfg.params.noise_sigma;
                let r = if pointwise {
                    crb_at(&cfg.params, &cfg.acquisition)?
                } else {
                    averaged_crb(
                        &AveragedScenario {
                            amplitude: sc.amplitude,
                            omega: sc.omega(),
                            noise_sigma: sigma,
                        },
                        &cfg.quantizer,
                        &cfg.acquisition,
                        &cfg.averaging,
                    )?
                };
                println!(
                    "std rate {:.6} bpm, std amplitude {:.6} dB{}",
                    r.std_rate_bpm,
                    r.std_amplitude_db,
                    if r.bounded { "" } else { " [unbounded]" }
                );
                ctx.write("crb.csv", &crb_table(&r, sigma))?;
            }
            if check {
                let m = &cfg.montecarlo;
                let spec = McSpec {
                    target: m.target,
                    seed: cfg.seed,
                    filter: cfg.filter,
                    search: cfg.search,
                    grid: cfg.averaging,
                    ..McSpec::new(sc, m.noise_sigma, m.quantization, m.trials)
                };
                let c = monte_carlo_bound_check(&spec)?;
                println!(
                    "bound check: variance/bound {:.4} over {} trials: {}",
                    c.ratio,
                    c.trials,
                    if c.inconclusive { "inconclusive" } else if c.pass { "pass" } else { "fail" }
                );
                ctx.write("bound_check.csv", &bound_check_table(&c))?;
            }
        }
        Command::Sweep { axis } => {
            let axis: SweepAxis = axis.into();
            let r = run_sweep(&cfg.sweep_spec(axis))?;
            if let Some(best) = r.min_rate_row() {
                println!(
                    "{} rows; smallest rate std {:.4} bpm at {} = {}",
                    r.rows.len(),
                    best.std_rate_bpm,
                    axis.name(),
                    best.axis_value
                );
            }
            ctx.write(&format!("sweep_{}.csv", axis.name()), &sweep_table(&r))?;
        }
        Command::Contour => {
            let f = contour_grid(&cfg.contour)?;
            ctx.write("contour_field.csv", &contour_field_table(&f))?;
            ctx.write("contour_lines.csv", &contour_lines_table(&f))?;
        }
        Command::Staircase => {
            let r = hi_staircase_sim(&cfg.staircase)?;
            for s in &r.segments {
                println!("sigma {:.3} dB: rmse {:.3} bpm over {} windows", s.effective_sigma, s.rmse_bpm, s.windows);
            }
            ctx.write("staircase.csv", &staircase_table(&r))?;
        }
        Command::Mitigate => {
            let r = evaluate_mitigation(&cfg.mitigation, &cfg.scenario(), &cfg.averaging, cfg.seed)?;
            println!(
                "{}: attacker best {:.4} bpm, {:.5} dB",
                r.policy.kind(),
                r.attacker_min_std_bpm,
                r.attacker_min_std_db
            );
            for n in &r.notes {
                println!("note: {n}");
            }
            ctx.write("mitigation.csv", &mitigation_table(&r))?;
        }
        Command::Selftest => {
            let mut ok = true;
            for o in run_selftest(cfg.seed) {
                println!(
                    "{} {} ({} cases, worst {:.3e}, tolerance {:.0e})",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.name,
                    o.cases,
                    o.worst,
                    o.tolerance
                );
                ok &= o.pass;
            }
            return Ok(if ok { 0 } else { 1 });
        }
    }
    Ok(0)
}
