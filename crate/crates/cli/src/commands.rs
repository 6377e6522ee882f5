//! The five subcommands.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use piezolab_core::analysis::{self, C64};
use piezolab_core::dynamics::{
    energy_budget_residual, simulate, smooth_modal_data, EnergySample, SimulationSeries, SimulationSettings,
};
use piezolab_core::io;
use piezolab_core::oracle::{convergence_study, dense_expm_propagate, Branch};
use piezolab_core::{build_matrices, energy_norm, DampingProfile, Error, Grid1D, ModalOperator, PhysicalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{to_json, CheckResult, OutputDir};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    /// A core routine failed during `phase`.
    Numerical { phase: String, error: Error },
    Io(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Faults that can be injected into `check` to prove that it detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Scale the damping matrix used for the dissipated power by 1.01.
    CorruptDamping,
}

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub out: OutputDir,
    pub checks: Vec<CheckResult>,
    pub timings: Vec<(String, f64)>,
}

impl Ctx<'_> {
    fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, Error>) -> Result<T, Failure> {
        let t = Instant::now();
        let r = f();
        self.timings.push((name.to_string(), t.elapsed().as_secs_f64()));
        r.map_err(|error| Failure::Numerical {
            phase: name.to_string(),
            error,
        })
    }

    fn setup(&self) -> Result<(PhysicalParams, DampingProfile, Grid1D), Failure> {
        let c = self.config;
        let cfg = |e: crate::config::ConfigError| Failure::Config(e.0);
        Ok((
            c.physical_params().map_err(cfg)?,
            c.damping_profile().map_err(cfg)?,
            c.grid().map_err(cfg)?,
        ))
    }
}

fn operators(params: PhysicalParams, profile: &DampingProfile, grid: Grid1D, count: usize) -> Result<Vec<ModalOperator>, Error> {
    let mats = Arc::new(build_matrices(grid, profile));
    (0..count)
        .map(|j| ModalOperator::from_matrices(params, Arc::clone(&mats), j))
        .collect()
}

fn energy_csv(samples: &[EnergySample]) -> Vec<u8> {
    let mut buf = Vec::new();
    io::write_energy_csv(&mut buf, samples).expect("writing to memory");
    buf
}

#[derive(Serialize)]
struct SeriesSummary<'a> {
    meta: &'a piezolab_core::dynamics::SeriesMeta,
    samples: usize,
    initial_energy: f64,
    final_energy: f64,
    monotone: bool,
    budget_residual: f64,
}

/// Runs the configured simulation and records the energy checks.
fn run_series(ctx: &mut Ctx) -> Result<SimulationSeries, Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let c = ctx.config;
    let ops = ctx.phase("assemble", || operators(params, &profile, grid, c.modes.count))?;
    let init = ctx.phase("initial_data", || smooth_modal_data(&ops, c.modes.smoothness))?;
    let settings = SimulationSettings::new(c.time.t_final, c.time.dt, c.time.sample_every);
    let series = ctx.phase("time_stepping", || simulate(&ops, &init, settings))?;

    let e0 = series.initial_energy();
    let residual = energy_budget_residual(&series);
    ctx.checks.push(CheckResult::new(
        "energy_budget",
        residual <= 1e-9 * e0,
        format!("max |dE + dt P_mid| = {residual:.3e}, tolerance 1e-9 E(0) = {:.3e}", 1e-9 * e0),
    ));
    if profile.is_zero() {
        let drift = (series.final_energy() - e0).abs() / e0;
        ctx.checks.push(CheckResult::new(
            "conservation",
            drift <= 1e-9,
            format!("|E(T) - E(0)| / E(0) = {drift:.3e}, tolerance 1e-9"),
        ));
    } else {
        ctx.checks.push(CheckResult::new(
            "energy_monotone",
            series.is_monotone(),
            format!("E(0) = {e0:.6e}, E(T) = {:.6e}", series.final_energy()),
        ));
    }
    Ok(series)
}

fn series_summary(series: &SimulationSeries) -> SeriesSummary<'_> {
    SeriesSummary {
        meta: &series.meta,
        samples: series.samples.len(),
        initial_energy: series.initial_energy(),
        final_energy: series.final_energy(),
        monotone: series.is_monotone(),
        budget_residual: energy_budget_residual(series),
    }
}

pub fn cmd_simulate(ctx: &mut Ctx) -> Result<(), Failure> {
    let series = run_series(ctx)?;
    ctx.out.write("csv", &energy_csv(&series.samples))?;
    ctx.out.write("json", &to_json(&series_summary(&series)))?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    report: &'a analysis::SpectralReport,
    abscissa: &'a analysis::AbscissaSweep,
}

pub fn cmd_spectrum(ctx: &mut Ctx, fingerprint: &str) -> Result<(), Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let js: Vec<usize> = (0..=ctx.config.modes.j_max).collect();
    let result = ctx.phase("spectrum", || analysis::spectral_report(&params, &profile, grid, &js));
    let mut report = match result {
        Err(Failure::Numerical { error: e @ Error::PositiveRealPart { .. }, .. }) => {
            ctx.checks
                .push(CheckResult::new("spectrum_left_half_plane", false, e.to_string()));
            return Err(Failure::Numerical {
                phase: "spectrum_left_half_plane".into(),
                error: e,
            });
        }
        other => other?,
    };
    report.fingerprint = Some(fingerprint.to_string());
    let sweep = analysis::abscissa_sweep(&report);
    let max_re = report.max_abscissa();
    if profile.is_zero() {
        ctx.checks.push(CheckResult::new(
            "spectrum_on_imaginary_axis",
            report.modes.iter().all(|m| m.abscissa.abs() <= 1e-10),
            format!("max Re = {max_re:.3e}, tolerance 1e-10"),
        ));
    } else {
        ctx.checks.push(CheckResult::new(
            "spectrum_left_half_plane",
            max_re < -1e-10,
            format!("max Re over {} modes = {max_re:.6e}", report.modes.len()),
        ));
    }
    let min_mod = report.modes.iter().map(|m| m.min_modulus).fold(f64::INFINITY, f64::min);
    ctx.checks.push(CheckResult::new(
        "zero_not_eigenvalue",
        min_mod > 1e-8,
        format!("min |eigenvalue| = {min_mod:.6e}"),
    ));
    let mut csv = Vec::new();
    io::write_abscissa_csv(&mut csv, &sweep)?;
    ctx.out.write("csv", &csv)?;
    ctx.out.write(
        "json",
        &to_json(&SpectrumOutput {
            report: &report,
            abscissa: &sweep,
        }),
    )?;
    Ok(())
}

pub fn cmd_resolvent(ctx: &mut Ctx) -> Result<(), Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let lambdas = ctx.config.lambdas();
    let policy = ctx.config.mode_policy();
    let result = ctx.phase("resolvent_sweep", || {
        analysis::resolvent_sweep(&params, &profile, grid, &lambdas, policy)
    });
    let report = match result {
        Err(Failure::Numerical { error: e @ Error::ModeCutoffSuspect { .. }, .. }) => {
            ctx.checks.push(CheckResult::new("tail_audit", false, e.to_string()));
            return Err(Failure::Numerical {
                phase: "tail_audit".into(),
                error: e,
            });
        }
        other => other?,
    };
    ctx.checks.push(CheckResult::new(
        "tail_audit",
        true,
        format!("last three mode norms strictly decreasing at all {} frequencies", lambdas.len()),
    ));
    let mut csv = Vec::new();
    io::write_resolvent_csv(&mut csv, &report)?;
    ctx.out.write("csv", &csv)?;
    ctx.out.write("json", &to_json(&report))?;
    if ctx.config.output.svg {
        let (xs, ys) = report.curve();
        let envelope: Vec<f64> = ys
            .iter()
            .scan(0.0f64, |m, &y| {
                *m = m.max(y);
                Some(*m)
            })
            .collect();
        let reference: Vec<f64> = xs.iter().map(|x| ys[0] * (x / xs[0]).powi(2)).collect();
        let label = format!("sup_j N, fitted exponent {:.3}", report.fit.exponent);
        let svg = io::loglog_svg(
            "resolvent growth",
            "lambda",
            "sup_j ||(i lambda - A_j)^-1||",
            &[
                io::PlotSeries {
                    label: &label,
                    xs: &xs,
                    ys: &ys,
                    color: "#1f4e9c",
                },
                io::PlotSeries {
                    label: "running maximum",
                    xs: &xs,
                    ys: &envelope,
                    color: "#c05020",
                },
                io::PlotSeries {
                    label: "lambda^2 reference",
                    xs: &xs,
                    ys: &reference,
                    color: "#888888",
                },
            ],
        );
        ctx.out.write("svg", svg.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DecayOutput<'a> {
    source: &'a str,
    fit: &'a analysis::DecayFitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<SeriesSummary<'a>>,
}

pub fn cmd_decay(ctx: &mut Ctx, series_file: Option<&Path>) -> Result<(), Failure> {
    let window = [ctx.config.analysis.fit_t1, ctx.config.analysis.fit_t2];
    let (samples, series, source) = match series_file {
        Some(path) => {
            let text = std::fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let samples = io::read_energy_csv(&text[..])
                .map_err(|e| Failure::Config(format!("series file {}: {e}", path.display())))?;
            (samples, None, path.display().to_string())
        }
        None => {
            let series = run_series(ctx)?;
            (series.samples.clone(), Some(series), "simulation".to_string())
        }
    };
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Failure::Config("energy series is empty".into())),
    };
    if window[0] < first || window[1] > last {
        return Err(Failure::Config(format!(
            "analysis.fit_t1/fit_t2: window [{}, {}] lies outside the data range [{first}, {last}]",
            window[0], window[1]
        )));
    }
    let fit = ctx.phase("decay_fit", || analysis::decay_fit(&samples, window))?;
    if let Some(s) = &series {
        ctx.out.write("csv", &energy_csv(&s.samples))?;
    }
    ctx.out.write(
        "json",
        &to_json(&DecayOutput {
            source: &source,
            fit: &fit,
            series: series.as_ref().map(series_summary),
        }),
    )?;
    Ok(())
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn check_dissipation(ctx: &mut Ctx, fault: Option<Fault>) -> Result<CheckResult, Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let count = ctx.config.modes.count;
    let mut js = vec![0, count / 2, count - 1];
    js.dedup();
    let mats = build_matrices(grid, &profile);
    let mut probe_mats = mats.clone();
    if fault == Some(Fault::CorruptDamping) {
        probe_mats.damping = probe_mats.damping.scaled(1.01);
    }
    let (mats, probe_mats) = (Arc::new(mats), Arc::new(probe_mats));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.run.seed);
    let mut worst: f64 = 0.0;
    let seed_detail = ctx.config.run.seed;
    ctx.phase("dissipation_identity", || {
        for &j in &js {
            let op = ModalOperator::from_matrices(params, Arc::clone(&mats), j)?;
            let probe = ModalOperator::from_matrices(params, Arc::clone(&probe_mats), j)?;
            for _ in 0..100 {
                let u = random_state(&mut rng, op.dim());
                let gap = (op.dissipation_form(&u) + probe.dissipated_power(&u)).abs();
                worst = worst.max(gap / op.energy_inner(&u, &u).re);
            }
        }
        Ok(())
    })?;
    Ok(CheckResult::new(
        "dissipation_identity",
        worst <= 1e-12,
        format!("max |Re U*MAU + z*Dz| / U*MU = {worst:.3e} over modes {js:?}, 100 states each (seed {seed_detail}), tolerance 1e-12"),
    ))
}

fn check_conservation(ctx: &mut Ctx) -> Result<CheckResult, Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let zero = profile.scaled(0.0).map_err(|e| Failure::Config(e.to_string()))?;
    let count = ctx.config.modes.count.min(8);
    let dt = ctx.config.time.dt.min(1e-2);
    let smooth = ctx.config.modes.smoothness;
    let series = ctx.phase("conservation", || {
        let ops = operators(params, &zero, grid, count)?;
        let init = smooth_modal_data(&ops, smooth)?;
        simulate(&ops, &init, SimulationSettings::new(10.0, dt, 1000))
    })?;
    let drift = (series.final_energy() - series.initial_energy()).abs() / series.initial_energy();
    Ok(CheckResult::new(
        "conservation",
        drift <= 1e-9,
        format!("d = 0, J = {count}, T = 10, dt = {dt}: |E(T) - E(0)| / E(0) = {drift:.3e}, tolerance 1e-9"),
    ))
}

fn check_budget(ctx: &mut Ctx) -> Result<CheckResult, Failure> {
    let (params, profile, grid) = ctx.setup()?;
    let count = ctx.config.modes.count.min(8);
    let dt = ctx.config.time.dt;
    let smooth = ctx.config.modes.smoothness;
    let series = ctx.phase("energy_budget", || {
        let ops = operators(params, &profile, grid, count)?;
        let init = smooth_modal_data(&ops, smooth)?;
        simulate(&ops, &init, SimulationSettings::new(10_000.0 * dt, dt, 1000))
    })?;
    let r = energy_budget_residual(&series) / series.initial_energy();
    Ok(CheckResult::new(
        "energy_budget",
        r <= 1e-9,
        format!("J = {count}, 10^4 steps of dt = {dt}: max |dE + dt P_mid| / E(0) = {r:.3e}, tolerance 1e-9"),
    ))
}

fn check_oracle(ctx: &mut Ctx) -> Result<Vec<CheckResult>, Failure> {
    let (params, profile, _) = ctx.setup()?;
    let dt = ctx.config.time.dt;
    let smooth = ctx.config.modes.smoothness;
    let (single, trajectory) = ctx.phase("oracle_equivalence", || {
        let op = ModalOperator::assemble(params, &profile, Grid1D::new(8)?, 0)?;
        let ops = std::slice::from_ref(&op);
        let init = smooth_modal_data(ops, smooth)?;
        let rel = |t: f64| -> Result<f64, Error> {
            let s = simulate(ops, &init, SimulationSettings::new(t, dt, 1_000_000))?;
            let exact = dense_expm_propagate(&op, &init.modes[0], s.meta.t_final)?;
            let diff: Vec<f64> = exact.iter().zip(&s.final_state.modes[0]).map(|(a, b)| a - b).collect();
            Ok(energy_norm(&diff, &op)? / energy_norm(&exact, &op)?)
        };
        Ok((rel(dt)?, rel(1.0)?))
    })?;
    Ok(vec![
        CheckResult::new(
            "oracle_single_step",
            single <= 1e-7,
            format!("n = 8, one step of dt = {dt}: relative energy-norm error {single:.3e}, tolerance 1e-7"),
        ),
        CheckResult::new(
            "oracle_trajectory",
            trajectory <= 1e-6,
            format!("n = 8, t = 1, dt = {dt}: relative energy-norm error {trajectory:.3e}, tolerance 1e-6"),
        ),
    ])
}

fn check_convergence(ctx: &mut Ctx) -> Result<CheckResult, Failure> {
    let (params, _, grid) = ctx.setup()?;
    let n = grid.n();
    if n < 16 {
        return Ok(CheckResult::skipped(
            "convergence_order",
            format!("grid.n = {n}: a four-level refinement n/8, n/4, n/2, n needs grid.n >= 16"),
        ));
    }
    let n_list = [n / 8, n / 4, n / 2, n];
    let jm = (ctx.config.modes.count - 1).min(4);
    let targets = [(0, 0, Branch::Minus), (0, 0, Branch::Plus), (jm, 1, Branch::Minus)];
    let min_order = ctx.phase("convergence_order", || {
        let mut worst = f64::INFINITY;
        for (j, m, b) in targets {
            worst = worst.min(convergence_study(&params, j, m, b, &n_list)?.min_order());
        }
        Ok(worst)
    })?;
    Ok(CheckResult::new(
        "convergence_order",
        min_order >= 1.9,
        format!("undamped frequencies over n = {n_list:?}: minimum observed order {min_order:.4}, need >= 1.9"),
    ))
}

pub fn cmd_check(ctx: &mut Ctx, fault: Option<Fault>) -> Result<(), Failure> {
    let c = check_dissipation(ctx, fault)?;
    ctx.checks.push(c);
    let c = check_conservation(ctx)?;
    ctx.checks.push(c);
    let c = check_budget(ctx)?;
    ctx.checks.push(c);
    let c = check_oracle(ctx)?;
    ctx.checks.extend(c);
    let c = check_convergence(ctx)?;
    ctx.checks.push(c);
    ctx.out.write("json", &to_json(&ctx.checks))?;
    Ok(())
}
