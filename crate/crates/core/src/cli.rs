//! Batch front end: one process runs one command and writes its reports.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{example5_value, read_problem_value, to_json_string, write_json, ProblemSpec};
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::hypgeom::{
    apply_rotation, conformal_factor, euclidean_radius_of_geodesic_ball, geodesic_distance, geodesic_distance_origin,
    montecarlo_integral_dmu, volume_density, BallPoint, GeodesicPolar, Rotation,
};
use crate::radial::{fmt17, GridMeta, RadialGrid};
use crate::solver::{
    lambda_sweep, minimize_sublevel, verify_weak_solution, Init, McCheckOptions, SolveConfig, SolveReport,
    SweepOutcome, WeakCheck,
};
use crate::testfn::{
    default_t_sequence, negativity_diagnostic, power_crossing, ratio_blowup_diagnostic, rotated_energy_echo,
    write_diagnostic_csv, EnergyEcho, NegativityTable, PlateauFunction, RatioTable,
};
use crate::threshold::{threshold_report, SobolevOptions, ThresholdOptions, ThresholdReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Threshold,
    Testfn,
    Solve,
    Sweep,
    Example5,
    Geomcheck,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "hypvar", version, about = "Radial variational solver on the Poincaré ball")]
pub struct RunConfig {
    /// Problem declaration (JSON). Optional for example5 and geomcheck.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override a declaration field, e.g. `--set grid.M=4096` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Result of one command: the exit status and what was written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seeds {
    pub base: u64,
    pub sobolev: u64,
    pub theta: u64,
    pub montecarlo: u64,
}

impl Seeds {
    fn from_base(base: u64) -> Self {
        Self { base, sobolev: base, theta: base.wrapping_add(1), montecarlo: base.wrapping_add(2) }
    }
}

/// Fully resolved configuration embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub problem: Option<ProblemSpec>,
    pub grid: Option<GridMeta>,
    pub seeds: Seeds,
    pub overrides: Vec<String>,
}

struct Context {
    spec: ProblemSpec,
    problem: Problem,
    seeds: Seeds,
    resolved: Resolved,
}

fn load(cfg: &RunConfig) -> Result<Context> {
    let base = match (&cfg.problem, cfg.command) {
        (Some(p), _) => read_problem_value(p)?,
        (None, Command::Example5) => example5_value(),
        (None, c) => {
            let name = c.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            return Err(Error::invalid(format!("command {name} needs --problem")));
        }
    };
    let spec = ProblemSpec::from_value(base, &cfg.overrides)?;
    let problem = spec.build()?;
    let seeds = Seeds::from_base(cfg.seed);
    let resolved = Resolved {
        command: cfg.command,
        problem: Some(spec.clone()),
        grid: Some(problem.grid().meta()),
        seeds,
        overrides: cfg.overrides.clone(),
    };
    Ok(Context { spec, problem, seeds, resolved })
}

fn threshold(ctx: &Context) -> Result<ThresholdReport> {
    let s = ctx.spec.sobolev;
    let opts = ThresholdOptions {
        sobolev: SobolevOptions { starts: s.starts, seed: ctx.seeds.sobolev, max_iters: s.max_iters, tol: s.tol },
        theta_candidates: ctx.spec.theta.candidates,
        theta_seed: ctx.seeds.theta,
        ..ThresholdOptions::default()
    };
    let rep = threshold_report(&ctx.problem, &opts)?;
    info!("c_q = {}, omega* = {}, lambda* = {}", rep.c_q_estimate, rep.omega_star, rep.lambda_star);
    Ok(rep)
}

fn solve_config(ctx: &Context, th: &ThresholdReport) -> SolveConfig {
    let s = &ctx.spec.solver;
    let w = ctx.problem.weight().witness();
    SolveConfig {
        lambda: s.lambda.unwrap_or(s.lambda_fraction * th.lambda_star),
        omega_bar: s.omega_bar.unwrap_or(th.omega_star),
        max_iters: s.max_iters,
        grad_tol: s.grad_tol,
        init: Init::ScaledPlateau { rho: w.rho, r: w.r },
        lambda_star: Some(th.lambda_star),
    }
}

fn mc_options(ctx: &Context) -> McCheckOptions {
    McCheckOptions {
        fields: ctx.spec.montecarlo.fields,
        samples: ctx.spec.montecarlo.samples,
        seed: ctx.seeds.montecarlo,
        ..McCheckOptions::default()
    }
}

#[derive(Debug, Clone, Serialize)]
struct ThresholdSummary {
    c_q_estimate: f64,
    c_q_caveat: String,
    omega_star: f64,
    lambda_star: f64,
    m_omega_bar: f64,
}

fn summary(th: &ThresholdReport, omega_bar: f64) -> ThresholdSummary {
    ThresholdSummary {
        c_q_estimate: th.c_q_estimate,
        c_q_caveat: th.c_q_caveat.clone(),
        omega_star: th.omega_star,
        lambda_star: th.lambda_star,
        m_omega_bar: th.m_omega(omega_bar),
    }
}

#[derive(Debug, Clone, Serialize)]
struct TestfnSummary {
    rho: f64,
    r: f64,
    lambda: f64,
    omega_bar: f64,
    analytic_crossing: Option<f64>,
    ratio: RatioTable,
    negativity: NegativityTable,
    energy_echo: EnergyEcho,
}

fn testfn(ctx: &Context, th: &ThresholdReport) -> Result<TestfnSummary> {
    let w = ctx.problem.weight().witness();
    let plateau = PlateauFunction::on_grid(ctx.problem.grid().clone(), w.rho, w.r)?;
    let cfg = solve_config(ctx, th);
    let ts = default_t_sequence();
    let ratio = ratio_blowup_diagnostic(&plateau, &ctx.problem, &ts)?;
    let negativity = negativity_diagnostic(&plateau, &ctx.problem, cfg.lambda, Some(cfg.omega_bar), &ts)?;
    let mc = ctx.spec.montecarlo;
    let energy_echo = rotated_energy_echo(&plateau, mc.rotations, mc.echo_samples, ctx.seeds.montecarlo)?;
    Ok(TestfnSummary {
        rho: w.rho,
        r: w.r,
        lambda: cfg.lambda,
        omega_bar: cfg.omega_bar,
        analytic_crossing: power_crossing(&plateau, &ctx.problem, cfg.lambda)?,
        ratio,
        negativity,
        energy_echo,
    })
}

#[derive(Debug, Clone, Serialize)]
struct SolveOutput {
    report: SolveReport,
    weak_check: WeakCheck,
    bound_ok: bool,
}

fn solve(ctx: &Context, th: &ThresholdReport) -> Result<SolveOutput> {
    let cfg = solve_config(ctx, th);
    let report = minimize_sublevel(&cfg, &ctx.problem)?;
    let weak_check = verify_weak_solution(&report.minimizer, cfg.lambda, &ctx.problem, 1e-6, &mc_options(ctx))?;
    let bound_ok = report.norm * report.norm < cfg.lambda * th.m_omega(cfg.omega_bar);
    Ok(SolveOutput { report, weak_check, bound_ok })
}

fn sweep(ctx: &Context, th: &ThresholdReport) -> Result<SweepOutcome> {
    let cfg = solve_config(ctx, th);
    let lambdas = match &ctx.spec.sweep.lambdas {
        Some(l) => l.clone(),
        None => (1..=ctx.spec.sweep.levels as i32).map(|k| th.lambda_star / 2f64.powi(k)).collect(),
    };
    lambda_sweep(&lambdas, &ctx.problem, &cfg, Some(th.m_omega(cfg.omega_bar)))
}

fn write_sweep_csv(path: &Path, out: &SweepOutcome) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["lambda", "norm", "energy", "residual", "converged"])?;
    for p in &out.series {
        wtr.write_record([
            fmt17(p.lambda),
            fmt17(p.norm),
            fmt17(p.energy),
            fmt17(p.residual),
            p.converged.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Non-convergence is fatal (exit 2) only where the theory promises a solution.
fn solve_status(out: &SolveOutput, warnings: &mut Vec<String>) -> i32 {
    warnings.extend(out.report.warnings.iter().cloned());
    let degenerate = out.report.lambda_star_used.is_some_and(|ls| out.report.lambda >= ls);
    if out.report.converged || degenerate {
        0
    } else {
        2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeomCheck {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeomSummary {
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<GeomCheck>,
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Result<BallPoint> {
    let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let s: f64 = rng.random_range(0.0..0.95);
    BallPoint::new(x.into_iter().map(|v| v * s / n).collect())
}

/// Property checks of the ball geometry with fixed tolerances.
pub fn geomcheck(seed: u64) -> Result<GeomSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut push = |name: &str, err: f64, tol: f64| {
        checks.push(GeomCheck { name: name.into(), passed: err <= tol, max_error: err });
    };
    let (mut origin_err, mut sym_err, mut tri_err, mut rot_err, mut polar_err, mut dens_err) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..200 {
        let dim = 3 + k % 4;
        let (a, b, c) = (random_point(&mut rng, dim)?, random_point(&mut rng, dim)?, random_point(&mut rng, dim)?);
        let o = BallPoint::origin(dim)?;
        let s = a.norm();
        let closed = ((1.0 + s) / (1.0 - s)).ln();
        origin_err = origin_err.max((geodesic_distance_origin(&a) - closed).abs() / closed.max(1.0));
        origin_err = origin_err.max((geodesic_distance(&o, &a)? - closed).abs() / closed.max(1.0));
        let dab = geodesic_distance(&a, &b)?;
        sym_err = sym_err.max((dab - geodesic_distance(&b, &a)?).abs());
        tri_err = tri_err.max(dab - geodesic_distance(&a, &c)? - geodesic_distance(&c, &b)?);
        let g = Rotation::random(dim, &mut rng);
        let moved = geodesic_distance(&apply_rotation(&g, &a)?, &apply_rotation(&g, &b)?)?;
        rot_err = rot_err.max((moved - dab).abs() / dab.max(1.0));
        let back = GeodesicPolar::from_point(&a).to_point()?;
        polar_err = polar_err.max(a.coords().iter().zip(back.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        let dens = volume_density(&a);
        dens_err = dens_err.max((dens * conformal_factor(&a).powi(dim as i32) - 1.0).abs());
    }
    push("distance_from_origin_closed_form", origin_err, 1e-12);
    push("distance_symmetry", sym_err, 1e-12);
    push("triangle_inequality", tri_err, 1e-12);
    push("rotation_invariance", rot_err, 1e-10);
    push("polar_round_trip", polar_err, 1e-12);
    push("density_is_conformal_power", dens_err, 1e-12);
    let mut radius_err = 0.0f64;
    for r in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let p = BallPoint::on_axis(3, euclidean_radius_of_geodesic_ball(r)?)?;
        radius_err = radius_err.max((p.geodesic_radius() - r).abs() / r);
    }
    push("geodesic_ball_radius_round_trip", radius_err, 1e-12);

    // alpha dmu = dx in dimension 4, so the weight integrates to the unit-ball volume
    let exact = PI * PI / 2.0;
    let grid = RadialGrid::uniform(4, 8192, 40.0, 6)?;
    let quad = grid.integrate(|rho| {
        let e = (-rho).exp();
        (2.0 * e / ((1.0 + e) * (1.0 + e))).powi(4)
    });
    push("conformal_weight_integral_quadrature", (quad - exact).abs() / exact, 1e-8);
    let c = 1.0 - 1e-9;
    let est = montecarlo_integral_dmu(|p| conformal_factor(p).powi(4), 4, 20_000, c, seed)?;
    checks.push(GeomCheck {
        name: "conformal_weight_integral_montecarlo".into(),
        passed: est.agrees_with(exact, 3.0, 1e-8 * exact),
        max_error: (est.estimate - exact).abs(),
    });
    let mut vol_err = 0.0f64;
    for r in [0.5, 1.0, 2.0] {
        let g = RadialGrid::uniform(3, 2048, r, 6)?;
        let v = g.integrate(|_| 1.0);
        let exact = PI * ((2.0 * r).sinh() - 2.0 * r);
        vol_err = vol_err.max((v - exact).abs() / exact);
    }
    checks.push(GeomCheck { name: "hyperbolic_ball_volume_n3".into(), passed: vol_err <= 1e-8, max_error: vol_err });
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(GeomSummary { seed, all_passed, checks })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a Resolved,
    #[serde(flatten)]
    body: T,
}

/// Runs one command. Validation errors are returned as `Err`; numerical
/// non-convergence is reported through `exit_code = 2`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.out)?;
    let out = |name: &str| cfg.out.join(name);
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut exit_code = 0;

    if cfg.command == Command::Geomcheck {
        let summary = geomcheck(cfg.seed)?;
        let resolved = Resolved {
            command: cfg.command,
            problem: None,
            grid: None,
            seeds: Seeds::from_base(cfg.seed),
            overrides: cfg.overrides.clone(),
        };
        let path = out("geomcheck.json");
        write_json(&path, &Envelope { config: &resolved, body: &summary })?;
        files.push(path);
        if !summary.all_passed {
            exit_code = 1;
        }
        return Ok(RunOutcome { exit_code, files, warnings });
    }

    let ctx = load(cfg)?;
    let th = threshold(&ctx)?;
    if !th.c_q_converged {
        warnings.push("c_q estimate did not converge".into());
        exit_code = 2;
    }
    let cfg_solve = solve_config(&ctx, &th);
    match cfg.command {
        Command::Threshold => {
            let path = out("threshold.json");
            write_json(&path, &Envelope { config: &ctx.resolved, body: serde_json::json!({ "threshold": &th }) })?;
            files.push(path);
        }
        Command::Testfn => {
            let t = testfn(&ctx, &th)?;
            let path = out("testfn.csv");
            write_diagnostic_csv(&t.negativity.rows, fs::File::create(&path)?)?;
            files.push(path);
            let path = out("testfn.json");
            write_json(&path, &Envelope { config: &ctx.resolved, body: serde_json::json!({ "testfn": &t }) })?;
            files.push(path);
        }
        Command::Solve => {
            let s = solve(&ctx, &th)?;
            exit_code = exit_code.max(solve_status(&s, &mut warnings));
            let path = out("minimizer.csv");
            s.report.minimizer.write_csv(fs::File::create(&path)?)?;
            files.push(path);
            let path = out("solve_report.json");
            let body = serde_json::json!({ "threshold": summary(&th, cfg_solve.omega_bar), "solve": &s });
            write_json(&path, &Envelope { config: &ctx.resolved, body })?;
            files.push(path);
        }
        Command::Sweep => {
            let sw = sweep(&ctx, &th)?;
            if sw.aborted.is_some() {
                exit_code = 2;
            }
            let path = out("sweep.csv");
            write_sweep_csv(&path, &sw)?;
            files.push(path);
            let path = out("sweep_reports.json");
            let body = serde_json::json!({ "threshold": summary(&th, cfg_solve.omega_bar), "sweep": &sw });
            write_json(&path, &Envelope { config: &ctx.resolved, body })?;
            files.push(path);
        }
        Command::Example5 => {
            let t = testfn(&ctx, &th)?;
            let s = solve(&ctx, &th)?;
            exit_code = exit_code.max(solve_status(&s, &mut warnings));
            let sw = sweep(&ctx, &th)?;
            if sw.aborted.is_some() {
                exit_code = 2;
            }
            let path = out("testfn.csv");
            write_diagnostic_csv(&t.negativity.rows, fs::File::create(&path)?)?;
            files.push(path);
            let path = out("minimizer.csv");
            s.report.minimizer.write_csv(fs::File::create(&path)?)?;
            files.push(path);
            let path = out("sweep.csv");
            write_sweep_csv(&path, &sw)?;
            files.push(path);
            let path = out("example5.json");
            let body = serde_json::json!({
                "threshold": &th,
                "testfn": &t,
                "solve": &s,
                "sweep": &sw,
                "warnings": &warnings,
            });
            write_json(&path, &Envelope { config: &ctx.resolved, body })?;
            files.push(path);
        }
        Command::Geomcheck => unreachable!("handled above"),
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(RunOutcome { exit_code, files, warnings })
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with(cfg: RunConfig) -> i32 {
    match run(&cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Pretty JSON of any report (17 significant digits), for callers that
/// want the text rather than a file.
pub fn render<T: Serialize>(value: &T) -> Result<String> {
    to_json_string(value)
}
