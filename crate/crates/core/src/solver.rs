//! Local minimization of `J_lambda` on the sublevel set `Phi < omega_bar^2`
//! of the discrete radial space, weak-solution verification, and the
//! `lambda -> 0` sweep.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::hypgeom::{montecarlo_integral_dmu, BallPoint, McEstimate};
use crate::radial::{dirichlet_energy, GridMeta, RadialFunction};
use crate::testfn::{default_t_sequence, plateau_profile, PlateauFunction};

/// Iterates are pulled back to `Phi = omega_bar^2 (1 - SUBLEVEL_MARGIN)`.
pub const SUBLEVEL_MARGIN: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub enum Init {
    /// `t w_{rho,r}` with `t` the lowest-energy point of the `10^{-j}` scan.
    ScaledPlateau {
        rho: f64,
        r: f64,
    },
    Zero,
    Custom(RadialFunction),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub lambda: f64,
    pub omega_bar: f64,
    pub max_iters: usize,
    /// Relative residual tolerance.
    pub grad_tol: f64,
    pub init: Init,
    /// Threshold `lambda*` the run is compared against, if known.
    pub lambda_star: Option<f64>,
}

impl SolveConfig {
    pub fn new(lambda: f64, omega_bar: f64) -> Self {
        Self {
            lambda,
            omega_bar,
            max_iters: 10_000,
            grad_tol: 1e-8,
            init: Init::ScaledPlateau { rho: 2.0, r: 1.0 },
            lambda_star: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.omega_bar > 0.0 && self.omega_bar.is_finite()) {
            return Err(Error::invalid(format!("omega_bar must be positive, got {}", self.omega_bar)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be positive"));
        }
        Ok(())
    }

    /// `||u||` below which a minimizer counts as the zero solution.
    pub fn nontrivial_threshold(&self) -> f64 {
        10.0 * self.grad_tol * self.omega_bar
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub minimizer: RadialFunction,
    pub lambda: f64,
    pub omega_bar: f64,
    pub energy: f64,
    pub start_energy: f64,
    pub phi: f64,
    pub norm: f64,
    pub residual_norm: f64,
    /// `residual_norm / ||u||` (infinite for `u = 0` with a nonzero residual).
    pub relative_residual: f64,
    /// `|<J'(u), u>| / ||u||^2`.
    pub criticality: f64,
    /// `int alpha f(u) u dmu`, so that `||u||^2 = lambda * psi_pairing` at a critical point.
    pub psi_pairing: f64,
    pub nontrivial: bool,
    pub sublevel_ok: bool,
    pub converged: bool,
    /// Stopped on the sublevel boundary with the gradient pointing outward
    /// and a negligible tangential part (a constrained, not a free, critical point).
    pub boundary_stationary: bool,
    pub monotone: bool,
    pub iterations: usize,
    pub projections: usize,
    pub lambda_star_used: Option<f64>,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub grid: GridMeta,
    pub warnings: Vec<String>,
}

fn project(u: RadialFunction, omega_bar: f64) -> (RadialFunction, bool) {
    let e = dirichlet_energy(&u);
    if 0.5 * e < omega_bar * omega_bar {
        return (u, false);
    }
    let s = omega_bar * (2.0 * (1.0 - SUBLEVEL_MARGIN)).sqrt() / e.sqrt();
    (u.scaled(s), true)
}

fn best_scaling(
    problem: &Problem,
    w: &RadialFunction,
    lambda: f64,
    omega_bar: f64,
    ts: &[f64],
) -> Result<RadialFunction> {
    let mut best: Option<(f64, f64)> = None;
    for &t in ts {
        let v = w.scaled(t);
        if problem.phi(&v)? >= omega_bar * omega_bar {
            continue;
        }
        let j = problem.j_lambda(&v, lambda)?;
        if best.is_none_or(|(_, bj)| j < bj) {
            best = Some((t, j));
        }
    }
    let t = best.map(|b| b.0).unwrap_or(ts[ts.len() - 1]);
    Ok(project(w.scaled(t), omega_bar).0)
}

fn initial_guess(cfg: &SolveConfig, problem: &Problem) -> Result<RadialFunction> {
    let grid = problem.grid().clone();
    let u = match &cfg.init {
        Init::Zero => RadialFunction::zero(grid),
        Init::Custom(u) => {
            if u.grid().nodes() != grid.nodes() {
                return Err(Error::GridMismatch);
            }
            project(u.clone(), cfg.omega_bar).0
        }
        Init::ScaledPlateau { rho, r } => {
            let w = match PlateauFunction::on_grid(grid.clone(), *rho, *r) {
                Ok(w) => w.function().clone(),
                Err(Error::InvalidArgument(msg)) if msg.contains("no node") => {
                    warn!("grid not aligned with plateau kinks; using the nodal interpolant");
                    RadialFunction::sample(grid, |s| plateau_profile(*rho, *r, s))?
                }
                Err(e) => return Err(e),
            };
            let mut ts = vec![1.0];
            ts.extend(default_t_sequence());
            best_scaling(problem, &w, cfg.lambda, cfg.omega_bar, &ts)?
        }
    };
    Ok(u)
}

/// Riesz-preconditioned gradient descent on `J_lambda` with Armijo
/// backtracking, restricted to `Phi < omega_bar^2` by radial rescaling.
///
/// Stops once the dual residual is at most `grad_tol (1 + ||u||)` and, for a
/// nontrivial iterate, also at most `grad_tol ||u||`.
pub fn minimize_sublevel(cfg: &SolveConfig, problem: &Problem) -> Result<SolveReport> {
    cfg.validate()?;
    let u0 = initial_guess(cfg, problem)?;
    minimize_from(cfg, problem, u0)
}

/// Gradient data at an iterate: the residual `r = K u - lambda b`, the
/// fixed-point image `z = lambda K^{-1} b`, and the dual norm of `r`.
/// The preconditioned step of length `s` is `(1 - s) u + s z`, which avoids
/// the cancellation in `u - s K^{-1} r` when `z` is small.
struct Descent {
    vector: Vec<f64>,
    z: Vec<f64>,
    norm: f64,
}

fn descent(problem: &Problem, u: &RadialFunction, lambda: f64) -> Result<Descent> {
    let b = problem.psi_gradient(u)?;
    let k = problem.energy_matrix();
    let ku = k.matvec(u.free_values());
    let vector: Vec<f64> = ku.iter().zip(&b).map(|(k, b)| k - lambda * b).collect();
    let z: Vec<f64> = k.solve(&b)?.into_iter().map(|x| lambda * x).collect();
    // K^{-1} r = u - z, so the dual norm is the energy norm of u - z; this
    // avoids the sqrt(eps) floor of evaluating r . (u - z) with cancelling r
    let d: Vec<f64> = u.free_values().iter().zip(&z).map(|(x, z)| x - z).collect();
    let norm = k.quad_form(&d).max(0.0).sqrt();
    Ok(Descent { vector, z, norm })
}

/// On the sphere `||u|| = const`: true when the Riesz gradient `d = u - z`
/// points outward and its tangential part is below `tol` in the energy norm.
fn boundary_kkt(problem: &Problem, u: &RadialFunction, res: &Descent, tol: f64) -> bool {
    let k = problem.energy_matrix();
    let uf = u.free_values();
    let ku = k.matvec(uf);
    let uu: f64 = uf.iter().zip(&ku).map(|(a, b)| a * b).sum();
    let ru: f64 = res.vector.iter().zip(uf).map(|(r, x)| r * x).sum();
    if !(uu > 0.0) || ru >= 0.0 {
        return false;
    }
    let c = ru / uu;
    let t: Vec<f64> = uf.iter().zip(&res.z).map(|(x, z)| (x - z) - c * x).collect();
    k.quad_form(&t).max(0.0).sqrt() <= tol
}

fn minimize_from(cfg: &SolveConfig, problem: &Problem, u0: RadialFunction) -> Result<SolveReport> {
    let grid = problem.grid().clone();
    let lambda = cfg.lambda;
    let mut warnings = Vec::new();
    if let Some(ls) = cfg.lambda_star {
        if lambda >= ls {
            warn!("lambda = {lambda} >= lambda_star = {ls}");
            warnings.push("lambda ≥ lambda_star".to_string());
        }
    }
    let (mut u, _) = project(u0, cfg.omega_bar);
    let start_energy = problem.j_lambda(&u, lambda)?;
    let mut energy = start_energy;
    let mut res = descent(problem, &u, lambda)?;
    let mut monotone = true;
    let mut converged = false;
    let mut boundary_stationary = false;
    let mut iterations = 0;
    let mut projections = 0;
    let thresh = cfg.nontrivial_threshold();
    let stop = |norm: f64, r: f64| r <= cfg.grad_tol * (1.0 + norm) && (norm <= thresh || r <= cfg.grad_tol * norm);
    loop {
        let norm = dirichlet_energy(&u).sqrt();
        if stop(norm, res.norm) {
            converged = true;
            break;
        }
        if 0.5 * norm * norm >= cfg.omega_bar * cfg.omega_bar * (1.0 - 2.0 * SUBLEVEL_MARGIN)
            && boundary_kkt(problem, &u, &res, cfg.grad_tol * (1.0 + norm))
        {
            boundary_stationary = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;
        let noise = 64.0 * f64::EPSILON * energy.abs().max(f64::MIN_POSITIVE);
        let full_step = |step: f64| -> Result<(RadialFunction, f64, bool, f64)> {
            let free: Vec<f64> = u.free_values().iter().zip(&res.z).map(|(x, z)| (1.0 - step) * x + step * z).collect();
            let (v, projected) = project(RadialFunction::from_free(grid.clone(), &free)?, cfg.omega_bar);
            let jv = problem.j_lambda(&v, lambda)?;
            let decrease: f64 =
                res.vector.iter().zip(u.free_values().iter().zip(v.free_values())).map(|(r, (a, b))| r * (a - b)).sum();
            Ok((v, jv, projected, decrease))
        };
        let mut accepted = None;
        // once the predicted decrease is at rounding level the Armijo test on J
        // is noise; take the full step if it still reduces the residual
        if res.norm * res.norm <= noise {
            let (v, jv, projected, _) = full_step(1.0)?;
            if descent(problem, &v, lambda)?.norm < res.norm && jv <= energy + noise {
                accepted = Some((v, jv, projected));
            }
        }
        let mut step = 1.0f64;
        while accepted.is_none() && step >= ARMIJO_SHRINK.powi(MAX_HALVINGS as i32) {
            let (v, jv, projected, decrease) = full_step(step)?;
            if jv <= energy - ARMIJO_C * decrease.max(0.0) {
                accepted = Some((v, jv, projected));
            }
            step *= ARMIJO_SHRINK;
        }
        let Some((v, jv, projected)) = accepted else {
            debug!("line search stalled at iteration {iterations}");
            break;
        };
        if jv > energy + noise {
            monotone = false;
        }
        if projected {
            projections += 1;
        }
        u = v;
        energy = jv;
        res = descent(problem, &u, lambda)?;
    }
    let norm = dirichlet_energy(&u).sqrt();
    let phi = 0.5 * norm * norm;
    let psi_pairing: f64 =
        res.z.iter().zip(problem.energy_matrix().matvec(u.free_values())).map(|(z, ku)| z * ku).sum::<f64>() / lambda;
    let pairing: f64 = res.vector.iter().zip(u.free_values()).map(|(r, x)| r * x).sum();
    let relative_residual = if norm > 0.0 {
        res.norm / norm
    } else if res.norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let nontrivial = norm > thresh;
    if boundary_stationary {
        warnings.push("minimizer sits on the sublevel boundary".to_string());
    } else if !converged {
        warnings.push(format!("not converged after {iterations} iterations (residual {:.3e})", res.norm));
    }
    Ok(SolveReport {
        lambda,
        omega_bar: cfg.omega_bar,
        energy,
        start_energy,
        phi,
        norm,
        residual_norm: res.norm,
        relative_residual,
        criticality: if norm > 0.0 { pairing.abs() / (norm * norm) } else { 0.0 },
        psi_pairing,
        nontrivial,
        sublevel_ok: phi < cfg.omega_bar * cfg.omega_bar,
        converged,
        boundary_stationary,
        monotone,
        iterations,
        projections,
        lambda_star_used: cfg.lambda_star,
        grad_tol: cfg.grad_tol,
        max_iters: cfg.max_iters,
        grid: grid.meta(),
        warnings,
        minimizer: u,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub norm: f64,
    pub energy: f64,
    pub residual: f64,
    pub converged: bool,
    /// `lambda * M_omega_bar`, when supplied.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub reports: Vec<SolveReport>,
    pub series: Vec<SweepPoint>,
    /// Set when a non-converged solve stopped the sweep early.
    pub aborted: Option<String>,
    pub strictly_decreasing: bool,
    /// `||u_lambda||^2 < lambda M_omega_bar` for every point (true when no bound was supplied).
    pub bound_ok: bool,
}

/// Solves for each `lambda` in turn, warm-starting from the previous
/// minimizer rescaled to the lowest-energy multiple `2^{-j}`.
pub fn lambda_sweep(
    lambdas: &[f64],
    problem: &Problem,
    template: &SolveConfig,
    m_omega: Option<f64>,
) -> Result<SweepOutcome> {
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda list"));
    }
    for (i, &l) in lambdas.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("lambda_{i} = {l} must be positive")));
        }
        if i > 0 && !(l < lambdas[i - 1]) {
            return Err(Error::invalid("lambda list must be strictly decreasing"));
        }
        if let Some(ls) = template.lambda_star {
            if !(l < ls) {
                return Err(Error::invalid(format!("lambda_{i} = {l} is not below lambda_star = {ls}")));
            }
        }
    }
    let mut reports: Vec<SolveReport> = Vec::with_capacity(lambdas.len());
    let mut aborted = None;
    for &lambda in lambdas {
        let cfg = SolveConfig { lambda, ..template.clone() };
        cfg.validate()?;
        let report = match reports.last() {
            None => minimize_sublevel(&cfg, problem)?,
            Some(prev) => {
                let ts: Vec<f64> = (0..=30).map(|j| 0.5f64.powi(j)).collect();
                let start = best_scaling(problem, &prev.minimizer, lambda, cfg.omega_bar, &ts)?;
                minimize_from(&cfg, problem, start)?
            }
        };
        let ok = report.converged;
        reports.push(report);
        if !ok {
            aborted = Some(format!("solve at lambda = {lambda} did not converge"));
            break;
        }
    }
    let series: Vec<SweepPoint> = reports
        .iter()
        .map(|r| SweepPoint {
            lambda: r.lambda,
            norm: r.norm,
            energy: r.energy,
            residual: r.residual_norm,
            converged: r.converged,
            bound: m_omega.map(|m| r.lambda * m),
        })
        .collect();
    let strictly_decreasing = series.windows(2).all(|p| p[1].norm < p[0].norm);
    let bound_ok = series.iter().all(|p| p.bound.is_none_or(|b| p.norm * p.norm < b));
    Ok(SweepOutcome { reports, series, aborted, strictly_decreasing, bound_ok })
}

#[derive(Debug, Clone, Copy)]
pub struct McCheckOptions {
    pub fields: usize,
    pub samples: usize,
    pub seed: u64,
    /// Geodesic radius of the test-field support.
    pub support: f64,
}

impl Default for McCheckOptions {
    fn default() -> Self {
        Self { fields: 5, samples: 200_000, seed: 7, support: 3.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakCheck {
    pub passed: bool,
    pub radial_ok: bool,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub mc_ok: bool,
    pub mc: Vec<McEstimate>,
}

/// Non-radial test field `psi(rho) P(sigma)`, `psi = (1 - (rho/R)^2)^2` on
/// `rho < R`, `P` a quadratic polynomial.
struct TestField {
    support: f64,
    c0: f64,
    c1: Vec<f64>,
    a: Vec<Vec<f64>>,
}

impl TestField {
    fn random(dim: usize, support: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut a = vec![vec![0.0; dim]; dim];
        #[allow(clippy::needless_range_loop)]
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        Self {
            support,
            c0: rng.random_range(-1.0..1.0),
            c1: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a,
        }
    }

    /// `(phi, d phi / d s)` with `s = |sigma|`, at a point of geodesic radius `rho`.
    fn value_and_radial_derivative(&self, x: &[f64], rho: f64) -> (f64, f64) {
        if rho >= self.support {
            return (0.0, 0.0);
        }
        let s2: f64 = x.iter().map(|v| v * v).sum();
        let s = s2.sqrt();
        let y = 1.0 - (rho / self.support).powi(2);
        let psi = y * y;
        let dpsi = -4.0 * y * rho / (self.support * self.support);
        let mut p = self.c0;
        let mut radial_grad_p = 0.0;
        for i in 0..x.len() {
            let ax: f64 = (0..x.len()).map(|j| self.a[i][j] * x[j]).sum();
            p += self.c1[i] * x[i] + x[i] * ax;
            if s > 0.0 {
                radial_grad_p += (self.c1[i] + 2.0 * ax) * x[i] / s;
            }
        }
        (psi * p, dpsi * 2.0 / (1.0 - s2) * p + psi * radial_grad_p)
    }
}

/// Radial residual test plus a full-dimensional Monte Carlo residual against
/// random non-radial test fields, each required to be within 3 standard
/// errors of zero.
pub fn verify_weak_solution(
    u: &RadialFunction,
    lambda: f64,
    problem: &Problem,
    tol: f64,
    opts: &McCheckOptions,
) -> Result<WeakCheck> {
    let res = problem.weak_residual(u, lambda)?;
    let norm = dirichlet_energy(u).sqrt();
    let tolerance = tol * (1.0 + norm);
    let radial_ok = res.norm <= tolerance;
    let dim = problem.dim();
    let support = opts.support.min(u.grid().r_max());
    let cutoff = (0.5 * support).tanh();
    let nl = problem.nonlinearity();
    let weight = problem.weight();
    let mut mc = Vec::with_capacity(opts.fields);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 0..opts.fields {
        let field = TestField::random(dim, support, &mut rng);
        let est = montecarlo_integral_dmu(
            |p: &BallPoint| {
                let rho = p.geodesic_radius();
                let (phi, dphi) = field.value_and_radial_derivative(p.coords(), rho);
                let grad = 0.5 * (1.0 - p.norm_sq()) * u.derivative(rho) * dphi;
                grad - lambda * weight.eval(rho) * nl.f(u.eval(rho)) * phi
            },
            dim,
            opts.samples,
            cutoff,
            opts.seed.wrapping_add(1 + k as u64),
        )?;
        mc.push(est);
    }
    let mc_ok = mc.iter().all(|e| e.agrees_with(0.0, 3.0, 0.0));
    Ok(WeakCheck { passed: radial_ok && mc_ok, radial_ok, residual_norm: res.norm, tolerance, mc_ok, mc })
}

/// Plateau start on the weight's ess-inf witness annulus.
pub fn plateau_init(problem: &Problem) -> Init {
    let w = problem.weight().witness();
    Init::ScaledPlateau { rho: w.rho, r: w.r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Nonlinearity, NonlinearityKind, RadialWeight, WeightProfile};
    use crate::radial::RadialGrid;
    use crate::testfn::plateau_kinks;
    use std::sync::Arc;

    fn problem(kind: NonlinearityKind, cells: usize) -> Problem {
        let grid = Arc::new(RadialGrid::aligned(4, cells, 10.0, 6, &plateau_kinks(2.0, 1.0)).unwrap());
        let nl = Nonlinearity::new(kind, 3.0, None).unwrap();
        let w = RadialWeight::new(WeightProfile::ConformalPower { exponent: 4.0 }, 4, 3.0, None).unwrap();
        Problem::new(grid, nl, w).unwrap()
    }

    #[test]
    fn zero_nonlinearity_gives_zero() {
        let p = problem(NonlinearityKind::Zero, 256);
        let rep = minimize_sublevel(&SolveConfig::new(1.0, 1.0), &p).unwrap();
        assert!(rep.converged);
        assert!(rep.minimizer.is_zero());
        assert_eq!(rep.energy, 0.0);
        assert!(!rep.nontrivial);
    }

    #[test]
    fn constant_forcing_is_nontrivial() {
        let p = problem(NonlinearityKind::Constant(1.0), 256);
        let mut cfg = SolveConfig::new(0.1, 1.0);
        cfg.init = Init::Zero;
        let rep = minimize_sublevel(&cfg, &p).unwrap();
        assert!(rep.converged && rep.nontrivial && rep.energy < 0.0 && rep.monotone);
    }

    #[test]
    fn rejects_bad_config() {
        let p = problem(NonlinearityKind::Zero, 64);
        assert!(minimize_sublevel(&SolveConfig::new(0.0, 1.0), &p).is_err());
        let mut cfg = SolveConfig::new(1.0, 1.0);
        cfg.max_iters = 0;
        assert!(minimize_sublevel(&cfg, &p).is_err());
    }

    #[test]
    fn power_solution_scales_like_lambda_squared() {
        let p = problem(NonlinearityKind::Power { r: 1.5 }, 256);
        let a = minimize_sublevel(&SolveConfig::new(0.2, 10.0), &p).unwrap();
        let b = minimize_sublevel(&SolveConfig::new(0.1, 10.0), &p).unwrap();
        assert!(a.converged && b.converged && a.nontrivial && a.energy < 0.0);
        // u_lambda = lambda^{1/(2-r)} u_1 for a pure power
        assert!((a.norm / b.norm - 4.0).abs() < 1e-6, "{}", a.norm / b.norm);
        assert!(a.criticality < 1e-6);
        assert!((a.norm * a.norm - a.lambda * a.psi_pairing).abs() < 1e-6 * a.norm * a.norm);
    }

    #[test]
    fn sweep_validation_and_trivial() {
        let p = problem(NonlinearityKind::Zero, 64);
        let cfg = SolveConfig::new(1.0, 1.0);
        assert!(lambda_sweep(&[0.5, 0.5], &p, &cfg, None).is_err());
        assert!(lambda_sweep(&[0.5, 1.0], &p, &cfg, None).is_err());
        let out = lambda_sweep(&[0.5, 0.25], &p, &cfg, None).unwrap();
        assert!(out.series.iter().all(|s| s.norm == 0.0));
        let single = lambda_sweep(&[0.5], &p, &cfg, None).unwrap();
        let direct = minimize_sublevel(&SolveConfig::new(0.5, 1.0), &p).unwrap();
        assert_eq!(single.reports[0].norm, direct.norm);
    }

    #[test]
    fn weak_check_trivial_cases() {
        let opts = McCheckOptions { samples: 20_000, ..Default::default() };
        let p = problem(NonlinearityKind::Power { r: 1.5 }, 128);
        let zero = RadialFunction::zero(p.grid().clone());
        assert!(verify_weak_solution(&zero, 1.0, &p, 1e-6, &opts).unwrap().passed);
        let pc = problem(NonlinearityKind::Constant(1.0), 128);
        assert!(!verify_weak_solution(&zero, 1.0, &pc, 1e-6, &opts).unwrap().passed);
    }
}
